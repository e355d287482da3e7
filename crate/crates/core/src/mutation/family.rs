//! Variant families: every combination of operator mutations of one
//! template clause, scored by a weighted mutation count.

use std::collections::{BTreeMap, BTreeSet, HashSet};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::operators::{
    apply_choices, enumerate_sites, replacements, MutationChoice, MutationKind, MutationSite,
};
use crate::spec::{ClauseId, SpecClause, SpecExpr};

pub const DEFAULT_VARIANT_CAP: usize = 4096;

/// Per-kind weight; a variant's score is the weighted count of mutations.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct WeightTable {
    pub comparative: i64,
    pub logical: i64,
    pub arithmetic: i64,
    pub predicative: i64,
}

impl Default for WeightTable {
    fn default() -> Self {
        WeightTable {
            comparative: -1,
            logical: -2,
            arithmetic: -4,
            predicative: -4,
        }
    }
}

impl WeightTable {
    pub fn weight(&self, kind: MutationKind) -> i64 {
        match kind {
            MutationKind::Comparative => self.comparative,
            MutationKind::Logical => self.logical,
            MutationKind::Arithmetic => self.arithmetic,
            MutationKind::Predicative => self.predicative,
        }
    }

    pub fn scaled(&self, factor: i64) -> Self {
        WeightTable {
            comparative: self.comparative * factor,
            logical: self.logical * factor,
            arithmetic: self.arithmetic * factor,
            predicative: self.predicative * factor,
        }
    }
}

/// How many mutations of each kind turned the template into a variant.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, PartialOrd, Ord)]
pub struct KindCounts([u32; 4]);

impl KindCounts {
    pub fn get(&self, kind: MutationKind) -> u32 {
        self.0[kind.index()]
    }

    pub fn add(&mut self, kind: MutationKind) {
        self.0[kind.index()] += 1;
    }

    pub fn total(&self) -> u32 {
        self.0.iter().sum()
    }

    pub fn score(&self, weights: &WeightTable) -> i64 {
        MutationKind::ALL
            .into_iter()
            .map(|k| i64::from(self.get(k)) * weights.weight(k))
            .sum()
    }

    pub fn as_map(&self) -> BTreeMap<MutationKind, u32> {
        MutationKind::ALL.into_iter().map(|k| (k, self.get(k))).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Variant {
    pub expr: SpecExpr,
    pub template_id: ClauseId,
    pub counts: KindCounts,
    pub choices: Vec<MutationChoice>,
    /// Canonical rendering of `expr`, the variant's identity within a family.
    pub text: String,
}

impl Variant {
    pub fn is_template(&self) -> bool {
        self.choices.is_empty()
    }
}

pub fn score_variant(variant: &Variant, weights: &WeightTable) -> i64 {
    variant.counts.score(weights)
}

/// All variants of one template still eligible for selection.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Family {
    pub template_id: ClauseId,
    pub template: SpecExpr,
    /// Live members, ordered by score (descending) then text (ascending)
    /// under the weights used at enumeration.
    pub variants: Vec<Variant>,
    /// Raw combination count before deduplication and truncation.
    pub raw_combinations: u128,
    pub truncated: bool,
    /// Variants dropped because another choice set rendered identically.
    pub merged_duplicates: usize,
}

impl Family {
    pub fn len(&self) -> usize {
        self.variants.len()
    }

    pub fn is_empty(&self) -> bool {
        self.variants.is_empty()
    }

    pub fn contains(&self, text: &str) -> bool {
        self.variants.iter().any(|v| v.text == text)
    }

    pub fn get(&self, text: &str) -> Option<&Variant> {
        self.variants.iter().find(|v| v.text == text)
    }

    /// Removes a member permanently; returns it if it was live.
    pub fn remove(&mut self, text: &str) -> Option<Variant> {
        let pos = self.variants.iter().position(|v| v.text == text)?;
        Some(self.variants.remove(pos))
    }

    /// The zero-mutation variant, even if already removed from the family.
    pub fn template_variant(&self) -> Variant {
        Variant {
            text: self.template.render(),
            expr: self.template.clone(),
            template_id: self.template_id.clone(),
            counts: KindCounts::default(),
            choices: Vec::new(),
        }
    }
}

/// Highest-scoring live variant; ties go to the smallest rendered text.
pub fn select_by_heuristic<'f>(family: &'f Family, weights: &WeightTable) -> Option<&'f Variant> {
    family.variants.iter().max_by(|a, b| {
        score_variant(a, weights)
            .cmp(&score_variant(b, weights))
            .then_with(|| b.text.cmp(&a.text))
    })
}

/// Uniform pick over live variants with a fresh ChaCha8 stream seeded by `seed`.
pub fn select_random(family: &Family, seed: u64) -> Option<&Variant> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    select_random_with(family, &mut rng)
}

pub fn select_random_with<'f, R: Rng>(family: &'f Family, rng: &mut R) -> Option<&'f Variant> {
    if family.variants.is_empty() {
        return None;
    }
    let i = rng.random_range(0..family.variants.len());
    family.variants.get(i)
}

/// Builds the family of `template`: every subset of its mutable operators
/// with every per-operator replacement, for the enabled `kinds`.
///
/// Variants are produced in descending score order with ties broken by
/// ascending text. Textual duplicates keep the first (best-scoring) choice
/// set. When the raw combination count exceeds `cap`, enumeration stops once
/// `cap` variants exist and the family is marked truncated.
pub fn enumerate_variants(
    template: &SpecClause,
    kinds: &BTreeSet<MutationKind>,
    cap: usize,
    weights: &WeightTable,
) -> Family {
    let cap = cap.max(1);
    let sites: Vec<MutationSite> = enumerate_sites(&template.expr)
        .into_iter()
        .filter(|s| kinds.contains(&s.kind))
        .collect();
    let raw_combinations = sites.iter().fold(1u128, |acc, s| {
        acc.saturating_mul(1 + replacements(s.original).len() as u128)
    });
    let truncated = raw_combinations > cap as u128;

    let mut by_kind: [Vec<usize>; 4] = Default::default();
    for (i, s) in sites.iter().enumerate() {
        by_kind[s.kind.index()].push(i);
    }

    // Every per-kind count vector, grouped by the score it yields.
    let mut levels: BTreeMap<i64, Vec<[usize; 4]>> = BTreeMap::new();
    let mut counts = [0usize; 4];
    loop {
        let score: i64 = MutationKind::ALL
            .into_iter()
            .map(|k| counts[k.index()] as i64 * weights.weight(k))
            .sum();
        levels.entry(score).or_default().push(counts);
        let mut k = 0;
        loop {
            if k == 4 {
                break;
            }
            if counts[k] < by_kind[k].len() {
                counts[k] += 1;
                break;
            }
            counts[k] = 0;
            k += 1;
        }
        if k == 4 {
            break;
        }
    }

    let mut seen: HashSet<String> = HashSet::new();
    let mut variants = Vec::new();
    let mut merged_duplicates = 0;
    'levels: for (_, vectors) in levels.into_iter().rev() {
        let mut level: Vec<Variant> = Vec::new();
        for counts in vectors {
            let mut picked: Vec<usize> = Vec::new();
            collect_level(&sites, &by_kind, &counts, 0, 0, &mut picked, &mut |site_idxs| {
                for_each_replacement(&sites, site_idxs, &mut |choices| {
                    let expr = apply_choices(&template.expr, choices)
                        .expect("choices come from this template's own sites");
                    let mut kc = KindCounts::default();
                    for c in choices {
                        kc.add(c.kind());
                    }
                    level.push(Variant {
                        text: expr.render(),
                        expr,
                        template_id: template.id.clone(),
                        counts: kc,
                        choices: choices.to_vec(),
                    });
                });
            });
        }
        level.sort_by(|a, b| a.text.cmp(&b.text).then_with(|| a.choices.cmp(&b.choices)));
        for v in level {
            if !seen.insert(v.text.clone()) {
                merged_duplicates += 1;
                continue;
            }
            variants.push(v);
            if variants.len() >= cap {
                break 'levels;
            }
        }
    }

    Family {
        template_id: template.id.clone(),
        template: template.expr.clone(),
        variants,
        raw_combinations,
        truncated,
        merged_duplicates,
    }
}

/// Chooses `counts[k]` sites of each kind `k`, in index order.
fn collect_level(
    sites: &[MutationSite],
    by_kind: &[Vec<usize>; 4],
    counts: &[usize; 4],
    kind: usize,
    start: usize,
    picked: &mut Vec<usize>,
    emit: &mut dyn FnMut(&[usize]),
) {
    if kind == 4 {
        emit(picked);
        return;
    }
    let already = picked
        .iter()
        .filter(|&&i| sites[i].kind.index() == kind)
        .count();
    if already == counts[kind] {
        collect_level(sites, by_kind, counts, kind + 1, 0, picked, emit);
        return;
    }
    let pool = &by_kind[kind];
    let need = counts[kind] - already;
    for j in start..pool.len() {
        if pool.len() - j < need {
            break;
        }
        picked.push(pool[j]);
        collect_level(sites, by_kind, counts, kind, j + 1, picked, emit);
        picked.pop();
    }
}

fn for_each_replacement(
    sites: &[MutationSite],
    site_idxs: &[usize],
    emit: &mut dyn FnMut(&[MutationChoice]),
) {
    fn go(
        sites: &[MutationSite],
        site_idxs: &[usize],
        acc: &mut Vec<MutationChoice>,
        emit: &mut dyn FnMut(&[MutationChoice]),
    ) {
        let Some((&first, rest)) = site_idxs.split_first() else {
            let mut ordered = acc.clone();
            ordered.sort_by(|a, b| a.site.path.cmp(&b.site.path));
            emit(&ordered);
            return;
        };
        let site = &sites[first];
        for &r in replacements(site.original) {
            acc.push(MutationChoice {
                site: site.clone(),
                replacement: r,
            });
            go(sites, rest, acc, emit);
            acc.pop();
        }
    }
    go(sites, site_idxs, &mut Vec::new(), emit);
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spec::{parse_clause, ProgramAnchor};

    fn template(text: &str) -> SpecClause {
        SpecClause::new(ProgramAnchor::Method("m".into()), 0, parse_clause(text).unwrap())
    }

    fn all_kinds() -> BTreeSet<MutationKind> {
        MutationKind::ALL.into_iter().collect()
    }

    fn family(text: &str) -> Family {
        enumerate_variants(&template(text), &all_kinds(), DEFAULT_VARIANT_CAP, &WeightTable::default())
    }

    fn texts(f: &Family) -> Vec<&str> {
        f.variants.iter().map(|v| v.text.as_str()).collect()
    }

    #[test]
    fn le_family() {
        let f = family("requires a <= b;");
        assert_eq!(texts(&f), ["a <= b", "a - 1 <= b", "a < b"]);
        let w = WeightTable::default();
        let scores: Vec<_> = f.variants.iter().map(|v| score_variant(v, &w)).collect();
        assert_eq!(scores, [0, -1, -1]);
        assert!(f.variants[0].is_template());
        assert!(!f.truncated);
    }

    #[test]
    fn x_lt_n_plus_one() {
        let f = family("requires x < n + 1;");
        let t = texts(&f);
        for want in ["x < n + 1", "x <= n + 1", "x < n - 1", "x <= n - 1"] {
            assert!(t.contains(&want), "{want} missing from {t:?}");
        }
        assert_eq!(f.len(), 4);
        // comparative (-1) before arithmetic (-4) before both (-5)
        assert_eq!(t, ["x < n + 1", "x <= n + 1", "x < n - 1", "x <= n - 1"]);
    }

    #[test]
    fn no_sites() {
        let f = family("ensures true;");
        assert_eq!(texts(&f), ["true"]);
    }

    #[test]
    fn scores() {
        let w = WeightTable::default();
        let f = family("requires p || q ==> a + b > 0;");
        let find = |s: &str| score_variant(f.get(s).unwrap(), &w);
        assert_eq!(find("p || q ==> a + b > 0"), 0);
        assert_eq!(find("p || q ==> a + b >= 0"), -1);
        assert_eq!(find("p && q ==> a - b > 0"), -6);
    }

    #[test]
    fn kinds_filter() {
        let kinds: BTreeSet<_> = [MutationKind::Arithmetic].into_iter().collect();
        let f = enumerate_variants(
            &template("requires x < n + 1;"),
            &kinds,
            DEFAULT_VARIANT_CAP,
            &WeightTable::default(),
        );
        assert_eq!(texts(&f), ["x < n + 1", "x < n - 1"]);
    }

    #[test]
    fn truncation_keeps_best() {
        let t = template("requires a < b && c < d && e < f;");
        let f = enumerate_variants(&t, &all_kinds(), 4, &WeightTable::default());
        assert!(f.truncated);
        assert_eq!(f.raw_combinations, 32);
        assert_eq!(
            texts(&f),
            ["a < b && c < d && e < f", "a < b && c < d && e <= f", "a < b && c <= d && e < f", "a <= b && c < d && e < f"]
        );
    }

    #[test]
    fn heuristic_tie_break_and_exhaustion() {
        let w = WeightTable::default();
        let mut f = family("requires a <= b;");
        f.remove("a <= b").unwrap();
        assert_eq!(select_by_heuristic(&f, &w).unwrap().text, "a - 1 <= b");
        f.remove("a - 1 <= b");
        assert_eq!(select_by_heuristic(&f, &w).unwrap().text, "a < b");
        f.remove("a < b");
        assert!(select_by_heuristic(&f, &w).is_none());
        assert!(select_random(&f, 7).is_none());
    }

    #[test]
    fn random_is_seeded() {
        let f = family("requires a < b && c < d;");
        let a = select_random(&f, 42).unwrap().text.clone();
        let b = select_random(&f, 42).unwrap().text.clone();
        assert_eq!(a, b);
        let mut single = family("ensures true;");
        assert_eq!(select_random(&single, 9).unwrap().text, "true");
        single.remove("true");
        assert!(single.is_empty());
    }
}
