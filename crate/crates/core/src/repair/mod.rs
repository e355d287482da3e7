//! Verify-and-replace repair over mutation families.
//!
//! Every template clause starts selected as itself. Each iteration verifies
//! the current selection once; every clause the verifier refutes is removed
//! from its family for good and replaced by the strategy's next pick from
//! the same family, or dropped when the family is empty. The loop ends on
//! the first passing verdict, so it makes at most `1 + sum |family|` calls.

use std::collections::{BTreeMap, BTreeSet};
use std::time::{Duration, Instant};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::mutation::{
    enumerate_variants, select_by_heuristic, select_random_with, Family, MutationKind, Variant,
    WeightTable, DEFAULT_VARIANT_CAP,
};
use crate::spec::{AnnotatedProgram, ClauseId, SpecClause};
use crate::verifier::{FailureCategory, Outcome, Verifier, VerifierError};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase", tag = "kind")]
pub enum Strategy {
    #[default]
    Heuristic,
    Random {
        seed: u64,
    },
}

#[derive(Debug, Clone)]
pub struct RepairConfig {
    pub kinds: BTreeSet<MutationKind>,
    pub variant_cap: usize,
    pub weights: WeightTable,
    pub strategy: Strategy,
    /// Wall-clock cap for the whole loop; checked before each call.
    pub budget: Option<Duration>,
}

impl Default for RepairConfig {
    fn default() -> Self {
        RepairConfig {
            kinds: MutationKind::ALL.into_iter().collect(),
            variant_cap: DEFAULT_VARIANT_CAP,
            weights: WeightTable::default(),
            strategy: Strategy::Heuristic,
            budget: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Selected {
    Live(Variant),
    Dropped,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Refutation {
    pub iteration: usize,
    pub clause_id: ClauseId,
    pub text: String,
}

#[derive(Debug, Clone)]
pub struct SelectionState {
    /// Templates in program order; their ids key the maps below.
    pub templates: Vec<SpecClause>,
    pub families: BTreeMap<ClauseId, Family>,
    pub selected: BTreeMap<ClauseId, Selected>,
    pub refuted_history: Vec<Refutation>,
    pub verifier_calls: usize,
    /// Family sizes right after enumeration.
    pub initial_sizes: BTreeMap<ClauseId, usize>,
    pub replacements: BTreeMap<ClauseId, usize>,
    /// Templates replaced more than half their initial family size.
    pub thrash: Vec<ClauseId>,
}

impl SelectionState {
    /// Families built, every template selected as itself.
    pub fn new(templates: &[SpecClause], families: BTreeMap<ClauseId, Family>) -> Self {
        let selected = templates
            .iter()
            .map(|t| {
                let fam = &families[&t.id];
                let v = fam
                    .get(&t.expr.render())
                    .cloned()
                    .unwrap_or_else(|| fam.template_variant());
                (t.id.clone(), Selected::Live(v))
            })
            .collect();
        SelectionState {
            templates: templates.to_vec(),
            initial_sizes: families.iter().map(|(k, f)| (k.clone(), f.len())).collect(),
            families,
            selected,
            refuted_history: Vec::new(),
            verifier_calls: 0,
            replacements: BTreeMap::new(),
            thrash: Vec::new(),
        }
    }

    /// The selected clauses, in template order, on top of `source`.
    pub fn program(&self, source: &str) -> AnnotatedProgram {
        let clauses = self
            .templates
            .iter()
            .filter_map(|t| match self.selected.get(&t.id) {
                Some(Selected::Live(v)) => Some(t.with_expr(v.expr.clone())),
                _ => None,
            })
            .collect();
        AnnotatedProgram::new(source, clauses)
    }

    pub fn dropped(&self) -> Vec<ClauseId> {
        self.templates
            .iter()
            .filter(|t| matches!(self.selected.get(&t.id), Some(Selected::Dropped)))
            .map(|t| t.id.clone())
            .collect()
    }

    pub fn total_variants(&self) -> usize {
        self.initial_sizes.values().sum()
    }
}

#[derive(Debug, Error)]
pub enum RepairError {
    #[error("verifier unavailable: {0}")]
    VerifierUnavailable(#[from] VerifierError),
    #[error("repair budget of {budget:?} exceeded after {calls} verifier call(s)")]
    TimeoutBudgetExceeded { budget: Duration, calls: usize },
    #[error("unknown or unselected clause `{0}`")]
    UnknownClause(ClauseId),
    #[error("verifier returned {outcome:?} instead of a verdict")]
    Inconclusive {
        outcome: Outcome,
        detail: Option<String>,
    },
    #[error("verifier failure not attributable to a clause ({category:?}): {message}")]
    Unattributed {
        category: FailureCategory,
        message: String,
    },
}

/// Picks replacements; holds the PRNG stream for the random strategy.
pub struct Selector {
    weights: WeightTable,
    rng: Option<ChaCha8Rng>,
}

impl Selector {
    pub fn new(strategy: Strategy, weights: WeightTable) -> Self {
        let rng = match strategy {
            Strategy::Heuristic => None,
            Strategy::Random { seed } => Some(ChaCha8Rng::seed_from_u64(seed)),
        };
        Selector { weights, rng }
    }

    pub fn pick<'f>(&mut self, family: &'f Family) -> Option<&'f Variant> {
        match &mut self.rng {
            None => select_by_heuristic(family, &self.weights),
            Some(rng) => select_random_with(family, rng),
        }
    }
}

/// One family per template, keyed by template id.
pub fn spec_mutation(
    templates: &[SpecClause],
    kinds: &BTreeSet<MutationKind>,
    cap: usize,
    weights: &WeightTable,
) -> BTreeMap<ClauseId, Family> {
    templates
        .iter()
        .map(|t| (t.id.clone(), enumerate_variants(t, kinds, cap, weights)))
        .collect()
}

pub fn get_family_of<'s>(state: &'s SelectionState, id: &ClauseId) -> Result<&'s Family, RepairError> {
    state
        .families
        .get(id)
        .ok_or_else(|| RepairError::UnknownClause(id.clone()))
}

/// Removes each refuted selection from its family and selects a replacement.
pub fn re_select(
    state: &mut SelectionState,
    refuted: &[ClauseId],
    selector: &mut Selector,
) -> Result<(), RepairError> {
    if let Some(bad) = refuted
        .iter()
        .find(|id| !matches!(state.selected.get(*id), Some(Selected::Live(_))))
    {
        return Err(RepairError::UnknownClause((*bad).clone()));
    }
    for id in refuted {
        let Some(Selected::Live(old)) = state.selected.remove(id) else {
            continue;
        };
        let family = state
            .families
            .get_mut(id)
            .ok_or_else(|| RepairError::UnknownClause(id.clone()))?;
        family.remove(&old.text);
        state.refuted_history.push(Refutation {
            iteration: state.verifier_calls,
            clause_id: id.clone(),
            text: old.text,
        });
        let next = match selector.pick(family) {
            Some(v) => Selected::Live(v.clone()),
            None => {
                log::info!("family of {id} exhausted; clause dropped");
                Selected::Dropped
            }
        };
        state.selected.insert(id.clone(), next);

        let n = state.replacements.entry(id.clone()).or_insert(0);
        *n += 1;
        let initial = state.initial_sizes.get(id).copied().unwrap_or(0);
        if *n * 2 > initial && initial > 1 && !state.thrash.contains(id) {
            log::warn!("{id} replaced {n} times out of a family of {initial}");
            state.thrash.push(id.clone());
        }
    }
    Ok(())
}

/// Verify, refute, replace, until the verifier accepts the selection.
pub fn spec_selection<V: Verifier + ?Sized>(
    state: &mut SelectionState,
    source: &str,
    verifier: &mut V,
    selector: &mut Selector,
    budget: Option<Duration>,
) -> Result<AnnotatedProgram, RepairError> {
    let started = Instant::now();
    loop {
        if let Some(b) = budget {
            if started.elapsed() > b {
                return Err(RepairError::TimeoutBudgetExceeded {
                    budget: b,
                    calls: state.verifier_calls,
                });
            }
        }
        let program = state.program(source);
        let verdict = verifier.verify(&program)?;
        state.verifier_calls += 1;
        match verdict.outcome {
            Outcome::Pass => return Ok(program),
            Outcome::Timeout | Outcome::Crash => {
                return Err(RepairError::Inconclusive {
                    outcome: verdict.outcome,
                    detail: verdict.detail,
                })
            }
            Outcome::Fail => {}
        }
        let refuted = verdict.refuted_ids();
        if refuted.is_empty() {
            let first = verdict.failures.first();
            return Err(RepairError::Unattributed {
                category: first.map_or(FailureCategory::Unknown, |f| f.category),
                message: first.map(|f| f.raw_message.clone()).unwrap_or_default(),
            });
        }
        re_select(state, &refuted, selector)?;
    }
}

/// Result of a repair run; the state is kept even when the run fails.
#[derive(Debug)]
pub struct RepairRun {
    pub state: SelectionState,
    pub result: Result<AnnotatedProgram, RepairError>,
}

/// Mutates every clause of `templates` and repairs the set against `verifier`.
pub fn mutation_based_gen<V: Verifier + ?Sized>(
    templates: &AnnotatedProgram,
    cfg: &RepairConfig,
    verifier: &mut V,
) -> RepairRun {
    let families = spec_mutation(&templates.clauses, &cfg.kinds, cfg.variant_cap, &cfg.weights);
    let mut state = SelectionState::new(&templates.clauses, families);
    let mut selector = Selector::new(cfg.strategy, cfg.weights);
    let result = spec_selection(&mut state, &templates.source, verifier, &mut selector, cfg.budget);
    RepairRun { state, result }
}
