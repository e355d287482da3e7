//! Shared generators and independent oracles for the integration tests.
//!
//! Nothing here calls into the evaluator or the mutation engine of the
//! library; the oracles work on the expression tree directly.

#![allow(dead_code)]

use std::collections::BTreeMap;

use jmlrepair_core::mutation::operators::enumerate_sites;
use jmlrepair_core::spec::{BinOp, Clause, QuantKind, UnOp};
use jmlrepair_core::{ClauseKind, Phase, ProgramAnchor, SpecExpr, TraceRecord, Value};
use num_traits::ToPrimitive;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

// ---------------------------------------------------------------------------
// Expression generation

/// Well-typed random expressions over the record variables `x`, `y`, `n`
/// (ints) and `a` (int array), plus `\result` and `\old(..)`.
pub struct ExprGen {
    pub rng: ChaCha8Rng,
    scope: Vec<String>,
    fresh: usize,
}

impl ExprGen {
    pub fn new(seed: u64) -> Self {
        ExprGen {
            rng: ChaCha8Rng::seed_from_u64(seed),
            scope: Vec::new(),
            fresh: 0,
        }
    }

    fn lit(&mut self) -> SpecExpr {
        SpecExpr::int(self.rng.random_range(-20i64..=20))
    }

    pub fn int_leaf(&mut self) -> SpecExpr {
        let roll = self.rng.random_range(0..10);
        match roll {
            0..=2 => self.lit(),
            3 => SpecExpr::field(SpecExpr::var("a"), "length"),
            4 => SpecExpr::ResultRef,
            5 => SpecExpr::old(SpecExpr::var(["x", "n"][self.rng.random_range(0..2)])),
            6 if !self.scope.is_empty() => {
                let i = self.rng.random_range(0..self.scope.len());
                SpecExpr::var(self.scope[i].clone())
            }
            _ => SpecExpr::var(["x", "y", "n"][self.rng.random_range(0..3)]),
        }
    }

    pub fn int_expr(&mut self, depth: u32) -> SpecExpr {
        if depth == 0 || self.rng.random_bool(0.35) {
            return self.int_leaf();
        }
        match self.rng.random_range(0..7) {
            0 | 1 => SpecExpr::binary(BinOp::Add, self.int_expr(depth - 1), self.int_expr(depth - 1)),
            2 => SpecExpr::binary(BinOp::Sub, self.int_expr(depth - 1), self.int_expr(depth - 1)),
            3 => {
                let op = [BinOp::Mul, BinOp::Div, BinOp::Rem][self.rng.random_range(0..3)];
                SpecExpr::binary(op, self.int_expr(depth - 1), self.int_expr(depth - 1))
            }
            4 => SpecExpr::unary(UnOp::Neg, self.int_expr(depth - 1)),
            _ => {
                let base = if self.rng.random_bool(0.2) {
                    SpecExpr::old(SpecExpr::var("a"))
                } else {
                    SpecExpr::var("a")
                };
                SpecExpr::index(base, self.int_expr(depth - 1))
            }
        }
    }

    fn comparison(&mut self, depth: u32) -> SpecExpr {
        let ops = [BinOp::Eq, BinOp::Ne, BinOp::Lt, BinOp::Le, BinOp::Gt, BinOp::Ge];
        let op = ops[self.rng.random_range(0..ops.len())];
        let d = depth.saturating_sub(1);
        SpecExpr::binary(op, self.int_expr(d), self.int_expr(d))
    }

    pub fn bool_expr(&mut self, depth: u32) -> SpecExpr {
        if depth == 0 {
            return if self.rng.random_bool(0.1) {
                SpecExpr::BoolLit(self.rng.random_bool(0.5))
            } else {
                self.comparison(0)
            };
        }
        match self.rng.random_range(0..10) {
            0..=2 => self.comparison(depth),
            3 => SpecExpr::unary(UnOp::Not, self.bool_expr(depth - 1)),
            4..=7 => {
                let ops = [BinOp::And, BinOp::Or, BinOp::Implies, BinOp::RevImplies, BinOp::Equiv];
                let op = ops[self.rng.random_range(0..ops.len())];
                SpecExpr::binary(op, self.bool_expr(depth - 1), self.bool_expr(depth - 1))
            }
            _ => self.quantifier(depth),
        }
    }

    /// An integer bound that cannot fail to evaluate: a small literal, a
    /// record scalar, `a.length`, or an enclosing quantified variable.
    fn bound(&mut self) -> SpecExpr {
        match self.rng.random_range(0..6) {
            0 | 1 => SpecExpr::int(self.rng.random_range(-10i64..=10)),
            2 => SpecExpr::var(["x", "y", "n"][self.rng.random_range(0..3)]),
            3 => SpecExpr::field(SpecExpr::var("a"), "length"),
            _ if !self.scope.is_empty() => {
                let v = SpecExpr::var(self.scope[self.rng.random_range(0..self.scope.len())].clone());
                if self.rng.random_bool(0.5) {
                    SpecExpr::binary(BinOp::Add, v, SpecExpr::int(1))
                } else {
                    v
                }
            }
            _ => SpecExpr::var("n"),
        }
    }

    pub fn quantifier(&mut self, depth: u32) -> SpecExpr {
        let var = format!("q{}", self.fresh);
        self.fresh += 1;
        let v = || SpecExpr::var(var.clone());
        let lo = self.bound();
        let hi = self.bound();
        let lo_conj = match self.rng.random_range(0..4) {
            0 => SpecExpr::binary(BinOp::Le, lo, v()),
            1 => SpecExpr::binary(BinOp::Lt, lo, v()),
            2 => SpecExpr::binary(BinOp::Ge, v(), lo),
            _ => SpecExpr::binary(BinOp::Gt, v(), lo),
        };
        let hi_conj = match self.rng.random_range(0..4) {
            0 => SpecExpr::binary(BinOp::Lt, v(), hi),
            1 => SpecExpr::binary(BinOp::Le, v(), hi),
            2 => SpecExpr::binary(BinOp::Gt, hi, v()),
            _ => SpecExpr::binary(BinOp::Ge, hi, v()),
        };
        let mut range = SpecExpr::binary(BinOp::And, lo_conj, hi_conj);
        if self.rng.random_bool(0.25) {
            let filter = SpecExpr::binary(
                BinOp::Eq,
                SpecExpr::binary(BinOp::Rem, v(), SpecExpr::int(2)),
                SpecExpr::int(0),
            );
            range = SpecExpr::binary(BinOp::And, range, filter);
        }
        self.scope.push(var.clone());
        let body = self.bool_expr(depth.saturating_sub(1));
        self.scope.pop();
        let kind = if self.rng.random_bool(0.5) {
            QuantKind::Forall
        } else {
            QuantKind::Exists
        };
        SpecExpr::quantifier(kind, var, range, body)
    }

    pub fn clause(&mut self, depth: u32) -> Clause {
        let kinds = [
            ClauseKind::Requires,
            ClauseKind::Ensures,
            ClauseKind::Maintaining,
            ClauseKind::Decreases,
        ];
        let kind = kinds[self.rng.random_range(0..kinds.len())];
        let expr = if kind == ClauseKind::Decreases {
            self.int_expr(depth)
        } else {
            self.bool_expr(depth)
        };
        Clause::new(kind, expr)
    }

    /// A boolean clause (never `decreases`).
    pub fn bool_clause(&mut self, depth: u32) -> Clause {
        let kinds = [ClauseKind::Requires, ClauseKind::Ensures, ClauseKind::Maintaining];
        let kind = kinds[self.rng.random_range(0..kinds.len())];
        Clause::new(kind, self.bool_expr(depth))
    }
}

/// A boolean clause with between `min_sites` and `max_sites` mutation sites.
pub fn clause_with_sites(seed: u64, min_sites: usize, max_sites: usize) -> Clause {
    let mut g = ExprGen::new(seed);
    loop {
        let c = g.bool_clause(2);
        let n = enumerate_sites(&c.expr).len();
        if (min_sites..=max_sites).contains(&n) {
            return c;
        }
    }
}

// ---------------------------------------------------------------------------
// Site counting by token scan

const SYMBOLS: [&str; 24] = [
    "<==>", "==>", "<==", "&&", "||", "==", "!=", "<=", ">=", "<", ">", "+", "-", "*", "/", "%", "!", "(",
    ")", "[", "]", ";", ".", ",",
];

/// Counts mutable operators in rendered text. A `-` is binary (a site)
/// exactly when it follows an operand.
pub fn token_site_count(text: &str) -> usize {
    let mut count = 0;
    let mut prev_operand = false;
    let mut rest = text;
    while let Some(c) = rest.chars().next() {
        if c.is_whitespace() {
            rest = &rest[c.len_utf8()..];
            continue;
        }
        if c.is_ascii_alphanumeric() || c == '_' || c == '\\' {
            let end = rest[1..]
                .find(|ch: char| !(ch.is_ascii_alphanumeric() || ch == '_'))
                .map_or(rest.len(), |i| i + 1);
            let word = &rest[..end];
            if word == "\\forall" || word == "\\exists" {
                count += 1;
            }
            prev_operand = !matches!(word, "\\forall" | "\\exists" | "\\old" | "int");
            rest = &rest[end..];
            continue;
        }
        let sym = SYMBOLS
            .iter()
            .find(|s| rest.starts_with(**s))
            .unwrap_or_else(|| panic!("unexpected character in {text:?}"));
        match *sym {
            "-" => {
                if prev_operand {
                    count += 1;
                }
            }
            "<==>" | "==>" | "<==" | "&&" | "||" | "==" | "!=" | "<=" | ">=" | "<" | ">" | "+" => count += 1,
            _ => {}
        }
        prev_operand = matches!(*sym, ")" | "]");
        rest = &rest[sym.len()..];
    }
    count
}

// ---------------------------------------------------------------------------
// Brute-force family

/// Kind index: predicative, logical, comparative, arithmetic.
fn op_kind(op: BinOp) -> Option<usize> {
    match op {
        BinOp::And | BinOp::Or | BinOp::Equiv | BinOp::Implies | BinOp::RevImplies => Some(1),
        BinOp::Lt | BinOp::Le | BinOp::Gt | BinOp::Ge | BinOp::Eq | BinOp::Ne => Some(2),
        BinOp::Add | BinOp::Sub => Some(3),
        _ => None,
    }
}

enum Alt {
    Op(BinOp),
    Shift(BinOp),
}

fn alternatives(op: BinOp) -> Vec<Alt> {
    use BinOp::*;
    match op {
        And => vec![Alt::Op(Or)],
        Or => vec![Alt::Op(And)],
        Equiv => vec![Alt::Op(RevImplies), Alt::Op(Implies)],
        Implies => vec![Alt::Op(RevImplies)],
        RevImplies => vec![Alt::Op(Implies)],
        Le => vec![Alt::Op(Lt), Alt::Shift(Sub)],
        Ge => vec![Alt::Op(Gt), Alt::Shift(Add)],
        Lt => vec![Alt::Op(Le)],
        Gt => vec![Alt::Op(Ge)],
        Eq => vec![Alt::Op(Ne)],
        Ne => vec![Alt::Op(Eq)],
        Add => vec![Alt::Op(Sub)],
        Sub => vec![Alt::Op(Add)],
        _ => vec![],
    }
}

type Counts = [u32; 4];

fn plus(a: Counts, b: Counts) -> Counts {
    [a[0] + b[0], a[1] + b[1], a[2] + b[2], a[3] + b[3]]
}

fn bump(mut c: Counts, k: usize) -> Counts {
    c[k] += 1;
    c
}

/// Every combination of per-operator choices, recursively over the tree.
pub fn brute_variants(e: &SpecExpr) -> Vec<(SpecExpr, Counts)> {
    match e {
        SpecExpr::Quantifier { kind, var, range, body } => {
            let mut out = Vec::new();
            for (r, rc) in brute_variants(range) {
                for (b, bc) in brute_variants(body) {
                    let c = plus(rc, bc);
                    out.push((SpecExpr::quantifier(*kind, var.clone(), r.clone(), b.clone()), c));
                    let flipped = match kind {
                        QuantKind::Forall => QuantKind::Exists,
                        QuantKind::Exists => QuantKind::Forall,
                    };
                    out.push((SpecExpr::quantifier(flipped, var.clone(), r.clone(), b), bump(c, 0)));
                }
            }
            out
        }
        SpecExpr::Binary { op, lhs, rhs } => {
            let mut out = Vec::new();
            for (l, lc) in brute_variants(lhs) {
                for (r, rc) in brute_variants(rhs) {
                    let c = plus(lc, rc);
                    out.push((SpecExpr::binary(*op, l.clone(), r.clone()), c));
                    let Some(k) = op_kind(*op) else { continue };
                    for alt in alternatives(*op) {
                        let v = match alt {
                            Alt::Op(o) => SpecExpr::binary(o, l.clone(), r.clone()),
                            Alt::Shift(a) => SpecExpr::binary(
                                *op,
                                SpecExpr::binary(a, l.clone(), SpecExpr::int(1)),
                                r.clone(),
                            ),
                        };
                        out.push((v, bump(c, k)));
                    }
                }
            }
            out
        }
        SpecExpr::Unary { op, operand } => brute_variants(operand)
            .into_iter()
            .map(|(o, c)| (SpecExpr::unary(*op, o), c))
            .collect(),
        SpecExpr::Index { base, index } => {
            let mut out = Vec::new();
            for (b, bc) in brute_variants(base) {
                for (i, ic) in brute_variants(index) {
                    out.push((SpecExpr::index(b.clone(), i), plus(bc, ic)));
                }
            }
            out
        }
        SpecExpr::Field { base, field } => brute_variants(base)
            .into_iter()
            .map(|(b, c)| (SpecExpr::field(b, field.clone()), c))
            .collect(),
        SpecExpr::Old(inner) => brute_variants(inner)
            .into_iter()
            .map(|(i, c)| (SpecExpr::old(i), c))
            .collect(),
        leaf => vec![(leaf.clone(), [0; 4])],
    }
}

pub const DEFAULT_WEIGHTS: [i64; 4] = [-4, -2, -1, -4];

pub fn score_of(c: Counts, w: [i64; 4]) -> i64 {
    (0..4).map(|k| c[k] as i64 * w[k]).sum()
}

/// Rendered text to best score, after merging textual duplicates.
pub fn brute_family(e: &SpecExpr, w: [i64; 4]) -> BTreeMap<String, i64> {
    let mut out: BTreeMap<String, i64> = BTreeMap::new();
    for (v, c) in brute_variants(e) {
        let s = score_of(c, w);
        let slot = out.entry(v.render()).or_insert(s);
        *slot = (*slot).max(s);
    }
    out
}

/// The family in selection order: score descending, then text ascending.
pub fn brute_order(e: &SpecExpr, w: [i64; 4]) -> Vec<(String, i64)> {
    let mut v: Vec<(String, i64)> = brute_family(e, w).into_iter().collect();
    v.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
    v
}

// ---------------------------------------------------------------------------
// Independent evaluator

#[derive(Debug, Clone, PartialEq)]
pub enum OVal {
    I(i128),
    B(bool),
    A(Vec<i128>),
    Null,
}

fn to_oval(v: &Value) -> OVal {
    match v {
        Value::Int(i) => OVal::I(i.to_i128().expect("small ints in tests")),
        Value::Bool(b) => OVal::B(*b),
        Value::IntArray(items) => OVal::A(items.iter().map(|i| i.to_i128().unwrap()).collect()),
        Value::Null => OVal::Null,
        Value::Str(_) => panic!("strings are not generated"),
    }
}

/// Values tried for every quantified variable. Generated bounds stay well
/// inside this window.
pub const WINDOW: std::ops::RangeInclusive<i128> = -64..=64;

pub struct Oracle<'r> {
    record: &'r TraceRecord,
    locals: Vec<(String, i128)>,
}

type OResult = Result<OVal, ()>;

impl<'r> Oracle<'r> {
    pub fn eval(e: &SpecExpr, record: &'r TraceRecord) -> OResult {
        Oracle {
            record,
            locals: Vec::new(),
        }
        .go(e, false)
    }

    fn int(&mut self, e: &SpecExpr, old: bool) -> Result<i128, ()> {
        match self.go(e, old)? {
            OVal::I(i) => Ok(i),
            _ => Err(()),
        }
    }

    fn boolean(&mut self, e: &SpecExpr, old: bool) -> Result<bool, ()> {
        match self.go(e, old)? {
            OVal::B(b) => Ok(b),
            _ => Err(()),
        }
    }

    fn go(&mut self, e: &SpecExpr, old: bool) -> OResult {
        match e {
            SpecExpr::Var(name) => {
                if let Some((_, v)) = self.locals.iter().rev().find(|(n, _)| n == name) {
                    return Ok(OVal::I(*v));
                }
                let scope = if old { self.record.old.as_ref().ok_or(())? } else { &self.record.bindings };
                scope.get(name).map(to_oval).ok_or(())
            }
            SpecExpr::IntLit(i) => Ok(OVal::I(i.to_i128().unwrap())),
            SpecExpr::BoolLit(b) => Ok(OVal::B(*b)),
            SpecExpr::NullLit => Ok(OVal::Null),
            SpecExpr::ResultRef => self.record.result.as_ref().map(to_oval).ok_or(()),
            SpecExpr::Old(inner) => self.go(inner, true),
            SpecExpr::Unary { op: UnOp::Not, operand } => Ok(OVal::B(!self.boolean(operand, old)?)),
            SpecExpr::Unary { op: UnOp::Neg, operand } => Ok(OVal::I(-self.int(operand, old)?)),
            SpecExpr::Index { base, index } => {
                let arr = self.go(base, old)?;
                let i = self.int(index, old)?;
                match arr {
                    OVal::A(items) if i >= 0 && (i as usize) < items.len() => Ok(OVal::I(items[i as usize])),
                    _ => Err(()),
                }
            }
            SpecExpr::Field { base, field } if field == "length" => match self.go(base, old)? {
                OVal::A(items) => Ok(OVal::I(items.len() as i128)),
                _ => Err(()),
            },
            SpecExpr::Field { .. } => Err(()),
            SpecExpr::Binary { op, lhs, rhs } => {
                use BinOp::*;
                match op {
                    And => Ok(OVal::B(self.boolean(lhs, old)? && self.boolean(rhs, old)?)),
                    Or => Ok(OVal::B(self.boolean(lhs, old)? || self.boolean(rhs, old)?)),
                    Implies => Ok(OVal::B(!self.boolean(lhs, old)? || self.boolean(rhs, old)?)),
                    RevImplies => Ok(OVal::B(self.boolean(lhs, old)? || !self.boolean(rhs, old)?)),
                    Equiv => {
                        let l = self.boolean(lhs, old)?;
                        Ok(OVal::B(l == self.boolean(rhs, old)?))
                    }
                    Eq | Ne => {
                        let l = self.go(lhs, old)?;
                        let r = self.go(rhs, old)?;
                        let same = match (&l, &r) {
                            (OVal::I(a), OVal::I(b)) => a == b,
                            (OVal::B(a), OVal::B(b)) => a == b,
                            (OVal::A(a), OVal::A(b)) => a == b,
                            (OVal::Null, OVal::Null) => true,
                            (OVal::Null, OVal::A(_)) | (OVal::A(_), OVal::Null) => false,
                            _ => return Err(()),
                        };
                        Ok(OVal::B(if *op == Eq { same } else { !same }))
                    }
                    Lt | Le | Gt | Ge => {
                        let l = self.int(lhs, old)?;
                        let r = self.int(rhs, old)?;
                        Ok(OVal::B(match op {
                            Lt => l < r,
                            Le => l <= r,
                            Gt => l > r,
                            _ => l >= r,
                        }))
                    }
                    Add | Sub | Mul | Div | Rem => {
                        let l = self.int(lhs, old)?;
                        let r = self.int(rhs, old)?;
                        match op {
                            Add => Ok(OVal::I(l + r)),
                            Sub => Ok(OVal::I(l - r)),
                            Mul => Ok(OVal::I(l * r)),
                            // i128 division truncates toward zero.
                            Div => l.checked_div(r).map(OVal::I).ok_or(()),
                            _ => l.checked_rem(r).map(OVal::I).ok_or(()),
                        }
                    }
                }
            }
            SpecExpr::Quantifier { kind, var, range, body } => {
                for v in WINDOW {
                    self.locals.push((var.clone(), v));
                    let step = (|| -> Result<Option<bool>, ()> {
                        if !self.boolean(range, old)? {
                            return Ok(None);
                        }
                        self.boolean(body, old).map(Some)
                    })();
                    self.locals.pop();
                    match (kind, step?) {
                        (QuantKind::Forall, Some(false)) => return Ok(OVal::B(false)),
                        (QuantKind::Exists, Some(true)) => return Ok(OVal::B(true)),
                        _ => {}
                    }
                }
                Ok(OVal::B(*kind == QuantKind::Forall))
            }
        }
    }
}

/// `Some(true)` / `Some(false)` for a boolean value, `None` on any error.
pub fn oracle_holds(e: &SpecExpr, record: &TraceRecord) -> Option<bool> {
    match Oracle::eval(e, record) {
        Ok(OVal::B(b)) => Some(b),
        _ => None,
    }
}

// ---------------------------------------------------------------------------
// Random records

fn small_array(rng: &mut ChaCha8Rng) -> Vec<i64> {
    let len = rng.random_range(0..=8);
    (0..len).map(|_| rng.random_range(-10..=10)).collect()
}

pub fn random_record(rng: &mut ChaCha8Rng, anchor: ProgramAnchor, phase: Phase) -> TraceRecord {
    let mut r = TraceRecord::new(anchor, phase)
        .bind("x", rng.random_range(-10i64..=10))
        .bind("y", rng.random_range(-10i64..=10))
        .bind("n", rng.random_range(0i64..=10))
        .bind("a", small_array(rng));
    if rng.random_bool(0.9) {
        r = r.with_result(rng.random_range(-10i64..=10));
    }
    if rng.random_bool(0.9) {
        let old = TraceRecord::new(ProgramAnchor::Method("f".into()), Phase::Pre)
            .bind("x", rng.random_range(-10i64..=10))
            .bind("n", rng.random_range(0i64..=10))
            .bind("a", small_array(rng));
        r = r.with_old(old.bindings);
    }
    r
}
