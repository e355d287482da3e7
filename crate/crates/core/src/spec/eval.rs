//! Evaluating specification expressions against recorded program states.
//!
//! Integers are arbitrary precision. This diverges from Java's 32-bit `int`
//! on overflow; overflow is left to real verifiers.

use std::collections::BTreeMap;
use std::fmt;

use num_bigint::BigInt;
use num_traits::{ToPrimitive, Zero};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::clause::ProgramAnchor;
use super::expr::{BinOp, QuantKind, SpecExpr, UnOp};

/// A runtime value as found in traces.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Value {
    Int(BigInt),
    Bool(bool),
    IntArray(Vec<BigInt>),
    Str(String),
    Null,
}

impl Value {
    fn type_name(&self) -> &'static str {
        match self {
            Value::Int(_) => "int",
            Value::Bool(_) => "boolean",
            Value::IntArray(_) => "int[]",
            Value::Str(_) => "String",
            Value::Null => "null",
        }
    }
}

impl From<i64> for Value {
    fn from(v: i64) -> Self {
        Value::Int(v.into())
    }
}

impl From<bool> for Value {
    fn from(v: bool) -> Self {
        Value::Bool(v)
    }
}

impl From<Vec<i64>> for Value {
    fn from(v: Vec<i64>) -> Self {
        Value::IntArray(v.into_iter().map(BigInt::from).collect())
    }
}

impl fmt::Display for Value {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Value::Int(v) => write!(f, "{v}"),
            Value::Bool(b) => write!(f, "{b}"),
            Value::IntArray(items) => {
                f.write_str("[")?;
                for (i, v) in items.iter().enumerate() {
                    if i > 0 {
                        f.write_str(", ")?;
                    }
                    write!(f, "{v}")?;
                }
                f.write_str("]")
            }
            Value::Str(s) => write!(f, "{s:?}"),
            Value::Null => f.write_str("null"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Phase {
    Pre,
    Post,
    Iter,
}

pub type Bindings = BTreeMap<String, Value>;

/// One observed program state at an anchor.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TraceRecord {
    pub anchor: ProgramAnchor,
    pub phase: Phase,
    pub bindings: Bindings,
    pub result: Option<Value>,
    pub old: Option<Bindings>,
}

impl TraceRecord {
    pub fn new(anchor: ProgramAnchor, phase: Phase) -> Self {
        TraceRecord {
            anchor,
            phase,
            bindings: Bindings::new(),
            result: None,
            old: None,
        }
    }

    pub fn bind(mut self, name: impl Into<String>, value: impl Into<Value>) -> Self {
        self.bindings.insert(name.into(), value.into());
        self
    }

    pub fn with_result(mut self, value: impl Into<Value>) -> Self {
        self.result = Some(value.into());
        self
    }

    pub fn with_old(mut self, old: Bindings) -> Self {
        self.old = Some(old);
        self
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum EvalError {
    #[error("unbound variable `{0}`")]
    UnboundVariable(String),
    #[error("index {index} out of range for array of length {len}")]
    IndexOutOfRange { index: BigInt, len: usize },
    #[error("cannot extract finite bounds for `{var}` from `{range}`")]
    UnboundedQuantifier { var: String, range: String },
    #[error("division by zero in `{0}`")]
    DivisionByZero(String),
    #[error("`\\old` used but the record has no entry snapshot")]
    MissingOldSnapshot,
    #[error("`\\result` used but the record has no result")]
    MissingResult,
    #[error("type error: {0}")]
    Type(String),
}

/// Closed integer interval; empty when `lo > hi`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Interval {
    pub lo: BigInt,
    pub hi: BigInt,
}

impl Interval {
    pub fn is_empty(&self) -> bool {
        self.lo > self.hi
    }

    pub fn width(&self) -> BigInt {
        if self.is_empty() {
            BigInt::zero()
        } else {
            &self.hi - &self.lo + 1
        }
    }
}

/// Quantifier domains larger than this are refused rather than enumerated.
pub const MAX_QUANTIFIER_DOMAIN: u64 = 1 << 24;

struct Env<'a> {
    record: &'a TraceRecord,
    locals: Vec<(String, BigInt)>,
}

impl<'a> Env<'a> {
    fn lookup(&self, name: &str, in_old: bool) -> Result<Value, EvalError> {
        if let Some((_, v)) = self.locals.iter().rev().find(|(n, _)| n == name) {
            return Ok(Value::Int(v.clone()));
        }
        let scope = if in_old {
            self.record.old.as_ref().ok_or(EvalError::MissingOldSnapshot)?
        } else {
            &self.record.bindings
        };
        scope
            .get(name)
            .cloned()
            .ok_or_else(|| EvalError::UnboundVariable(name.to_string()))
    }
}

/// Evaluates `expr` in the state captured by `record`.
///
/// `&&`, `||`, `==>` and `<==` short-circuit. Quantifier domains come from
/// [`extract_bounds`]; the range is re-checked for every candidate value.
pub fn eval_expr(expr: &SpecExpr, record: &TraceRecord) -> Result<Value, EvalError> {
    let mut env = Env {
        record,
        locals: Vec::new(),
    };
    eval_in(expr, &mut env, false)
}

pub fn eval_bool(expr: &SpecExpr, record: &TraceRecord) -> Result<bool, EvalError> {
    as_bool(eval_expr(expr, record)?, expr)
}

fn as_bool(v: Value, expr: &SpecExpr) -> Result<bool, EvalError> {
    match v {
        Value::Bool(b) => Ok(b),
        other => Err(EvalError::Type(format!(
            "`{}` is {}, expected boolean",
            expr.render(),
            other.type_name()
        ))),
    }
}

fn as_int(v: Value, expr: &SpecExpr) -> Result<BigInt, EvalError> {
    match v {
        Value::Int(i) => Ok(i),
        other => Err(EvalError::Type(format!(
            "`{}` is {}, expected int",
            expr.render(),
            other.type_name()
        ))),
    }
}

fn eval_in(expr: &SpecExpr, env: &mut Env<'_>, in_old: bool) -> Result<Value, EvalError> {
    match expr {
        SpecExpr::Var(name) => env.lookup(name, in_old),
        SpecExpr::IntLit(v) => Ok(Value::Int(v.clone())),
        SpecExpr::BoolLit(b) => Ok(Value::Bool(*b)),
        SpecExpr::NullLit => Ok(Value::Null),
        SpecExpr::ResultRef => env.record.result.clone().ok_or(EvalError::MissingResult),
        SpecExpr::Old(inner) => eval_in(inner, env, true),
        SpecExpr::Unary { op, operand } => {
            let v = eval_in(operand, env, in_old)?;
            match op {
                UnOp::Not => Ok(Value::Bool(!as_bool(v, operand)?)),
                UnOp::Neg => Ok(Value::Int(-as_int(v, operand)?)),
            }
        }
        SpecExpr::Index { base, index } => {
            let arr = eval_in(base, env, in_old)?;
            let idx = as_int(eval_in(index, env, in_old)?, index)?;
            match arr {
                Value::IntArray(items) => idx
                    .to_usize()
                    .and_then(|i| items.get(i).cloned())
                    .map(Value::Int)
                    .ok_or(EvalError::IndexOutOfRange {
                        index: idx,
                        len: items.len(),
                    }),
                Value::Null => Err(EvalError::Type(format!(
                    "`{}` is null and cannot be indexed",
                    base.render()
                ))),
                other => Err(EvalError::Type(format!(
                    "`{}` is {}, not an array",
                    base.render(),
                    other.type_name()
                ))),
            }
        }
        SpecExpr::Field { base, field } => {
            let v = eval_in(base, env, in_old)?;
            match (field.as_str(), v) {
                ("length", Value::IntArray(items)) => Ok(Value::Int(items.len().into())),
                ("length", Value::Str(s)) => Ok(Value::Int(s.chars().count().into())),
                (_, other) => Err(EvalError::Type(format!(
                    "no field `{field}` on {} `{}`",
                    other.type_name(),
                    base.render()
                ))),
            }
        }
        SpecExpr::Binary { op, lhs, rhs } => eval_binary(*op, lhs, rhs, expr, env, in_old),
        SpecExpr::Quantifier {
            kind,
            var,
            range,
            body,
        } => {
            let interval = bounds_in(range, var, env, in_old)?;
            if interval.width() > BigInt::from(MAX_QUANTIFIER_DOMAIN) {
                return Err(EvalError::UnboundedQuantifier {
                    var: var.clone(),
                    range: range.render(),
                });
            }
            let mut v = interval.lo.clone();
            while v <= interval.hi {
                env.locals.push((var.clone(), v.clone()));
                let outcome = (|| {
                    if !as_bool(eval_in(range, env, in_old)?, range)? {
                        return Ok(None);
                    }
                    as_bool(eval_in(body, env, in_old)?, body).map(Some)
                })();
                env.locals.pop();
                match (kind, outcome?) {
                    (QuantKind::Forall, Some(false)) => return Ok(Value::Bool(false)),
                    (QuantKind::Exists, Some(true)) => return Ok(Value::Bool(true)),
                    _ => {}
                }
                v += 1;
            }
            Ok(Value::Bool(*kind == QuantKind::Forall))
        }
    }
}

fn eval_binary(
    op: BinOp,
    lhs: &SpecExpr,
    rhs: &SpecExpr,
    whole: &SpecExpr,
    env: &mut Env<'_>,
    in_old: bool,
) -> Result<Value, EvalError> {
    let bool_of = |e: &SpecExpr, env: &mut Env<'_>| -> Result<bool, EvalError> {
        as_bool(eval_in(e, env, in_old)?, e)
    };
    match op {
        BinOp::And => Ok(Value::Bool(bool_of(lhs, env)? && bool_of(rhs, env)?)),
        BinOp::Or => Ok(Value::Bool(bool_of(lhs, env)? || bool_of(rhs, env)?)),
        BinOp::Implies => Ok(Value::Bool(!bool_of(lhs, env)? || bool_of(rhs, env)?)),
        BinOp::RevImplies => Ok(Value::Bool(bool_of(lhs, env)? || !bool_of(rhs, env)?)),
        BinOp::Equiv => Ok(Value::Bool(bool_of(lhs, env)? == bool_of(rhs, env)?)),
        BinOp::Eq | BinOp::Ne => {
            let l = eval_in(lhs, env, in_old)?;
            let r = eval_in(rhs, env, in_old)?;
            let equal = match (&l, &r) {
                (Value::Null, Value::IntArray(_) | Value::Str(_))
                | (Value::IntArray(_) | Value::Str(_), Value::Null) => false,
                (a, b) if std::mem::discriminant(a) == std::mem::discriminant(b) => a == b,
                _ => {
                    return Err(EvalError::Type(format!(
                        "cannot compare {} with {} in `{}`",
                        l.type_name(),
                        r.type_name(),
                        whole.render()
                    )))
                }
            };
            Ok(Value::Bool(if op == BinOp::Eq { equal } else { !equal }))
        }
        BinOp::Lt | BinOp::Le | BinOp::Gt | BinOp::Ge => {
            let l = as_int(eval_in(lhs, env, in_old)?, lhs)?;
            let r = as_int(eval_in(rhs, env, in_old)?, rhs)?;
            Ok(Value::Bool(match op {
                BinOp::Lt => l < r,
                BinOp::Le => l <= r,
                BinOp::Gt => l > r,
                _ => l >= r,
            }))
        }
        BinOp::Add | BinOp::Sub | BinOp::Mul | BinOp::Div | BinOp::Rem => {
            let l = as_int(eval_in(lhs, env, in_old)?, lhs)?;
            let r = as_int(eval_in(rhs, env, in_old)?, rhs)?;
            if matches!(op, BinOp::Div | BinOp::Rem) && r.is_zero() {
                return Err(EvalError::DivisionByZero(whole.render()));
            }
            // BigInt division truncates toward zero, as Java does.
            Ok(Value::Int(match op {
                BinOp::Add => l + r,
                BinOp::Sub => l - r,
                BinOp::Mul => l * r,
                BinOp::Div => l / r,
                _ => l % r,
            }))
        }
    }
}

/// Finite interval for `var` implied by the conjuncts of `range`.
///
/// Recognizes `lo <= v`, `lo < v`, `v <= hi`, `v < hi` and the mirrored
/// `>`/`>=` forms, joined by `&&`. Bound expressions must not mention `var`.
/// Other conjuncts are ignored here and act as filters during evaluation.
pub fn extract_bounds(
    range: &SpecExpr,
    var: &str,
    record: &TraceRecord,
) -> Result<Interval, EvalError> {
    let mut env = Env {
        record,
        locals: Vec::new(),
    };
    bounds_in(range, var, &mut env, false)
}

fn bounds_in(
    range: &SpecExpr,
    var: &str,
    env: &mut Env<'_>,
    in_old: bool,
) -> Result<Interval, EvalError> {
    let mut conjuncts = Vec::new();
    flatten_and(range, &mut conjuncts);
    let mut lo: Option<BigInt> = None;
    let mut hi: Option<BigInt> = None;
    let is_var = |e: &SpecExpr| matches!(e, SpecExpr::Var(v) if v == var);

    for c in conjuncts {
        let SpecExpr::Binary { op, lhs, rhs } = c else {
            continue;
        };
        // Normalize to `var OP other`.
        let (op, other) = if is_var(lhs) && !rhs.mentions_var(var) {
            (*op, rhs.as_ref())
        } else if is_var(rhs) && !lhs.mentions_var(var) {
            let flipped = match op {
                BinOp::Lt => BinOp::Gt,
                BinOp::Le => BinOp::Ge,
                BinOp::Gt => BinOp::Lt,
                BinOp::Ge => BinOp::Le,
                other => *other,
            };
            (flipped, lhs.as_ref())
        } else {
            continue;
        };
        if !matches!(op, BinOp::Lt | BinOp::Le | BinOp::Gt | BinOp::Ge) {
            continue;
        }
        let bound = as_int(eval_in(other, env, in_old)?, other)?;
        match op {
            BinOp::Lt => tighten_hi(&mut hi, bound - 1),
            BinOp::Le => tighten_hi(&mut hi, bound),
            BinOp::Gt => tighten_lo(&mut lo, bound + 1),
            _ => tighten_lo(&mut lo, bound),
        }
    }
    match (lo, hi) {
        (Some(lo), Some(hi)) => Ok(Interval { lo, hi }),
        _ => Err(EvalError::UnboundedQuantifier {
            var: var.to_string(),
            range: range.render(),
        }),
    }
}

fn flatten_and<'e>(e: &'e SpecExpr, out: &mut Vec<&'e SpecExpr>) {
    match e {
        SpecExpr::Binary {
            op: BinOp::And,
            lhs,
            rhs,
        } => {
            flatten_and(lhs, out);
            flatten_and(rhs, out);
        }
        other => out.push(other),
    }
}

fn tighten_lo(lo: &mut Option<BigInt>, v: BigInt) {
    if lo.as_ref().is_none_or(|cur| v > *cur) {
        *lo = Some(v);
    }
}

fn tighten_hi(hi: &mut Option<BigInt>, v: BigInt) {
    if hi.as_ref().is_none_or(|cur| v < *cur) {
        *hi = Some(v);
    }
}
