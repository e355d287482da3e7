//! Operator mutation: which operators are mutable, what they may become,
//! and how a replacement is applied to a tree.

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::spec::{BinOp, QuantKind, SpecExpr};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MutationKind {
    Predicative,
    Logical,
    Comparative,
    Arithmetic,
}

impl MutationKind {
    pub const ALL: [MutationKind; 4] = [
        MutationKind::Predicative,
        MutationKind::Logical,
        MutationKind::Comparative,
        MutationKind::Arithmetic,
    ];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn name(self) -> &'static str {
        match self {
            MutationKind::Predicative => "predicative",
            MutationKind::Logical => "logical",
            MutationKind::Comparative => "comparative",
            MutationKind::Arithmetic => "arithmetic",
        }
    }
}

impl fmt::Display for MutationKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for MutationKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        MutationKind::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| format!("unknown mutation kind `{s}`"))
    }
}

/// A mutable operator as it occurs in a tree.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum OpToken {
    Quant(QuantKind),
    Bin(BinOp),
}

impl OpToken {
    pub fn text(self) -> &'static str {
        match self {
            OpToken::Quant(q) => q.keyword(),
            OpToken::Bin(b) => b.token(),
        }
    }

    pub fn kind(self) -> Option<MutationKind> {
        match self {
            OpToken::Quant(_) => Some(MutationKind::Predicative),
            OpToken::Bin(op) => match op {
                BinOp::And | BinOp::Or | BinOp::Equiv | BinOp::Implies | BinOp::RevImplies => {
                    Some(MutationKind::Logical)
                }
                BinOp::Le | BinOp::Ge | BinOp::Lt | BinOp::Gt | BinOp::Eq | BinOp::Ne => {
                    Some(MutationKind::Comparative)
                }
                BinOp::Add | BinOp::Sub => Some(MutationKind::Arithmetic),
                BinOp::Mul | BinOp::Div | BinOp::Rem => None,
            },
        }
    }
}

/// What a mutable operator is replaced with.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Replacement {
    Quant(QuantKind),
    Bin(BinOp),
    /// `l <= r` becomes `l - 1 <= r`.
    DecrementLeft,
    /// `l >= r` becomes `l + 1 >= r`.
    IncrementLeft,
}

impl fmt::Display for Replacement {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Replacement::Quant(q) => f.write_str(q.keyword()),
            Replacement::Bin(b) => f.write_str(b.token()),
            Replacement::DecrementLeft => f.write_str("- 1 <="),
            Replacement::IncrementLeft => f.write_str("+ 1 >="),
        }
    }
}

/// The operator table: every mutable operator and its replacements, in
/// the order variants are generated.
pub fn replacements(op: OpToken) -> &'static [Replacement] {
    use Replacement as R;
    match op {
        OpToken::Quant(QuantKind::Forall) => &[R::Quant(QuantKind::Exists)],
        OpToken::Quant(QuantKind::Exists) => &[R::Quant(QuantKind::Forall)],
        OpToken::Bin(op) => match op {
            BinOp::And => &[R::Bin(BinOp::Or)],
            BinOp::Or => &[R::Bin(BinOp::And)],
            BinOp::Equiv => &[R::Bin(BinOp::RevImplies), R::Bin(BinOp::Implies)],
            BinOp::Implies => &[R::Bin(BinOp::RevImplies)],
            BinOp::RevImplies => &[R::Bin(BinOp::Implies)],
            BinOp::Le => &[R::Bin(BinOp::Lt), R::DecrementLeft],
            BinOp::Ge => &[R::Bin(BinOp::Gt), R::IncrementLeft],
            BinOp::Lt => &[R::Bin(BinOp::Le)],
            BinOp::Gt => &[R::Bin(BinOp::Ge)],
            BinOp::Eq => &[R::Bin(BinOp::Ne)],
            BinOp::Ne => &[R::Bin(BinOp::Eq)],
            BinOp::Add => &[R::Bin(BinOp::Sub)],
            BinOp::Sub => &[R::Bin(BinOp::Add)],
            BinOp::Mul | BinOp::Div | BinOp::Rem => &[],
        },
    }
}

/// A mutable operator occurrence. `path` lists child indices from the root
/// (see [`SpecExpr::children`]).
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct MutationSite {
    pub path: Vec<usize>,
    pub kind: MutationKind,
    pub original: OpToken,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct MutationChoice {
    pub site: MutationSite,
    pub replacement: Replacement,
}

impl MutationChoice {
    pub fn kind(&self) -> MutationKind {
        self.site.kind
    }
}

impl fmt::Display for MutationChoice {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{} {} -> {}",
            self.site.kind,
            self.site.original.text(),
            self.replacement
        )
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum MutationError {
    #[error("mutation site path {path:?} does not resolve to `{op}`")]
    SitePathInvalid { path: Vec<usize>, op: &'static str },
}

fn op_token(expr: &SpecExpr) -> Option<OpToken> {
    match expr {
        SpecExpr::Quantifier { kind, .. } => Some(OpToken::Quant(*kind)),
        SpecExpr::Binary { op, .. } => Some(OpToken::Bin(*op)),
        _ => None,
    }
}

/// Every mutable operator in pre-order (node before its children, children
/// left to right). Operators under `\old` count; unary minus does not.
pub fn enumerate_sites(expr: &SpecExpr) -> Vec<MutationSite> {
    let mut out = Vec::new();
    let mut path = Vec::new();
    walk_sites(expr, &mut path, &mut out);
    out
}

fn walk_sites(expr: &SpecExpr, path: &mut Vec<usize>, out: &mut Vec<MutationSite>) {
    if let Some(tok) = op_token(expr) {
        if let Some(kind) = tok.kind() {
            out.push(MutationSite {
                path: path.clone(),
                kind,
                original: tok,
            });
        }
    }
    for (i, child) in expr.children().into_iter().enumerate() {
        path.push(i);
        walk_sites(child, path, out);
        path.pop();
    }
}

fn node_at_mut<'e>(expr: &'e mut SpecExpr, path: &[usize]) -> Option<&'e mut SpecExpr> {
    let mut node = expr;
    for &i in path {
        node = node.child_mut(i)?;
    }
    Some(node)
}

/// Rewrites the single node named by `choice.site`.
pub fn apply_choice(expr: &SpecExpr, choice: &MutationChoice) -> Result<SpecExpr, MutationError> {
    let mut out = expr.clone();
    apply_in_place(&mut out, choice)?;
    Ok(out)
}

/// Applies several choices on distinct sites. Sites must come from one
/// `enumerate_sites` call on `expr`; they are applied deepest-last-first so
/// that wrapping a left operand never invalidates a pending path.
pub fn apply_choices(expr: &SpecExpr, choices: &[MutationChoice]) -> Result<SpecExpr, MutationError> {
    let mut ordered: Vec<&MutationChoice> = choices.iter().collect();
    ordered.sort_by(|a, b| b.site.path.cmp(&a.site.path));
    let mut out = expr.clone();
    for c in ordered {
        apply_in_place(&mut out, c)?;
    }
    Ok(out)
}

fn apply_in_place(expr: &mut SpecExpr, choice: &MutationChoice) -> Result<(), MutationError> {
    let invalid = || MutationError::SitePathInvalid {
        path: choice.site.path.clone(),
        op: choice.site.original.text(),
    };
    let node = node_at_mut(expr, &choice.site.path).ok_or_else(invalid)?;
    if op_token(node) != Some(choice.site.original)
        || !replacements(choice.site.original).contains(&choice.replacement)
    {
        return Err(invalid());
    }
    match (node, choice.replacement) {
        (SpecExpr::Quantifier { kind, .. }, Replacement::Quant(q)) => *kind = q,
        (SpecExpr::Binary { op, .. }, Replacement::Bin(b)) => *op = b,
        (SpecExpr::Binary { lhs, .. }, r @ (Replacement::DecrementLeft | Replacement::IncrementLeft)) => {
            let arith = if r == Replacement::DecrementLeft {
                BinOp::Sub
            } else {
                BinOp::Add
            };
            let left = std::mem::replace(lhs.as_mut(), SpecExpr::NullLit);
            **lhs = SpecExpr::binary(arith, left, SpecExpr::int(1));
        }
        _ => return Err(invalid()),
    }
    Ok(())
}
