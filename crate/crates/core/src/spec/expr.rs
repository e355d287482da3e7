//! Expression tree for the supported JML subset and its canonical printer.

use std::fmt;

use num_bigint::BigInt;
use num_traits::Signed;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum QuantKind {
    Forall,
    Exists,
}

impl QuantKind {
    pub fn keyword(self) -> &'static str {
        match self {
            QuantKind::Forall => "\\forall",
            QuantKind::Exists => "\\exists",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum BinOp {
    Equiv,
    Implies,
    RevImplies,
    Or,
    And,
    Eq,
    Ne,
    Lt,
    Le,
    Gt,
    Ge,
    Add,
    Sub,
    Mul,
    Div,
    Rem,
}

impl BinOp {
    pub const ALL: [BinOp; 16] = [
        BinOp::Equiv,
        BinOp::Implies,
        BinOp::RevImplies,
        BinOp::Or,
        BinOp::And,
        BinOp::Eq,
        BinOp::Ne,
        BinOp::Lt,
        BinOp::Le,
        BinOp::Gt,
        BinOp::Ge,
        BinOp::Add,
        BinOp::Sub,
        BinOp::Mul,
        BinOp::Div,
        BinOp::Rem,
    ];

    pub fn token(self) -> &'static str {
        match self {
            BinOp::Equiv => "<==>",
            BinOp::Implies => "==>",
            BinOp::RevImplies => "<==",
            BinOp::Or => "||",
            BinOp::And => "&&",
            BinOp::Eq => "==",
            BinOp::Ne => "!=",
            BinOp::Lt => "<",
            BinOp::Le => "<=",
            BinOp::Gt => ">",
            BinOp::Ge => ">=",
            BinOp::Add => "+",
            BinOp::Sub => "-",
            BinOp::Mul => "*",
            BinOp::Div => "/",
            BinOp::Rem => "%",
        }
    }

    /// Binding strength; higher binds tighter.
    pub fn precedence(self) -> u8 {
        match self {
            BinOp::Equiv => 1,
            BinOp::Implies | BinOp::RevImplies => 2,
            BinOp::Or => 3,
            BinOp::And => 4,
            BinOp::Eq | BinOp::Ne => 5,
            BinOp::Lt | BinOp::Le | BinOp::Gt | BinOp::Ge => 6,
            BinOp::Add | BinOp::Sub => 7,
            BinOp::Mul | BinOp::Div | BinOp::Rem => 8,
        }
    }

    pub fn is_logical(self) -> bool {
        matches!(
            self,
            BinOp::Equiv | BinOp::Implies | BinOp::RevImplies | BinOp::Or | BinOp::And
        )
    }

    pub fn is_comparison(self) -> bool {
        matches!(
            self,
            BinOp::Eq | BinOp::Ne | BinOp::Lt | BinOp::Le | BinOp::Gt | BinOp::Ge
        )
    }

    pub fn is_arithmetic(self) -> bool {
        matches!(
            self,
            BinOp::Add | BinOp::Sub | BinOp::Mul | BinOp::Div | BinOp::Rem
        )
    }
}

impl fmt::Display for BinOp {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.token())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum UnOp {
    Not,
    Neg,
}

impl UnOp {
    pub fn token(self) -> &'static str {
        match self {
            UnOp::Not => "!",
            UnOp::Neg => "-",
        }
    }
}

/// A node of a specification expression.
///
/// Quantifiers always use the three-part `(\forall int v; range; body)` form
/// and bind a single integer variable.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum SpecExpr {
    Quantifier {
        kind: QuantKind,
        var: String,
        range: Box<SpecExpr>,
        body: Box<SpecExpr>,
    },
    Binary {
        op: BinOp,
        lhs: Box<SpecExpr>,
        rhs: Box<SpecExpr>,
    },
    Unary {
        op: UnOp,
        operand: Box<SpecExpr>,
    },
    Var(String),
    IntLit(BigInt),
    BoolLit(bool),
    NullLit,
    Index {
        base: Box<SpecExpr>,
        index: Box<SpecExpr>,
    },
    Field {
        base: Box<SpecExpr>,
        field: String,
    },
    ResultRef,
    Old(Box<SpecExpr>),
}

const PREC_UNARY: u8 = 9;
const PREC_POSTFIX: u8 = 10;

impl SpecExpr {
    pub fn var(name: impl Into<String>) -> Self {
        SpecExpr::Var(name.into())
    }

    pub fn int(value: impl Into<BigInt>) -> Self {
        SpecExpr::IntLit(value.into())
    }

    pub fn binary(op: BinOp, lhs: SpecExpr, rhs: SpecExpr) -> Self {
        SpecExpr::Binary {
            op,
            lhs: Box::new(lhs),
            rhs: Box::new(rhs),
        }
    }

    pub fn unary(op: UnOp, operand: SpecExpr) -> Self {
        SpecExpr::Unary {
            op,
            operand: Box::new(operand),
        }
    }

    pub fn quantifier(kind: QuantKind, var: impl Into<String>, range: SpecExpr, body: SpecExpr) -> Self {
        SpecExpr::Quantifier {
            kind,
            var: var.into(),
            range: Box::new(range),
            body: Box::new(body),
        }
    }

    pub fn index(base: SpecExpr, index: SpecExpr) -> Self {
        SpecExpr::Index {
            base: Box::new(base),
            index: Box::new(index),
        }
    }

    pub fn field(base: SpecExpr, field: impl Into<String>) -> Self {
        SpecExpr::Field {
            base: Box::new(base),
            field: field.into(),
        }
    }

    pub fn old(inner: SpecExpr) -> Self {
        SpecExpr::Old(Box::new(inner))
    }

    /// Children in a fixed order; mutation paths index into this list.
    pub fn children(&self) -> Vec<&SpecExpr> {
        match self {
            SpecExpr::Quantifier { range, body, .. } => vec![range, body],
            SpecExpr::Binary { lhs, rhs, .. } => vec![lhs, rhs],
            SpecExpr::Unary { operand, .. } => vec![operand],
            SpecExpr::Index { base, index } => vec![base, index],
            SpecExpr::Field { base, .. } => vec![base],
            SpecExpr::Old(inner) => vec![inner],
            SpecExpr::Var(_)
            | SpecExpr::IntLit(_)
            | SpecExpr::BoolLit(_)
            | SpecExpr::NullLit
            | SpecExpr::ResultRef => vec![],
        }
    }

    pub fn child_mut(&mut self, idx: usize) -> Option<&mut SpecExpr> {
        match (self, idx) {
            (SpecExpr::Quantifier { range, .. }, 0) => Some(range),
            (SpecExpr::Quantifier { body, .. }, 1) => Some(body),
            (SpecExpr::Binary { lhs, .. }, 0) => Some(lhs),
            (SpecExpr::Binary { rhs, .. }, 1) => Some(rhs),
            (SpecExpr::Unary { operand, .. }, 0) => Some(operand),
            (SpecExpr::Index { base, .. }, 0) => Some(base),
            (SpecExpr::Index { index, .. }, 1) => Some(index),
            (SpecExpr::Field { base, .. }, 0) => Some(base),
            (SpecExpr::Old(inner), 0) => Some(inner),
            _ => None,
        }
    }

    pub fn node_count(&self) -> usize {
        1 + self.children().iter().map(|c| c.node_count()).sum::<usize>()
    }

    /// True if `name` occurs free in this expression.
    pub fn mentions_var(&self, name: &str) -> bool {
        match self {
            SpecExpr::Var(v) => v == name,
            SpecExpr::Quantifier { var, range, body, .. } => {
                var != name && (range.mentions_var(name) || body.mentions_var(name))
            }
            other => other.children().iter().any(|c| c.mentions_var(name)),
        }
    }

    pub fn mentions_old(&self) -> bool {
        matches!(self, SpecExpr::Old(_)) || self.children().iter().any(|c| c.mentions_old())
    }

    fn precedence(&self) -> u8 {
        match self {
            SpecExpr::Binary { op, .. } => op.precedence(),
            SpecExpr::Unary { .. } => PREC_UNARY,
            SpecExpr::IntLit(v) if v.is_negative() => PREC_UNARY,
            _ => PREC_POSTFIX,
        }
    }

    /// Canonical text: single spaces around binary operators and the fewest
    /// parentheses that still reproduce this exact tree when parsed.
    pub fn render(&self) -> String {
        let mut out = String::new();
        self.write_to(&mut out);
        out
    }

    fn write_to(&self, out: &mut String) {
        match self {
            SpecExpr::Quantifier {
                kind,
                var,
                range,
                body,
            } => {
                out.push('(');
                out.push_str(kind.keyword());
                out.push_str(" int ");
                out.push_str(var);
                out.push_str("; ");
                range.write_to(out);
                out.push_str("; ");
                body.write_to(out);
                out.push(')');
            }
            SpecExpr::Binary { op, lhs, rhs } => {
                let p = op.precedence();
                let lhs_parens = match lhs.precedence().cmp(&p) {
                    std::cmp::Ordering::Less => true,
                    std::cmp::Ordering::Greater => false,
                    std::cmp::Ordering::Equal => !same_level_left_ok(*op, lhs),
                };
                let rhs_parens = match rhs.precedence().cmp(&p) {
                    std::cmp::Ordering::Less => true,
                    std::cmp::Ordering::Greater => false,
                    std::cmp::Ordering::Equal => !same_level_right_ok(*op, rhs),
                };
                write_maybe_paren(lhs, lhs_parens, out);
                out.push(' ');
                out.push_str(op.token());
                out.push(' ');
                write_maybe_paren(rhs, rhs_parens, out);
            }
            SpecExpr::Unary { op, operand } => {
                out.push_str(op.token());
                // The parser folds `-5` into a negative literal; `-(5)` stays a negation.
                let parens = operand.precedence() < PREC_UNARY
                    || (*op == UnOp::Neg && matches!(**operand, SpecExpr::IntLit(_)));
                write_maybe_paren(operand, parens, out);
            }
            SpecExpr::Var(name) => out.push_str(name),
            SpecExpr::IntLit(v) => out.push_str(&v.to_string()),
            SpecExpr::BoolLit(b) => out.push_str(if *b { "true" } else { "false" }),
            SpecExpr::NullLit => out.push_str("null"),
            SpecExpr::Index { base, index } => {
                write_maybe_paren(base, base.precedence() < PREC_POSTFIX, out);
                out.push('[');
                index.write_to(out);
                out.push(']');
            }
            SpecExpr::Field { base, field } => {
                write_maybe_paren(base, base.precedence() < PREC_POSTFIX, out);
                out.push('.');
                out.push_str(field);
            }
            SpecExpr::ResultRef => out.push_str("\\result"),
            SpecExpr::Old(inner) => {
                out.push_str("\\old(");
                inner.write_to(out);
                out.push(')');
            }
        }
    }
}

fn write_maybe_paren(expr: &SpecExpr, parens: bool, out: &mut String) {
    if parens {
        out.push('(');
        expr.write_to(out);
        out.push(')');
    } else {
        expr.write_to(out);
    }
}

fn op_of(expr: &SpecExpr) -> Option<BinOp> {
    match expr {
        SpecExpr::Binary { op, .. } => Some(*op),
        _ => None,
    }
}

// `==>` associates to the right, everything else to the left. The two
// implication arrows never chain with each other without parentheses.
fn same_level_left_ok(op: BinOp, lhs: &SpecExpr) -> bool {
    match op {
        BinOp::Implies => false,
        BinOp::RevImplies => op_of(lhs) == Some(BinOp::RevImplies),
        _ => true,
    }
}

fn same_level_right_ok(op: BinOp, rhs: &SpecExpr) -> bool {
    match op {
        BinOp::Implies => op_of(rhs) == Some(BinOp::Implies),
        _ => false,
    }
}

impl fmt::Display for SpecExpr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.render())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn v(n: &str) -> SpecExpr {
        SpecExpr::var(n)
    }

    #[test]
    fn renders_minimal_parentheses() {
        let e = SpecExpr::binary(
            BinOp::Mul,
            SpecExpr::binary(BinOp::Add, v("a"), v("b")),
            v("c"),
        );
        assert_eq!(e.render(), "(a + b) * c");

        let e = SpecExpr::binary(
            BinOp::Sub,
            v("a"),
            SpecExpr::binary(BinOp::Sub, v("b"), v("c")),
        );
        assert_eq!(e.render(), "a - (b - c)");

        let e = SpecExpr::binary(
            BinOp::Sub,
            SpecExpr::binary(BinOp::Sub, v("a"), v("b")),
            v("c"),
        );
        assert_eq!(e.render(), "a - b - c");
    }

    #[test]
    fn implication_associates_right() {
        let right = SpecExpr::binary(
            BinOp::Implies,
            v("p"),
            SpecExpr::binary(BinOp::Implies, v("q"), v("r")),
        );
        assert_eq!(right.render(), "p ==> q ==> r");
        let left = SpecExpr::binary(
            BinOp::Implies,
            SpecExpr::binary(BinOp::Implies, v("p"), v("q")),
            v("r"),
        );
        assert_eq!(left.render(), "(p ==> q) ==> r");
        let mixed = SpecExpr::binary(
            BinOp::Implies,
            v("p"),
            SpecExpr::binary(BinOp::RevImplies, v("q"), v("r")),
        );
        assert_eq!(mixed.render(), "p ==> (q <== r)");
    }

    #[test]
    fn quantifier_spacing() {
        let range = SpecExpr::binary(
            BinOp::And,
            SpecExpr::binary(BinOp::Le, SpecExpr::int(0), v("a")),
            SpecExpr::binary(BinOp::Lt, v("a"), SpecExpr::int(3)),
        );
        let q = SpecExpr::quantifier(
            QuantKind::Forall,
            "a",
            range,
            SpecExpr::binary(BinOp::Lt, v("a"), SpecExpr::int(5)),
        );
        assert_eq!(q.render(), "(\\forall int a; 0 <= a && a < 3; a < 5)");
    }

    #[test]
    fn postfix_and_unary() {
        let e = SpecExpr::binary(
            BinOp::Eq,
            SpecExpr::field(SpecExpr::ResultRef, "length"),
            SpecExpr::int(0),
        );
        assert_eq!(e.render(), "\\result.length == 0");
        let e = SpecExpr::unary(UnOp::Not, SpecExpr::binary(BinOp::And, v("p"), v("q")));
        assert_eq!(e.render(), "!(p && q)");
        let e = SpecExpr::unary(UnOp::Neg, SpecExpr::int(5));
        assert_eq!(e.render(), "-(5)");
        let e = SpecExpr::index(SpecExpr::old(v("a")), v("i"));
        assert_eq!(e.render(), "\\old(a)[i]");
    }

    #[test]
    fn mentions_var_respects_binding() {
        let q = SpecExpr::quantifier(QuantKind::Exists, "k", v("k"), v("n"));
        assert!(!q.mentions_var("k"));
        assert!(q.mentions_var("n"));
    }
}
