//! Lexer and recursive-descent parser for clause text.

use num_bigint::BigInt;
use thiserror::Error;

use super::clause::{Clause, ClauseKind};
use super::expr::{BinOp, QuantKind, SpecExpr, UnOp};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ParseError {
    #[error("syntax error at byte {offset}: expected {expected}, found {found}")]
    Syntax {
        offset: usize,
        expected: String,
        found: String,
    },
    #[error("type mismatch: {0}")]
    TypeMismatch(String),
}

impl ParseError {
    fn syntax(offset: usize, expected: impl Into<String>, found: impl Into<String>) -> Self {
        ParseError::Syntax {
            offset,
            expected: expected.into(),
            found: found.into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
enum Tok {
    Ident(String),
    Int(BigInt),
    Result,
    Old,
    Forall,
    Exists,
    Op(BinOp),
    Bang,
    LParen,
    RParen,
    LBracket,
    RBracket,
    Dot,
    Semi,
    Eof,
}

impl Tok {
    fn describe(&self) -> String {
        match self {
            Tok::Ident(s) => format!("`{s}`"),
            Tok::Int(v) => format!("`{v}`"),
            Tok::Result => "`\\result`".into(),
            Tok::Old => "`\\old`".into(),
            Tok::Forall => "`\\forall`".into(),
            Tok::Exists => "`\\exists`".into(),
            Tok::Op(op) => format!("`{}`", op.token()),
            Tok::Bang => "`!`".into(),
            Tok::LParen => "`(`".into(),
            Tok::RParen => "`)`".into(),
            Tok::LBracket => "`[`".into(),
            Tok::RBracket => "`]`".into(),
            Tok::Dot => "`.`".into(),
            Tok::Semi => "`;`".into(),
            Tok::Eof => "end of input".into(),
        }
    }
}

// Longest match first.
const OPERATORS: &[(&str, BinOp)] = &[
    ("<==>", BinOp::Equiv),
    ("<==", BinOp::RevImplies),
    ("==>", BinOp::Implies),
    ("==", BinOp::Eq),
    ("!=", BinOp::Ne),
    ("<=", BinOp::Le),
    (">=", BinOp::Ge),
    ("&&", BinOp::And),
    ("||", BinOp::Or),
    ("<", BinOp::Lt),
    (">", BinOp::Gt),
    ("+", BinOp::Add),
    ("-", BinOp::Sub),
    ("*", BinOp::Mul),
    ("/", BinOp::Div),
    ("%", BinOp::Rem),
];

fn lex(text: &str, base: usize) -> Result<Vec<(usize, Tok)>, ParseError> {
    let bytes = text.as_bytes();
    let mut out = Vec::new();
    let mut i = 0;
    while i < bytes.len() {
        let c = bytes[i];
        if c.is_ascii_whitespace() {
            i += 1;
            continue;
        }
        let start = i;
        let rest = &text[i..];
        let tok = if c.is_ascii_digit() {
            while i < bytes.len() && bytes[i].is_ascii_digit() {
                i += 1;
            }
            Tok::Int(text[start..i].parse().expect("digits"))
        } else if c.is_ascii_alphabetic() || c == b'_' {
            while i < bytes.len() && (bytes[i].is_ascii_alphanumeric() || bytes[i] == b'_') {
                i += 1;
            }
            Tok::Ident(text[start..i].to_string())
        } else if c == b'\\' {
            i += 1;
            while i < bytes.len() && bytes[i].is_ascii_alphabetic() {
                i += 1;
            }
            match &text[start..i] {
                "\\result" => Tok::Result,
                "\\old" => Tok::Old,
                "\\forall" => Tok::Forall,
                "\\exists" => Tok::Exists,
                other => {
                    return Err(ParseError::syntax(
                        base + start,
                        "`\\result`, `\\old`, `\\forall` or `\\exists`",
                        format!("unsupported construct `{other}`"),
                    ))
                }
            }
        } else if let Some((tok, op)) = OPERATORS.iter().find(|(t, _)| rest.starts_with(t)) {
            i += tok.len();
            Tok::Op(*op)
        } else {
            i += 1;
            match c {
                b'!' => Tok::Bang,
                b'(' => Tok::LParen,
                b')' => Tok::RParen,
                b'[' => Tok::LBracket,
                b']' => Tok::RBracket,
                b'.' => Tok::Dot,
                b';' => Tok::Semi,
                _ => {
                    let ch = rest.chars().next().unwrap_or('?');
                    return Err(ParseError::syntax(
                        base + start,
                        "an operator, operand or `;`",
                        format!("`{ch}`"),
                    ));
                }
            }
        };
        out.push((base + start, tok));
    }
    out.push((base + text.len(), Tok::Eof));
    Ok(out)
}

struct Parser {
    toks: Vec<(usize, Tok)>,
    pos: usize,
}

impl Parser {
    fn peek(&self) -> &Tok {
        &self.toks[self.pos].1
    }

    fn offset(&self) -> usize {
        self.toks[self.pos].0
    }

    fn bump(&mut self) -> Tok {
        let t = self.toks[self.pos].1.clone();
        if self.pos < self.toks.len() - 1 {
            self.pos += 1;
        }
        t
    }

    fn error(&self, expected: &str) -> ParseError {
        ParseError::syntax(self.offset(), expected, self.peek().describe())
    }

    fn expect(&mut self, tok: Tok, expected: &str) -> Result<(), ParseError> {
        if *self.peek() == tok {
            self.bump();
            Ok(())
        } else {
            Err(self.error(expected))
        }
    }

    fn peek_op(&self) -> Option<BinOp> {
        match self.peek() {
            Tok::Op(op) => Some(*op),
            _ => None,
        }
    }

    fn expr(&mut self) -> Result<SpecExpr, ParseError> {
        self.equivalence()
    }

    fn equivalence(&mut self) -> Result<SpecExpr, ParseError> {
        let mut lhs = self.implication()?;
        while self.peek_op() == Some(BinOp::Equiv) {
            self.bump();
            let rhs = self.implication()?;
            lhs = SpecExpr::binary(BinOp::Equiv, lhs, rhs);
        }
        Ok(lhs)
    }

    fn implication(&mut self) -> Result<SpecExpr, ParseError> {
        let mut operands = vec![self.left_assoc(3)?];
        let mut ops = Vec::new();
        while let Some(op @ (BinOp::Implies | BinOp::RevImplies)) = self.peek_op() {
            if ops.first().is_some_and(|first| *first != op) {
                return Err(self.error("parentheses when mixing `==>` and `<==`"));
            }
            self.bump();
            ops.push(op);
            operands.push(self.left_assoc(3)?);
        }
        match ops.first() {
            None => Ok(operands.pop().expect("one operand")),
            Some(BinOp::Implies) => {
                let mut acc = operands.pop().expect("operand");
                while let Some(lhs) = operands.pop() {
                    acc = SpecExpr::binary(BinOp::Implies, lhs, acc);
                }
                Ok(acc)
            }
            Some(_) => {
                let mut it = operands.into_iter();
                let mut acc = it.next().expect("operand");
                for rhs in it {
                    acc = SpecExpr::binary(BinOp::RevImplies, acc, rhs);
                }
                Ok(acc)
            }
        }
    }

    /// Left-associative binary levels 3 (`||`) through 8 (multiplicative).
    fn left_assoc(&mut self, level: u8) -> Result<SpecExpr, ParseError> {
        if level > 8 {
            return self.unary();
        }
        let mut lhs = self.left_assoc(level + 1)?;
        while let Some(op) = self.peek_op().filter(|op| op.precedence() == level) {
            self.bump();
            let rhs = self.left_assoc(level + 1)?;
            lhs = SpecExpr::binary(op, lhs, rhs);
        }
        Ok(lhs)
    }

    fn unary(&mut self) -> Result<SpecExpr, ParseError> {
        match self.peek() {
            Tok::Bang => {
                self.bump();
                Ok(SpecExpr::unary(UnOp::Not, self.unary()?))
            }
            Tok::Op(BinOp::Sub) => {
                self.bump();
                if let Tok::Int(v) = self.peek().clone() {
                    self.bump();
                    return self.postfix(SpecExpr::IntLit(-v));
                }
                Ok(SpecExpr::unary(UnOp::Neg, self.unary()?))
            }
            _ => {
                let atom = self.primary()?;
                self.postfix(atom)
            }
        }
    }

    fn postfix(&mut self, mut expr: SpecExpr) -> Result<SpecExpr, ParseError> {
        loop {
            match self.peek() {
                Tok::LBracket => {
                    self.bump();
                    let index = self.expr()?;
                    self.expect(Tok::RBracket, "`]`")?;
                    expr = SpecExpr::index(expr, index);
                }
                Tok::Dot => {
                    self.bump();
                    match self.bump() {
                        Tok::Ident(name) => expr = SpecExpr::field(expr, name),
                        _ => {
                            self.pos -= 1;
                            return Err(self.error("a field name"));
                        }
                    }
                }
                _ => return Ok(expr),
            }
        }
    }

    fn primary(&mut self) -> Result<SpecExpr, ParseError> {
        let offset = self.offset();
        match self.bump() {
            Tok::Int(v) => Ok(SpecExpr::IntLit(v)),
            Tok::Result => Ok(SpecExpr::ResultRef),
            Tok::Old => {
                self.expect(Tok::LParen, "`(` after `\\old`")?;
                let inner = self.expr()?;
                self.expect(Tok::RParen, "`)`")?;
                Ok(SpecExpr::old(inner))
            }
            Tok::Ident(name) => match name.as_str() {
                "true" => Ok(SpecExpr::BoolLit(true)),
                "false" => Ok(SpecExpr::BoolLit(false)),
                "null" => Ok(SpecExpr::NullLit),
                _ => {
                    if *self.peek() == Tok::LParen {
                        return Err(ParseError::syntax(
                            self.offset(),
                            "an operator",
                            format!("method call `{name}(`, which is not supported"),
                        ));
                    }
                    Ok(SpecExpr::Var(name))
                }
            },
            Tok::LParen => {
                let quant = match self.peek() {
                    Tok::Forall => Some(QuantKind::Forall),
                    Tok::Exists => Some(QuantKind::Exists),
                    _ => None,
                };
                if let Some(kind) = quant {
                    self.bump();
                    return self.quantifier(kind);
                }
                let inner = self.expr()?;
                self.expect(Tok::RParen, "`)`")?;
                Ok(inner)
            }
            Tok::Forall | Tok::Exists => Err(ParseError::syntax(
                offset,
                "`(` before the quantifier",
                "a bare quantifier",
            )),
            other => {
                self.pos -= usize::from(other != Tok::Eof);
                Err(ParseError::syntax(offset, "an operand", other.describe()))
            }
        }
    }

    fn quantifier(&mut self, kind: QuantKind) -> Result<SpecExpr, ParseError> {
        match self.peek() {
            Tok::Ident(t) if t == "int" => {
                self.bump();
            }
            _ => return Err(self.error("`int` (only integer quantifiers are supported)")),
        }
        let var = match self.peek().clone() {
            Tok::Ident(name) if !matches!(name.as_str(), "true" | "false" | "null" | "int") => {
                self.bump();
                name
            }
            _ => return Err(self.error("a bound variable name")),
        };
        self.expect(Tok::Semi, "`;` after the bound variable")?;
        let range = self.expr()?;
        self.expect(Tok::Semi, "`;` between range and body")?;
        let body = self.expr()?;
        self.expect(Tok::RParen, "`)` closing the quantifier")?;
        Ok(SpecExpr::quantifier(kind, var, range, body))
    }
}

/// Parses a bare expression.
pub fn parse_expr(text: &str) -> Result<SpecExpr, ParseError> {
    let mut p = Parser {
        toks: lex(text, 0)?,
        pos: 0,
    };
    let e = p.expr()?;
    if *p.peek() != Tok::Eof {
        return Err(p.error("end of expression"));
    }
    Ok(e)
}

/// Parses `//@ <kind> <expr>;` or `<kind> <expr>;` and type-checks the result.
pub fn parse_clause(text: &str) -> Result<Clause, ParseError> {
    let trimmed_start = text.len() - text.trim_start().len();
    let mut offset = trimmed_start;
    let mut rest = &text[trimmed_start..];
    if let Some(r) = rest.strip_prefix("//@") {
        offset += 3;
        let ws = r.len() - r.trim_start().len();
        offset += ws;
        rest = &r[ws..];
    }
    let word_len = rest
        .find(|c: char| !(c.is_ascii_alphanumeric() || c == '_'))
        .unwrap_or(rest.len());
    let word = &rest[..word_len];
    let kind = ClauseKind::from_keyword(word).ok_or_else(|| {
        ParseError::syntax(
            offset,
            "`requires`, `ensures`, `maintaining` or `decreases`",
            if word.is_empty() {
                "nothing".to_string()
            } else {
                format!("`{word}`")
            },
        )
    })?;
    offset += word_len;
    let body = &text[offset..];
    let mut p = Parser {
        toks: lex(body, offset)?,
        pos: 0,
    };
    let expr = p.expr()?;
    p.expect(Tok::Semi, "`;` ending the clause")?;
    if *p.peek() != Tok::Eof {
        return Err(p.error("end of clause after `;`"));
    }
    check_clause_type(kind, &expr)?;
    Ok(Clause::new(kind, expr))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExprType {
    Bool,
    Int,
    Ref,
    Unknown,
}

/// Best-effort static typing; unknown variables type as `Unknown` and are
/// compatible with everything.
pub fn infer_type(expr: &SpecExpr) -> Result<ExprType, ParseError> {
    use ExprType::*;
    let expect = |e: &SpecExpr, want: ExprType| -> Result<(), ParseError> {
        let got = infer_type(e)?;
        if got == Unknown || got == want {
            Ok(())
        } else {
            Err(ParseError::TypeMismatch(format!(
                "`{}` is {:?}, expected {:?}",
                e.render(),
                got,
                want
            )))
        }
    };
    Ok(match expr {
        SpecExpr::Quantifier { range, body, .. } => {
            expect(range, Bool)?;
            expect(body, Bool)?;
            Bool
        }
        SpecExpr::Binary { op, lhs, rhs } => {
            if op.is_logical() {
                expect(lhs, Bool)?;
                expect(rhs, Bool)?;
                Bool
            } else if op.is_arithmetic() {
                expect(lhs, Int)?;
                expect(rhs, Int)?;
                Int
            } else if matches!(op, BinOp::Eq | BinOp::Ne) {
                let (l, r) = (infer_type(lhs)?, infer_type(rhs)?);
                if l != Unknown && r != Unknown && l != r {
                    return Err(ParseError::TypeMismatch(format!(
                        "cannot compare {l:?} with {r:?} in `{}`",
                        expr.render()
                    )));
                }
                Bool
            } else {
                expect(lhs, Int)?;
                expect(rhs, Int)?;
                Bool
            }
        }
        SpecExpr::Unary { op, operand } => match op {
            UnOp::Not => {
                expect(operand, Bool)?;
                Bool
            }
            UnOp::Neg => {
                expect(operand, Int)?;
                Int
            }
        },
        SpecExpr::Var(_) | SpecExpr::ResultRef => Unknown,
        SpecExpr::IntLit(_) => Int,
        SpecExpr::BoolLit(_) => Bool,
        SpecExpr::NullLit => Ref,
        SpecExpr::Index { base, index } => {
            expect(base, Ref)?;
            expect(index, Int)?;
            Int
        }
        SpecExpr::Field { base, field } => {
            expect(base, Ref)?;
            if field == "length" {
                Int
            } else {
                Unknown
            }
        }
        SpecExpr::Old(inner) => infer_type(inner)?,
    })
}

pub fn check_clause_type(kind: ClauseKind, expr: &SpecExpr) -> Result<(), ParseError> {
    let ty = infer_type(expr)?;
    let want = if kind == ClauseKind::Decreases {
        ExprType::Int
    } else {
        ExprType::Bool
    };
    if ty == ExprType::Unknown || ty == want {
        Ok(())
    } else {
        Err(ParseError::TypeMismatch(format!(
            "`{kind}` clause needs a {} expression, got {ty:?} `{}`",
            if want == ExprType::Int { "integer" } else { "boolean" },
            expr.render()
        )))
    }
}
