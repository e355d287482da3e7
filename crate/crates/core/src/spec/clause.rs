use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use super::expr::SpecExpr;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ClauseKind {
    Requires,
    Ensures,
    Maintaining,
    Decreases,
}

impl ClauseKind {
    pub const ALL: [ClauseKind; 4] = [
        ClauseKind::Requires,
        ClauseKind::Ensures,
        ClauseKind::Maintaining,
        ClauseKind::Decreases,
    ];

    pub fn keyword(self) -> &'static str {
        match self {
            ClauseKind::Requires => "requires",
            ClauseKind::Ensures => "ensures",
            ClauseKind::Maintaining => "maintaining",
            ClauseKind::Decreases => "decreases",
        }
    }

    pub fn from_keyword(word: &str) -> Option<Self> {
        ClauseKind::ALL.into_iter().find(|k| k.keyword() == word)
    }

    /// Loop clauses attach to loop heads, the rest to method headers.
    pub fn is_loop_clause(self) -> bool {
        matches!(self, ClauseKind::Maintaining | ClauseKind::Decreases)
    }
}

impl fmt::Display for ClauseKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.keyword())
    }
}

/// Program point a clause is attached to. Loop ordinals count loops of one
/// method in textual order, starting at 0.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum ProgramAnchor {
    Method(String),
    Loop { method: String, ordinal: usize },
}

impl ProgramAnchor {
    pub fn method_name(&self) -> &str {
        match self {
            ProgramAnchor::Method(m) => m,
            ProgramAnchor::Loop { method, .. } => method,
        }
    }
}

impl fmt::Display for ProgramAnchor {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ProgramAnchor::Method(m) => write!(f, "method:{m}"),
            ProgramAnchor::Loop { method, ordinal } => write!(f, "loop:{method}:{ordinal}"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("invalid anchor `{0}`: expected `method:NAME` or `loop:NAME:ORDINAL`")]
pub struct AnchorParseError(pub String);

impl FromStr for ProgramAnchor {
    type Err = AnchorParseError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let err = || AnchorParseError(s.to_string());
        if let Some(name) = s.strip_prefix("method:") {
            if name.is_empty() || name.contains(':') {
                return Err(err());
            }
            return Ok(ProgramAnchor::Method(name.to_string()));
        }
        if let Some(rest) = s.strip_prefix("loop:") {
            let (method, ordinal) = rest.rsplit_once(':').ok_or_else(err)?;
            if method.is_empty() || method.contains(':') {
                return Err(err());
            }
            let ordinal = ordinal.parse().map_err(|_| err())?;
            return Ok(ProgramAnchor::Loop {
                method: method.to_string(),
                ordinal,
            });
        }
        Err(err())
    }
}

impl Serialize for ProgramAnchor {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for ProgramAnchor {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// Stable clause identifier: `<anchor>/<kind>/<ordinal>`, where the ordinal
/// counts clauses of the same kind at the same anchor.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ClauseId(pub String);

impl ClauseId {
    pub fn new(anchor: &ProgramAnchor, kind: ClauseKind, ordinal: usize) -> Self {
        ClauseId(format!("{anchor}/{kind}/{ordinal}"))
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for ClauseId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

/// A clause without a program location: what `parse_clause` produces.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Clause {
    pub kind: ClauseKind,
    pub expr: SpecExpr,
}

impl Clause {
    pub fn new(kind: ClauseKind, expr: SpecExpr) -> Self {
        Clause { kind, expr }
    }

    /// `//@ <kind> <expr>;`
    pub fn render(&self) -> String {
        render_clause(self.kind, &self.expr)
    }
}

pub fn render_clause(kind: ClauseKind, expr: &SpecExpr) -> String {
    format!("//@ {} {};", kind.keyword(), expr.render())
}

/// One annotation attached to a program point. Serialized with the clause
/// as canonical text.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(into = "ClauseRecord", try_from = "ClauseRecord")]
pub struct SpecClause {
    pub id: ClauseId,
    pub kind: ClauseKind,
    pub expr: SpecExpr,
    pub anchor: ProgramAnchor,
}

impl SpecClause {
    pub fn new(anchor: ProgramAnchor, ordinal: usize, clause: Clause) -> Self {
        SpecClause {
            id: ClauseId::new(&anchor, clause.kind, ordinal),
            kind: clause.kind,
            expr: clause.expr,
            anchor,
        }
    }

    pub fn with_expr(&self, expr: SpecExpr) -> Self {
        SpecClause {
            expr,
            ..self.clone()
        }
    }

    pub fn render(&self) -> String {
        render_clause(self.kind, &self.expr)
    }

    pub fn clause(&self) -> Clause {
        Clause::new(self.kind, self.expr.clone())
    }
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ClauseRecord {
    id: ClauseId,
    anchor: ProgramAnchor,
    clause: String,
}

impl From<SpecClause> for ClauseRecord {
    fn from(c: SpecClause) -> Self {
        ClauseRecord {
            clause: c.render(),
            id: c.id,
            anchor: c.anchor,
        }
    }
}

impl TryFrom<ClauseRecord> for SpecClause {
    type Error = String;

    fn try_from(r: ClauseRecord) -> Result<Self, String> {
        let clause = super::parse::parse_clause(&r.clause).map_err(|e| format!("`{}`: {e}", r.clause))?;
        Ok(SpecClause {
            id: r.id,
            kind: clause.kind,
            expr: clause.expr,
            anchor: r.anchor,
        })
    }
}

/// Program text with its specification clauses held separately. `source`
/// never contains `//@` lines; `instrument` puts them back.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct AnnotatedProgram {
    pub source: String,
    pub clauses: Vec<SpecClause>,
}

impl AnnotatedProgram {
    pub fn new(source: impl Into<String>, clauses: Vec<SpecClause>) -> Self {
        AnnotatedProgram {
            source: source.into(),
            clauses,
        }
    }

    /// Assigns ids to unanchored clauses in order, counting ordinals per
    /// (anchor, kind).
    pub fn from_anchored(
        source: impl Into<String>,
        clauses: impl IntoIterator<Item = (ProgramAnchor, Clause)>,
    ) -> Self {
        let mut counters: std::collections::HashMap<(ProgramAnchor, ClauseKind), usize> =
            Default::default();
        let clauses = clauses
            .into_iter()
            .map(|(anchor, clause)| {
                let n = counters.entry((anchor.clone(), clause.kind)).or_insert(0);
                let c = SpecClause::new(anchor, *n, clause);
                *n += 1;
                c
            })
            .collect();
        AnnotatedProgram {
            source: source.into(),
            clauses,
        }
    }

    pub fn clause(&self, id: &ClauseId) -> Option<&SpecClause> {
        self.clauses.iter().find(|c| &c.id == id)
    }

    /// Canonical rendering of every clause, in order.
    pub fn rendered_clauses(&self) -> Vec<String> {
        self.clauses.iter().map(SpecClause::render).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn anchor_text_round_trips() {
        for text in ["method:twoSum", "loop:twoSum:1"] {
            let a: ProgramAnchor = text.parse().unwrap();
            assert_eq!(a.to_string(), text);
        }
        assert!("loop:twoSum".parse::<ProgramAnchor>().is_err());
        assert!("method:".parse::<ProgramAnchor>().is_err());
        assert!("twoSum".parse::<ProgramAnchor>().is_err());
    }

    #[test]
    fn ids_count_per_anchor_and_kind() {
        let m = ProgramAnchor::Method("f".into());
        let e = SpecExpr::BoolLit(true);
        let p = AnnotatedProgram::from_anchored(
            "",
            vec![
                (m.clone(), Clause::new(ClauseKind::Ensures, e.clone())),
                (m.clone(), Clause::new(ClauseKind::Requires, e.clone())),
                (m.clone(), Clause::new(ClauseKind::Ensures, e)),
            ],
        );
        let ids: Vec<_> = p.clauses.iter().map(|c| c.id.as_str().to_string()).collect();
        assert_eq!(
            ids,
            ["method:f/ensures/0", "method:f/requires/0", "method:f/ensures/1"]
        );
    }
}
