//! Moving `//@` clause lines between program text and [`AnnotatedProgram`].
//!
//! The program is treated as plain text. A method header is a line that
//! declares `name(` after a return type or modifier; a loop head is a line
//! starting with `for`, `while` or `do`. Clauses bind to the construct on the
//! next non-blank line.

use std::collections::HashSet;
use std::sync::OnceLock;

use regex::Regex;
use thiserror::Error;

use super::clause::{AnnotatedProgram, Clause, ClauseId, ProgramAnchor};
use super::parse::{parse_clause, ParseError};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum AnnotationError {
    #[error("line {line}: {error} in `{text}`")]
    Syntax {
        line: usize,
        text: String,
        error: ParseError,
    },
    #[error("line {line}: annotation `{text}` is not followed by a method header or loop")]
    OrphanAnnotation { line: usize, text: String },
}

impl AnnotationError {
    pub fn line(&self) -> usize {
        match self {
            AnnotationError::Syntax { line, .. } | AnnotationError::OrphanAnnotation { line, .. } => {
                *line
            }
        }
    }
}

/// All problems found while extracting; extraction does not stop at the first.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("{} malformed annotation(s); first: {}", .0.len(), .0[0])]
pub struct ExtractErrors(pub Vec<AnnotationError>);

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum InstrumentError {
    #[error("anchor `{0}` not found in program source")]
    AnchorNotFound(ProgramAnchor),
}

const NOT_METHOD_NAMES: &[&str] = &[
    "if", "for", "while", "switch", "catch", "synchronized", "return", "new", "else", "do",
    "try", "throw", "case", "assert", "super", "this",
];

fn method_header_re() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| {
        Regex::new(
            r"^\s*(?:@\w+\s+)*(?:(?:public|private|protected|static|final|abstract|synchronized|native|strictfp|default)\s+)*(?:<[^>]*>\s+)?(?:([\w\[\]<>,.?]+)\s+)?([A-Za-z_]\w*)\s*\(",
        )
        .expect("valid regex")
    })
}

#[derive(Debug, Clone, PartialEq, Eq)]
enum LineKind {
    Annotation,
    MethodHeader(String),
    LoopHead,
    Other,
}

fn classify(line: &str) -> LineKind {
    let t = line.trim_start();
    if t.starts_with("//@") {
        return LineKind::Annotation;
    }
    if t.starts_with("//") || t.starts_with('*') || t.starts_with("/*") {
        return LineKind::Other;
    }
    for kw in ["for", "while", "do"] {
        if let Some(rest) = t.strip_prefix(kw) {
            if rest
                .chars()
                .next()
                .is_none_or(|c| !(c.is_alphanumeric() || c == '_'))
            {
                return LineKind::LoopHead;
            }
        }
    }
    if let Some(caps) = method_header_re().captures(line) {
        let name = caps.get(2).map(|m| m.as_str()).unwrap_or_default();
        let has_modifier_or_type = caps.get(1).is_some()
            || t.split_whitespace().count() > 1 && !t.starts_with(name);
        let ret = caps.get(1).map(|m| m.as_str()).unwrap_or_default();
        let keywordish = NOT_METHOD_NAMES.contains(&name) || NOT_METHOD_NAMES.contains(&ret);
        if has_modifier_or_type && !keywordish && !t.contains('=') {
            return LineKind::MethodHeader(name.to_string());
        }
    }
    LineKind::Other
}

fn indentation(line: &str) -> &str {
    &line[..line.len() - line.trim_start().len()]
}

/// Tracks which method the scan is in and how many loops it has seen.
#[derive(Default)]
struct AnchorScanner {
    method: Option<String>,
    loops: usize,
}

impl AnchorScanner {
    fn anchor_for(&mut self, kind: &LineKind) -> Option<ProgramAnchor> {
        match kind {
            LineKind::MethodHeader(name) => {
                self.method = Some(name.clone());
                self.loops = 0;
                Some(ProgramAnchor::Method(name.clone()))
            }
            LineKind::LoopHead => {
                let method = self.method.clone()?;
                let ordinal = self.loops;
                self.loops += 1;
                Some(ProgramAnchor::Loop { method, ordinal })
            }
            _ => None,
        }
    }
}

/// Pulls every `//@` line out of `source`, anchoring each clause to the
/// method header or loop head that follows it.
pub fn extract_annotations(source: &str) -> Result<AnnotatedProgram, ExtractErrors> {
    let mut errors = Vec::new();
    let mut clauses: Vec<(ProgramAnchor, Clause)> = Vec::new();
    let mut kept: Vec<&str> = Vec::new();
    let mut pending: Vec<(usize, &str)> = Vec::new();
    let mut scanner = AnchorScanner::default();

    for (idx, line) in source.lines().enumerate() {
        let kind = classify(line);
        if kind == LineKind::Annotation {
            pending.push((idx + 1, line));
            continue;
        }
        kept.push(line);
        if line.trim().is_empty() {
            continue;
        }
        let anchor = scanner.anchor_for(&kind);
        for (line_no, text) in pending.drain(..) {
            match &anchor {
                Some(anchor) => match parse_clause(text) {
                    Ok(clause) => clauses.push((anchor.clone(), clause)),
                    Err(error) => errors.push(AnnotationError::Syntax {
                        line: line_no,
                        text: text.trim().to_string(),
                        error,
                    }),
                },
                None => errors.push(AnnotationError::OrphanAnnotation {
                    line: line_no,
                    text: text.trim().to_string(),
                }),
            }
        }
    }
    for (line_no, text) in pending {
        errors.push(AnnotationError::OrphanAnnotation {
            line: line_no,
            text: text.trim().to_string(),
        });
    }
    if !errors.is_empty() {
        return Err(ExtractErrors(errors));
    }
    let mut stripped = kept.join("\n");
    if source.ends_with('\n') && !stripped.is_empty() {
        stripped.push('\n');
    }
    Ok(AnnotatedProgram::from_anchored(stripped, clauses))
}

/// Instrumented text plus the 1-based line of every emitted clause.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Instrumented {
    pub text: String,
    pub clause_lines: Vec<(usize, ClauseId)>,
}

impl Instrumented {
    /// The clause emitted nearest above (or on) `line`.
    pub fn clause_above(&self, line: usize) -> Option<&ClauseId> {
        self.clause_lines
            .iter()
            .filter(|(l, _)| *l <= line)
            .max_by_key(|(l, _)| *l)
            .map(|(_, id)| id)
    }

    pub fn clause_at(&self, line: usize) -> Option<&ClauseId> {
        self.clause_lines
            .iter()
            .find(|(l, _)| *l == line)
            .map(|(_, id)| id)
    }
}

/// Writes each clause as a `//@` line directly above its anchor, using the
/// anchor line's indentation.
pub fn instrument(program: &AnnotatedProgram) -> Result<String, InstrumentError> {
    instrument_with_lines(program).map(|i| i.text)
}

pub fn instrument_with_lines(program: &AnnotatedProgram) -> Result<Instrumented, InstrumentError> {
    let mut out = String::with_capacity(program.source.len() + program.clauses.len() * 48);
    let mut clause_lines = Vec::new();
    let mut emitted: HashSet<ProgramAnchor> = HashSet::new();
    let mut scanner = AnchorScanner::default();
    let mut line_no = 0usize;

    for line in program.source.lines() {
        let kind = classify(line);
        if let Some(anchor) = scanner.anchor_for(&kind) {
            if emitted.insert(anchor.clone()) {
                let indent = indentation(line);
                for clause in program.clauses.iter().filter(|c| c.anchor == anchor) {
                    out.push_str(indent);
                    out.push_str(&clause.render());
                    out.push('\n');
                    line_no += 1;
                    clause_lines.push((line_no, clause.id.clone()));
                }
            }
        }
        out.push_str(line);
        out.push('\n');
        line_no += 1;
    }
    if let Some(missing) = program
        .clauses
        .iter()
        .find(|c| !emitted.contains(&c.anchor))
    {
        return Err(InstrumentError::AnchorNotFound(missing.anchor.clone()));
    }
    if !program.source.ends_with('\n') && out.ends_with('\n') && !program.source.is_empty() {
        out.pop();
    }
    Ok(Instrumented {
        text: out,
        clause_lines,
    })
}

/// Every anchor present in `source`, in textual order.
pub fn anchors_in(source: &str) -> Vec<ProgramAnchor> {
    let mut scanner = AnchorScanner::default();
    source
        .lines()
        .filter_map(|l| scanner.anchor_for(&classify(l)))
        .collect()
}
