//! Pulling clause sets out of model responses.

use std::collections::BTreeSet;
use std::fmt;
use std::sync::OnceLock;

use regex::Regex;
use serde::{Deserialize, Serialize};

use crate::spec::{
    anchors_in, extract_annotations, parse_clause, AnnotatedProgram, Clause, ProgramAnchor,
};

/// Why a response yielded no usable clause set; `diagnostics` is fed back
/// to the model verbatim.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExtractionFailure {
    pub diagnostics: Vec<String>,
}

impl ExtractionFailure {
    fn one(msg: impl Into<String>) -> Self {
        ExtractionFailure {
            diagnostics: vec![msg.into()],
        }
    }

    pub fn message(&self) -> String {
        self.diagnostics.join("\n")
    }
}

impl fmt::Display for ExtractionFailure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.message())
    }
}

impl std::error::Error for ExtractionFailure {}

/// Content of the last closed ``` fence, or the whole response.
pub fn last_code_block(response: &str) -> &str {
    static RE: OnceLock<Regex> = OnceLock::new();
    let re = RE.get_or_init(|| Regex::new(r"(?ms)^[ \t]*```[^\n]*\n(.*?)^[ \t]*```").expect("valid regex"));
    re.captures_iter(response)
        .last()
        .and_then(|c| c.get(1))
        .map_or(response, |m| m.as_str())
}

/// Extracts the clause set of a response and places it on `program`.
///
/// When the code block contains the program, clauses keep the anchors they
/// have there, which must exist in `program`. A block of bare `//@` lines
/// is placed by kind: method clauses on the only method of `program`, loop
/// clauses on its only loop; anything else is ambiguous.
pub fn extract_specs(response: &str, program: &str) -> Result<AnnotatedProgram, ExtractionFailure> {
    let block = last_code_block(response);
    let query = match extract_annotations(program) {
        Ok(p) => p.source,
        Err(_) => program.to_string(),
    };
    let query_anchors = anchors_in(&query);

    let placed: Vec<(ProgramAnchor, Clause)> = if anchors_in(block).is_empty() {
        place_bare(block, &query_anchors)?
    } else {
        let extracted = extract_annotations(block).map_err(|e| ExtractionFailure {
            diagnostics: e.0.iter().map(ToString::to_string).collect(),
        })?;
        let known: BTreeSet<&ProgramAnchor> = query_anchors.iter().collect();
        let missing: Vec<String> = extracted
            .clauses
            .iter()
            .filter(|c| !known.contains(&c.anchor))
            .map(|c| format!("`{}` is attached to {}, which is not in the program", c.render(), c.anchor))
            .collect();
        if !missing.is_empty() {
            return Err(ExtractionFailure { diagnostics: missing });
        }
        extracted
            .clauses
            .into_iter()
            .map(|c| (c.anchor.clone(), c.clause()))
            .collect()
    };
    if placed.is_empty() {
        return Err(ExtractionFailure::one("the response contains no `//@` specification lines"));
    }
    Ok(AnnotatedProgram::from_anchored(query, placed))
}

fn place_bare(block: &str, anchors: &[ProgramAnchor]) -> Result<Vec<(ProgramAnchor, Clause)>, ExtractionFailure> {
    let methods: Vec<&ProgramAnchor> = anchors.iter().filter(|a| matches!(a, ProgramAnchor::Method(_))).collect();
    let loops: Vec<&ProgramAnchor> = anchors.iter().filter(|a| matches!(a, ProgramAnchor::Loop { .. })).collect();
    let mut placed = Vec::new();
    let mut diagnostics = Vec::new();
    for (i, line) in block.lines().enumerate() {
        let t = line.trim();
        if !t.starts_with("//@") {
            continue;
        }
        let clause = match parse_clause(t) {
            Ok(c) => c,
            Err(e) => {
                diagnostics.push(format!("line {}: {e} in `{t}`", i + 1));
                continue;
            }
        };
        let targets = if clause.kind.is_loop_clause() { &loops } else { &methods };
        match targets.as_slice() {
            [only] => placed.push(((*only).clone(), clause)),
            [] => diagnostics.push(format!("line {}: no place in the program for `{t}`", i + 1)),
            _ => diagnostics.push(format!(
                "line {}: cannot tell where `{t}` belongs; return the whole annotated program",
                i + 1
            )),
        }
    }
    if diagnostics.is_empty() {
        Ok(placed)
    } else {
        Err(ExtractionFailure { diagnostics })
    }
}
