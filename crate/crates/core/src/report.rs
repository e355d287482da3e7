//! Run reports: one JSON line per program attempt plus a summary line.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::repair::Refutation;
use crate::spec::ClauseId;

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PipelineOutcome {
    VerifiedByConversation,
    VerifiedByMutation,
    Failed,
    Aborted,
}

impl PipelineOutcome {
    pub fn is_pass(self) -> bool {
        matches!(self, PipelineOutcome::VerifiedByConversation | PipelineOutcome::VerifiedByMutation)
    }

    pub fn as_str(self) -> &'static str {
        match self {
            PipelineOutcome::VerifiedByConversation => "verified-by-conversation",
            PipelineOutcome::VerifiedByMutation => "verified-by-mutation",
            PipelineOutcome::Failed => "failed",
            PipelineOutcome::Aborted => "aborted",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FamilyStats {
    pub template_id: ClauseId,
    pub template: String,
    pub size: usize,
    pub raw_combinations: u128,
    pub truncated: bool,
    /// Combinations that rendered identically to a better-scoring variant.
    pub merged_duplicates: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProgramReport {
    pub schema_version: u32,
    pub program: String,
    pub attempt: usize,
    pub outcome: PipelineOutcome,
    pub rounds: usize,
    pub conversation_verifier_calls: usize,
    pub repair_verifier_calls: usize,
    #[serde(default)]
    pub families: Vec<FamilyStats>,
    #[serde(default)]
    pub refuted_history: Vec<Refutation>,
    /// Templates whose family ran out; no clause is emitted for them.
    #[serde(default)]
    pub dropped: Vec<ClauseId>,
    #[serde(default)]
    pub thrash: Vec<ClauseId>,
    pub final_clauses: Vec<String>,
    /// The pass came from the trace checker: no counterexample in the traces.
    #[serde(default)]
    pub coverage_limited: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub wall_time_ms: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

impl ProgramReport {
    pub fn verifier_calls(&self) -> usize {
        self.conversation_verifier_calls + self.repair_verifier_calls
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProgramSummary {
    pub program: String,
    pub attempts: usize,
    pub successes: usize,
    pub success_probability: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub schema_version: u32,
    pub programs: usize,
    pub attempts: usize,
    /// Programs with at least one verified attempt.
    pub number_of_passes: usize,
    /// Mean over programs of successes / attempts.
    pub success_probability: f64,
    /// Mean over attempts of conversation + repair calls.
    pub mean_verifier_calls: f64,
    pub per_program: Vec<ProgramSummary>,
}

/// One JSONL line: a program attempt or the closing summary.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "record", rename_all = "lowercase")]
pub enum ReportRecord {
    Program(ProgramReport),
    Summary(Summary),
}

pub fn aggregate(entries: &[ProgramReport]) -> Summary {
    let mut by_program: BTreeMap<&str, (usize, usize)> = BTreeMap::new();
    for e in entries {
        let slot = by_program.entry(&e.program).or_default();
        slot.0 += 1;
        slot.1 += usize::from(e.outcome.is_pass());
    }
    let per_program: Vec<ProgramSummary> = by_program
        .iter()
        .map(|(p, (n, ok))| ProgramSummary {
            program: p.to_string(),
            attempts: *n,
            successes: *ok,
            success_probability: *ok as f64 / *n as f64,
        })
        .collect();
    let mean = |xs: &mut dyn Iterator<Item = f64>, n: usize| {
        if n == 0 {
            0.0
        } else {
            xs.sum::<f64>() / n as f64
        }
    };
    Summary {
        schema_version: SCHEMA_VERSION,
        programs: per_program.len(),
        attempts: entries.len(),
        number_of_passes: per_program.iter().filter(|p| p.successes > 0).count(),
        success_probability: mean(&mut per_program.iter().map(|p| p.success_probability), per_program.len()),
        mean_verifier_calls: mean(&mut entries.iter().map(|e| e.verifier_calls() as f64), entries.len()),
        per_program,
    }
}

/// Program lines followed by the summary line.
pub fn render_jsonl(entries: &[ProgramReport]) -> String {
    let mut out = String::new();
    for e in entries {
        out.push_str(&serde_json::to_string(&ReportRecord::Program(e.clone())).expect("report serializes"));
        out.push('\n');
    }
    out.push_str(&serde_json::to_string(&ReportRecord::Summary(aggregate(entries))).expect("summary serializes"));
    out.push('\n');
    out
}

pub fn render_table(summary: &Summary) -> String {
    let mut out = String::new();
    let width = summary.per_program.iter().map(|p| p.program.len()).max().unwrap_or(0).max(7);
    let _ = writeln!(out, "{:<width$}  attempts  passes  success", "program");
    for p in &summary.per_program {
        let _ = writeln!(
            out,
            "{:<width$}  {:>8}  {:>6}  {:>7.3}",
            p.program, p.attempts, p.successes, p.success_probability
        );
    }
    let _ = writeln!(out);
    let _ = writeln!(out, "programs             {}", summary.programs);
    let _ = writeln!(out, "attempts             {}", summary.attempts);
    let _ = writeln!(out, "number of passes     {}", summary.number_of_passes);
    let _ = writeln!(out, "success probability  {:.4}", summary.success_probability);
    let _ = writeln!(out, "mean verifier calls  {:.2}", summary.mean_verifier_calls);
    out
}

#[derive(Debug, thiserror::Error)]
pub enum ReportError {
    #[error("{path}:{line}: {message}")]
    Malformed {
        path: String,
        line: usize,
        message: String,
    },
    #[error("report I/O: {0}")]
    Io(#[from] std::io::Error),
}

/// Program entries of a JSONL report; summary lines are skipped.
pub fn read_jsonl(path: &Path) -> Result<Vec<ProgramReport>, ReportError> {
    let text = std::fs::read_to_string(path)?;
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let rec: ReportRecord = serde_json::from_str(line).map_err(|e| ReportError::Malformed {
            path: path.display().to_string(),
            line: i + 1,
            message: e.to_string(),
        })?;
        if let ReportRecord::Program(p) = rec {
            out.push(p);
        }
    }
    Ok(out)
}

/// Program entries of every `*.jsonl` file under `dir`, in file-name order.
pub fn read_dir(dir: &Path) -> Result<Vec<ProgramReport>, ReportError> {
    let mut files: Vec<_> = std::fs::read_dir(dir)?
        .filter_map(Result::ok)
        .map(|e| e.path())
        .filter(|p| p.extension().is_some_and(|e| e == "jsonl"))
        .collect();
    files.sort();
    let mut out = Vec::new();
    for f in files {
        out.extend(read_jsonl(&f)?);
    }
    Ok(out)
}
