//! The verifier contract and its adapters.
//!
//! * [`ExecVerifier`] runs an external command (an OpenJML-style checker).
//! * [`TraceVerifier`] checks clauses against recorded execution traces.
//! * [`MockVerifier`] replays scripted verdicts for tests and fixtures.

pub mod classify;
pub mod exec;
pub mod mock;
pub mod trace_check;

use std::time::Duration;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::spec::{AnnotatedProgram, ClauseId, InstrumentError};

pub use classify::{classify_failure, ClassifierRule, RuleSet};
pub use exec::{ExecConfig, ExecVerifier};
pub use mock::{MockScript, MockVerifier};
pub use trace_check::{verify_trace, TraceVerifier};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Outcome {
    Pass,
    Fail,
    Timeout,
    Crash,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum FailureCategory {
    SyntaxError,
    UnprovablePostcondition,
    UnprovableInvariant,
    UnprovablePrecondition,
    NonterminationDecreases,
    TypeError,
    Unknown,
}

impl FailureCategory {
    pub const ALL: [FailureCategory; 7] = [
        FailureCategory::SyntaxError,
        FailureCategory::UnprovablePostcondition,
        FailureCategory::UnprovableInvariant,
        FailureCategory::UnprovablePrecondition,
        FailureCategory::NonterminationDecreases,
        FailureCategory::TypeError,
        FailureCategory::Unknown,
    ];
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FailureReport {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub clause_id: Option<ClauseId>,
    pub raw_message: String,
    pub category: FailureCategory,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub source_line: Option<usize>,
}

impl FailureReport {
    pub fn for_clause(id: ClauseId, category: FailureCategory, message: impl Into<String>) -> Self {
        FailureReport {
            clause_id: Some(id),
            raw_message: message.into(),
            category,
            source_line: None,
        }
    }
}

/// Whether an adapter reports every failure of a call or only the first.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FailuresPerCall {
    One,
    #[default]
    All,
}

impl FailuresPerCall {
    pub fn apply(self, failures: &mut Vec<FailureReport>) {
        if self == FailuresPerCall::One {
            failures.truncate(1);
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct VerifierVerdict {
    pub outcome: Outcome,
    pub failures: Vec<FailureReport>,
    #[serde(with = "duration_ms")]
    pub wall_time: Duration,
    /// Set by adapters whose pass only means "no counterexample observed".
    #[serde(default)]
    pub coverage_limited: bool,
    /// Adapter output kept for timeouts and crashes.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub detail: Option<String>,
}

impl VerifierVerdict {
    pub fn pass() -> Self {
        VerifierVerdict {
            outcome: Outcome::Pass,
            failures: Vec::new(),
            wall_time: Duration::ZERO,
            coverage_limited: false,
            detail: None,
        }
    }

    /// A failing verdict; `failures` must be nonempty.
    pub fn fail(failures: Vec<FailureReport>) -> Self {
        assert!(!failures.is_empty(), "a failing verdict needs a failure report");
        VerifierVerdict {
            outcome: Outcome::Fail,
            failures,
            ..Self::pass()
        }
    }

    pub fn from_failures(failures: Vec<FailureReport>) -> Self {
        if failures.is_empty() {
            Self::pass()
        } else {
            Self::fail(failures)
        }
    }

    pub fn is_pass(&self) -> bool {
        self.outcome == Outcome::Pass
    }

    pub fn refuted_ids(&self) -> Vec<ClauseId> {
        let mut ids: Vec<ClauseId> = Vec::new();
        for f in &self.failures {
            if let Some(id) = &f.clause_id {
                if !ids.contains(id) {
                    ids.push(id.clone());
                }
            }
        }
        ids
    }
}

mod duration_ms {
    use std::time::Duration;

    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(d: &Duration, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_u64(d.as_millis() as u64)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Duration, D::Error> {
        Ok(Duration::from_millis(u64::deserialize(d)?))
    }
}

#[derive(Debug, Error)]
pub enum VerifierError {
    #[error("verifier command not found: {0}")]
    CommandNotFound(String),
    #[error("verifier unavailable: {0}")]
    Unavailable(String),
    #[error("mock verifier script exhausted after {0} call(s)")]
    ScriptExhausted(usize),
    #[error(transparent)]
    Instrument(#[from] InstrumentError),
    #[error("verifier I/O: {0}")]
    Io(#[from] std::io::Error),
}

/// One verification call over a whole annotated program.
///
/// Instances are used by one caller at a time.
pub trait Verifier {
    fn verify(&mut self, program: &AnnotatedProgram) -> Result<VerifierVerdict, VerifierError>;
}

impl<V: Verifier + ?Sized> Verifier for &mut V {
    fn verify(&mut self, program: &AnnotatedProgram) -> Result<VerifierVerdict, VerifierError> {
        (**self).verify(program)
    }
}

impl<V: Verifier + ?Sized> Verifier for Box<V> {
    fn verify(&mut self, program: &AnnotatedProgram) -> Result<VerifierVerdict, VerifierError> {
        (**self).verify(program)
    }
}
