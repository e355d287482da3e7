//! Scripted verifier for tests and replayable fixtures.

use std::collections::{BTreeSet, VecDeque};

use serde::{Deserialize, Serialize};

use super::{FailureCategory, FailureReport, FailuresPerCall, Verifier, VerifierError, VerifierVerdict};
use crate::spec::{parse_clause, parse_expr, AnnotatedProgram, ClauseKind};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MockScript {
    /// Every clause passes.
    AcceptAll,
    /// A clause passes iff its canonical text is in the set. Entries may be
    /// full clauses (`ensures x > 0;`) or bare expressions (`x > 0`), which
    /// then match a clause of any kind.
    Accept {
        truth: BTreeSet<String>,
        #[serde(default)]
        failures_per_call: FailuresPerCall,
    },
    /// Verdicts returned in order, one per call.
    Verdicts(Vec<VerifierVerdict>),
}

pub struct MockVerifier {
    script: MockScript,
    truth: BTreeSet<String>,
    queue: VecDeque<VerifierVerdict>,
    /// Rendered clauses of every program seen, in call order.
    pub calls: Vec<Vec<String>>,
}

impl MockVerifier {
    pub fn new(script: MockScript) -> Self {
        let truth = match &script {
            MockScript::Accept { truth, .. } => truth.iter().map(|t| canonical(t)).collect(),
            _ => BTreeSet::new(),
        };
        let queue = match &script {
            MockScript::Verdicts(v) => v.iter().cloned().collect(),
            _ => VecDeque::new(),
        };
        MockVerifier {
            script,
            truth,
            queue,
            calls: Vec::new(),
        }
    }

    pub fn accepting<I, S>(truth: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        Self::new(MockScript::Accept {
            truth: truth.into_iter().map(Into::into).collect(),
            failures_per_call: FailuresPerCall::All,
        })
    }

    pub fn rejecting_all() -> Self {
        Self::accepting(Vec::<String>::new())
    }

    pub fn call_count(&self) -> usize {
        self.calls.len()
    }
}

/// Parsed-and-rendered form of a truth entry, so spacing differences do not matter.
fn canonical(text: &str) -> String {
    if let Ok(c) = parse_clause(text) {
        return c.render();
    }
    match parse_expr(text.trim().trim_end_matches(';')) {
        Ok(e) => e.render(),
        Err(_) => text.trim().to_string(),
    }
}

fn category_for(kind: ClauseKind) -> FailureCategory {
    match kind {
        ClauseKind::Requires => FailureCategory::UnprovablePrecondition,
        ClauseKind::Ensures => FailureCategory::UnprovablePostcondition,
        ClauseKind::Maintaining => FailureCategory::UnprovableInvariant,
        ClauseKind::Decreases => FailureCategory::NonterminationDecreases,
    }
}

impl Verifier for MockVerifier {
    fn verify(&mut self, program: &AnnotatedProgram) -> Result<VerifierVerdict, VerifierError> {
        self.calls.push(program.rendered_clauses());
        match &self.script {
            MockScript::AcceptAll => Ok(VerifierVerdict::pass()),
            MockScript::Accept {
                failures_per_call, ..
            } => {
                let mut failures: Vec<FailureReport> = program
                    .clauses
                    .iter()
                    .filter(|c| {
                        !self.truth.contains(&c.render()) && !self.truth.contains(&c.expr.render())
                    })
                    .map(|c| {
                        FailureReport::for_clause(
                            c.id.clone(),
                            category_for(c.kind),
                            format!("mock: rejected `{}`", c.render()),
                        )
                    })
                    .collect();
                failures_per_call.apply(&mut failures);
                Ok(VerifierVerdict::from_failures(failures))
            }
            MockScript::Verdicts(_) => self
                .queue
                .pop_front()
                .ok_or(VerifierError::ScriptExhausted(self.calls.len() - 1)),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spec::{ProgramAnchor, SpecClause};
    use crate::verifier::Outcome;

    fn prog(texts: &[&str]) -> AnnotatedProgram {
        AnnotatedProgram::from_anchored(
            "",
            texts
                .iter()
                .map(|t| (ProgramAnchor::Method("f".into()), parse_clause(t).unwrap())),
        )
    }

    #[test]
    fn truth_set_all_present() {
        let p = prog(&["requires x > 0;", "ensures \\result >= x;"]);
        let mut v = MockVerifier::accepting(["x>0", "ensures \\result >= x;"]);
        assert!(v.verify(&p).unwrap().is_pass());
        assert_eq!(v.call_count(), 1);
    }

    #[test]
    fn truth_set_missing_one() {
        let p = prog(&["requires x > 0;", "ensures \\result >= x;"]);
        let mut v = MockVerifier::accepting(["x > 0"]);
        let verdict = v.verify(&p).unwrap();
        assert_eq!(verdict.outcome, Outcome::Fail);
        assert_eq!(verdict.refuted_ids(), vec![p.clauses[1].id.clone()]);
        assert_eq!(verdict.failures[0].category, FailureCategory::UnprovablePostcondition);
    }

    #[test]
    fn verdict_list_in_order_then_exhausted() {
        let p = prog(&["requires x > 0;"]);
        let c1: &SpecClause = &p.clauses[0];
        let fail = VerifierVerdict::fail(vec![FailureReport::for_clause(
            c1.id.clone(),
            FailureCategory::UnprovablePrecondition,
            "nope",
        )]);
        let mut v = MockVerifier::new(MockScript::Verdicts(vec![fail.clone(), VerifierVerdict::pass()]));
        assert_eq!(v.verify(&p).unwrap(), fail);
        assert!(v.verify(&p).unwrap().is_pass());
        assert!(matches!(v.verify(&p), Err(VerifierError::ScriptExhausted(2))));
    }

    #[test]
    fn script_round_trips_through_json() {
        let s = MockScript::Accept {
            truth: ["a < b".to_string()].into_iter().collect(),
            failures_per_call: FailuresPerCall::One,
        };
        let text = serde_json::to_string(&s).unwrap();
        assert_eq!(serde_json::from_str::<MockScript>(&text).unwrap(), s);
    }
}
