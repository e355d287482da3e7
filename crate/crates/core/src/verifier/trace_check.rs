//! Runtime checking of clauses against recorded traces.
//!
//! A pass means only that no provided record falsifies any clause.
//!
//! Record selection per clause kind:
//! * `requires`: `pre` records of the method,
//! * `ensures`: `post` records of the method,
//! * `maintaining` / `decreases`: `iter` records of the loop.
//!
//! A `decreases` measure must be non-negative at every record and strictly
//! smaller than at the previous record of the same loop activation. An
//! activation ends at a `pre`/`post` record of the method, or when a record
//! of an enclosing loop of the same method appears. Nesting is inferred from
//! record order: a loop whose records start while another loop of the method
//! is active is nested inside it.

use std::collections::HashMap;
use std::time::Instant;

use num_bigint::BigInt;
use num_traits::Signed;

use super::{FailureCategory, FailureReport, FailuresPerCall, Verifier, VerifierError, VerifierVerdict};
use crate::spec::{eval_expr, AnnotatedProgram, ClauseKind, Phase, ProgramAnchor, SpecClause, TraceRecord, Value};

pub struct TraceVerifier {
    pub traces: Vec<TraceRecord>,
    pub failures_per_call: FailuresPerCall,
}

impl TraceVerifier {
    pub fn new(traces: Vec<TraceRecord>) -> Self {
        TraceVerifier {
            traces,
            failures_per_call: FailuresPerCall::All,
        }
    }
}

impl Verifier for TraceVerifier {
    fn verify(&mut self, program: &AnnotatedProgram) -> Result<VerifierVerdict, VerifierError> {
        let started = Instant::now();
        let mut verdict = verify_trace(program, &self.traces);
        self.failures_per_call.apply(&mut verdict.failures);
        verdict.wall_time = started.elapsed();
        Ok(verdict)
    }
}

/// Checks every clause of `program` against `traces`.
pub fn verify_trace(program: &AnnotatedProgram, traces: &[TraceRecord]) -> VerifierVerdict {
    let activations = loop_activations(traces);
    let failures: Vec<FailureReport> = program
        .clauses
        .iter()
        .filter_map(|c| check_clause(c, traces, &activations))
        .collect();
    let mut verdict = VerifierVerdict::from_failures(failures);
    verdict.coverage_limited = true;
    verdict
}

fn phase_for(kind: ClauseKind) -> Phase {
    match kind {
        ClauseKind::Requires => Phase::Pre,
        ClauseKind::Ensures => Phase::Post,
        ClauseKind::Maintaining | ClauseKind::Decreases => Phase::Iter,
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

fn describe(idx: usize, r: &TraceRecord) -> String {
    let phase = match r.phase {
        Phase::Pre => "pre",
        Phase::Post => "post",
        Phase::Iter => "iter",
    };
    format!("trace record {idx} ({} {phase})", r.anchor)
}

/// First falsifying record for `clause`, as a failure report.
fn check_clause(
    clause: &SpecClause,
    traces: &[TraceRecord],
    activations: &[Option<usize>],
) -> Option<FailureReport> {
    let phase = phase_for(clause.kind);
    let text = clause.render();
    let fail = |category, message: String| {
        Some(FailureReport::for_clause(clause.id.clone(), category, message))
    };
    let mut previous: Option<(usize, BigInt)> = None;
    for (idx, record) in traces.iter().enumerate() {
        if record.anchor != clause.anchor || record.phase != phase {
            continue;
        }
        let value = match eval_expr(&clause.expr, record) {
            Ok(v) => v,
            Err(e) => {
                return fail(
                    FailureCategory::TypeError,
                    format!("{}: cannot evaluate `{text}`: {e}", describe(idx, record)),
                )
            }
        };
        match (clause.kind, value) {
            (ClauseKind::Decreases, Value::Int(v)) => {
                if v.is_negative() {
                    return fail(
                        category_for(clause.kind),
                        format!("{}: measure of `{text}` is negative ({v})", describe(idx, record)),
                    );
                }
                let activation = activations[idx];
                if let Some((prev_act, prev)) = &previous {
                    if Some(*prev_act) == activation && v >= *prev {
                        return fail(
                            category_for(clause.kind),
                            format!(
                                "{}: measure of `{text}` does not decrease ({prev} -> {v})",
                                describe(idx, record)
                            ),
                        );
                    }
                }
                previous = activation.map(|a| (a, v));
            }
            (ClauseKind::Decreases, other) => {
                return fail(
                    FailureCategory::TypeError,
                    format!("{}: `{text}` evaluated to {other}, expected int", describe(idx, record)),
                )
            }
            (_, Value::Bool(true)) => {}
            (_, Value::Bool(false)) => {
                return fail(
                    category_for(clause.kind),
                    format!("{}: falsifies `{text}`", describe(idx, record)),
                )
            }
            (_, other) => {
                return fail(
                    FailureCategory::TypeError,
                    format!("{}: `{text}` evaluated to {other}, expected boolean", describe(idx, record)),
                )
            }
        }
    }
    None
}

/// Activation number for each `iter` record (`None` for other phases).
fn loop_activations(traces: &[TraceRecord]) -> Vec<Option<usize>> {
    // Per method: stack of (loop ordinal, activation id), outermost first.
    let mut stacks: HashMap<&str, Vec<(usize, usize)>> = HashMap::new();
    let mut next_id = 0usize;
    traces
        .iter()
        .map(|r| match (&r.anchor, r.phase) {
            (ProgramAnchor::Loop { method, ordinal }, Phase::Iter) => {
                let stack = stacks.entry(method.as_str()).or_default();
                if let Some(pos) = stack.iter().position(|(o, _)| o == ordinal) {
                    stack.truncate(pos + 1);
                    Some(stack[pos].1)
                } else {
                    let id = next_id;
                    next_id += 1;
                    stack.push((*ordinal, id));
                    Some(id)
                }
            }
            (anchor, Phase::Pre | Phase::Post) => {
                stacks.remove(anchor.method_name());
                None
            }
            _ => None,
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spec::parse_clause;
    use crate::verifier::Outcome;

    fn program(clauses: &[(&str, ProgramAnchor)]) -> AnnotatedProgram {
        AnnotatedProgram::from_anchored(
            "",
            clauses
                .iter()
                .map(|(t, a)| (a.clone(), parse_clause(t).unwrap())),
        )
    }

    fn m() -> ProgramAnchor {
        ProgramAnchor::Method("f".into())
    }

    fn lp(o: usize) -> ProgramAnchor {
        ProgramAnchor::Loop {
            method: "f".into(),
            ordinal: o,
        }
    }

    #[test]
    fn ensures_passes_on_nonnegative_results() {
        let p = program(&[("ensures \\result >= 0;", m())]);
        let traces = vec![
            TraceRecord::new(m(), Phase::Post).with_result(0),
            TraceRecord::new(m(), Phase::Post).with_result(5),
        ];
        let v = verify_trace(&p, &traces);
        assert_eq!(v.outcome, Outcome::Pass);
        assert!(v.coverage_limited);
    }

    #[test]
    fn invariant_falsified_cites_record() {
        let p = program(&[("maintaining i <= n;", lp(0))]);
        let traces = vec![
            TraceRecord::new(m(), Phase::Pre).bind("n", 5),
            TraceRecord::new(lp(0), Phase::Iter).bind("i", 7).bind("n", 5),
        ];
        let v = verify_trace(&p, &traces);
        assert_eq!(v.outcome, Outcome::Fail);
        assert_eq!(v.failures.len(), 1);
        assert_eq!(v.failures[0].clause_id, Some(p.clauses[0].id.clone()));
        assert_eq!(v.failures[0].category, FailureCategory::UnprovableInvariant);
        assert!(v.failures[0].raw_message.contains("trace record 1"));
    }

    #[test]
    fn eval_errors_are_type_errors() {
        let p = program(&[("requires y > 0;", m())]);
        let traces = vec![TraceRecord::new(m(), Phase::Pre).bind("x", 1)];
        let v = verify_trace(&p, &traces);
        assert_eq!(v.failures[0].category, FailureCategory::TypeError);
        assert!(v.failures[0].raw_message.contains("unbound variable `y`"));
    }

    #[test]
    fn nested_loop_activations() {
        // outer i = 0..2, inner j = i+1..2
        let mut traces = vec![TraceRecord::new(m(), Phase::Pre).bind("n", 2)];
        for i in 0..=2i64 {
            traces.push(TraceRecord::new(lp(0), Phase::Iter).bind("i", i).bind("n", 2));
            if i < 2 {
                for j in (i + 1)..=2 {
                    traces.push(TraceRecord::new(lp(1), Phase::Iter).bind("j", j).bind("n", 2));
                }
            }
        }
        let p = program(&[("decreases n - i;", lp(0)), ("decreases n - j;", lp(1))]);
        assert_eq!(verify_trace(&p, &traces).outcome, Outcome::Pass);

        let p = program(&[("decreases n - i - 1;", lp(0))]);
        let v = verify_trace(&p, &traces);
        assert!(v.failures[0].raw_message.contains("negative"));

        let p = program(&[("decreases n;", lp(1))]);
        let v = verify_trace(&p, &traces);
        assert!(v.failures[0].raw_message.contains("does not decrease"));
    }

    #[test]
    fn activation_resets_at_method_boundaries() {
        let traces = vec![
            TraceRecord::new(m(), Phase::Pre),
            TraceRecord::new(lp(0), Phase::Iter).bind("k", 1),
            TraceRecord::new(lp(0), Phase::Iter).bind("k", 0),
            TraceRecord::new(m(), Phase::Post),
            TraceRecord::new(m(), Phase::Pre),
            TraceRecord::new(lp(0), Phase::Iter).bind("k", 1),
        ];
        let p = program(&[("decreases k;", lp(0))]);
        assert_eq!(verify_trace(&p, &traces).outcome, Outcome::Pass);
    }

    #[test]
    fn failures_per_call_one() {
        let p = program(&[("requires x > 0;", m()), ("requires x > 1;", m())]);
        let traces = vec![TraceRecord::new(m(), Phase::Pre).bind("x", 0)];
        let mut all = TraceVerifier::new(traces.clone());
        assert_eq!(all.verify(&p).unwrap().failures.len(), 2);
        let mut one = TraceVerifier::new(traces);
        one.failures_per_call = FailuresPerCall::One;
        assert_eq!(one.verify(&p).unwrap().failures.len(), 1);
    }
}
