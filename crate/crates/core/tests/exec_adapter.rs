//! The external-command adapter against small shell stubs.

use std::time::{Duration, Instant};

use jmlrepair_core::verifier::{ExecConfig, ExecVerifier, VerifierError};
use jmlrepair_core::{extract_annotations, FailureCategory, Outcome, Verifier};

const SRC: &str = "class A {
    //@ requires x > 0;
    //@ ensures \\result > 0;
    int f(int x) {
        int y = x;
        //@ maintaining y >= 0;
        while (y > 0) {
            y--;
        }
        return x;
    }
}
";

fn verifier(script: &str) -> ExecVerifier {
    let command = format!("sh -c '{script}' stub {{file}}");
    ExecVerifier::new(ExecConfig::new(command))
}

#[test]
fn exit_zero_is_pass_and_sees_instrumented_file() {
    let p = extract_annotations(SRC).unwrap();
    let mut v = verifier(r#"grep -q "//@ maintaining y >= 0;" "$1" && test "$(basename "$1")" = A.java"#);
    let verdict = v.verify(&p).unwrap();
    assert_eq!(verdict.outcome, Outcome::Pass, "{:?}", verdict.detail);
    assert!(verdict.failures.is_empty());
    assert!(!verdict.coverage_limited);
}

#[test]
fn diagnostic_is_attributed_to_its_clause() {
    let p = extract_annotations(SRC).unwrap();
    let mut v = verifier(
        r#"l=$(grep -n "//@ ensures" "$1" | cut -d: -f1); echo "A.java:$l: verify: The prover cannot establish an assertion (Postcondition) in method f"; exit 1"#,
    );
    let verdict = v.verify(&p).unwrap();
    assert_eq!(verdict.outcome, Outcome::Fail);
    assert_eq!(verdict.failures.len(), 1);
    let f = &verdict.failures[0];
    assert_eq!(f.clause_id.as_ref().unwrap().as_str(), "method:f/ensures/0");
    assert_eq!(f.category, FailureCategory::UnprovablePostcondition);
}

#[test]
fn only_first_failure_by_default() {
    let p = extract_annotations(SRC).unwrap();
    let mut v = verifier(
        r#"for k in requires maintaining; do l=$(grep -n "//@ $k" "$1" | cut -d: -f1); echo "A.java:$l: verify: The prover cannot establish an assertion in method f"; done; exit 1"#,
    );
    let verdict = v.verify(&p).unwrap();
    assert_eq!(verdict.failures.len(), 1);
    assert_eq!(verdict.failures[0].clause_id.as_ref().unwrap().as_str(), "method:f/requires/0");
}

#[test]
fn slow_command_times_out() {
    let p = extract_annotations(SRC).unwrap();
    let mut cfg = ExecConfig::new("sh -c 'sleep 5' stub {file}");
    cfg.timeout = Duration::from_secs(1);
    let started = Instant::now();
    let verdict = ExecVerifier::new(cfg).verify(&p).unwrap();
    assert_eq!(verdict.outcome, Outcome::Timeout);
    assert!(started.elapsed() < Duration::from_secs(4));
}

#[test]
fn nonzero_exit_without_diagnostics_is_crash() {
    let p = extract_annotations(SRC).unwrap();
    let verdict = verifier("echo something broke >&2; exit 3").verify(&p).unwrap();
    assert_eq!(verdict.outcome, Outcome::Crash);
    assert!(verdict.detail.unwrap().contains("something broke"));
}

#[test]
fn missing_command_is_reported() {
    let p = extract_annotations(SRC).unwrap();
    let err = ExecVerifier::new(ExecConfig::new("definitely-not-a-verifier-xyz"))
        .verify(&p)
        .unwrap_err();
    assert!(matches!(err, VerifierError::CommandNotFound(c) if c == "definitely-not-a-verifier-xyz"));
}
