//! Runs an external checker on the instrumented program.

use std::io::Read;
use std::process::{Command, Stdio};
use std::sync::OnceLock;
use std::time::{Duration, Instant};

use regex::Regex;
use wait_timeout::ChildExt;

use super::classify::{classify_failure, RuleSet};
use super::{
    FailureCategory, FailureReport, FailuresPerCall, Outcome, Verifier, VerifierError,
    VerifierVerdict,
};
use crate::spec::{instrument_with_lines, AnnotatedProgram, ClauseKind, Instrumented};

pub const DEFAULT_TIMEOUT: Duration = Duration::from_secs(1800);

#[derive(Debug, Clone)]
pub struct ExecConfig {
    /// Command line; `{file}` is replaced by the path of the instrumented
    /// program. Without a placeholder the path is appended.
    pub command: String,
    pub timeout: Duration,
    pub failures_per_call: FailuresPerCall,
    pub rules: RuleSet,
    /// File name for the program; defaults to `<first class name>.java`.
    pub file_name: Option<String>,
}

impl ExecConfig {
    pub fn new(command: impl Into<String>) -> Self {
        ExecConfig {
            command: command.into(),
            timeout: DEFAULT_TIMEOUT,
            failures_per_call: FailuresPerCall::One,
            rules: RuleSet::default(),
            file_name: None,
        }
    }
}

pub struct ExecVerifier {
    pub config: ExecConfig,
}

impl ExecVerifier {
    pub fn new(config: ExecConfig) -> Self {
        ExecVerifier { config }
    }
}

impl Verifier for ExecVerifier {
    fn verify(&mut self, program: &AnnotatedProgram) -> Result<VerifierVerdict, VerifierError> {
        verify_exec(program, &self.config)
    }
}

fn diagnostic_re() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| Regex::new(r"^\s*([^:\s][^:]*\.\w+):(\d+):").expect("valid regex"))
}

fn secondary_ref_re() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| Regex::new(r"\(\w+:\s*[^:\s()]+:(\d+):").expect("valid regex"))
}

fn class_name(source: &str) -> Option<&str> {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| Regex::new(r"(?m)^\s*(?:\w+\s+)*(?:class|interface|enum)\s+(\w+)").expect("valid regex"))
        .captures(source)
        .and_then(|c| c.get(1))
        .map(|m| m.as_str())
}

/// Writes `program` (instrumented) to a temporary file and runs the command.
///
/// Exit 0 with no classified diagnostics is a pass. Diagnostics of the form
/// `File.java:LINE: message` become failures attributed to the clause they
/// reference, or else to the nearest clause above `LINE`.
pub fn verify_exec(program: &AnnotatedProgram, cfg: &ExecConfig) -> Result<VerifierVerdict, VerifierError> {
    let instrumented = instrument_with_lines(program)?;
    let dir = tempfile::tempdir()?;
    let file_name = cfg
        .file_name
        .clone()
        .or_else(|| class_name(&program.source).map(|c| format!("{c}.java")))
        .unwrap_or_else(|| "Main.java".to_string());
    let path = dir.path().join(file_name);
    std::fs::write(&path, &instrumented.text)?;

    let path_str = path.to_string_lossy().to_string();
    let mut argv = shlex::split(&cfg.command)
        .filter(|a| !a.is_empty())
        .ok_or_else(|| VerifierError::Unavailable(format!("cannot split command `{}`", cfg.command)))?;
    if argv.iter().any(|a| a.contains("{file}")) {
        for a in &mut argv {
            *a = a.replace("{file}", &path_str);
        }
    } else {
        argv.push(path_str);
    }

    let started = Instant::now();
    let mut child = match Command::new(&argv[0])
        .args(&argv[1..])
        .current_dir(dir.path())
        .stdin(Stdio::null())
        .stdout(Stdio::piped())
        .stderr(Stdio::piped())
        .spawn()
    {
        Ok(child) => child,
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => {
            return Err(VerifierError::CommandNotFound(argv[0].clone()))
        }
        Err(e) => return Err(e.into()),
    };

    let stdout = child.stdout.take();
    let stderr = child.stderr.take();
    let drain = |pipe: Option<Box<dyn Read + Send>>| {
        std::thread::spawn(move || {
            let mut buf = Vec::new();
            if let Some(mut p) = pipe {
                let _ = p.read_to_end(&mut buf);
            }
            String::from_utf8_lossy(&buf).into_owned()
        })
    };
    let out_handle = drain(stdout.map(|p| Box::new(p) as Box<dyn Read + Send>));
    let err_handle = drain(stderr.map(|p| Box::new(p) as Box<dyn Read + Send>));

    let status = child.wait_timeout(cfg.timeout)?;
    let Some(status) = status else {
        let _ = child.kill();
        let _ = child.wait();
        // Grandchildren may hold the pipes open; do not wait for the readers.
        return Ok(VerifierVerdict {
            outcome: Outcome::Timeout,
            failures: Vec::new(),
            wall_time: started.elapsed(),
            coverage_limited: false,
            detail: Some(format!("timed out after {:?}", cfg.timeout)),
        });
    };
    let output = format!(
        "{}{}",
        out_handle.join().unwrap_or_default(),
        err_handle.join().unwrap_or_default()
    );
    let wall_time = started.elapsed();

    let mut failures = parse_diagnostics(&output, &instrumented, program, &cfg.rules);
    let nonzero = !status.success();
    if !nonzero {
        failures.retain(|f| f.category != FailureCategory::Unknown);
    }
    cfg.failures_per_call.apply(&mut failures);

    let (outcome, detail) = match (failures.is_empty(), status.code()) {
        (false, _) => (Outcome::Fail, None),
        (true, Some(0)) => (Outcome::Pass, None),
        (true, _) => (Outcome::Crash, Some(output)),
    };
    Ok(VerifierVerdict {
        outcome,
        failures,
        wall_time,
        coverage_limited: false,
        detail,
    })
}

/// Splits checker output into diagnostics; continuation lines (source echo,
/// caret markers) stay with the diagnostic above them.
pub fn parse_diagnostics(
    output: &str,
    instrumented: &Instrumented,
    program: &AnnotatedProgram,
    rules: &RuleSet,
) -> Vec<FailureReport> {
    let mut blocks: Vec<(usize, Vec<&str>)> = Vec::new();
    for line in output.lines() {
        if let Some(c) = diagnostic_re().captures(line) {
            let n: usize = c[2].parse().unwrap_or(0);
            blocks.push((n, vec![line]));
        } else if let Some((_, lines)) = blocks.last_mut() {
            if !line.trim().is_empty() && lines.len() < 4 {
                lines.push(line);
            }
        }
    }
    blocks
        .into_iter()
        .map(|(line, lines)| {
            let raw_message = lines.join("\n");
            let category = classify_failure(&raw_message, rules);
            let clause_id = attribute(&raw_message, line, category, instrumented, program);
            let category = match (&clause_id, category) {
                (None, FailureCategory::SyntaxError) => FailureCategory::SyntaxError,
                (None, _) => FailureCategory::Unknown,
                (Some(_), c) => c,
            };
            FailureReport {
                clause_id,
                raw_message,
                category,
                source_line: Some(line),
            }
        })
        .collect()
}

fn expected_kind(category: FailureCategory) -> Option<ClauseKind> {
    match category {
        FailureCategory::UnprovablePostcondition => Some(ClauseKind::Ensures),
        FailureCategory::UnprovablePrecondition => Some(ClauseKind::Requires),
        FailureCategory::UnprovableInvariant => Some(ClauseKind::Maintaining),
        FailureCategory::NonterminationDecreases => Some(ClauseKind::Decreases),
        _ => None,
    }
}

fn attribute(
    message: &str,
    line: usize,
    category: FailureCategory,
    instrumented: &Instrumented,
    program: &AnnotatedProgram,
) -> Option<crate::spec::ClauseId> {
    if let Some(id) = instrumented.clause_at(line) {
        return Some(id.clone());
    }
    for c in secondary_ref_re().captures_iter(message) {
        if let Some(id) = c[1].parse().ok().and_then(|l| instrumented.clause_at(l)) {
            return Some(id.clone());
        }
    }
    if let Some(kind) = expected_kind(category) {
        let matching = instrumented
            .clause_lines
            .iter()
            .filter(|(l, id)| *l <= line && program.clause(id).is_some_and(|c| c.kind == kind))
            .max_by_key(|(l, _)| *l);
        if let Some((_, id)) = matching {
            return Some(id.clone());
        }
    }
    instrumented.clause_above(line).cloned()
}
