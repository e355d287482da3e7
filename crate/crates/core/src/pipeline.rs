//! End-to-end runs: conversation first, mutation repair on what it leaves.

use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;
use std::time::{Duration, Instant};

use crate::config::{AdapterKind, ClientKind, ConfigError, PipelineConfig};
use crate::llm::{
    build_initial_prompt, bundled_corpus, load_corpus, run_conversation, ChatClient, ChatScript,
    ConversationOutcome, GuidanceSet, HttpClient, ScriptedClient, Shot, DEFAULT_SYSTEM_ROLE,
};
use crate::repair::{mutation_based_gen, RepairRun, Strategy};
use crate::report::{FamilyStats, PipelineOutcome, ProgramReport, SCHEMA_VERSION};
use crate::spec::trace::read_trace_file;
use crate::spec::AnnotatedProgram;
use crate::verifier::{
    ExecConfig, ExecVerifier, MockScript, MockVerifier, RuleSet, TraceVerifier, Verifier,
};

/// Shared, read-only inputs of a run.
pub struct PipelineContext {
    pub config: PipelineConfig,
    pub corpus: Vec<Shot>,
    pub guidance: GuidanceSet,
}

impl PipelineContext {
    pub fn new(config: PipelineConfig) -> Result<Self, ConfigError> {
        let corpus = match &config.paths.corpus {
            Some(dir) => load_corpus(dir).map_err(|e| ConfigError::Invalid(format!("paths.corpus: {e}")))?,
            None => bundled_corpus(),
        };
        let guidance = match &config.paths.guidance {
            Some(p) => {
                let text = std::fs::read_to_string(p).map_err(|source| ConfigError::Io {
                    path: p.clone(),
                    source,
                })?;
                GuidanceSet::from_toml(&text).map_err(|e| ConfigError::Invalid(format!("paths.guidance: {e}")))?
            }
            None => GuidanceSet::default(),
        };
        Ok(PipelineContext {
            config,
            corpus,
            guidance,
        })
    }
}

/// A program to run: a display name, its text, and where it came from
/// (used to find per-program trace and chat fixtures).
#[derive(Debug, Clone)]
pub struct ProgramInput {
    pub name: String,
    pub text: String,
    pub path: Option<PathBuf>,
}

impl ProgramInput {
    pub fn from_path(path: &Path) -> std::io::Result<Self> {
        Ok(ProgramInput {
            name: path.file_name().map_or_else(|| path.display().to_string(), |n| n.to_string_lossy().into()),
            text: std::fs::read_to_string(path)?,
            path: Some(path.to_path_buf()),
        })
    }

    fn sibling(&self, suffix: &str) -> Option<PathBuf> {
        let p = self.path.as_ref()?;
        let stem = p.file_stem()?.to_string_lossy();
        Some(p.with_file_name(format!("{stem}{suffix}")))
    }
}

/// Builds the configured verifier for one program.
pub fn make_verifier(cfg: &PipelineConfig, program: &ProgramInput) -> Result<Box<dyn Verifier>, String> {
    let v = &cfg.verifier;
    Ok(match v.adapter {
        AdapterKind::Exec => {
            let mut ec = ExecConfig::new(v.command.clone().ok_or("verifier.command is not set")?);
            ec.timeout = Duration::from_secs(v.timeout_seconds);
            ec.failures_per_call = v.failures_per_call();
            if let Some(rules) = &v.rules {
                ec.rules = RuleSet::from_specs(rules).map_err(|e| e.to_string())?;
            }
            Box::new(ExecVerifier::new(ec))
        }
        AdapterKind::Trace => {
            let path = v
                .trace_file
                .clone()
                .or_else(|| program.sibling(".trace.jsonl"))
                .ok_or("no trace file configured for the trace adapter")?;
            let traces = read_trace_file(&path).map_err(|e| format!("{}: {e}", path.display()))?;
            let mut tv = TraceVerifier::new(traces);
            tv.failures_per_call = v.failures_per_call();
            Box::new(tv)
        }
        AdapterKind::Mock => Box::new(MockVerifier::new(match &v.accept {
            None => MockScript::AcceptAll,
            Some(truth) => MockScript::Accept {
                truth: truth.iter().cloned().collect(),
                failures_per_call: v.failures_per_call(),
            },
        })),
    })
}

/// Reads a chat fixture: one script, or a list with one script per attempt.
pub fn load_chat_scripts(path: &Path) -> Result<Vec<ChatScript>, String> {
    let text = std::fs::read_to_string(path).map_err(|e| format!("{}: {e}", path.display()))?;
    if let Ok(one) = serde_json::from_str::<ChatScript>(&text) {
        return Ok(vec![one]);
    }
    let many: Vec<ChatScript> = serde_json::from_str(&text).map_err(|e| format!("{}: {e}", path.display()))?;
    if many.is_empty() {
        return Err(format!("{}: no chat scripts", path.display()));
    }
    Ok(many)
}

/// Builds the configured chat client for one attempt.
pub fn make_client(cfg: &PipelineConfig, program: &ProgramInput, attempt: usize) -> Result<Box<dyn ChatClient>, String> {
    match cfg.client.kind {
        ClientKind::Http => Ok(Box::new(HttpClient::new(cfg.endpoint.clone()).map_err(|e| e.to_string())?)),
        ClientKind::Scripted => {
            let path = cfg
                .client
                .script
                .clone()
                .or_else(|| program.sibling(".chat.json"))
                .ok_or("no chat script configured for the scripted client")?;
            let scripts = load_chat_scripts(&path)?;
            Ok(Box::new(ScriptedClient::new(scripts[attempt % scripts.len()].clone())))
        }
    }
}

fn seeded(seed: Option<u64>, attempt: usize) -> Option<u64> {
    seed.map(|s| s.wrapping_add(attempt as u64))
}

fn family_stats(run: &RepairRun) -> Vec<FamilyStats> {
    let s = &run.state;
    s.templates
        .iter()
        .map(|t| {
            let f = &s.families[&t.id];
            FamilyStats {
                template_id: t.id.clone(),
                template: t.render(),
                size: s.initial_sizes[&t.id],
                raw_combinations: f.raw_combinations,
                truncated: f.truncated,
                merged_duplicates: f.merged_duplicates,
            }
        })
        .collect()
}

/// One attempt on one program. Never panics on bad input; errors become
/// `aborted` entries.
pub fn run_pipeline(program: &ProgramInput, ctx: &PipelineContext, attempt: usize) -> ProgramReport {
    let started = Instant::now();
    let mut report = ProgramReport {
        schema_version: SCHEMA_VERSION,
        program: program.name.clone(),
        attempt,
        outcome: PipelineOutcome::Aborted,
        rounds: 0,
        conversation_verifier_calls: 0,
        repair_verifier_calls: 0,
        families: Vec::new(),
        refuted_history: Vec::new(),
        dropped: Vec::new(),
        thrash: Vec::new(),
        final_clauses: Vec::new(),
        coverage_limited: false,
        wall_time_ms: None,
        error: None,
    };
    run_phases(program, ctx, attempt, &mut report);
    if ctx.config.timing() {
        report.wall_time_ms = Some(started.elapsed().as_millis() as u64);
    }
    report
}

fn run_phases(program: &ProgramInput, ctx: &PipelineContext, attempt: usize, report: &mut ProgramReport) {
    let cfg = &ctx.config;
    let abort = |report: &mut ProgramReport, e: String| {
        report.outcome = PipelineOutcome::Aborted;
        report.error = Some(e);
    };
    let mut verifier = match make_verifier(cfg, program) {
        Ok(v) => v,
        Err(e) => return abort(report, e),
    };
    let mut client = match make_client(cfg, program, attempt) {
        Ok(c) => c,
        Err(e) => return abort(report, e),
    };
    let system_role = cfg.endpoint.system_role.as_deref().unwrap_or(DEFAULT_SYSTEM_ROLE);
    let bundle = match build_initial_prompt(
        &program.text,
        &ctx.corpus,
        cfg.endpoint.shots,
        seeded(cfg.endpoint.shot_seed, attempt),
        system_role,
    ) {
        Ok(b) => b,
        Err(e) => return abort(report, e.to_string()),
    };

    let conv = run_conversation(&bundle, &cfg.endpoint, &ctx.guidance, &mut verifier, &mut client);
    report.rounds = conv.transcript.rounds.len();
    report.conversation_verifier_calls = conv.transcript.rounds.iter().filter(|r| r.verdict.is_some()).count();
    let coverage = cfg.verifier.adapter == AdapterKind::Trace;

    let finish = |report: &mut ProgramReport, p: &AnnotatedProgram, outcome| {
        report.final_clauses = p.rendered_clauses();
        report.outcome = if p.clauses.is_empty() {
            PipelineOutcome::Failed
        } else {
            outcome
        };
        report.coverage_limited = coverage && report.outcome.is_pass();
    };

    match (&conv.transcript.outcome, &conv.verified) {
        (ConversationOutcome::Verified, Some(p)) => {
            return finish(report, p, PipelineOutcome::VerifiedByConversation);
        }
        (ConversationOutcome::Aborted { error }, _) => return abort(report, error.clone()),
        _ => {}
    }
    let Some(templates) = conv.templates().cloned() else {
        report.outcome = PipelineOutcome::Failed;
        return;
    };

    let mut rc = cfg.repair_config();
    if let Strategy::Random { seed } = rc.strategy {
        rc.strategy = Strategy::Random {
            seed: seed.wrapping_add(attempt as u64),
        };
    }
    let run = mutation_based_gen(&templates, &rc, &mut verifier);
    report.repair_verifier_calls = run.state.verifier_calls;
    report.families = family_stats(&run);
    report.refuted_history = run.state.refuted_history.clone();
    report.dropped = run.state.dropped();
    report.thrash = run.state.thrash.clone();
    match &run.result {
        Ok(p) => finish(report, p, PipelineOutcome::VerifiedByMutation),
        Err(e) => abort(report, e.to_string()),
    }
}

/// Every attempt of every program, run on `config.run.workers` threads.
/// Entries come back ordered by program, then attempt.
pub fn run_batch(programs: &[ProgramInput], ctx: &PipelineContext) -> Vec<ProgramReport> {
    let attempts = ctx.config.run.attempts;
    let jobs: Vec<(usize, usize)> = (0..programs.len())
        .flat_map(|p| (0..attempts).map(move |a| (p, a)))
        .collect();
    let results: Mutex<Vec<Option<ProgramReport>>> = Mutex::new(vec![None; jobs.len()]);
    let next = AtomicUsize::new(0);
    let workers = ctx.config.run.workers.min(jobs.len()).max(1);
    std::thread::scope(|s| {
        for _ in 0..workers {
            s.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::SeqCst);
                let Some(&(p, a)) = jobs.get(i) else { break };
                let r = run_pipeline(&programs[p], ctx, a);
                results.lock().expect("no worker panics while holding the lock")[i] = Some(r);
            });
        }
    });
    results
        .into_inner()
        .expect("workers finished")
        .into_iter()
        .map(|r| r.expect("every job ran"))
        .collect()
}
