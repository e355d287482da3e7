//! `jmlrepair`: generate, repair and check JML specifications.
//!
//! Exit status: 0 on success, 1 when the run itself fails (a program is not
//! verified, a verdict is not a pass), 2 on usage, config or input errors.

use std::collections::BTreeSet;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use serde_json::json;

use jmlrepair_core::config::PipelineConfig;
use jmlrepair_core::mutation::{enumerate_variants, score_variant, MutationKind};
use jmlrepair_core::pipeline::{make_verifier, run_batch, PipelineContext, ProgramInput};
use jmlrepair_core::repair::{mutation_based_gen, Strategy};
use jmlrepair_core::report::{aggregate, read_dir, render_jsonl, render_table};
use jmlrepair_core::spec::trace::read_trace_file;
use jmlrepair_core::spec::{extract_annotations, parse_clause, AnnotatedProgram, ClauseId, ProgramAnchor, SpecClause};
use jmlrepair_core::verifier::{verify_trace, VerifierVerdict};

#[derive(Parser)]
#[command(name = "jmlrepair", version, about = "Generate and repair JML specifications")]
struct Cli {
    /// Emit structured JSON records instead of text.
    #[arg(long, global = true)]
    json: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum StrategyArg {
    Heuristic,
    Random,
}

#[derive(Subcommand)]
enum Command {
    /// Run the full pipeline (conversation, then mutation repair) on programs.
    Generate {
        files: Vec<PathBuf>,
        #[arg(long)]
        config: Option<PathBuf>,
        /// Attempts per program, for success-probability runs.
        #[arg(long)]
        attempts: Option<usize>,
        #[arg(long, value_enum)]
        strategy: Option<StrategyArg>,
        #[arg(long)]
        seed: Option<u64>,
        /// Directory for report.jsonl and summary.txt.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Print the scored mutation family of one clause.
    Mutate {
        clause: String,
        #[arg(long)]
        config: Option<PathBuf>,
    },
    /// Repair the clauses of an annotated program (mutation phase only).
    Repair {
        file: PathBuf,
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long, value_enum)]
        strategy: Option<StrategyArg>,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Run the configured verifier once on an annotated program.
    Verify {
        file: PathBuf,
        #[arg(long)]
        config: Option<PathBuf>,
    },
    /// Check an annotated program against a trace file, clause by clause.
    Eval { file: PathBuf, traces: PathBuf },
    /// Aggregate the JSONL reports in a directory.
    Report { dir: PathBuf },
}

enum CliError {
    Usage(String),
    Domain(String),
}

type CliResult = Result<(), CliError>;

fn usage(e: impl std::fmt::Display) -> CliError {
    CliError::Usage(e.to_string())
}

fn load_config(path: Option<&Path>) -> Result<PipelineConfig, CliError> {
    match path {
        Some(p) => PipelineConfig::load(p).map_err(usage),
        None => Ok(PipelineConfig::default()),
    }
}

fn apply_strategy(cfg: &mut PipelineConfig, strategy: Option<StrategyArg>, seed: Option<u64>) {
    match (strategy, seed) {
        (Some(StrategyArg::Heuristic), _) => cfg.strategy = Strategy::Heuristic,
        (Some(StrategyArg::Random), s) => {
            let current = match cfg.strategy {
                Strategy::Random { seed } => seed,
                Strategy::Heuristic => 0,
            };
            cfg.strategy = Strategy::Random {
                seed: s.unwrap_or(current),
            };
        }
        (None, Some(s)) => {
            if let Strategy::Random { seed } = &mut cfg.strategy {
                *seed = s;
            }
        }
        (None, None) => {}
    }
}

fn read_annotated(path: &Path) -> Result<AnnotatedProgram, CliError> {
    let text = std::fs::read_to_string(path).map_err(|e| usage(format!("{}: {e}", path.display())))?;
    extract_annotations(&text).map_err(|e| {
        let lines: Vec<String> = e.0.iter().map(|a| format!("{}: {a}", path.display())).collect();
        usage(lines.join("\n"))
    })
}

fn print_json(v: &serde_json::Value) {
    println!("{v}");
}

fn verdict_text(v: &VerifierVerdict) -> String {
    let mut out = format!("{:?}", v.outcome).to_lowercase();
    if v.coverage_limited && v.is_pass() {
        out.push_str(" (no counterexample in the traces)");
    }
    for f in &v.failures {
        let who = f.clause_id.as_ref().map_or("-".to_string(), ClauseId::to_string);
        out.push_str(&format!("\n  {who} [{:?}] {}", f.category, f.raw_message.replace('\n', "\n    ")));
    }
    if let Some(d) = &v.detail {
        out.push_str(&format!("\n  {}", d.trim()));
    }
    out
}

fn cmd_generate(
    json_out: bool,
    files: &[PathBuf],
    config: Option<&Path>,
    attempts: Option<usize>,
    strategy: Option<StrategyArg>,
    seed: Option<u64>,
    out: Option<&Path>,
) -> CliResult {
    if files.is_empty() {
        return Err(usage("generate needs at least one program file"));
    }
    let mut cfg = load_config(config)?;
    if let Some(n) = attempts {
        if n == 0 {
            return Err(usage("--attempts must be at least 1"));
        }
        cfg.run.attempts = n;
    }
    apply_strategy(&mut cfg, strategy, seed);
    let out_dir = out.map(Path::to_path_buf).or_else(|| cfg.paths.output_dir.clone());
    let inputs = files
        .iter()
        .map(|f| ProgramInput::from_path(f).map_err(|e| usage(format!("{}: {e}", f.display()))))
        .collect::<Result<Vec<_>, _>>()?;
    let ctx = PipelineContext::new(cfg).map_err(usage)?;
    let entries = run_batch(&inputs, &ctx);
    let summary = aggregate(&entries);

    if let Some(dir) = out_dir {
        std::fs::create_dir_all(&dir).map_err(|e| usage(format!("{}: {e}", dir.display())))?;
        std::fs::write(dir.join("report.jsonl"), render_jsonl(&entries))
            .and_then(|_| std::fs::write(dir.join("summary.txt"), render_table(&summary)))
            .map_err(|e| usage(format!("{}: {e}", dir.display())))?;
    }
    if json_out {
        print!("{}", render_jsonl(&entries));
    } else {
        for e in &entries {
            let mut line = format!(
                "{} #{}: {} (rounds {}, verifier calls {} + {})",
                e.program,
                e.attempt,
                e.outcome.as_str(),
                e.rounds,
                e.conversation_verifier_calls,
                e.repair_verifier_calls
            );
            if let Some(err) = &e.error {
                line.push_str(&format!(": {err}"));
            }
            println!("{line}");
            for c in &e.final_clauses {
                println!("    {c}");
            }
        }
        println!();
        print!("{}", render_table(&summary));
    }
    if summary.number_of_passes == summary.programs {
        Ok(())
    } else {
        Err(CliError::Domain(format!(
            "{} of {} program(s) verified",
            summary.number_of_passes, summary.programs
        )))
    }
}

fn cmd_mutate(json_out: bool, clause: &str, config: Option<&Path>) -> CliResult {
    let cfg = load_config(config)?;
    let parsed = parse_clause(clause).map_err(|e| usage(format!("`{clause}`: {e}")))?;
    let template = SpecClause::new(ProgramAnchor::Method("clause".into()), 0, parsed);
    let kinds: BTreeSet<MutationKind> = cfg.mutation.kinds.clone();
    let family = enumerate_variants(&template, &kinds, cfg.mutation.variant_cap, &cfg.weights);
    for v in &family.variants {
        let score = score_variant(v, &cfg.weights);
        if json_out {
            let counts: serde_json::Map<String, serde_json::Value> = v
                .counts
                .as_map()
                .into_iter()
                .map(|(k, n)| (k.name().to_string(), json!(n)))
                .collect();
            print_json(&json!({"record": "variant", "text": v.text, "score": score, "counts": counts}));
        } else {
            println!("{score:>4}  {}", v.text);
        }
    }
    if family.truncated {
        eprintln!(
            "note: family truncated to {} of {} combinations",
            family.len(),
            family.raw_combinations
        );
    }
    Ok(())
}

fn cmd_repair(
    json_out: bool,
    file: &Path,
    config: Option<&Path>,
    strategy: Option<StrategyArg>,
    seed: Option<u64>,
) -> CliResult {
    let mut cfg = load_config(config)?;
    apply_strategy(&mut cfg, strategy, seed);
    let program = read_annotated(file)?;
    let input = ProgramInput::from_path(file).map_err(usage)?;
    let mut verifier = make_verifier(&cfg, &input).map_err(usage)?;
    let run = mutation_based_gen(&program, &cfg.repair_config(), &mut verifier);
    let state = &run.state;
    let clauses = run.result.as_ref().map(|p| p.rendered_clauses()).unwrap_or_default();
    if json_out {
        print_json(&json!({
            "record": "repair",
            "verifier_calls": state.verifier_calls,
            "refuted_history": state.refuted_history,
            "dropped": state.dropped(),
            "final_clauses": clauses,
            "error": run.result.as_ref().err().map(ToString::to_string),
        }));
    } else {
        for r in &state.refuted_history {
            println!("call {}: refuted {} `{}`", r.iteration, r.clause_id, r.text);
        }
        for id in state.dropped() {
            println!("dropped {id}");
        }
        println!("verifier calls: {}", state.verifier_calls);
        for c in &clauses {
            println!("{c}");
        }
    }
    match run.result {
        Err(e) => Err(CliError::Domain(e.to_string())),
        Ok(p) if p.clauses.is_empty() && !program.clauses.is_empty() => {
            Err(CliError::Domain("every clause was refuted".into()))
        }
        Ok(_) => Ok(()),
    }
}

fn cmd_verify(json_out: bool, file: &Path, config: Option<&Path>) -> CliResult {
    let cfg = load_config(config)?;
    let program = read_annotated(file)?;
    let input = ProgramInput::from_path(file).map_err(usage)?;
    let mut verifier = make_verifier(&cfg, &input).map_err(usage)?;
    let verdict = verifier.verify(&program).map_err(|e| CliError::Domain(e.to_string()))?;
    if json_out {
        print_json(&serde_json::to_value(&verdict).expect("verdict serializes"));
    } else {
        println!("{}", verdict_text(&verdict));
    }
    if verdict.is_pass() {
        Ok(())
    } else {
        Err(CliError::Domain(format!("{:?}", verdict.outcome).to_lowercase()))
    }
}

fn cmd_eval(json_out: bool, file: &Path, traces: &Path) -> CliResult {
    let program = read_annotated(file)?;
    let records = read_trace_file(traces).map_err(|e| usage(format!("{}: {e}", traces.display())))?;
    let verdict = verify_trace(&program, &records);
    for c in &program.clauses {
        let failure = verdict.failures.iter().find(|f| f.clause_id.as_ref() == Some(&c.id));
        if json_out {
            print_json(&json!({
                "record": "clause",
                "id": c.id,
                "clause": c.render(),
                "pass": failure.is_none(),
                "category": failure.map(|f| f.category),
                "message": failure.map(|f| f.raw_message.clone()),
            }));
        } else {
            match failure {
                None => println!("PASS {}  {}", c.id, c.render()),
                Some(f) => println!("FAIL {}  {}\n     {}", c.id, c.render(), f.raw_message),
            }
        }
    }
    if !json_out {
        println!("{} record(s); a pass means no counterexample in these traces", records.len());
    }
    if verdict.is_pass() {
        Ok(())
    } else {
        Err(CliError::Domain(format!("{} clause(s) falsified", verdict.failures.len())))
    }
}

fn cmd_report(json_out: bool, dir: &Path) -> CliResult {
    let entries = read_dir(dir).map_err(usage)?;
    if entries.is_empty() {
        return Err(usage(format!("no report entries under {}", dir.display())));
    }
    let summary = aggregate(&entries);
    if json_out {
        print_json(&json!({"record": "summary", "summary": summary}));
    } else {
        print!("{}", render_table(&summary));
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let j = cli.json;
    let result = match &cli.command {
        Command::Generate {
            files,
            config,
            attempts,
            strategy,
            seed,
            out,
        } => cmd_generate(j, files, config.as_deref(), *attempts, *strategy, *seed, out.as_deref()),
        Command::Mutate { clause, config } => cmd_mutate(j, clause, config.as_deref()),
        Command::Repair {
            file,
            config,
            strategy,
            seed,
        } => cmd_repair(j, file, config.as_deref(), *strategy, *seed),
        Command::Verify { file, config } => cmd_verify(j, file, config.as_deref()),
        Command::Eval { file, traces } => cmd_eval(j, file, traces),
        Command::Report { dir } => cmd_report(j, dir),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(CliError::Domain(msg)) => {
            if j {
                print_json(&json!({"record": "error", "kind": "domain", "message": msg}));
            }
            eprintln!("jmlrepair: {msg}");
            ExitCode::from(1)
        }
        Err(CliError::Usage(msg)) => {
            if j {
                print_json(&json!({"record": "error", "kind": "usage", "message": msg}));
            }
            eprintln!("jmlrepair: {msg}");
            ExitCode::from(2)
        }
    }
}
