//! Pipeline configuration file (TOML).
//!
//! Every section and key is optional; unknown keys are rejected. Relative
//! paths are resolved against the directory of the config file.

use std::collections::BTreeSet;
use std::path::{Path, PathBuf};
use std::time::Duration;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::llm::EndpointConfig;
use crate::mutation::{MutationKind, WeightTable, DEFAULT_VARIANT_CAP};
use crate::repair::{RepairConfig, Strategy};
use crate::verifier::classify::RuleSpec;
use crate::verifier::exec::DEFAULT_TIMEOUT;
use crate::verifier::FailuresPerCall;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read config {path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("invalid config: {0}")]
    Parse(String),
    #[error("invalid config: {0}")]
    Invalid(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AdapterKind {
    Exec,
    #[default]
    Trace,
    Mock,
}

fn default_timeout_seconds() -> u64 {
    DEFAULT_TIMEOUT.as_secs()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct VerifierSection {
    pub adapter: AdapterKind,
    /// Exec adapter command; `{file}` is the instrumented program.
    pub command: Option<String>,
    #[serde(default = "default_timeout_seconds")]
    pub timeout_seconds: u64,
    /// Defaults to `one` for the exec adapter and `all` otherwise.
    pub failures_per_call: Option<FailuresPerCall>,
    /// Diagnostic classification rules; the bundled set when absent.
    pub rules: Option<Vec<RuleSpec>>,
    /// Trace adapter input; defaults to `<program stem>.trace.jsonl` next to
    /// each program.
    pub trace_file: Option<PathBuf>,
    /// Mock adapter truth set; absent means accept everything.
    pub accept: Option<Vec<String>>,
}

impl Default for VerifierSection {
    fn default() -> Self {
        VerifierSection {
            adapter: AdapterKind::default(),
            command: None,
            timeout_seconds: default_timeout_seconds(),
            failures_per_call: None,
            rules: None,
            trace_file: None,
            accept: None,
        }
    }
}

impl VerifierSection {
    pub fn failures_per_call(&self) -> FailuresPerCall {
        self.failures_per_call.unwrap_or(match self.adapter {
            AdapterKind::Exec => FailuresPerCall::One,
            _ => FailuresPerCall::All,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ClientKind {
    #[default]
    Http,
    Scripted,
}

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ClientSection {
    pub kind: ClientKind,
    /// Scripted client fixture; defaults to `<program stem>.chat.json` next
    /// to each program.
    pub script: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MutationSection {
    pub kinds: BTreeSet<MutationKind>,
    pub variant_cap: usize,
}

impl Default for MutationSection {
    fn default() -> Self {
        MutationSection {
            kinds: MutationKind::ALL.into_iter().collect(),
            variant_cap: DEFAULT_VARIANT_CAP,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BudgetSection {
    /// Wall-clock cap for the repair phase of one program.
    pub pipeline_seconds: u64,
}

impl Default for BudgetSection {
    fn default() -> Self {
        BudgetSection { pipeline_seconds: 1800 }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PathSection {
    /// Directory of annotated `*.java` examples; the bundled corpus when absent.
    pub corpus: Option<PathBuf>,
    /// Guidance TOML; the bundled guidance when absent.
    pub guidance: Option<PathBuf>,
    pub output_dir: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunSection {
    /// Repeated attempts per program (success-probability mode).
    pub attempts: usize,
    /// Programs processed in parallel.
    pub workers: usize,
    /// Record wall times in reports. When absent, timings are recorded
    /// unless the run is fully scripted (scripted client, non-exec adapter).
    pub timing: Option<bool>,
}

impl Default for RunSection {
    fn default() -> Self {
        RunSection {
            attempts: 1,
            workers: 1,
            timing: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    pub endpoint: EndpointConfig,
    pub client: ClientSection,
    pub verifier: VerifierSection,
    pub weights: WeightTable,
    pub mutation: MutationSection,
    pub strategy: Strategy,
    pub budgets: BudgetSection,
    pub paths: PathSection,
    pub run: RunSection,
}

impl PipelineConfig {
    pub fn from_toml(text: &str) -> Result<Self, ConfigError> {
        let cfg: PipelineConfig = toml::from_str(text).map_err(|e| ConfigError::Parse(e.message().to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        let mut cfg = Self::from_toml(&text)?;
        if let Some(dir) = path.parent() {
            cfg.resolve_paths(dir);
        }
        Ok(cfg)
    }

    pub fn resolve_paths(&mut self, base: &Path) {
        let fix = |p: &mut Option<PathBuf>| {
            if let Some(p) = p {
                if p.is_relative() {
                    *p = base.join(&*p);
                }
            }
        };
        fix(&mut self.verifier.trace_file);
        fix(&mut self.client.script);
        fix(&mut self.paths.corpus);
        fix(&mut self.paths.guidance);
        fix(&mut self.paths.output_dir);
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        self.endpoint.validate().map_err(ConfigError::Invalid)?;
        if self.mutation.variant_cap == 0 {
            return Err(ConfigError::Invalid("mutation.variant_cap must be at least 1".into()));
        }
        if self.run.attempts == 0 || self.run.workers == 0 {
            return Err(ConfigError::Invalid("run.attempts and run.workers must be at least 1".into()));
        }
        if self.verifier.adapter == AdapterKind::Exec && self.verifier.command.is_none() {
            return Err(ConfigError::Invalid("verifier.command is required for the exec adapter".into()));
        }
        if let Some(rules) = &self.verifier.rules {
            crate::verifier::RuleSet::from_specs(rules)
                .map_err(|e| ConfigError::Invalid(format!("verifier.rules: {e}")))?;
        }
        Ok(())
    }

    pub fn repair_config(&self) -> RepairConfig {
        RepairConfig {
            kinds: self.mutation.kinds.clone(),
            variant_cap: self.mutation.variant_cap,
            weights: self.weights,
            strategy: self.strategy,
            budget: Some(Duration::from_secs(self.budgets.pipeline_seconds)),
        }
    }

    /// Whether reports should carry wall times.
    pub fn timing(&self) -> bool {
        self.run.timing.unwrap_or(
            self.client.kind == ClientKind::Http || self.verifier.adapter == AdapterKind::Exec,
        )
    }
}
