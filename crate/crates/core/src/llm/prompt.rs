//! Prompt construction: the initial few-shot prompt and feedback prompts.

use std::collections::BTreeMap;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::{ChatMessage, Role};
use crate::spec::{extract_annotations, ExtractErrors};
use crate::verifier::{FailureCategory, VerifierVerdict};

pub const DEFAULT_SYSTEM_ROLE: &str = "You are an expert in formal verification of Java programs. \
Your task is to write JML specifications for the program you are given: preconditions \
(`//@ requires`), postconditions (`//@ ensures`), loop invariants (`//@ maintaining`) and loop \
variants (`//@ decreases`), each on its own line directly above the method header or loop it \
belongs to. The specifications must be strong enough to describe the program's behaviour and \
must be provable by a static verifier. Reply with the complete annotated program in a single \
```java code block.";

const BUNDLED_CORPUS: [(&str, &str); 4] = [
    ("01_abs.java", include_str!("../../corpus/01_abs.java")),
    ("02_sum.java", include_str!("../../corpus/02_sum.java")),
    ("03_max.java", include_str!("../../corpus/03_max.java")),
    ("04_count.java", include_str!("../../corpus/04_count.java")),
];

const DEFAULT_GUIDANCE: &str = include_str!("../../rules/default_guidance.toml");

const SHOT_REQUEST: &str = "Write JML specifications for the following Java program.";

const FEEDBACK_INSTRUCTION: &str = "Fix the specifications and reply with the complete \
corrected annotated program in a single ```java code block.";

/// A program and its annotated version.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Shot {
    pub program: String,
    pub annotated: String,
}

impl Shot {
    /// Builds a shot from an annotated program; the plain program is the
    /// same text with its `//@` lines removed.
    pub fn from_annotated(annotated: &str) -> Result<Self, ExtractErrors> {
        let p = extract_annotations(annotated)?;
        Ok(Shot {
            program: p.source,
            annotated: annotated.to_string(),
        })
    }
}

#[derive(Debug, Error)]
pub enum CorpusError {
    #[error("few-shot corpus has {available} example(s), {needed} requested")]
    InsufficientShots { needed: usize, available: usize },
    #[error("corpus file {file}: {error}")]
    Malformed { file: String, error: ExtractErrors },
    #[error("corpus I/O: {0}")]
    Io(#[from] std::io::Error),
}

pub fn bundled_corpus() -> Vec<Shot> {
    BUNDLED_CORPUS
        .iter()
        .map(|(_, text)| Shot::from_annotated(text).expect("bundled corpus is well formed"))
        .collect()
}

/// Loads every `*.java` file of `dir`, in file-name order.
pub fn load_corpus(dir: &Path) -> Result<Vec<Shot>, CorpusError> {
    let mut files: Vec<_> = std::fs::read_dir(dir)?
        .filter_map(Result::ok)
        .map(|e| e.path())
        .filter(|p| p.extension().is_some_and(|e| e == "java"))
        .collect();
    files.sort();
    files
        .iter()
        .map(|p| {
            let text = std::fs::read_to_string(p)?;
            Shot::from_annotated(&text).map_err(|error| CorpusError::Malformed {
                file: p.display().to_string(),
                error,
            })
        })
        .collect()
}

/// Picks `count` shots: corpus order, or a seeded shuffle.
pub fn select_shots(corpus: &[Shot], count: usize, seed: Option<u64>) -> Result<Vec<Shot>, CorpusError> {
    if corpus.len() < count {
        return Err(CorpusError::InsufficientShots {
            needed: count,
            available: corpus.len(),
        });
    }
    let mut shots = corpus.to_vec();
    if let Some(seed) = seed {
        shots.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    }
    shots.truncate(count);
    Ok(shots)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PromptBundle {
    pub system_role: String,
    pub shots: Vec<Shot>,
    pub query_program: String,
}

fn fenced(code: &str) -> String {
    format!("```java\n{}\n```", code.trim_end())
}

fn request(program: &str) -> String {
    format!("{SHOT_REQUEST}\n\n{}", fenced(program))
}

impl PromptBundle {
    /// System role, then one user/assistant pair per shot, then the query.
    pub fn messages(&self) -> Vec<ChatMessage> {
        let mut msgs = vec![ChatMessage::new(Role::System, &self.system_role)];
        for s in &self.shots {
            msgs.push(ChatMessage::new(Role::User, request(&s.program)));
            msgs.push(ChatMessage::new(Role::Assistant, fenced(&s.annotated)));
        }
        msgs.push(ChatMessage::new(Role::User, request(&self.query_program)));
        msgs
    }

    pub fn render(&self) -> String {
        render_messages(&self.messages())
    }
}

pub fn render_messages(msgs: &[ChatMessage]) -> String {
    msgs.iter()
        .map(|m| format!("[{}]\n{}\n", m.role.as_str(), m.content))
        .collect::<Vec<_>>()
        .join("\n")
}

/// Draws `shot_count` shots from `corpus` and assembles the initial prompt.
pub fn build_initial_prompt(
    program: &str,
    corpus: &[Shot],
    shot_count: usize,
    shot_seed: Option<u64>,
    system_role: &str,
) -> Result<PromptBundle, CorpusError> {
    Ok(PromptBundle {
        system_role: system_role.to_string(),
        shots: select_shots(corpus, shot_count, shot_seed)?,
        query_program: program.to_string(),
    })
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GuidanceRule {
    pub category: FailureCategory,
    pub text: String,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GuidanceSet {
    rules: BTreeMap<FailureCategory, String>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct GuidanceFile {
    #[serde(default)]
    guidance: Vec<GuidanceRule>,
}

impl GuidanceSet {
    pub fn new(rules: impl IntoIterator<Item = GuidanceRule>) -> Result<Self, String> {
        let mut map = BTreeMap::new();
        for r in rules {
            if map.insert(r.category, r.text).is_some() {
                return Err(format!("more than one guidance rule for {:?}", r.category));
            }
        }
        Ok(GuidanceSet { rules: map })
    }

    pub fn empty() -> Self {
        GuidanceSet { rules: BTreeMap::new() }
    }

    pub fn from_toml(text: &str) -> Result<Self, String> {
        let file: GuidanceFile = toml::from_str(text).map_err(|e| e.to_string())?;
        Self::new(file.guidance)
    }

    pub fn get(&self, category: FailureCategory) -> Option<&str> {
        self.rules.get(&category).map(String::as_str)
    }
}

impl Default for GuidanceSet {
    fn default() -> Self {
        GuidanceSet::from_toml(DEFAULT_GUIDANCE).expect("bundled guidance is valid")
    }
}

/// Feedback for one failure message: the message, the category's guidance
/// if any, and the request for a corrected program.
pub fn feedback_prompt(message: &str, category: FailureCategory, guidance: &GuidanceSet) -> String {
    let mut out = format!("The verifier reported the following error:\n\n{message}\n\n");
    if let Some(g) = guidance.get(category) {
        out.push_str(&format!("Guidance: {g}\n\n"));
    }
    out.push_str(FEEDBACK_INSTRUCTION);
    out
}

/// Feedback for a failed verdict; only the first failure is reported.
pub fn build_feedback_prompt(verdict: &VerifierVerdict, guidance: &GuidanceSet) -> String {
    match verdict.failures.first() {
        Some(f) => feedback_prompt(&f.raw_message, f.category, guidance),
        None => {
            let message = format!(
                "verification did not complete ({:?}){}",
                verdict.outcome,
                verdict
                    .detail
                    .as_deref()
                    .map(|d| format!(": {}", d.trim()))
                    .unwrap_or_default()
            );
            feedback_prompt(&message, FailureCategory::Unknown, guidance)
        }
    }
}

/// Rough token count: characters / 4.
pub fn estimate_tokens(msgs: &[ChatMessage]) -> usize {
    msgs.iter().map(|m| m.content.chars().count()).sum::<usize>() / 4
}

/// Drops the oldest shot pairs until the history fits `budget` or no shots
/// remain. `shot_pairs` is how many pairs still follow the system message.
pub fn trim_history(msgs: &mut Vec<ChatMessage>, shot_pairs: &mut usize, budget: usize) {
    while estimate_tokens(msgs) > budget && *shot_pairs > 0 {
        msgs.drain(1..3);
        *shot_pairs -= 1;
    }
}
