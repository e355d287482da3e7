//! The multi-round generate / verify / feed back loop.

use serde::{Deserialize, Serialize};

use super::extract::{extract_specs, ExtractionFailure};
use super::prompt::{build_feedback_prompt, feedback_prompt, trim_history, GuidanceSet, PromptBundle};
use super::{ChatClient, ChatMessage, EndpointConfig, Role};
use crate::spec::AnnotatedProgram;
use crate::verifier::{FailureCategory, Verifier, VerifierVerdict};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Round {
    /// Round 1: the rendered initial prompt; later rounds: the feedback prompt.
    pub prompt: String,
    pub response: String,
    pub extraction: Result<AnnotatedProgram, ExtractionFailure>,
    /// `None` when extraction failed and nothing was verified.
    pub verdict: Option<VerifierVerdict>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum ConversationOutcome {
    Verified,
    Exhausted { max_rounds: usize },
    Aborted { error: String },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConversationTranscript {
    pub rounds: Vec<Round>,
    pub outcome: ConversationOutcome,
}

impl ConversationTranscript {
    /// Clause set of the latest round whose extraction succeeded.
    pub fn last_extraction(&self) -> Option<&AnnotatedProgram> {
        self.rounds.iter().rev().find_map(|r| r.extraction.as_ref().ok())
    }
}

#[derive(Debug, Clone)]
pub struct ConversationResult {
    /// The clause set the verifier accepted, if any.
    pub verified: Option<AnnotatedProgram>,
    pub transcript: ConversationTranscript,
}

impl ConversationResult {
    /// The template set for the repair phase: the last extracted clause set.
    pub fn templates(&self) -> Option<&AnnotatedProgram> {
        self.transcript.last_extraction()
    }
}

/// Runs up to `endpoint.max_rounds` rounds. Every reply is extracted and,
/// if extraction succeeds, verified; the first failure (or the extraction
/// diagnostics) goes back to the model with its category's guidance.
pub fn run_conversation<V, C>(
    bundle: &PromptBundle,
    endpoint: &EndpointConfig,
    guidance: &GuidanceSet,
    verifier: &mut V,
    client: &mut C,
) -> ConversationResult
where
    V: Verifier + ?Sized,
    C: ChatClient + ?Sized,
{
    let mut history = bundle.messages();
    let mut shot_pairs = bundle.shots.len();
    let mut rounds: Vec<Round> = Vec::new();
    let mut prompt = bundle.render();
    let finish = |rounds, outcome, verified| ConversationResult {
        verified,
        transcript: ConversationTranscript { rounds, outcome },
    };

    for round in 1..=endpoint.max_rounds {
        trim_history(&mut history, &mut shot_pairs, endpoint.history_budget_tokens);
        let response = match client.complete(&history) {
            Ok(r) => r,
            Err(e) => {
                return finish(rounds, ConversationOutcome::Aborted { error: e.to_string() }, None);
            }
        };
        history.push(ChatMessage::new(Role::Assistant, &response));
        let extraction = extract_specs(&response, &bundle.query_program);
        let (verdict, feedback) = match &extraction {
            Ok(program) => match verifier.verify(program) {
                Ok(v) if v.is_pass() => {
                    let verified = program.clone();
                    rounds.push(Round {
                        prompt,
                        response,
                        extraction,
                        verdict: Some(v),
                    });
                    return finish(rounds, ConversationOutcome::Verified, Some(verified));
                }
                Ok(v) => {
                    let fb = build_feedback_prompt(&v, guidance);
                    (Some(v), fb)
                }
                Err(e) => {
                    rounds.push(Round {
                        prompt,
                        response,
                        extraction,
                        verdict: None,
                    });
                    return finish(rounds, ConversationOutcome::Aborted { error: e.to_string() }, None);
                }
            },
            Err(fail) => (None, feedback_prompt(&fail.message(), FailureCategory::SyntaxError, guidance)),
        };
        log::debug!("round {round} failed; sending feedback");
        rounds.push(Round {
            prompt,
            response,
            extraction,
            verdict,
        });
        history.push(ChatMessage::new(Role::User, &feedback));
        prompt = feedback;
    }
    finish(
        rounds,
        ConversationOutcome::Exhausted {
            max_rounds: endpoint.max_rounds,
        },
        None,
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::llm::{bundled_corpus, build_initial_prompt, ScriptedClient, ScriptStep, ChatScript, DEFAULT_SYSTEM_ROLE};
    use crate::verifier::{MockScript, MockVerifier};

    const PROGRAM: &str = "class A {\n    int f(int x) {\n        return x;\n    }\n}\n";

    fn bundle() -> PromptBundle {
        build_initial_prompt(PROGRAM, &bundled_corpus(), 4, None, DEFAULT_SYSTEM_ROLE).unwrap()
    }

    fn reply(clause: &str) -> String {
        format!("```java\nclass A {{\n    {clause}\n    int f(int x) {{\n        return x;\n    }}\n}}\n```")
    }

    #[test]
    fn verified_in_one_round() {
        let mut client = ScriptedClient::replies([reply("//@ ensures \\result == x;")], false);
        let mut v = MockVerifier::new(MockScript::AcceptAll);
        let r = run_conversation(&bundle(), &EndpointConfig::default(), &GuidanceSet::default(), &mut v, &mut client);
        assert_eq!(r.transcript.outcome, ConversationOutcome::Verified);
        assert_eq!(r.transcript.rounds.len(), 1);
        assert_eq!(r.verified.unwrap().clauses.len(), 1);
    }

    #[test]
    fn exhausted_after_max_rounds_keeps_last_extraction() {
        let mut client = ScriptedClient::replies([reply("//@ ensures \\result > x;")], true);
        let mut v = MockVerifier::rejecting_all();
        let r = run_conversation(&bundle(), &EndpointConfig::default(), &GuidanceSet::default(), &mut v, &mut client);
        assert_eq!(r.transcript.outcome, ConversationOutcome::Exhausted { max_rounds: 10 });
        assert_eq!(r.transcript.rounds.len(), 10);
        assert_eq!(v.call_count(), 10);
        assert_eq!(r.templates().unwrap().rendered_clauses(), ["//@ ensures \\result > x;"]);
        assert!(r.verified.is_none());
    }

    #[test]
    fn feedback_carries_previous_failure() {
        let mut client = ScriptedClient::new(ChatScript {
            steps: vec![
                ScriptStep::Reply {
                    response: reply("//@ ensures \\result > x;"),
                },
                ScriptStep::Conditional {
                    if_prompt_contains: "mock: rejected".into(),
                    then: reply("//@ ensures \\result == x;"),
                    otherwise: reply("//@ ensures \\result > x;"),
                },
            ],
            repeat_last: false,
        });
        let mut v = MockVerifier::accepting(["\\result == x"]);
        let r = run_conversation(&bundle(), &EndpointConfig::default(), &GuidanceSet::default(), &mut v, &mut client);
        assert_eq!(r.transcript.outcome, ConversationOutcome::Verified);
        let rounds = &r.transcript.rounds;
        assert_eq!(rounds.len(), 2);
        let msg = &rounds[0].verdict.as_ref().unwrap().failures[0].raw_message;
        assert!(rounds[1].prompt.contains(msg.as_str()));
        // The running history holds both exchanges.
        assert_eq!(client.requests[1].len(), bundle().messages().len() + 2);
    }

    #[test]
    fn extraction_failure_is_fed_back() {
        let mut client = ScriptedClient::replies(["no code here".to_string(), reply("//@ ensures \\result == x;")], false);
        let mut v = MockVerifier::new(MockScript::AcceptAll);
        let r = run_conversation(&bundle(), &EndpointConfig::default(), &GuidanceSet::default(), &mut v, &mut client);
        assert_eq!(r.transcript.outcome, ConversationOutcome::Verified);
        assert!(r.transcript.rounds[0].verdict.is_none());
        assert!(r.transcript.rounds[1].prompt.contains("no `//@` specification lines"));
    }

    #[test]
    fn endpoint_error_aborts() {
        let mut client = ScriptedClient::replies(Vec::<String>::new(), false);
        let mut v = MockVerifier::new(MockScript::AcceptAll);
        let r = run_conversation(&bundle(), &EndpointConfig::default(), &GuidanceSet::default(), &mut v, &mut client);
        assert!(matches!(r.transcript.outcome, ConversationOutcome::Aborted { .. }));
        assert!(r.transcript.rounds.is_empty());
    }

    #[test]
    fn transcript_replays() {
        let mut client = ScriptedClient::replies([reply("//@ ensures \\result > x;")], true);
        let mut v = MockVerifier::rejecting_all();
        let cfg = EndpointConfig {
            max_rounds: 3,
            ..EndpointConfig::default()
        };
        let r = run_conversation(&bundle(), &cfg, &GuidanceSet::default(), &mut v, &mut client);
        let json = serde_json::to_string(&r.transcript).unwrap();
        let back: ConversationTranscript = serde_json::from_str(&json).unwrap();
        let mut replay = ScriptedClient::from_transcript(&back);
        let mut v2 = MockVerifier::rejecting_all();
        let r2 = run_conversation(&bundle(), &cfg, &GuidanceSet::default(), &mut v2, &mut replay);
        assert_eq!(serde_json::to_string(&r2.transcript).unwrap(), json);
    }
}
