//! Conversational clause generation: few-shot prompting, verifier feedback,
//! and extraction of clause sets from model replies.

pub mod client;
pub mod conversation;
pub mod extract;
pub mod prompt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use client::{ChatScript, EndpointConfig, HttpClient, ScriptStep, ScriptedClient};
pub use conversation::{run_conversation, ConversationOutcome, ConversationResult, ConversationTranscript, Round};
pub use extract::{extract_specs, last_code_block, ExtractionFailure};
pub use prompt::{
    build_feedback_prompt, build_initial_prompt, bundled_corpus, load_corpus, CorpusError, GuidanceRule,
    GuidanceSet, PromptBundle, Shot, DEFAULT_SYSTEM_ROLE,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Role {
    System,
    User,
    Assistant,
}

impl Role {
    pub fn as_str(self) -> &'static str {
        match self {
            Role::System => "system",
            Role::User => "user",
            Role::Assistant => "assistant",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChatMessage {
    pub role: Role,
    pub content: String,
}

impl ChatMessage {
    pub fn new(role: Role, content: impl Into<String>) -> Self {
        ChatMessage {
            role,
            content: content.into(),
        }
    }
}

#[derive(Debug, Error)]
pub enum EndpointError {
    #[error("chat endpoint unreachable: {0}")]
    Transport(String),
    #[error("chat endpoint returned HTTP {0}: {1}")]
    Status(u16, String),
    #[error("malformed chat response: {0}")]
    Malformed(String),
    #[error("chat script exhausted after {0} response(s)")]
    ScriptExhausted(usize),
}

/// Ordered messages in, one assistant message out.
pub trait ChatClient {
    fn complete(&mut self, messages: &[ChatMessage]) -> Result<String, EndpointError>;
}

impl<C: ChatClient + ?Sized> ChatClient for &mut C {
    fn complete(&mut self, messages: &[ChatMessage]) -> Result<String, EndpointError> {
        (**self).complete(messages)
    }
}

impl<C: ChatClient + ?Sized> ChatClient for Box<C> {
    fn complete(&mut self, messages: &[ChatMessage]) -> Result<String, EndpointError> {
        (**self).complete(messages)
    }
}
