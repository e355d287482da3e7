//! Chat backends: an HTTP chat-completions client and a scripted replay client.

use std::path::Path;
use std::time::Duration;

use serde::{Deserialize, Serialize};
use serde_json::json;

use super::{ChatClient, ChatMessage, EndpointError, Role};

fn default_base_url() -> String {
    "https://api.openai.com/v1".into()
}
fn default_model() -> String {
    "gpt-3.5-turbo".into()
}
fn default_temperature() -> f64 {
    0.4
}
fn default_max_rounds() -> usize {
    10
}
fn default_shots() -> usize {
    4
}
fn default_api_key_env() -> String {
    "OPENAI_API_KEY".into()
}
fn default_request_timeout() -> u64 {
    120
}
fn default_retries() -> u32 {
    3
}
fn default_backoff_ms() -> u64 {
    1000
}
fn default_history_budget() -> usize {
    100_000
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EndpointConfig {
    #[serde(default = "default_base_url")]
    pub base_url: String,
    #[serde(default = "default_model")]
    pub model: String,
    #[serde(default = "default_temperature")]
    pub temperature: f64,
    #[serde(default = "default_max_rounds")]
    pub max_rounds: usize,
    #[serde(default = "default_shots")]
    pub shots: usize,
    /// Shuffle the corpus with this seed before taking shots.
    #[serde(default)]
    pub shot_seed: Option<u64>,
    /// Name of the environment variable holding the API key.
    #[serde(default = "default_api_key_env")]
    pub api_key_env: String,
    #[serde(default = "default_request_timeout")]
    pub request_timeout_seconds: u64,
    #[serde(default = "default_retries")]
    pub retries: u32,
    /// First retry delay; doubled on each further retry.
    #[serde(default = "default_backoff_ms")]
    pub backoff_ms: u64,
    #[serde(default = "default_history_budget")]
    pub history_budget_tokens: usize,
    #[serde(default)]
    pub system_role: Option<String>,
}

impl Default for EndpointConfig {
    fn default() -> Self {
        toml::from_str("").expect("all endpoint fields have defaults")
    }
}

impl EndpointConfig {
    pub fn validate(&self) -> Result<(), String> {
        if !(0.0..=2.0).contains(&self.temperature) {
            return Err(format!("endpoint.temperature must be in [0, 2], got {}", self.temperature));
        }
        if self.max_rounds == 0 {
            return Err("endpoint.max_rounds must be at least 1".into());
        }
        Ok(())
    }
}

/// Client for `POST {base_url}/chat/completions`.
pub struct HttpClient {
    config: EndpointConfig,
    http: reqwest::blocking::Client,
}

impl HttpClient {
    pub fn new(config: EndpointConfig) -> Result<Self, EndpointError> {
        let http = reqwest::blocking::Client::builder()
            .timeout(Duration::from_secs(config.request_timeout_seconds))
            .build()
            .map_err(|e| EndpointError::Transport(e.to_string()))?;
        Ok(HttpClient { config, http })
    }

    pub fn request_body(config: &EndpointConfig, messages: &[ChatMessage]) -> serde_json::Value {
        json!({
            "model": config.model,
            "temperature": config.temperature,
            "messages": messages,
        })
    }

    fn attempt(&self, body: &serde_json::Value) -> Result<String, (bool, EndpointError)> {
        let url = format!("{}/chat/completions", self.config.base_url.trim_end_matches('/'));
        let mut req = self.http.post(url).json(body);
        if let Ok(key) = std::env::var(&self.config.api_key_env) {
            req = req.bearer_auth(key);
        }
        let resp = req
            .send()
            .map_err(|e| (true, EndpointError::Transport(e.without_url().to_string())))?;
        let status = resp.status();
        if !status.is_success() {
            let retry = status.as_u16() == 429 || status.is_server_error();
            let text = resp.text().unwrap_or_default();
            return Err((retry, EndpointError::Status(status.as_u16(), text)));
        }
        let value: serde_json::Value = resp
            .json()
            .map_err(|e| (false, EndpointError::Malformed(e.to_string())))?;
        parse_response(&value).map_err(|e| (false, e))
    }
}

/// `choices[0].message.content` of a chat-completions response.
pub fn parse_response(value: &serde_json::Value) -> Result<String, EndpointError> {
    value
        .pointer("/choices/0/message/content")
        .and_then(|v| v.as_str())
        .map(str::to_string)
        .ok_or_else(|| EndpointError::Malformed("missing choices[0].message.content".into()))
}

impl ChatClient for HttpClient {
    fn complete(&mut self, messages: &[ChatMessage]) -> Result<String, EndpointError> {
        let body = Self::request_body(&self.config, messages);
        let mut delay = Duration::from_millis(self.config.backoff_ms);
        let mut tries = 0;
        loop {
            match self.attempt(&body) {
                Ok(text) => return Ok(text),
                Err((true, e)) if tries < self.config.retries => {
                    log::warn!("chat request failed ({e}); retrying in {delay:?}");
                    std::thread::sleep(delay);
                    delay *= 2;
                    tries += 1;
                }
                Err((_, e)) => return Err(e),
            }
        }
    }
}

/// One scripted reply. A conditional step answers `then` when the latest
/// user message contains `if_prompt_contains`, otherwise `else`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(untagged, deny_unknown_fields)]
pub enum ScriptStep {
    Reply {
        response: String,
    },
    Conditional {
        if_prompt_contains: String,
        then: String,
        #[serde(rename = "else")]
        otherwise: String,
    },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChatScript {
    pub steps: Vec<ScriptStep>,
    /// Keep answering with the last step once the script runs out.
    #[serde(default)]
    pub repeat_last: bool,
}

/// Replays a [`ChatScript`]; records the message list of every request.
#[derive(Debug, Clone)]
pub struct ScriptedClient {
    script: ChatScript,
    next: usize,
    pub requests: Vec<Vec<ChatMessage>>,
}

impl ScriptedClient {
    pub fn new(script: ChatScript) -> Self {
        ScriptedClient {
            script,
            next: 0,
            requests: Vec::new(),
        }
    }

    pub fn replies<I, S>(responses: I, repeat_last: bool) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        Self::new(ChatScript {
            steps: responses
                .into_iter()
                .map(|r| ScriptStep::Reply { response: r.into() })
                .collect(),
            repeat_last,
        })
    }

    pub fn from_json(text: &str) -> Result<Self, serde_json::Error> {
        Ok(Self::new(serde_json::from_str(text)?))
    }

    pub fn from_file(path: &Path) -> Result<Self, EndpointError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| EndpointError::Transport(format!("{}: {e}", path.display())))?;
        Self::from_json(&text).map_err(|e| EndpointError::Malformed(format!("{}: {e}", path.display())))
    }

    /// A script that reproduces the responses of a recorded conversation.
    pub fn from_transcript(t: &super::ConversationTranscript) -> Self {
        Self::replies(t.rounds.iter().map(|r| r.response.clone()), false)
    }
}

impl ChatClient for ScriptedClient {
    fn complete(&mut self, messages: &[ChatMessage]) -> Result<String, EndpointError> {
        self.requests.push(messages.to_vec());
        let idx = if self.next < self.script.steps.len() {
            self.next
        } else if self.script.repeat_last && !self.script.steps.is_empty() {
            self.script.steps.len() - 1
        } else {
            return Err(EndpointError::ScriptExhausted(self.next));
        };
        self.next += 1;
        let last_user = messages
            .iter()
            .rev()
            .find(|m| m.role == Role::User)
            .map_or("", |m| m.content.as_str());
        Ok(match &self.script.steps[idx] {
            ScriptStep::Reply { response } => response.clone(),
            ScriptStep::Conditional {
                if_prompt_contains,
                then,
                otherwise,
            } => {
                if last_user.contains(if_prompt_contains.as_str()) {
                    then.clone()
                } else {
                    otherwise.clone()
                }
            }
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults() {
        let c = EndpointConfig::default();
        assert_eq!(c.temperature, 0.4);
        assert_eq!(c.max_rounds, 10);
        assert_eq!(c.shots, 4);
        assert!(c.validate().is_ok());
        let bad = EndpointConfig {
            temperature: 2.5,
            ..EndpointConfig::default()
        };
        assert!(bad.validate().is_err());
    }

    #[test]
    fn request_and_response_shapes() {
        let msgs = [ChatMessage::new(Role::System, "s"), ChatMessage::new(Role::User, "u")];
        let body = HttpClient::request_body(&EndpointConfig::default(), &msgs);
        assert_eq!(
            body.to_string(),
            r#"{"messages":[{"content":"s","role":"system"},{"content":"u","role":"user"}],"model":"gpt-3.5-turbo","temperature":0.4}"#
        );
        let resp = json!({"choices": [{"index": 0, "message": {"role": "assistant", "content": "hi"}}]});
        assert_eq!(parse_response(&resp).unwrap(), "hi");
        assert!(parse_response(&json!({"choices": []})).is_err());
    }

    #[test]
    fn scripted_steps() {
        let mut c = ScriptedClient::from_json(
            r#"{"steps": [{"response": "one"}, {"if_prompt_contains": "error", "then": "fixed", "else": "same"}]}"#,
        )
        .unwrap();
        let u = |t: &str| vec![ChatMessage::new(Role::User, t)];
        assert_eq!(c.complete(&u("x")).unwrap(), "one");
        assert_eq!(c.complete(&u("an error")).unwrap(), "fixed");
        assert!(matches!(c.complete(&u("x")), Err(EndpointError::ScriptExhausted(2))));
        let mut r = ScriptedClient::replies(["a"], true);
        assert_eq!(r.complete(&u("x")).unwrap(), "a");
        assert_eq!(r.complete(&u("x")).unwrap(), "a");
        assert_eq!(r.requests.len(), 2);
    }

    #[test]
    fn unreachable_endpoint_is_a_transport_error() {
        let cfg = EndpointConfig {
            base_url: "http://127.0.0.1:9".into(),
            retries: 1,
            backoff_ms: 1,
            request_timeout_seconds: 2,
            ..EndpointConfig::default()
        };
        let mut c = HttpClient::new(cfg).unwrap();
        let err = c.complete(&[ChatMessage::new(Role::User, "u")]).unwrap_err();
        assert!(matches!(err, EndpointError::Transport(_)), "{err}");
    }
}
