//! Chat-completion transport: the client trait, retry policy, and the
//! HTTP implementation.

use std::fmt;
use std::time::Duration;

use serde::{Deserialize, Serialize};
use tracing::debug;

use super::JudgeKind;

pub const ENV_LLM_URL: &str = "ECHO_SPOTTER_LLM_URL";
pub const ENV_LLM_KEY: &str = "ECHO_SPOTTER_LLM_KEY";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChatMessage {
    pub role: String,
    pub content: String,
}

impl ChatMessage {
    pub fn system(content: impl Into<String>) -> Self {
        Self {
            role: "system".into(),
            content: content.into(),
        }
    }

    pub fn user(content: impl Into<String>) -> Self {
        Self {
            role: "user".into(),
            content: content.into(),
        }
    }

    pub fn assistant(content: impl Into<String>) -> Self {
        Self {
            role: "assistant".into(),
            content: content.into(),
        }
    }
}

/// Where a request came from. Never sent over the wire; scripted clients
/// key their replies on it.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RequestContext {
    pub judge: JudgeKind,
    pub match_id: String,
    pub half: u8,
    pub window_start_s: f64,
    pub window_text: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CompletionRequest {
    pub messages: Vec<ChatMessage>,
    pub temperature: f64,
    pub max_tokens: u32,
    #[serde(skip)]
    pub context: RequestContext,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FinishStatus {
    Stop,
    Length,
    Other,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CompletionReply {
    pub text: String,
    pub finish: FinishStatus,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TransportErrorKind {
    Timeout,
    Connection,
    Status(u16),
    Decode,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TransportError {
    pub kind: TransportErrorKind,
    pub message: String,
}

impl TransportError {
    pub fn timeout(message: impl Into<String>) -> Self {
        Self {
            kind: TransportErrorKind::Timeout,
            message: message.into(),
        }
    }

    pub fn connection(message: impl Into<String>) -> Self {
        Self {
            kind: TransportErrorKind::Connection,
            message: message.into(),
        }
    }

    /// Timeouts, connection failures, 429 and 5xx are worth retrying.
    pub fn is_retryable(&self) -> bool {
        match self.kind {
            TransportErrorKind::Timeout | TransportErrorKind::Connection => true,
            TransportErrorKind::Status(code) => code == 429 || code >= 500,
            TransportErrorKind::Decode => false,
        }
    }
}

impl fmt::Display for TransportError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.kind {
            TransportErrorKind::Timeout => write!(f, "timeout: {}", self.message),
            TransportErrorKind::Connection => write!(f, "connection failed: {}", self.message),
            TransportErrorKind::Status(code) => write!(f, "HTTP {code}: {}", self.message),
            TransportErrorKind::Decode => write!(f, "undecodable reply: {}", self.message),
        }
    }
}

impl std::error::Error for TransportError {}

/// A chat-completion backend, shared across concurrent judge calls.
pub trait CompletionClient: Send + Sync {
    fn complete(&self, request: &CompletionRequest) -> Result<CompletionReply, TransportError>;
}

/// Adapts a closure returning reply text.
pub struct FnClient<F>(F);

impl<F> FnClient<F>
where
    F: Fn(&CompletionRequest) -> Result<String, TransportError> + Send + Sync,
{
    pub fn new(f: F) -> Self {
        Self(f)
    }
}

impl<F> CompletionClient for FnClient<F>
where
    F: Fn(&CompletionRequest) -> Result<String, TransportError> + Send + Sync,
{
    fn complete(&self, request: &CompletionRequest) -> Result<CompletionReply, TransportError> {
        (self.0)(request).map(|text| CompletionReply {
            text,
            finish: FinishStatus::Stop,
        })
    }
}

/// Exponential backoff without jitter: `base * 2^(attempt-1)`, capped.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RetryPolicy {
    pub max_attempts: u32,
    pub base_delay_ms: u64,
    pub max_delay_ms: u64,
}

impl Default for RetryPolicy {
    fn default() -> Self {
        Self {
            max_attempts: 3,
            base_delay_ms: 500,
            max_delay_ms: 8_000,
        }
    }
}

impl RetryPolicy {
    /// Single attempt.
    pub fn none() -> Self {
        Self {
            max_attempts: 1,
            base_delay_ms: 0,
            max_delay_ms: 0,
        }
    }

    pub fn delay_for(&self, attempt: u32) -> Duration {
        let factor = 1u64
            .checked_shl(attempt.saturating_sub(1))
            .unwrap_or(u64::MAX);
        Duration::from_millis(
            self.base_delay_ms
                .saturating_mul(factor)
                .min(self.max_delay_ms),
        )
    }

    pub fn run<T>(
        &self,
        mut call: impl FnMut() -> Result<T, TransportError>,
    ) -> Result<T, TransportError> {
        let attempts = self.max_attempts.max(1);
        let mut attempt = 1;
        loop {
            match call() {
                Ok(v) => return Ok(v),
                Err(e) if e.is_retryable() && attempt < attempts => {
                    let delay = self.delay_for(attempt);
                    debug!(attempt, ?delay, error = %e, "retrying completion");
                    std::thread::sleep(delay);
                    attempt += 1;
                }
                Err(e) => return Err(e),
            }
        }
    }
}

#[derive(Debug, Clone)]
pub struct HttpClientConfig {
    pub url: String,
    pub model: String,
    pub api_key: Option<String>,
    pub timeout: Duration,
}

impl HttpClientConfig {
    /// Fill URL and key from the environment when set.
    pub fn with_env_overrides(mut self) -> Self {
        if let Ok(url) = std::env::var(ENV_LLM_URL) {
            if !url.is_empty() {
                self.url = url;
            }
        }
        if let Ok(key) = std::env::var(ENV_LLM_KEY) {
            if !key.is_empty() {
                self.api_key = Some(key);
            }
        }
        self
    }
}

#[derive(Serialize)]
struct WireRequest<'a> {
    model: &'a str,
    messages: &'a [ChatMessage],
    temperature: f64,
    max_tokens: u32,
}

#[derive(Deserialize)]
struct WireReply {
    choices: Vec<WireChoice>,
}

#[derive(Deserialize)]
struct WireChoice {
    message: WireMessage,
    #[serde(default)]
    finish_reason: Option<String>,
}

#[derive(Deserialize)]
struct WireMessage {
    #[serde(default)]
    content: Option<String>,
}

/// Blocking client for an OpenAI-style `/chat/completions` endpoint.
pub struct HttpClient {
    agent: ureq::Agent,
    config: HttpClientConfig,
}

impl HttpClient {
    pub fn new(config: HttpClientConfig) -> Self {
        let agent = ureq::Agent::config_builder()
            .timeout_global(Some(config.timeout))
            .http_status_as_error(false)
            .build()
            .into();
        Self { agent, config }
    }

    pub fn config(&self) -> &HttpClientConfig {
        &self.config
    }

    /// The JSON body sent for `request`.
    pub fn wire_body(&self, request: &CompletionRequest) -> serde_json::Value {
        serde_json::to_value(WireRequest {
            model: &self.config.model,
            messages: &request.messages,
            temperature: request.temperature,
            max_tokens: request.max_tokens,
        })
        .expect("request serializes")
    }
}

fn map_ureq_error(e: ureq::Error) -> TransportError {
    match e {
        ureq::Error::Timeout(t) => TransportError::timeout(t.to_string()),
        ureq::Error::StatusCode(code) => TransportError {
            kind: TransportErrorKind::Status(code),
            message: "status".into(),
        },
        ureq::Error::Json(e) => TransportError {
            kind: TransportErrorKind::Decode,
            message: e.to_string(),
        },
        other => TransportError::connection(other.to_string()),
    }
}

impl CompletionClient for HttpClient {
    fn complete(&self, request: &CompletionRequest) -> Result<CompletionReply, TransportError> {
        let mut call = self
            .agent
            .post(&self.config.url)
            .header("Content-Type", "application/json");
        if let Some(key) = &self.config.api_key {
            call = call.header("Authorization", format!("Bearer {key}"));
        }
        let mut response = call
            .send_json(self.wire_body(request))
            .map_err(map_ureq_error)?;
        let status = response.status().as_u16();
        if !(200..300).contains(&status) {
            let body = response.body_mut().read_to_string().unwrap_or_default();
            return Err(TransportError {
                kind: TransportErrorKind::Status(status),
                message: body.chars().take(200).collect(),
            });
        }
        let reply: WireReply = response.body_mut().read_json().map_err(map_ureq_error)?;
        let choice = reply
            .choices
            .into_iter()
            .next()
            .ok_or_else(|| TransportError {
                kind: TransportErrorKind::Decode,
                message: "reply has no choices".into(),
            })?;
        let finish = match choice.finish_reason.as_deref() {
            Some("stop") | None => FinishStatus::Stop,
            Some("length") => FinishStatus::Length,
            Some(_) => FinishStatus::Other,
        };
        Ok(CompletionReply {
            text: choice.message.content.unwrap_or_default(),
            finish,
        })
    }
}
