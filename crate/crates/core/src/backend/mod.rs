//! Text-completion engines.
//!
//! Every engine maps a prompt to at most `num_beams` continuations ranked by
//! sequence score. Three engines are provided:
//!
//! * [`WireClient`]: a beam-search sidecar speaking a small JSON protocol
//!   (`{"prompt", "num_beams", "max_new_tokens", "model"}` in,
//!   `{"continuations": [{"text", "score"}]}` out).
//! * [`ChatClient`]: a chat-completions endpoint. Chat engines expose no
//!   beam, so the single reply is returned with score 0.
//! * [`MockBackend`]: a lookup table or a [`ConsistencyWorld`], for tests and
//!   offline runs.
//!
//! [`CompletionService`] wraps any engine with the persistent [`CacheStore`]
//! and call accounting.

mod cache;
mod chat;
mod mock;
pub mod replay;
mod wire;

use std::path::PathBuf;
use std::time::Duration;

use serde::{Deserialize, Serialize};

use crate::corpus::LanguageNames;
use crate::prompting::TemplateRegistry;

pub use cache::{cache_key, cached_complete, CacheStore, CompletionService, ServiceStats};
pub use chat::ChatClient;
pub use mock::{
    make_consistency_mock, ConsistencyMock, ConsistencyWorld, MockBackend, MockSpec, TableMock,
    DISTRACTOR,
};
pub use wire::WireClient;

/// The system message sent with every chat request.
pub const CHAT_SYSTEM_MESSAGE: &str =
    "Please complete the following sentence and only output the target word.";

#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct CompletionRequest {
    pub prompt: String,
    pub num_beams: usize,
    pub max_new_tokens: usize,
}

impl CompletionRequest {
    pub fn new(
        prompt: impl Into<String>,
        num_beams: usize,
        max_new_tokens: usize,
    ) -> Result<Self, BackendError> {
        let req = Self {
            prompt: prompt.into(),
            num_beams,
            max_new_tokens,
        };
        req.validate()?;
        Ok(req)
    }

    pub fn validate(&self) -> Result<(), BackendError> {
        if self.num_beams == 0 {
            return Err(BackendError::InvalidRequest(
                "num_beams must be >= 1".into(),
            ));
        }
        if self.max_new_tokens == 0 {
            return Err(BackendError::InvalidRequest(
                "max_new_tokens must be >= 1".into(),
            ));
        }
        Ok(())
    }
}

/// Generated text following the prompt, with its sequence score (higher is
/// better). Scores are treated as opaque ranks.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScoredContinuation {
    pub text: String,
    pub score: f64,
}

impl ScoredContinuation {
    pub fn new(text: impl Into<String>, score: f64) -> Self {
        Self {
            text: text.into(),
            score,
        }
    }
}

#[derive(Debug, Clone, thiserror::Error)]
pub enum BackendError {
    #[error("invalid request: {0}")]
    InvalidRequest(String),
    #[error("invalid backend configuration: {0}")]
    Config(String),
    #[error("network failure: {0}")]
    Network(String),
    #[error("request timed out")]
    Timeout,
    #[error("server returned status {status}: {body}")]
    Status { status: u16, body: String },
    #[error("malformed response: {0}")]
    Malformed(String),
    #[error("mock has no response for prompt {0:?}")]
    MockMiss(String),
    #[error("prompt does not match any registered template: {0:?}")]
    UnrecognizedPrompt(String),
}

impl BackendError {
    /// Short stable name, used in prediction logs and manifests.
    pub fn category(&self) -> &'static str {
        match self {
            Self::InvalidRequest(_) => "invalid_request",
            Self::Config(_) => "config",
            Self::Network(_) => "network",
            Self::Timeout => "timeout",
            Self::Status { .. } => "status",
            Self::Malformed(_) => "malformed",
            Self::MockMiss(_) => "mock_miss",
            Self::UnrecognizedPrompt(_) => "unrecognized_prompt",
        }
    }

    pub fn is_retryable(&self) -> bool {
        match self {
            Self::Network(_) | Self::Timeout => true,
            Self::Status { status, .. } => *status == 429 || *status >= 500,
            _ => false,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BackendKind {
    Wire,
    Chat,
    Mock,
}

impl std::fmt::Display for BackendKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Self::Wire => "wire",
            Self::Chat => "chat",
            Self::Mock => "mock",
        })
    }
}

impl std::str::FromStr for BackendKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "wire" => Ok(Self::Wire),
            "chat" => Ok(Self::Chat),
            "mock" => Ok(Self::Mock),
            other => Err(format!("unknown backend kind {other:?}")),
        }
    }
}

/// Fields that distinguish otherwise identical requests in the cache.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BackendIdentity {
    pub kind: BackendKind,
    pub model_id: String,
    pub temperature: Option<f64>,
    pub system_message: Option<String>,
}

pub trait CompletionBackend: Send + Sync {
    /// Up to `num_beams` continuations, ordered by non-increasing score.
    fn complete(
        &self,
        request: &CompletionRequest,
    ) -> Result<Vec<ScoredContinuation>, BackendError>;

    fn identity(&self) -> BackendIdentity;
}

impl<B: CompletionBackend + ?Sized> CompletionBackend for std::sync::Arc<B> {
    fn complete(
        &self,
        request: &CompletionRequest,
    ) -> Result<Vec<ScoredContinuation>, BackendError> {
        (**self).complete(request)
    }

    fn identity(&self) -> BackendIdentity {
        (**self).identity()
    }
}

fn default_timeout_ms() -> u64 {
    60_000
}
fn default_retry_limit() -> u32 {
    3
}
fn default_backoff_ms() -> u64 {
    500
}
fn default_max_tokens() -> usize {
    5
}
fn default_system_message() -> String {
    CHAT_SYSTEM_MESSAGE.to_string()
}
fn default_model_id() -> String {
    "default".to_string()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BackendConfig {
    pub kind: BackendKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub endpoint: Option<String>,
    #[serde(default = "default_model_id")]
    pub model_id: String,
    #[serde(default = "default_timeout_ms")]
    pub timeout_ms: u64,
    #[serde(default = "default_retry_limit")]
    pub retry_limit: u32,
    /// First retry delay; doubles on every further attempt.
    #[serde(default = "default_backoff_ms")]
    pub backoff_ms: u64,
    /// Chat only.
    #[serde(default)]
    pub temperature: f64,
    /// Chat only.
    #[serde(default = "default_max_tokens")]
    pub max_tokens: usize,
    /// Chat only.
    #[serde(default = "default_system_message")]
    pub system_message: String,
    /// Environment variable holding the API credential. The value is never
    /// logged.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub api_key_env: Option<String>,
    /// Mock only: JSON [`MockSpec`] file.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mock_spec: Option<PathBuf>,
}

impl BackendConfig {
    pub fn new(kind: BackendKind) -> Self {
        Self {
            kind,
            endpoint: None,
            model_id: default_model_id(),
            timeout_ms: default_timeout_ms(),
            retry_limit: default_retry_limit(),
            backoff_ms: default_backoff_ms(),
            temperature: 0.0,
            max_tokens: default_max_tokens(),
            system_message: default_system_message(),
            api_key_env: None,
            mock_spec: None,
        }
    }

    pub fn wire(endpoint: impl Into<String>) -> Self {
        Self {
            endpoint: Some(endpoint.into()),
            ..Self::new(BackendKind::Wire)
        }
    }

    pub fn chat(endpoint: impl Into<String>, model_id: impl Into<String>) -> Self {
        Self {
            endpoint: Some(endpoint.into()),
            model_id: model_id.into(),
            api_key_env: Some("OPENAI_API_KEY".into()),
            ..Self::new(BackendKind::Chat)
        }
    }

    pub fn mock(spec: impl Into<PathBuf>) -> Self {
        Self {
            mock_spec: Some(spec.into()),
            model_id: "mock".into(),
            ..Self::new(BackendKind::Mock)
        }
    }

    pub fn timeout(&self) -> Duration {
        Duration::from_millis(self.timeout_ms)
    }

    pub fn validate(&self) -> Result<(), BackendError> {
        match self.kind {
            BackendKind::Wire | BackendKind::Chat => {
                if self.endpoint.as_deref().unwrap_or_default().is_empty() {
                    return Err(BackendError::Config(format!(
                        "{} backend requires an endpoint",
                        self.kind
                    )));
                }
                if self.kind == BackendKind::Chat && self.max_tokens == 0 {
                    return Err(BackendError::Config("max_tokens must be >= 1".into()));
                }
            }
            BackendKind::Mock => {
                if self.mock_spec.is_none() {
                    return Err(BackendError::Config(
                        "mock backend requires mock_spec".into(),
                    ));
                }
            }
        }
        if self.timeout_ms == 0 {
            return Err(BackendError::Config("timeout_ms must be > 0".into()));
        }
        Ok(())
    }

    fn api_key(&self) -> Option<String> {
        let var = self.api_key_env.as_deref()?;
        match std::env::var(var) {
            Ok(v) if !v.is_empty() => Some(v),
            _ => {
                log::warn!("credential variable {var} is not set; sending no credential");
                None
            }
        }
    }

    /// Builds the engine described by this config. Mock specs are read from
    /// disk; templates and language names let a consistency mock parse
    /// prompts.
    pub fn connect(
        &self,
        templates: &TemplateRegistry,
        names: &LanguageNames,
    ) -> Result<Box<dyn CompletionBackend>, BackendError> {
        self.validate()?;
        Ok(match self.kind {
            BackendKind::Wire => Box::new(WireClient::new(self)?),
            BackendKind::Chat => Box::new(ChatClient::new(self)?),
            BackendKind::Mock => {
                let path = self.mock_spec.as_ref().expect("validated");
                let spec = MockSpec::load(path)?;
                Box::new(MockBackend::new(spec, &self.model_id, templates, names)?)
            }
        })
    }
}

/// Orders continuations by non-increasing score (stable, so equal scores
/// keep engine order) and caps them at `num_beams`.
pub fn finish_response(
    request: &CompletionRequest,
    mut continuations: Vec<ScoredContinuation>,
) -> Result<Vec<ScoredContinuation>, BackendError> {
    if continuations.iter().any(|c| c.score.is_nan()) {
        return Err(BackendError::Malformed("NaN sequence score".into()));
    }
    continuations.sort_by(|a, b| b.score.total_cmp(&a.score));
    continuations.truncate(request.num_beams);
    Ok(continuations)
}

/// Runs `attempt` until it succeeds, fails with a non-retryable error, or
/// `retry_limit` retries are spent. The delay doubles after every retry.
pub(crate) fn with_retries<T>(
    retry_limit: u32,
    backoff: Duration,
    mut attempt: impl FnMut() -> Result<T, BackendError>,
) -> Result<T, BackendError> {
    let mut delay = backoff;
    let mut tries = 0;
    loop {
        match attempt() {
            Ok(v) => return Ok(v),
            Err(e) if e.is_retryable() && tries < retry_limit => {
                tries += 1;
                log::debug!("retry {tries}/{retry_limit} after {e}");
                std::thread::sleep(delay);
                delay = delay.saturating_mul(2);
            }
            Err(e) => return Err(e),
        }
    }
}

pub(crate) fn map_ureq_error(err: ureq::Error) -> BackendError {
    match err {
        ureq::Error::Status(status, response) => {
            let mut body = response.into_string().unwrap_or_default();
            body.truncate(512);
            BackendError::Status { status, body }
        }
        ureq::Error::Transport(t) => {
            if is_timeout(&t) {
                BackendError::Timeout
            } else {
                BackendError::Network(t.to_string())
            }
        }
    }
}

fn is_timeout(t: &ureq::Transport) -> bool {
    let mut source = std::error::Error::source(t);
    while let Some(e) = source {
        if let Some(io) = e.downcast_ref::<std::io::Error>() {
            if matches!(
                io.kind(),
                std::io::ErrorKind::TimedOut | std::io::ErrorKind::WouldBlock
            ) {
                return true;
            }
        }
        source = e.source();
    }
    t.to_string().contains("timed out")
}

pub(crate) fn read_body(response: ureq::Response) -> Result<String, BackendError> {
    response.into_string().map_err(|e| match e.kind() {
        std::io::ErrorKind::TimedOut | std::io::ErrorKind::WouldBlock => BackendError::Timeout,
        _ => BackendError::Network(e.to_string()),
    })
}

#[cfg(test)]
mod tests {
    use std::cell::Cell;

    use super::*;

    #[test]
    fn request_validation() {
        assert!(CompletionRequest::new("p", 0, 10).is_err());
        assert!(CompletionRequest::new("p", 5, 0).is_err());
        assert!(CompletionRequest::new("p", 5, 10).is_ok());
    }

    #[test]
    fn finish_orders_and_caps() {
        let req = CompletionRequest::new("p", 2, 10).unwrap();
        let out = finish_response(
            &req,
            vec![
                ScoredContinuation::new("a", -0.5),
                ScoredContinuation::new("b", -0.1),
                ScoredContinuation::new("c", -0.5),
            ],
        )
        .unwrap();
        let texts: Vec<_> = out.iter().map(|c| c.text.as_str()).collect();
        assert_eq!(texts, ["b", "a"]);
    }

    #[test]
    fn nan_score_is_malformed() {
        let req = CompletionRequest::new("p", 2, 10).unwrap();
        let err = finish_response(&req, vec![ScoredContinuation::new("a", f64::NAN)]);
        assert!(matches!(err, Err(BackendError::Malformed(_))));
    }

    #[test]
    fn config_validation() {
        assert!(BackendConfig::new(BackendKind::Wire).validate().is_err());
        assert!(BackendConfig::wire("http://localhost:1").validate().is_ok());
        assert!(BackendConfig::new(BackendKind::Mock).validate().is_err());
        let mut chat = BackendConfig::chat("http://x", "gpt");
        assert_eq!(chat.max_tokens, 5);
        assert_eq!(chat.temperature, 0.0);
        chat.max_tokens = 0;
        assert!(chat.validate().is_err());
    }

    #[test]
    fn retries_stop_at_limit() {
        let calls = Cell::new(0);
        let out: Result<(), _> = with_retries(3, Duration::ZERO, || {
            calls.set(calls.get() + 1);
            Err(BackendError::Timeout)
        });
        assert!(matches!(out, Err(BackendError::Timeout)));
        assert_eq!(calls.get(), 4);
    }

    #[test]
    fn non_retryable_fails_fast() {
        let calls = Cell::new(0);
        let out: Result<(), _> = with_retries(3, Duration::ZERO, || {
            calls.set(calls.get() + 1);
            Err(BackendError::Status {
                status: 400,
                body: String::new(),
            })
        });
        assert!(out.is_err());
        assert_eq!(calls.get(), 1);
    }

    #[test]
    fn retry_recovers() {
        let calls = Cell::new(0);
        let out = with_retries(3, Duration::ZERO, || {
            calls.set(calls.get() + 1);
            if calls.get() < 3 {
                Err(BackendError::Status {
                    status: 503,
                    body: String::new(),
                })
            } else {
                Ok(7)
            }
        });
        assert_eq!(out.unwrap(), 7);
    }
}
