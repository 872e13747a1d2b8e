use serde::{Deserialize, Serialize};

use super::{
    map_ureq_error, read_body, with_retries, BackendConfig, BackendError, BackendIdentity,
    BackendKind, CompletionBackend, CompletionRequest, ScoredContinuation,
};

#[derive(Serialize, Deserialize)]
pub(crate) struct ChatMessage {
    pub role: String,
    pub content: String,
}

#[derive(Serialize, Deserialize)]
pub(crate) struct ChatRequest {
    pub model: String,
    pub messages: Vec<ChatMessage>,
    pub temperature: f64,
    pub max_tokens: usize,
}

#[derive(Deserialize)]
struct ChatResponse {
    choices: Vec<ChatChoice>,
}

#[derive(Deserialize)]
struct ChatChoice {
    message: ChatReply,
}

#[derive(Deserialize)]
struct ChatReply {
    #[serde(default)]
    content: Option<String>,
}

/// Client for a chat-completions endpoint.
///
/// The prompt is sent as the user message after the configured system
/// message. The single reply comes back as a one-element beam with score 0.
pub struct ChatClient {
    agent: ureq::Agent,
    endpoint: String,
    model_id: String,
    temperature: f64,
    max_tokens: usize,
    system_message: String,
    retry_limit: u32,
    backoff: std::time::Duration,
    api_key: Option<String>,
}

impl ChatClient {
    pub fn new(cfg: &BackendConfig) -> Result<Self, BackendError> {
        let endpoint = cfg
            .endpoint
            .clone()
            .ok_or_else(|| BackendError::Config("chat backend requires an endpoint".into()))?;
        Ok(Self {
            agent: ureq::AgentBuilder::new().timeout(cfg.timeout()).build(),
            endpoint,
            model_id: cfg.model_id.clone(),
            temperature: cfg.temperature,
            max_tokens: cfg.max_tokens,
            system_message: cfg.system_message.clone(),
            retry_limit: cfg.retry_limit,
            backoff: std::time::Duration::from_millis(cfg.backoff_ms),
            api_key: cfg.api_key(),
        })
    }

    pub(crate) fn body(&self, prompt: &str) -> ChatRequest {
        ChatRequest {
            model: self.model_id.clone(),
            messages: vec![
                ChatMessage {
                    role: "system".into(),
                    content: self.system_message.clone(),
                },
                ChatMessage {
                    role: "user".into(),
                    content: prompt.to_string(),
                },
            ],
            temperature: self.temperature,
            max_tokens: self.max_tokens,
        }
    }

    fn send_once(&self, req: &CompletionRequest) -> Result<String, BackendError> {
        let mut call = self
            .agent
            .post(&self.endpoint)
            .set("Content-Type", "application/json");
        if let Some(key) = &self.api_key {
            call = call.set("Authorization", &format!("Bearer {key}"));
        }
        let payload = serde_json::to_string(&self.body(&req.prompt)).expect("request serializes");
        let response = call.send_string(&payload).map_err(map_ureq_error)?;
        let text = read_body(response)?;
        let parsed: ChatResponse =
            serde_json::from_str(&text).map_err(|e| BackendError::Malformed(e.to_string()))?;
        parsed
            .choices
            .into_iter()
            .next()
            .and_then(|c| c.message.content)
            .ok_or_else(|| BackendError::Malformed("response has no message content".into()))
    }
}

impl CompletionBackend for ChatClient {
    fn complete(&self, req: &CompletionRequest) -> Result<Vec<ScoredContinuation>, BackendError> {
        req.validate()?;
        let text = with_retries(self.retry_limit, self.backoff, || self.send_once(req))?;
        Ok(vec![ScoredContinuation::new(text, 0.0)])
    }

    fn identity(&self) -> BackendIdentity {
        BackendIdentity {
            kind: BackendKind::Chat,
            model_id: self.model_id.clone(),
            temperature: Some(self.temperature),
            system_message: Some(self.system_message.clone()),
        }
    }
}
