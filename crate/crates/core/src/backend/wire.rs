use serde::{Deserialize, Serialize};

use super::{
    finish_response, map_ureq_error, read_body, with_retries, BackendConfig, BackendError,
    BackendIdentity, BackendKind, CompletionBackend, CompletionRequest, ScoredContinuation,
};

#[derive(Serialize)]
pub(crate) struct WireRequest<'a> {
    pub prompt: &'a str,
    pub num_beams: usize,
    pub max_new_tokens: usize,
    pub model: &'a str,
}

#[derive(Serialize, Deserialize)]
pub(crate) struct WireResponse {
    pub continuations: Vec<ScoredContinuation>,
}

/// Client for a beam-search inference sidecar.
pub struct WireClient {
    agent: ureq::Agent,
    endpoint: String,
    model_id: String,
    retry_limit: u32,
    backoff: std::time::Duration,
    api_key: Option<String>,
}

impl WireClient {
    pub fn new(cfg: &BackendConfig) -> Result<Self, BackendError> {
        let endpoint = cfg
            .endpoint
            .clone()
            .ok_or_else(|| BackendError::Config("wire backend requires an endpoint".into()))?;
        Ok(Self {
            agent: ureq::AgentBuilder::new().timeout(cfg.timeout()).build(),
            endpoint,
            model_id: cfg.model_id.clone(),
            retry_limit: cfg.retry_limit,
            backoff: std::time::Duration::from_millis(cfg.backoff_ms),
            api_key: cfg.api_key(),
        })
    }

    fn send_once(&self, req: &CompletionRequest) -> Result<Vec<ScoredContinuation>, BackendError> {
        let body = WireRequest {
            prompt: &req.prompt,
            num_beams: req.num_beams,
            max_new_tokens: req.max_new_tokens,
            model: &self.model_id,
        };
        let mut call = self
            .agent
            .post(&self.endpoint)
            .set("Content-Type", "application/json");
        if let Some(key) = &self.api_key {
            call = call.set("Authorization", &format!("Bearer {key}"));
        }
        let payload = serde_json::to_string(&body).expect("request serializes");
        let response = call.send_string(&payload).map_err(map_ureq_error)?;
        let text = read_body(response)?;
        let parsed: WireResponse =
            serde_json::from_str(&text).map_err(|e| BackendError::Malformed(e.to_string()))?;
        Ok(parsed.continuations)
    }
}

impl CompletionBackend for WireClient {
    fn complete(&self, req: &CompletionRequest) -> Result<Vec<ScoredContinuation>, BackendError> {
        req.validate()?;
        let raw = with_retries(self.retry_limit, self.backoff, || self.send_once(req))?;
        finish_response(req, raw)
    }

    fn identity(&self) -> BackendIdentity {
        BackendIdentity {
            kind: BackendKind::Wire,
            model_id: self.model_id.clone(),
            temperature: None,
            system_message: None,
        }
    }
}
