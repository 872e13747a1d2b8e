//! Local HTTP server answering wire or chat requests from an in-process
//! engine. Used to replay recorded responses and to exercise the network
//! clients end to end.

use std::sync::atomic::{AtomicU64, AtomicUsize, Ordering};
use std::sync::Arc;
use std::thread::JoinHandle;
use std::time::Duration;

use serde::Deserialize;
use tiny_http::{Header, Method, Response, Server};

use super::chat::ChatRequest;
use super::wire::WireResponse;
use super::{CompletionBackend, CompletionRequest};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ReplayProtocol {
    Wire,
    Chat,
}

#[derive(Deserialize)]
struct IncomingWire {
    prompt: String,
    num_beams: usize,
    max_new_tokens: usize,
}

#[derive(Clone, Debug, Default)]
pub struct FaultPlan {
    /// The first `failures` requests get a 503.
    pub failures: usize,
    /// Every response is delayed by this much.
    pub delay: Duration,
    /// Respond with a body that is not valid JSON.
    pub garbage: bool,
}

struct Shared {
    backend: Box<dyn CompletionBackend>,
    protocol: ReplayProtocol,
    faults: FaultPlan,
    requests: AtomicU64,
    failures_left: AtomicUsize,
}

pub struct ReplayServer {
    server: Arc<Server>,
    shared: Arc<Shared>,
    url: String,
    worker: Option<JoinHandle<()>>,
}

impl ReplayServer {
    /// Binds `addr` (use port 0 for an ephemeral port) and starts serving.
    pub fn start(
        addr: &str,
        backend: Box<dyn CompletionBackend>,
        protocol: ReplayProtocol,
        faults: FaultPlan,
    ) -> std::io::Result<Self> {
        let server = Server::http(addr).map_err(std::io::Error::other)?;
        let server = Arc::new(server);
        let bound = server
            .server_addr()
            .to_ip()
            .ok_or_else(|| std::io::Error::other("not an IP listener"))?;
        let path = match protocol {
            ReplayProtocol::Wire => "/complete",
            ReplayProtocol::Chat => "/v1/chat/completions",
        };
        let shared = Arc::new(Shared {
            backend,
            protocol,
            failures_left: AtomicUsize::new(faults.failures),
            faults,
            requests: AtomicU64::new(0),
        });
        let worker = {
            let server = Arc::clone(&server);
            let shared = Arc::clone(&shared);
            std::thread::spawn(move || {
                for request in server.incoming_requests() {
                    let shared = Arc::clone(&shared);
                    std::thread::spawn(move || handle(&shared, request));
                }
            })
        };
        Ok(Self {
            server,
            shared,
            url: format!("http://{bound}{path}"),
            worker: Some(worker),
        })
    }

    /// Full endpoint URL for client configs.
    pub fn url(&self) -> &str {
        &self.url
    }

    pub fn request_count(&self) -> u64 {
        self.shared.requests.load(Ordering::SeqCst)
    }

    /// Blocks until the server is shut down from elsewhere.
    pub fn wait(mut self) {
        if let Some(worker) = self.worker.take() {
            let _ = worker.join();
        }
    }
}

impl Drop for ReplayServer {
    fn drop(&mut self) {
        self.server.unblock();
        if let Some(worker) = self.worker.take() {
            let _ = worker.join();
        }
    }
}

fn json_response(status: u16, body: String) -> Response<std::io::Cursor<Vec<u8>>> {
    Response::from_string(body)
        .with_status_code(status)
        .with_header(Header::from_bytes("Content-Type", "application/json").expect("valid header"))
}

fn handle(shared: &Shared, mut request: tiny_http::Request) {
    shared.requests.fetch_add(1, Ordering::SeqCst);
    if !shared.faults.delay.is_zero() {
        std::thread::sleep(shared.faults.delay);
    }
    let reply = if request.method() != &Method::Post {
        json_response(405, r#"{"error":"POST only"}"#.into())
    } else if shared
        .failures_left
        .fetch_update(Ordering::SeqCst, Ordering::SeqCst, |n| n.checked_sub(1))
        .is_ok()
    {
        json_response(503, r#"{"error":"injected failure"}"#.into())
    } else if shared.faults.garbage {
        json_response(200, "{not json".into())
    } else {
        let mut body = String::new();
        match request.as_reader().read_to_string(&mut body) {
            Ok(_) => answer(shared, &body),
            Err(e) => json_response(
                400,
                serde_json::json!({ "error": e.to_string() }).to_string(),
            ),
        }
    };
    let _ = request.respond(reply);
}

fn answer(shared: &Shared, body: &str) -> Response<std::io::Cursor<Vec<u8>>> {
    let bad = |msg: String| json_response(400, serde_json::json!({ "error": msg }).to_string());
    match shared.protocol {
        ReplayProtocol::Wire => {
            let incoming: IncomingWire = match serde_json::from_str(body) {
                Ok(v) => v,
                Err(e) => return bad(e.to_string()),
            };
            let req = CompletionRequest {
                prompt: incoming.prompt,
                num_beams: incoming.num_beams,
                max_new_tokens: incoming.max_new_tokens,
            };
            match shared.backend.complete(&req) {
                Ok(continuations) => json_response(
                    200,
                    serde_json::to_string(&WireResponse { continuations }).expect("serializes"),
                ),
                Err(e) => json_response(
                    500,
                    serde_json::json!({ "error": e.to_string() }).to_string(),
                ),
            }
        }
        ReplayProtocol::Chat => {
            let incoming: ChatRequest = match serde_json::from_str(body) {
                Ok(v) => v,
                Err(e) => return bad(e.to_string()),
            };
            let Some(user) = incoming.messages.iter().rev().find(|m| m.role == "user") else {
                return bad("no user message".into());
            };
            let req = CompletionRequest {
                prompt: user.content.clone(),
                num_beams: 1,
                max_new_tokens: incoming.max_tokens.max(1),
            };
            match shared.backend.complete(&req) {
                Ok(continuations) => {
                    let content = continuations
                        .first()
                        .map(|c| c.text.trim_start().to_string())
                        .unwrap_or_default();
                    json_response(
                        200,
                        serde_json::json!({
                            "choices": [{
                                "index": 0,
                                "message": { "role": "assistant", "content": content },
                                "finish_reason": "stop"
                            }]
                        })
                        .to_string(),
                    )
                }
                Err(e) => json_response(
                    500,
                    serde_json::json!({ "error": e.to_string() }).to_string(),
                ),
            }
        }
    }
}
