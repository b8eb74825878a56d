use std::time::Duration;

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use super::{FailureKind, GatewayError, ModelConfig};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChatMessage {
    pub role: String,
    pub content: String,
}

impl ChatMessage {
    pub fn system(content: impl Into<String>) -> Self {
        ChatMessage { role: "system".into(), content: content.into() }
    }

    pub fn user(content: impl Into<String>) -> Self {
        ChatMessage { role: "user".into(), content: content.into() }
    }

    pub fn assistant(content: impl Into<String>) -> Self {
        ChatMessage { role: "assistant".into(), content: content.into() }
    }
}

/// Request body fields of a chat-completions call.
#[derive(Debug, Clone, PartialEq)]
pub struct ChatRequest {
    pub model: String,
    pub messages: Vec<ChatMessage>,
    pub temperature: f64,
    pub top_p: f64,
    pub max_tokens: u32,
}

impl ChatRequest {
    pub fn to_json(&self) -> Value {
        json!({
            "model": self.model,
            "messages": self.messages,
            "temperature": self.temperature,
            "top_p": self.top_p,
            "max_tokens": self.max_tokens,
        })
    }
}

/// Identifies a transport attempt; backends key scripted behaviour on it.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CallContext {
    pub doc_id: String,
    /// 1 for the first request about the document, 2 for the re-ask.
    pub call_seq: u32,
    /// Attempt within this call, 1-based.
    pub attempt: u32,
    /// Attempt across all calls for the document, 1-based.
    pub doc_attempt: u32,
    pub repeat_index: u32,
    pub prompt_hash: String,
    pub doc_text: String,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Usage {
    pub input: u64,
    pub output: u64,
}

/// Successful transport reply.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TransportResponse {
    /// The message content, byte-exact.
    pub content: String,
    pub usage: Option<Usage>,
    pub model: Option<String>,
}

/// Something that can answer a chat request.
pub trait Transport: Send + Sync {
    fn send(&self, req: &ChatRequest, ctx: &CallContext) -> Result<TransportResponse, GatewayError>;

    /// Short backend name for manifests.
    fn name(&self) -> &'static str;

    /// Original start time of a call this backend reproduces from a log.
    fn recorded_at(&self, _doc_id: &str, _call_seq: u32) -> Option<String> {
        None
    }
}

/// HTTPS client for OpenAI-compatible `/chat/completions` endpoints.
pub struct HttpTransport {
    agent: ureq::Agent,
    url: String,
    api_key: String,
}

impl HttpTransport {
    pub fn new(config: &ModelConfig, api_key: impl Into<String>) -> Self {
        let agent: ureq::Agent = ureq::Agent::config_builder()
            .timeout_global(Some(Duration::from_secs(config.request_timeout_secs)))
            .http_status_as_error(false)
            .build()
            .into();
        HttpTransport {
            agent,
            url: format!("{}/chat/completions", config.base_url.trim_end_matches('/')),
            api_key: api_key.into(),
        }
    }
}

impl Transport for HttpTransport {
    fn send(&self, req: &ChatRequest, _ctx: &CallContext) -> Result<TransportResponse, GatewayError> {
        let result = self
            .agent
            .post(&self.url)
            .header("Authorization", &format!("Bearer {}", self.api_key))
            .send_json(req.to_json());
        let mut resp = match result {
            Ok(r) => r,
            Err(ureq::Error::Timeout(t)) => {
                return Err(GatewayError::new(FailureKind::Timeout, format!("timed out ({t})")))
            }
            Err(e) => return Err(GatewayError::new(FailureKind::Network, e.to_string())),
        };
        let status = resp.status().as_u16();
        let body = resp
            .body_mut()
            .read_to_string()
            .map_err(|e| GatewayError::new(FailureKind::Network, e.to_string()))?;
        if status != 200 {
            return Err(classify_status(status, &body));
        }
        parse_completion(&body)
    }

    fn name(&self) -> &'static str {
        "live"
    }
}

/// Map a non-200 HTTP status to a failure kind.
pub fn classify_status(status: u16, body: &str) -> GatewayError {
    let snippet: String = body.chars().take(200).collect();
    let kind = match status {
        401 | 403 => FailureKind::AuthFailed,
        408 => FailureKind::Timeout,
        429 => FailureKind::RateLimited,
        500..=599 => FailureKind::ServerError,
        400 | 413 if body.contains("context_length") || body.contains("maximum context") => {
            FailureKind::ContextOverflow
        }
        _ if body.contains("content_filter") || body.contains("content_policy") => {
            FailureKind::ContentRefused
        }
        _ => FailureKind::BadResponse,
    };
    GatewayError::new(kind, format!("HTTP {status}: {snippet}"))
}

/// Extract content, usage and model from a chat-completions response body.
pub fn parse_completion(body: &str) -> Result<TransportResponse, GatewayError> {
    let bad = |m: &str| GatewayError::new(FailureKind::BadResponse, m.to_string());
    let v: Value = serde_json::from_str(body).map_err(|e| bad(&format!("response is not JSON: {e}")))?;
    let choice = v
        .get("choices")
        .and_then(|c| c.get(0))
        .ok_or_else(|| bad("response has no choices"))?;
    let message = choice.get("message").ok_or_else(|| bad("choice has no message"))?;
    let finish = choice.get("finish_reason").and_then(Value::as_str);
    let refusal = message.get("refusal").and_then(Value::as_str);
    let content = message.get("content").and_then(Value::as_str);
    let content = match (content, refusal, finish) {
        (_, Some(r), _) => return Err(GatewayError::new(FailureKind::ContentRefused, r.to_string())),
        (_, _, Some("content_filter")) => {
            return Err(GatewayError::new(FailureKind::ContentRefused, "content_filter"))
        }
        (Some(c), _, _) => c.to_string(),
        (None, _, _) => return Err(bad("message has no content")),
    };
    let usage = v.get("usage").and_then(|u| {
        Some(Usage {
            input: u.get("prompt_tokens")?.as_u64()?,
            output: u.get("completion_tokens")?.as_u64()?,
        })
    });
    let model = v.get("model").and_then(Value::as_str).map(str::to_string);
    Ok(TransportResponse { content, usage, model })
}
