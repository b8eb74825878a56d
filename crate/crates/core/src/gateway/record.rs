use std::fmt;

use serde::{Deserialize, Serialize};

/// Why a model call did not produce a usable reply.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FailureKind {
    RateLimited,
    Timeout,
    ServerError,
    /// Connection-level failure before an HTTP status was received.
    Network,
    AuthFailed,
    ContentRefused,
    ContextOverflow,
    /// The request needs more tokens than the per-minute budget allows.
    Unsatisfiable,
    /// The endpoint answered with something that is not a chat completion.
    BadResponse,
    /// The replay log has no usable entry for this call.
    ReplayMiss,
}

impl FailureKind {
    pub fn is_retryable(self) -> bool {
        matches!(
            self,
            FailureKind::RateLimited
                | FailureKind::Timeout
                | FailureKind::ServerError
                | FailureKind::Network
        )
    }

    /// Failures that stop a whole run rather than one document.
    pub fn is_fatal_for_run(self) -> bool {
        matches!(self, FailureKind::AuthFailed)
    }

    pub fn as_str(self) -> &'static str {
        match self {
            FailureKind::RateLimited => "rate_limited",
            FailureKind::Timeout => "timeout",
            FailureKind::ServerError => "server_error",
            FailureKind::Network => "network",
            FailureKind::AuthFailed => "auth_failed",
            FailureKind::ContentRefused => "content_refused",
            FailureKind::ContextOverflow => "context_overflow",
            FailureKind::Unsatisfiable => "unsatisfiable",
            FailureKind::BadResponse => "bad_response",
            FailureKind::ReplayMiss => "replay_miss",
        }
    }
}

impl fmt::Display for FailureKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Error returned by a transport or the gateway for a single attempt.
#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("{kind}: {message}")]
pub struct GatewayError {
    pub kind: FailureKind,
    pub message: String,
}

impl GatewayError {
    pub fn new(kind: FailureKind, message: impl Into<String>) -> Self {
        GatewayError {
            kind,
            message: message.into(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CallStatus {
    Ok,
    /// Succeeded after `n` earlier failed attempts for the document.
    RetriedOk(u32),
    Failed(FailureKind),
}

impl CallStatus {
    pub fn is_success(self) -> bool {
        !matches!(self, CallStatus::Failed(_))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CallParams {
    pub temperature: f64,
    pub top_p: f64,
    pub max_output_tokens: u32,
}

/// Audit trail of one logical model call (retries included).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CallRecord {
    pub call_id: String,
    pub doc_id: String,
    /// 1 for the first request about a document, 2 for the re-ask.
    pub call_seq: u32,
    pub repeat_index: u32,
    pub prompt_hash: String,
    pub promptbook_version: String,
    pub model_id: String,
    pub model_version_reported: Option<String>,
    pub params: CallParams,
    /// RFC 3339 UTC time the call started; its date is the access date.
    pub timestamp: String,
    pub input_tokens: u64,
    pub output_tokens: u64,
    /// Whether the token counts came from the provider.
    pub usage_reported: bool,
    pub raw_output: String,
    pub latency_ms: u64,
    pub status: CallStatus,
    /// Failure kind of every unsuccessful transport attempt, in order.
    #[serde(default)]
    pub attempt_errors: Vec<FailureKind>,
}

impl CallRecord {
    /// Copy with the wall-clock fields cleared, for replay comparisons.
    pub fn without_timing(&self) -> CallRecord {
        CallRecord {
            timestamp: String::new(),
            latency_ms: 0,
            ..self.clone()
        }
    }
}
