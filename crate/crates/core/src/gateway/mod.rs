//! Provider-agnostic chat-completions client.
//!
//! [`Gateway`] combines a [`Transport`] (live HTTP, scripted mock, or replay
//! of a recorded log) with a sliding-window [`RateLimiter`] and a
//! [`RetryPolicy`]. All waiting goes through a [`Clock`], so tests run on
//! simulated time.

mod clock;
mod config;
mod cost;
mod limiter;
mod mock;
mod record;
mod replay;
mod retry;
mod transport;

pub use clock::{Clock, SimClock, SystemClock};
pub use config::{ConfigError, ModelConfig, DEFAULT_API_KEY_ENV};
pub use cost::{estimate_cost, price_tokens, CostEstimate};
pub use limiter::{Permit, RateLimiter, Unsatisfiable, WINDOW};
pub use mock::{schema_responder, Directive, FaultScript, MockTransport, Responder, MALFORMED_REPLY};
pub use record::{CallParams, CallRecord, CallStatus, FailureKind, GatewayError};
pub use replay::{read_raw_log, ReplayTransport};
pub use retry::{with_retry, Retried, RetryFailure, RetryPolicy};
pub use transport::{
    classify_status, parse_completion, CallContext, ChatMessage, ChatRequest, HttpTransport,
    Transport, TransportResponse, Usage,
};

use std::sync::Arc;
use std::time::Instant;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::corpus::estimate_tokens;
use crate::digest::hash_fields;

/// One logical request about a document.
#[derive(Debug, Clone)]
pub struct CallSpec<'a> {
    pub doc_id: &'a str,
    pub doc_text: &'a str,
    pub call_seq: u32,
    /// Transport attempts already spent on this document.
    pub prior_attempts: u32,
    pub repeat_index: u32,
    pub messages: Vec<ChatMessage>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Completion {
    /// Provider content, unmodified.
    pub raw: String,
    pub usage: Usage,
    pub usage_reported: bool,
    pub reported_version: Option<String>,
    pub attempts: u32,
    pub attempt_errors: Vec<FailureKind>,
    pub latency_ms: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CallFailure {
    pub error: GatewayError,
    /// Transport attempts made; 0 when rejected before sending.
    pub attempts: u32,
    pub attempt_errors: Vec<FailureKind>,
    pub latency_ms: u64,
}

/// Stable digest of a message list.
pub fn prompt_hash(messages: &[ChatMessage]) -> String {
    hash_fields(messages.iter().flat_map(|m| [m.role.as_str(), m.content.as_str()]))
}

/// Estimated prompt size of a message list.
pub fn estimate_prompt_tokens(messages: &[ChatMessage]) -> u64 {
    let joined: Vec<&str> = messages.iter().map(|m| m.content.as_str()).collect();
    estimate_tokens(&joined.join("\n"))
}

pub struct Gateway {
    config: ModelConfig,
    transport: Arc<dyn Transport>,
    limiter: Arc<RateLimiter>,
    clock: Arc<dyn Clock>,
    seed: u64,
}

impl Gateway {
    /// Gateway with its own limiter sized from the config.
    pub fn new(config: ModelConfig, transport: Arc<dyn Transport>, clock: Arc<dyn Clock>) -> Self {
        let limiter = Arc::new(RateLimiter::new(config.rpm_limit, config.tpm_limit, clock.clone()));
        Gateway { config, transport, limiter, clock, seed: 0 }
    }

    pub fn with_limiter(mut self, limiter: Arc<RateLimiter>) -> Self {
        self.limiter = limiter;
        self
    }

    /// Seed for backoff jitter.
    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn config(&self) -> &ModelConfig {
        &self.config
    }

    pub fn clock(&self) -> &Arc<dyn Clock> {
        &self.clock
    }

    pub fn limiter(&self) -> &Arc<RateLimiter> {
        &self.limiter
    }

    pub fn backend_name(&self) -> &'static str {
        self.transport.name()
    }

    /// Recorded start time when the backend replays a log.
    pub fn recorded_at(&self, doc_id: &str, call_seq: u32) -> Option<String> {
        self.transport.recorded_at(doc_id, call_seq)
    }

    /// Single system + user exchange outside of any run.
    pub fn complete(&self, system: &str, user: &str) -> Result<Completion, CallFailure> {
        self.call(CallSpec {
            doc_id: "adhoc",
            doc_text: "",
            call_seq: 1,
            prior_attempts: 0,
            repeat_index: 1,
            messages: vec![ChatMessage::system(system), ChatMessage::user(user)],
        })
    }

    /// Send one logical request with context check, rate limiting and retries.
    pub fn call(&self, spec: CallSpec<'_>) -> Result<Completion, CallFailure> {
        let started = Instant::now();
        let elapsed = || started.elapsed().as_millis() as u64;
        let prompt_tokens = estimate_prompt_tokens(&spec.messages);
        let reserve = prompt_tokens + u64::from(self.config.max_output_tokens);
        if reserve > self.config.context_window {
            return Err(CallFailure {
                error: GatewayError::new(
                    FailureKind::ContextOverflow,
                    format!(
                        "{prompt_tokens} prompt + {} output tokens exceed the {}-token context window",
                        self.config.max_output_tokens, self.config.context_window
                    ),
                ),
                attempts: 0,
                attempt_errors: vec![],
                latency_ms: 0,
            });
        }

        let request = ChatRequest {
            model: self.config.model_id.clone(),
            messages: spec.messages.clone(),
            temperature: self.config.temperature,
            top_p: self.config.top_p,
            max_tokens: self.config.max_output_tokens,
        };
        let hash = prompt_hash(&spec.messages);
        let seed_key = [
            self.seed.to_le_bytes().to_vec(),
            spec.doc_id.as_bytes().to_vec(),
            spec.call_seq.to_le_bytes().to_vec(),
            spec.repeat_index.to_le_bytes().to_vec(),
        ];
        let jitter_seed = u64::from_str_radix(&hash_fields(seed_key)[..16], 16).unwrap_or(0);
        let mut rng = ChaCha8Rng::seed_from_u64(jitter_seed);

        let outcome = with_retry(&self.config.retry, self.clock.as_ref(), &mut rng, |attempt| {
            let permit = self
                .limiter
                .acquire(reserve)
                .map_err(|e| GatewayError::new(FailureKind::Unsatisfiable, e.to_string()))?;
            let ctx = CallContext {
                doc_id: spec.doc_id.to_string(),
                call_seq: spec.call_seq,
                attempt,
                doc_attempt: spec.prior_attempts + attempt,
                repeat_index: spec.repeat_index,
                prompt_hash: hash.clone(),
                doc_text: spec.doc_text.to_string(),
            };
            let resp = self.transport.send(&request, &ctx)?;
            let actual = resp
                .usage
                .as_ref()
                .map(|u| u.input + u.output)
                .unwrap_or(reserve);
            self.limiter.reconcile(&permit, actual);
            Ok(resp)
        });

        match outcome {
            Ok(r) => {
                let resp = r.value;
                let usage_reported = resp.usage.is_some();
                let usage = resp.usage.unwrap_or_else(|| Usage {
                    input: prompt_tokens,
                    output: estimate_tokens(&resp.content),
                });
                Ok(Completion {
                    raw: resp.content,
                    usage,
                    usage_reported,
                    reported_version: resp.model,
                    attempts: r.attempts,
                    attempt_errors: r.errors,
                    latency_ms: elapsed(),
                })
            }
            Err(f) => Err(CallFailure {
                // An unsatisfiable budget is raised before anything is sent.
                attempts: if f.error.kind == FailureKind::Unsatisfiable { f.attempts - 1 } else { f.attempts },
                error: f.error,
                attempt_errors: f.errors,
                latency_ms: elapsed(),
            }),
        }
    }
}
