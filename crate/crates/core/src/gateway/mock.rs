//! Scripted in-process backend for deterministic tests.

use std::collections::BTreeMap;
use std::path::Path;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Arc;
use std::time::Duration;

use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

use super::{
    CallContext, ChatRequest, FailureKind, GatewayError, Transport, TransportResponse, Usage,
};
use crate::corpus::estimate_tokens;
use crate::digest::hash_fields;
use crate::promptbook::{FieldKind, OutputSchema};

/// Reply that is not JSON; used for `malformed_json` directives.
pub const MALFORMED_REPLY: &str = "Sure! Here is the JSON you asked for: {\"";

/// One scripted behaviour for a transport attempt.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Directive {
    /// Answer with exactly this text.
    Respond(String),
    /// Answer with the default responder.
    Pass,
    MalformedJson,
    RateLimitOnce,
    /// Time out on this many consecutive attempts.
    Timeout(u32),
    ServerError,
    Refuse,
    AuthFailed,
}

/// Per-document directive lists, consumed one per transport attempt.
///
/// File format: `{"docs": {"<doc_id>": [<directive>, ...]}}` where a
/// directive is `"malformed_json"`, `"rate_limit_once"`, `"refuse"`,
/// `"server_error"`, `"auth_failed"`, `"pass"`, `{"respond": "<text>"}` or
/// `{"timeout": n}`. Attempts past the end of a list use the default
/// responder.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct FaultScript {
    #[serde(default)]
    pub docs: BTreeMap<String, Vec<Directive>>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
enum Step {
    Respond(String),
    Pass,
    Fail(FailureKind),
    Malformed,
}

impl FaultScript {
    pub fn from_json(text: &str) -> Result<Self, serde_json::Error> {
        serde_json::from_str(text)
    }

    pub fn load(path: &Path) -> std::io::Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::from_json(&text).map_err(|e| std::io::Error::new(std::io::ErrorKind::InvalidData, e))
    }

    pub fn push(&mut self, doc_id: impl Into<String>, directive: Directive) -> &mut Self {
        self.docs.entry(doc_id.into()).or_default().push(directive);
        self
    }

    /// Behaviour for a document's `doc_attempt`-th transport attempt.
    fn step(&self, doc_id: &str, doc_attempt: u32) -> Step {
        let Some(list) = self.docs.get(doc_id) else {
            return Step::Pass;
        };
        let mut remaining = doc_attempt.saturating_sub(1);
        for d in list {
            let width = match d {
                Directive::Timeout(n) => *n,
                _ => 1,
            };
            if remaining < width {
                return match d {
                    Directive::Respond(s) => Step::Respond(s.clone()),
                    Directive::Pass => Step::Pass,
                    Directive::MalformedJson => Step::Malformed,
                    Directive::RateLimitOnce => Step::Fail(FailureKind::RateLimited),
                    Directive::Timeout(_) => Step::Fail(FailureKind::Timeout),
                    Directive::ServerError => Step::Fail(FailureKind::ServerError),
                    Directive::Refuse => Step::Fail(FailureKind::ContentRefused),
                    Directive::AuthFailed => Step::Fail(FailureKind::AuthFailed),
                };
            }
            remaining -= width;
        }
        Step::Pass
    }
}

/// Produces the default reply for a call.
pub type Responder = Arc<dyn Fn(&CallContext, &ChatRequest) -> String + Send + Sync>;

/// Deterministic valid replies synthesized from an output schema.
///
/// Values depend only on the document id and variable name: binaries and
/// categories are picked by hash, verbatim fields quote the document's first
/// words, other strings are a fixed phrase.
pub fn schema_responder(schema: OutputSchema) -> Responder {
    Arc::new(move |ctx: &CallContext, _req: &ChatRequest| {
        let mut obj = Map::new();
        for f in &schema.fields {
            let h = u64::from_str_radix(&hash_fields([ctx.doc_id.as_str(), f.name.as_str()])[..12], 16)
                .unwrap_or(0);
            let v = match &f.kind {
                FieldKind::Integer { range: Some((lo, hi)) } => {
                    Value::from(lo + (h % (hi - lo + 1) as u64) as i64)
                }
                FieldKind::Integer { range: None } => Value::from((h % 100) as i64),
                FieldKind::Decimal => Value::from((h % 1000) as f64 / 10.0),
                FieldKind::Categorical(cats) => Value::from(cats[(h % cats.len() as u64) as usize].clone()),
                FieldKind::String if f.verbatim => {
                    let words: Vec<&str> = ctx.doc_text.split_whitespace().take(8).collect();
                    if words.is_empty() {
                        Value::from(f.missing_sentinel.clone())
                    } else {
                        Value::from(words.join(" "))
                    }
                }
                FieldKind::String => Value::from(format!("{} for {}", f.name, ctx.doc_id)),
            };
            obj.insert(f.name.clone(), v);
        }
        Value::Array(vec![Value::Object(obj)]).to_string()
    })
}

/// Scripted backend with a concurrency probe.
pub struct MockTransport {
    script: FaultScript,
    responder: Responder,
    work: Duration,
    in_flight: AtomicUsize,
    max_in_flight: AtomicUsize,
    calls: AtomicUsize,
}

impl MockTransport {
    pub fn new(script: FaultScript, responder: Responder) -> Self {
        MockTransport {
            script,
            responder,
            work: Duration::ZERO,
            in_flight: AtomicUsize::new(0),
            max_in_flight: AtomicUsize::new(0),
            calls: AtomicUsize::new(0),
        }
    }

    /// Hold each call for `d` of real time, so overlapping calls are observable.
    pub fn with_work(mut self, d: Duration) -> Self {
        self.work = d;
        self
    }

    /// Highest number of simultaneous `send` calls seen.
    pub fn max_in_flight(&self) -> usize {
        self.max_in_flight.load(Ordering::SeqCst)
    }

    pub fn calls(&self) -> usize {
        self.calls.load(Ordering::SeqCst)
    }
}

impl Transport for MockTransport {
    fn send(&self, req: &ChatRequest, ctx: &CallContext) -> Result<TransportResponse, GatewayError> {
        self.calls.fetch_add(1, Ordering::SeqCst);
        let now = self.in_flight.fetch_add(1, Ordering::SeqCst) + 1;
        self.max_in_flight.fetch_max(now, Ordering::SeqCst);
        if !self.work.is_zero() {
            std::thread::sleep(self.work);
        }
        let content = match self.script.step(&ctx.doc_id, ctx.doc_attempt) {
            Step::Respond(s) => Ok(s),
            Step::Pass => Ok((self.responder)(ctx, req)),
            Step::Malformed => Ok(MALFORMED_REPLY.to_string()),
            Step::Fail(kind) => Err(GatewayError::new(kind, "scripted failure")),
        };
        self.in_flight.fetch_sub(1, Ordering::SeqCst);
        let content = content?;
        let input: u64 = req.messages.iter().map(|m| estimate_tokens(&m.content)).sum();
        Ok(TransportResponse {
            usage: Some(Usage {
                input,
                output: estimate_tokens(&content),
            }),
            model: Some(format!("{}-mock", req.model)),
            content,
        })
    }

    fn name(&self) -> &'static str {
        "mock"
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ctx(doc: &str, doc_attempt: u32) -> CallContext {
        CallContext {
            doc_id: doc.into(),
            call_seq: 1,
            attempt: doc_attempt,
            doc_attempt,
            repeat_index: 1,
            prompt_hash: String::new(),
            doc_text: "alpha beta".into(),
        }
    }

    fn req() -> ChatRequest {
        ChatRequest { model: "m".into(), messages: vec![], temperature: 0.0, top_p: 1.0, max_tokens: 10 }
    }

    #[test]
    fn script_file_format() {
        let s = FaultScript::from_json(
            r#"{"docs": {"d1": ["malformed_json", {"timeout": 2}, "rate_limit_once", {"respond": "[{}]"}]}}"#,
        )
        .unwrap();
        let steps: Vec<Step> = (1..=6).map(|a| s.step("d1", a)).collect();
        assert_eq!(
            steps,
            vec![
                Step::Malformed,
                Step::Fail(FailureKind::Timeout),
                Step::Fail(FailureKind::Timeout),
                Step::Fail(FailureKind::RateLimited),
                Step::Respond("[{}]".into()),
                Step::Pass,
            ]
        );
        assert_eq!(s.step("other", 1), Step::Pass);
    }

    #[test]
    fn respond_is_byte_exact() {
        let mut s = FaultScript::default();
        s.push("d", Directive::Respond(" {\"a\":\t1} ".into()));
        let m = MockTransport::new(s, Arc::new(|_: &CallContext, _: &ChatRequest| "x".to_string()));
        assert_eq!(m.send(&req(), &ctx("d", 1)).unwrap().content, " {\"a\":\t1} ");
        assert_eq!(m.send(&req(), &ctx("d", 2)).unwrap().content, "x");
        assert_eq!(m.calls(), 2);
    }
}
