//! Backend that answers from a previously recorded raw log.

use std::collections::HashMap;
use std::io::{BufRead, BufReader};
use std::path::Path;

use super::{
    CallContext, CallRecord, CallStatus, ChatRequest, FailureKind, GatewayError, Transport,
    TransportResponse, Usage,
};

/// Replays `raw_log.jsonl` records keyed by `(doc_id, call_seq)`.
///
/// Recorded transport failures are reproduced attempt by attempt before the
/// recorded reply, so retries and statuses come out the same as in the
/// original run. A prompt-hash mismatch is reported as `replay_miss`.
pub struct ReplayTransport {
    records: HashMap<(String, u32), CallRecord>,
}

impl ReplayTransport {
    pub fn new(records: impl IntoIterator<Item = CallRecord>) -> Self {
        let mut map = HashMap::new();
        for r in records {
            map.entry((r.doc_id.clone(), r.call_seq)).or_insert(r);
        }
        ReplayTransport { records: map }
    }

    pub fn load(path: &Path) -> std::io::Result<Self> {
        Ok(Self::new(read_raw_log(path)?))
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }
}

/// Read a JSONL file of call records.
pub fn read_raw_log(path: &Path) -> std::io::Result<Vec<CallRecord>> {
    let file = std::fs::File::open(path)?;
    let mut out = Vec::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let rec: CallRecord = serde_json::from_str(&line).map_err(|e| {
            std::io::Error::new(
                std::io::ErrorKind::InvalidData,
                format!("{}:{}: {e}", path.display(), i + 1),
            )
        })?;
        out.push(rec);
    }
    Ok(out)
}

impl Transport for ReplayTransport {
    fn send(&self, _req: &ChatRequest, ctx: &CallContext) -> Result<TransportResponse, GatewayError> {
        let rec = self
            .records
            .get(&(ctx.doc_id.clone(), ctx.call_seq))
            .ok_or_else(|| {
                GatewayError::new(
                    FailureKind::ReplayMiss,
                    format!("no recorded call {} for `{}`", ctx.call_seq, ctx.doc_id),
                )
            })?;
        if rec.prompt_hash != ctx.prompt_hash {
            return Err(GatewayError::new(
                FailureKind::ReplayMiss,
                format!("prompt for `{}` differs from the recording", ctx.doc_id),
            ));
        }
        if let Some(kind) = rec.attempt_errors.get(ctx.attempt as usize - 1) {
            return Err(GatewayError::new(*kind, "replayed failure"));
        }
        match rec.status {
            CallStatus::Failed(kind) => Err(GatewayError::new(kind, "replayed failure")),
            _ => Ok(TransportResponse {
                content: rec.raw_output.clone(),
                usage: rec.usage_reported.then_some(Usage {
                    input: rec.input_tokens,
                    output: rec.output_tokens,
                }),
                model: rec.model_version_reported.clone(),
            }),
        }
    }

    fn name(&self) -> &'static str {
        "replay"
    }

    fn recorded_at(&self, doc_id: &str, call_seq: u32) -> Option<String> {
        self.records
            .get(&(doc_id.to_string(), call_seq))
            .map(|r| r.timestamp.clone())
    }
}
