use serde_json::Value;

use crate::promptbook::{validate_record, OutputSchema, ValidatedRecord};

/// Why a reply could not be turned into a record.
#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum ParseFailure {
    #[error("non_json: {0}")]
    NonJson(String),
    #[error("envelope_mismatch: {0}")]
    EnvelopeMismatch(String),
}

impl ParseFailure {
    pub fn kind(&self) -> &'static str {
        match self {
            ParseFailure::NonJson(_) => "non_json",
            ParseFailure::EnvelopeMismatch(_) => "envelope_mismatch",
        }
    }
}

/// Remove one surrounding Markdown code fence, if the whole reply is fenced.
///
/// The opening fence may carry a language tag (```` ```json ````). Anything
/// outside the fence pair means the reply is left untouched.
pub fn strip_code_fence(raw: &str) -> &str {
    let t = raw.trim();
    if !(t.starts_with("```") && t.ends_with("```")) || t.len() < 6 {
        return raw;
    }
    let Some(nl) = t.find('\n') else {
        return raw;
    };
    let info = &t[3..nl];
    if info.contains('`') {
        return raw;
    }
    let body = &t[nl + 1..t.len() - 3];
    if body.contains("```") {
        return raw;
    }
    body
}

/// Strictly parse and validate a model reply.
///
/// Order: strip a single fence pair, parse JSON with no repair, check the
/// envelope, validate fields against the schema. Field-level problems are
/// returned inside the record, not as errors.
pub fn parse_response(
    raw: &str,
    schema: &OutputSchema,
    doc_text: &str,
    doc_id: &str,
) -> Result<ValidatedRecord, ParseFailure> {
    let body = strip_code_fence(raw);
    let value: Value =
        serde_json::from_str(body).map_err(|e| ParseFailure::NonJson(e.to_string()))?;
    validate_record(schema, &value, doc_text, doc_id)
        .map_err(|e| ParseFailure::EnvelopeMismatch(e.0))
}
