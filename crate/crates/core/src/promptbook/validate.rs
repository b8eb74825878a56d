use std::fmt;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use super::{FieldKind, OutputSchema, SchemaField};

/// A successfully typed answer.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TypedValue {
    Text(String),
    Integer(i64),
    Decimal(f64),
}

impl fmt::Display for TypedValue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            TypedValue::Text(s) => f.write_str(s),
            TypedValue::Integer(i) => write!(f, "{i}"),
            TypedValue::Decimal(x) => write!(f, "{x}"),
        }
    }
}

/// Resolution of one schema field.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Cell {
    Value(TypedValue),
    /// The model returned the field's missing sentinel.
    Missing,
    /// The field produced a violation; see the record's violation list.
    Invalid,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ViolationKind {
    MissingField,
    WrongType,
    CategoryOutOfSet,
    VerbatimMismatch,
    UnexpectedField,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Violation {
    pub variable: String,
    pub kind: ViolationKind,
    #[serde(default, skip_serializing_if = "String::is_empty")]
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValidatedRecord {
    pub doc_id: String,
    /// One entry per schema field, in schema order.
    pub values: Vec<(String, Cell)>,
    pub violations: Vec<Violation>,
}

impl ValidatedRecord {
    pub fn get(&self, name: &str) -> Option<&Cell> {
        self.values.iter().find(|(n, _)| n == name).map(|(_, c)| c)
    }

    pub fn is_clean(&self) -> bool {
        self.violations.is_empty()
    }
}

/// The reply is valid JSON but not one object (or a one-object array).
#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("structural mismatch: {0}")]
pub struct EnvelopeError(pub String);

/// Collapse whitespace runs to single spaces and trim.
pub fn normalize_whitespace(s: &str) -> String {
    s.split_whitespace().collect::<Vec<_>>().join(" ")
}

/// Whitespace-normalized, case-sensitive substring test. Snippets joined by
/// an ellipsis are checked independently; an all-empty value never matches.
pub fn verbatim_matches(value: &str, document: &str) -> bool {
    let doc = normalize_whitespace(document);
    let mut parts = 0;
    for part in value.split("...").flat_map(|p| p.split('\u{2026}')) {
        let part = normalize_whitespace(part);
        if part.is_empty() {
            continue;
        }
        parts += 1;
        if !doc.contains(&part) {
            return false;
        }
    }
    parts > 0
}

/// Check a parsed reply against the schema.
///
/// Accepts a bare object or an array holding exactly one object; anything
/// else is an [`EnvelopeError`]. Field problems are collected as violations.
pub fn validate_record(
    schema: &OutputSchema,
    parsed: &Value,
    doc_text: &str,
    doc_id: &str,
) -> Result<ValidatedRecord, EnvelopeError> {
    let object = match parsed {
        Value::Object(map) => map,
        Value::Array(items) => match items.as_slice() {
            [Value::Object(map)] => map,
            [] => return Err(EnvelopeError("empty array".into())),
            [_] => return Err(EnvelopeError("array element is not an object".into())),
            _ => {
                return Err(EnvelopeError(format!(
                    "expected one object, got {}",
                    items.len()
                )))
            }
        },
        other => {
            return Err(EnvelopeError(format!(
                "expected an object or one-object array, got {}",
                json_kind(other)
            )))
        }
    };

    let mut values = Vec::with_capacity(schema.fields.len());
    let mut violations = Vec::new();
    for field in &schema.fields {
        let cell = match object.get(&field.name) {
            None => {
                violations.push(Violation {
                    variable: field.name.clone(),
                    kind: ViolationKind::MissingField,
                    detail: String::new(),
                });
                Cell::Invalid
            }
            Some(v) => match resolve_field(field, v, doc_text) {
                Ok(cell) => cell,
                Err((kind, detail)) => {
                    violations.push(Violation {
                        variable: field.name.clone(),
                        kind,
                        detail,
                    });
                    Cell::Invalid
                }
            },
        };
        values.push((field.name.clone(), cell));
    }
    for key in object.keys() {
        if schema.field(key).is_none() {
            violations.push(Violation {
                variable: key.clone(),
                kind: ViolationKind::UnexpectedField,
                detail: String::new(),
            });
        }
    }

    Ok(ValidatedRecord {
        doc_id: doc_id.to_string(),
        values,
        violations,
    })
}

fn resolve_field(
    field: &SchemaField,
    value: &Value,
    doc_text: &str,
) -> Result<Cell, (ViolationKind, String)> {
    if let Value::String(s) = value {
        if s.trim() == field.missing_sentinel {
            return Ok(Cell::Missing);
        }
    }
    let wrong = |expected: &str| {
        Err((
            ViolationKind::WrongType,
            format!("expected {expected}, got {}", compact(value)),
        ))
    };
    match &field.kind {
        FieldKind::String => {
            let Value::String(s) = value else {
                return wrong("string");
            };
            if field.verbatim && !verbatim_matches(s, doc_text) {
                return Err((
                    ViolationKind::VerbatimMismatch,
                    "value does not occur in the document".into(),
                ));
            }
            Ok(Cell::Value(TypedValue::Text(s.clone())))
        }
        FieldKind::Integer { range } => {
            let Some(i) = value.as_i64() else {
                return wrong("integer");
            };
            if let Some((lo, hi)) = range {
                if i < *lo || i > *hi {
                    return wrong(&format!("integer in [{lo}, {hi}]"));
                }
            }
            Ok(Cell::Value(TypedValue::Integer(i)))
        }
        FieldKind::Decimal => match value.as_f64() {
            Some(x) if value.is_number() => Ok(Cell::Value(TypedValue::Decimal(x))),
            _ => wrong("number"),
        },
        FieldKind::Categorical(categories) => {
            let Value::String(s) = value else {
                return wrong("string category");
            };
            if categories.iter().any(|c| c == s) {
                Ok(Cell::Value(TypedValue::Text(s.clone())))
            } else {
                let near = categories
                    .iter()
                    .find(|c| c.to_lowercase() == s.trim().to_lowercase());
                let detail = match near {
                    Some(c) => format!("`{s}` not in category set (near miss of `{c}`)"),
                    None => format!("`{s}` not in category set"),
                };
                Err((ViolationKind::CategoryOutOfSet, detail))
            }
        }
    }
}

fn json_kind(v: &Value) -> &'static str {
    match v {
        Value::Null => "null",
        Value::Bool(_) => "boolean",
        Value::Number(_) => "number",
        Value::String(_) => "string",
        Value::Array(_) => "array",
        Value::Object(_) => "object",
    }
}

fn compact(v: &Value) -> String {
    let mut s = v.to_string();
    if s.len() > 40 {
        let mut cut = 40;
        while !s.is_char_boundary(cut) {
            cut -= 1;
        }
        s.truncate(cut);
        s.push_str("...");
    }
    s
}
