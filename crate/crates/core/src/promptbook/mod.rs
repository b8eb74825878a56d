//! Codebooks as prompts.
//!
//! A promptbook is a JSON document listing the variables a model must code
//! for every document. Each variable carries a task family (annotation,
//! summarization, extraction), an instruction and an answer type. The book
//! compiles into a rendered prompt ([`render_prompt`]) and a strict output
//! schema ([`schema_of`]) against which replies are checked
//! ([`validate_record`]).

mod parse;
mod render;
mod schema;
mod validate;

pub use parse::{
    parse_promptbook, parse_promptbook_with, Diagnostic, LintOptions, PrefixPolicy,
    PromptbookError, Severity,
};
pub use render::{render_prompt, RenderedPrompt, DOCUMENT_PLACEHOLDER, ONLY_JSON_DIRECTIVE};
pub use schema::{schema_of, FieldKind, OutputSchema, SchemaField};
pub use validate::{
    normalize_whitespace, validate_record, verbatim_matches, Cell, EnvelopeError,
    TypedValue, ValidatedRecord, Violation, ViolationKind,
};

use serde::{Deserialize, Serialize};

/// Default marker a model returns when a variable does not apply.
pub const DEFAULT_MISSING_SENTINEL: &str = "N/A";

/// Task family of a variable, encoded in its name prefix.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TaskKind {
    Annotation,
    Summarization,
    Extraction,
}

impl TaskKind {
    /// Conventional name prefix, e.g. `AN_` for annotation.
    pub fn prefix(self) -> &'static str {
        match self {
            TaskKind::Annotation => "AN_",
            TaskKind::Summarization => "SU_",
            TaskKind::Extraction => "IE_",
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            TaskKind::Annotation => "annotation",
            TaskKind::Summarization => "summarization",
            TaskKind::Extraction => "extraction",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "annotation" => Some(TaskKind::Annotation),
            "summarization" => Some(TaskKind::Summarization),
            "extraction" => Some(TaskKind::Extraction),
            _ => None,
        }
    }
}

/// Expected shape of a variable's answer.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AnswerType {
    String,
    Integer,
    Decimal,
    /// Integer restricted to `{0, 1}`.
    Binary,
    /// String restricted to a declared category set.
    Categorical,
}

impl AnswerType {
    pub fn as_str(self) -> &'static str {
        match self {
            AnswerType::String => "string",
            AnswerType::Integer => "integer",
            AnswerType::Decimal => "decimal",
            AnswerType::Binary => "binary",
            AnswerType::Categorical => "categorical",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "string" => Some(AnswerType::String),
            "integer" => Some(AnswerType::Integer),
            "decimal" => Some(AnswerType::Decimal),
            "binary" => Some(AnswerType::Binary),
            "categorical" => Some(AnswerType::Categorical),
            _ => None,
        }
    }

    /// Numeric answers are scored on an interval scale downstream.
    pub fn is_numeric(self) -> bool {
        matches!(self, AnswerType::Integer | AnswerType::Decimal | AnswerType::Binary)
    }
}

/// One coded column of the output table.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Variable {
    pub name: String,
    pub task: TaskKind,
    pub instruction: String,
    pub answer_type: AnswerType,
    /// Allowed values; non-empty only for categorical variables.
    pub categories: Vec<String>,
    /// Values must be copied from the document (string variables only).
    pub verbatim: bool,
    pub missing_sentinel: String,
}

/// A parsed, validated codebook.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Promptbook {
    pub id: String,
    pub version: String,
    pub role_preamble: String,
    pub variables: Vec<Variable>,
    /// SHA-256 of the canonical serialization.
    pub content_hash: String,
}

impl Promptbook {
    pub fn variable(&self, name: &str) -> Option<&Variable> {
        self.variables.iter().find(|v| v.name == name)
    }

    pub fn variable_names(&self) -> Vec<String> {
        self.variables.iter().map(|v| v.name.clone()).collect()
    }

    /// Canonical JSON form. Parsing this text yields an equal book.
    pub fn to_canonical_json(&self) -> String {
        let file = parse::BookFile::from_book(self);
        serde_json::to_string_pretty(&file).expect("promptbook serialization is infallible")
    }
}

/// Name and answer type of a variable, as recorded in run manifests.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct VariableSpec {
    pub name: String,
    pub task: TaskKind,
    pub answer_type: AnswerType,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub categories: Vec<String>,
    #[serde(default = "default_sentinel")]
    pub missing_sentinel: String,
}

fn default_sentinel() -> String {
    DEFAULT_MISSING_SENTINEL.to_string()
}

impl From<&Variable> for VariableSpec {
    fn from(v: &Variable) -> Self {
        VariableSpec {
            name: v.name.clone(),
            task: v.task,
            answer_type: v.answer_type,
            categories: v.categories.clone(),
            missing_sentinel: v.missing_sentinel.clone(),
        }
    }
}
