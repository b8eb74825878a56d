use std::collections::HashSet;
use std::fmt;

use serde::{Deserialize, Serialize};

use super::{
    normalize_whitespace, AnswerType, Promptbook, TaskKind, Variable, DEFAULT_MISSING_SENTINEL,
};
use crate::digest::sha256_hex;

/// How a name whose prefix disagrees with its task kind is reported.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum PrefixPolicy {
    #[default]
    Error,
    Warn,
}

#[derive(Debug, Clone, Copy, Default)]
pub struct LintOptions {
    pub prefix: PrefixPolicy,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Severity {
    Error,
    Warning,
}

/// A located lint finding.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Diagnostic {
    pub severity: Severity,
    /// 1-based source line, when it can be located.
    pub line: Option<usize>,
    /// Field path such as `variables[3].categories`.
    pub field: String,
    pub message: String,
}

impl fmt::Display for Diagnostic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let sev = match self.severity {
            Severity::Error => "error",
            Severity::Warning => "warning",
        };
        match self.line {
            Some(line) => write!(f, "line {line}: {sev}: {}: {}", self.field, self.message),
            None => write!(f, "{sev}: {}: {}", self.field, self.message),
        }
    }
}

/// Parsing failed; holds every error (and warning) found.
#[derive(Debug, Clone, thiserror::Error)]
#[error("{}", render_errors(.diagnostics))]
pub struct PromptbookError {
    pub diagnostics: Vec<Diagnostic>,
}

impl PromptbookError {
    pub fn errors(&self) -> impl Iterator<Item = &Diagnostic> {
        self.diagnostics.iter().filter(|d| d.severity == Severity::Error)
    }
}

fn render_errors(diags: &[Diagnostic]) -> String {
    diags
        .iter()
        .filter(|d| d.severity == Severity::Error)
        .map(|d| d.to_string())
        .collect::<Vec<_>>()
        .join("; ")
}

/// On-disk layout of a promptbook.
#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub(crate) struct BookFile {
    id: String,
    version: String,
    role: String,
    variables: Vec<VariableFile>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct VariableFile {
    name: String,
    task: String,
    instruction: String,
    #[serde(rename = "type")]
    answer_type: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    categories: Option<Vec<String>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    verbatim: Option<bool>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    missing_sentinel: Option<String>,
}

impl BookFile {
    pub(crate) fn from_book(book: &Promptbook) -> Self {
        BookFile {
            id: book.id.clone(),
            version: book.version.clone(),
            role: book.role_preamble.clone(),
            variables: book
                .variables
                .iter()
                .map(|v| VariableFile {
                    name: v.name.clone(),
                    task: v.task.as_str().to_string(),
                    instruction: v.instruction.clone(),
                    answer_type: v.answer_type.as_str().to_string(),
                    categories: (!v.categories.is_empty()).then(|| v.categories.clone()),
                    verbatim: v.verbatim.then_some(true),
                    missing_sentinel: Some(v.missing_sentinel.clone()),
                })
                .collect(),
        }
    }
}

/// Parse with the default lint options (prefix mismatches are errors).
pub fn parse_promptbook(source: &str) -> Result<Promptbook, PromptbookError> {
    parse_promptbook_with(source, LintOptions::default()).map(|(book, _)| book)
}

/// Parse and lint; on success also returns any warnings.
pub fn parse_promptbook_with(
    source: &str,
    opts: LintOptions,
) -> Result<(Promptbook, Vec<Diagnostic>), PromptbookError> {
    let file: BookFile = serde_json::from_str(source).map_err(|e| PromptbookError {
        diagnostics: vec![Diagnostic {
            severity: Severity::Error,
            line: Some(e.line()).filter(|l| *l > 0),
            field: "document".into(),
            message: format!("malformed promptbook: {e}"),
        }],
    })?;

    let name_lines = locate_name_keys(source);
    let mut diags = Vec::new();
    let mut push = |severity, line: Option<usize>, field: String, message: String| {
        diags.push(Diagnostic { severity, line, field, message })
    };

    let id = normalize_whitespace(&file.id);
    let version = normalize_whitespace(&file.version);
    let role = normalize_whitespace(&file.role);
    if id.is_empty() {
        push(Severity::Error, line_of_key(source, "id"), "id".into(), "id is empty".into());
    }
    if version.is_empty() {
        push(
            Severity::Error,
            line_of_key(source, "version"),
            "version".into(),
            "version is empty".into(),
        );
    }
    if file.variables.is_empty() {
        push(
            Severity::Error,
            line_of_key(source, "variables"),
            "variables".into(),
            "promptbook has no variables".into(),
        );
    }

    let mut seen = HashSet::new();
    let mut variables = Vec::with_capacity(file.variables.len());
    for (i, raw) in file.variables.into_iter().enumerate() {
        let line = name_lines.get(i).copied();
        let at = |f: &str| format!("variables[{i}].{f}");
        let name = raw.name.trim().to_string();

        if !is_identifier(&name) {
            push(Severity::Error, line, at("name"), format!("`{name}` is not an identifier"));
        }
        if !seen.insert(name.clone()) {
            push(Severity::Error, line, at("name"), format!("duplicate variable name `{name}`"));
        }

        let task = TaskKind::parse(raw.task.trim());
        if task.is_none() {
            push(
                Severity::Error,
                line,
                at("task"),
                format!(
                    "unknown task `{}` (expected annotation, summarization or extraction)",
                    raw.task
                ),
            );
        }
        let answer_type = AnswerType::parse(raw.answer_type.trim());
        if answer_type.is_none() {
            push(
                Severity::Error,
                line,
                at("type"),
                format!("unknown answer type `{}`", raw.answer_type),
            );
        }

        if let Some(task) = task {
            if !name.starts_with(task.prefix()) {
                let severity = match opts.prefix {
                    PrefixPolicy::Error => Severity::Error,
                    PrefixPolicy::Warn => Severity::Warning,
                };
                push(
                    severity,
                    line,
                    at("name"),
                    format!(
                        "`{name}` should start with `{}` for the {} task",
                        task.prefix(),
                        task.as_str()
                    ),
                );
            }
        }

        let instruction = normalize_whitespace(&raw.instruction);
        if instruction.is_empty() {
            push(Severity::Error, line, at("instruction"), format!("`{name}` has no instruction"));
        }

        let categories: Vec<String> = raw
            .categories
            .unwrap_or_default()
            .iter()
            .map(|c| normalize_whitespace(c))
            .collect();
        match answer_type {
            Some(AnswerType::Categorical) => {
                if categories.is_empty() {
                    push(
                        Severity::Error,
                        line,
                        at("categories"),
                        format!("categorical variable `{name}` has no categories"),
                    );
                }
                let mut uniq = HashSet::new();
                let mut folded = HashSet::new();
                for c in &categories {
                    if c.is_empty() {
                        push(Severity::Error, line, at("categories"), "empty category".into());
                    } else if !uniq.insert(c.as_str()) {
                        push(
                            Severity::Error,
                            line,
                            at("categories"),
                            format!("duplicate category `{c}` in `{name}`"),
                        );
                    } else if !folded.insert(c.to_lowercase()) {
                        push(
                            Severity::Warning,
                            line,
                            at("categories"),
                            format!("category `{c}` in `{name}` differs from another only by case"),
                        );
                    }
                }
            }
            Some(_) if !categories.is_empty() => push(
                Severity::Error,
                line,
                at("categories"),
                format!("categories given for non-categorical variable `{name}`"),
            ),
            _ => {}
        }

        let verbatim = raw.verbatim.unwrap_or(false);
        if verbatim && answer_type.is_some_and(|t| t != AnswerType::String) {
            push(
                Severity::Error,
                line,
                at("verbatim"),
                format!("verbatim is only allowed on string variables (`{name}`)"),
            );
        }

        let missing_sentinel = raw
            .missing_sentinel
            .map(|s| s.trim().to_string())
            .unwrap_or_else(|| DEFAULT_MISSING_SENTINEL.to_string());
        if missing_sentinel.is_empty() {
            push(Severity::Error, line, at("missing_sentinel"), "empty missing sentinel".into());
        }

        if let (Some(task), Some(answer_type)) = (task, answer_type) {
            variables.push(Variable {
                name,
                task,
                instruction,
                answer_type,
                categories,
                verbatim,
                missing_sentinel,
            });
        }
    }

    if diags.iter().any(|d| d.severity == Severity::Error) {
        return Err(PromptbookError { diagnostics: diags });
    }

    let mut book = Promptbook {
        id,
        version,
        role_preamble: role,
        variables,
        content_hash: String::new(),
    };
    book.content_hash = sha256_hex(book.to_canonical_json().as_bytes());
    Ok((book, diags))
}

fn is_identifier(s: &str) -> bool {
    let mut chars = s.chars();
    matches!(chars.next(), Some(c) if c.is_ascii_alphabetic() || c == '_')
        && chars.all(|c| c.is_ascii_alphanumeric() || c == '_')
}

/// Lines (1-based) of every `"name":` key, in document order.
fn locate_name_keys(source: &str) -> Vec<usize> {
    key_lines(source, "name")
}

fn line_of_key(source: &str, key: &str) -> Option<usize> {
    key_lines(source, key).into_iter().next()
}

fn key_lines(source: &str, key: &str) -> Vec<usize> {
    let needle = format!("\"{key}\"");
    let mut out = Vec::new();
    for (idx, _) in source.match_indices(&needle) {
        let rest = source[idx + needle.len()..].trim_start();
        if rest.starts_with(':') {
            out.push(source[..idx].matches('\n').count() + 1);
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn book(vars: &str) -> String {
        format!(
            r#"{{
  "id": "t",
  "version": "1",
  "role": "You are a coder.",
  "variables": [{vars}]
}}"#
        )
    }

    const AN_X: &str = r#"
    {"name": "AN_X", "task": "annotation", "instruction": "Is X present?", "type": "binary"}"#;

    #[test]
    fn parses_minimal_book() {
        let b = parse_promptbook(&book(AN_X)).unwrap();
        assert_eq!(b.variables.len(), 1);
        assert_eq!(b.variables[0].answer_type, AnswerType::Binary);
        assert_eq!(b.variables[0].missing_sentinel, "N/A");
        assert_eq!(b.content_hash.len(), 64);
    }

    #[test]
    fn empty_variables_rejected() {
        let err = parse_promptbook(&book("")).unwrap_err();
        assert!(err.to_string().contains("promptbook has no variables"), "{err}");
    }

    #[test]
    fn duplicate_name_is_located() {
        let err = parse_promptbook(&book(&format!("{AN_X},{AN_X}"))).unwrap_err();
        let d = err.errors().next().unwrap();
        assert!(d.message.contains("AN_X"));
        assert_eq!(d.field, "variables[1].name");
        assert_eq!(d.line, Some(7));
    }

    #[test]
    fn prefix_mismatch_error_or_warning() {
        let v = r#"{"name": "SU_X", "task": "annotation", "instruction": "x", "type": "binary"}"#;
        assert!(parse_promptbook(&book(v)).is_err());
        let (b, warnings) =
            parse_promptbook_with(&book(v), LintOptions { prefix: PrefixPolicy::Warn }).unwrap();
        assert_eq!(b.variables.len(), 1);
        assert_eq!(warnings.len(), 1);
        assert_eq!(warnings[0].severity, Severity::Warning);
    }

    #[test]
    fn type_errors() {
        let cases = [
            (r#"{"name": "AN_C", "task": "annotation", "instruction": "c", "type": "categorical"}"#, "no categories"),
            (r#"{"name": "AN_C", "task": "annotation", "instruction": "c", "type": "colour"}"#, "unknown answer type"),
            (r#"{"name": "AN_C", "task": "annotation", "instruction": "c", "type": "categorical", "categories": ["a", "a"]}"#, "duplicate category"),
            (r#"{"name": "AN_C", "task": "annotation", "instruction": "c", "type": "binary", "verbatim": true}"#, "verbatim"),
            (r#"{"name": "AN_C", "task": "coding", "instruction": "c", "type": "binary"}"#, "unknown task"),
        ];
        for (v, needle) in cases {
            let err = parse_promptbook(&book(v)).unwrap_err();
            assert!(err.to_string().contains(needle), "{needle}: {err}");
        }
    }

    #[test]
    fn malformed_json_reports_line() {
        let err = parse_promptbook("{\n\"id\": \"x\",\n oops }").unwrap_err();
        assert_eq!(err.diagnostics[0].line, Some(3));
        let err = parse_promptbook(r#"{"id": "x"}"#).unwrap_err();
        assert!(err.to_string().contains("malformed"));
    }

    #[test]
    fn case_near_miss_warns() {
        let v = r#"{"name": "AN_C", "task": "annotation", "instruction": "c", "type": "categorical", "categories": ["Other", "other"]}"#;
        let (_, warnings) = parse_promptbook_with(&book(v), LintOptions::default()).unwrap();
        assert_eq!(warnings.len(), 1);
    }

    #[test]
    fn hash_ignores_whitespace_but_not_content() {
        let a = parse_promptbook(&book(AN_X)).unwrap();
        let spaced = book(AN_X).replace("Is X present?", "  Is   X\\n present? ");
        let b = parse_promptbook(&spaced).unwrap();
        assert_eq!(a.content_hash, b.content_hash);
        let changed = parse_promptbook(&book(&AN_X.replace("present", "absent"))).unwrap();
        assert_ne!(a.content_hash, changed.content_hash);
    }
}
