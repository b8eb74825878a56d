//! Replication record written next to every run and report.
//!
//! A [`DocumentationBlock`] restates the prompts, model identities and
//! access dates, sampling parameters, validation and robustness procedures
//! and the tool version. Sections that do not apply are written as
//! explicitly absent with a reason, never omitted.

use std::collections::BTreeSet;
use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::gateway::{CallRecord, RetryPolicy};
use crate::pipeline::{RunCounts, RunManifest};
use crate::promptbook::{render_prompt, Promptbook};
use crate::TOOL_VERSION;

/// A documented section, or the reason it is absent.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status", content = "value", rename_all = "snake_case")]
pub enum Section<T> {
    Recorded(T),
    Absent(String),
}

impl<T> Section<T> {
    pub fn recorded(&self) -> Option<&T> {
        match self {
            Section::Recorded(t) => Some(t),
            Section::Absent(_) => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PromptDoc {
    pub promptbook_id: String,
    pub promptbook_version: String,
    pub content_hash: String,
    pub system: String,
    /// User message with the `{{document}}` slot left in place.
    pub user_template: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelDoc {
    pub model_id: String,
    pub reported_versions: Vec<String>,
    /// Distinct UTC dates (YYYY-MM-DD) on which the model was called.
    pub access_dates: Vec<String>,
    pub access_date_source: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParametersDoc {
    pub model_id: String,
    pub backend: String,
    pub temperature: f64,
    pub top_p: f64,
    pub max_output_tokens: u32,
    pub context_window: u64,
    pub rpm_limit: u64,
    pub tpm_limit: u64,
    pub retry: RetryPolicy,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunDoc {
    pub run_id: String,
    pub seed: u64,
    pub repeat_index: u32,
    pub pilot: bool,
    pub corpus_digest: String,
    pub documents: usize,
    pub counts: RunCounts,
    pub started: String,
    pub finished: Option<String>,
}

/// A validation or robustness check and what it found.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProcedureDoc {
    pub procedure: String,
    pub sample_size: usize,
    pub details: serde_json::Value,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DocumentationBlock {
    pub tool_version: String,
    pub prompts: Section<Vec<PromptDoc>>,
    pub models: Section<Vec<ModelDoc>>,
    pub parameters: Section<Vec<ParametersDoc>>,
    pub runs: Section<Vec<RunDoc>>,
    pub validation: Section<Vec<ProcedureDoc>>,
    pub robustness: Section<Vec<ProcedureDoc>>,
}

const REPLAY_SOURCE: &str = "carried forward from the replayed log";
const LIVE_SOURCE: &str = "call timestamps";

impl DocumentationBlock {
    /// Block with every section absent.
    pub fn empty() -> Self {
        DocumentationBlock {
            tool_version: TOOL_VERSION.to_string(),
            prompts: Section::Absent("no prompts recorded".into()),
            models: Section::Absent("no model calls recorded".into()),
            parameters: Section::Absent("no model parameters recorded".into()),
            runs: Section::Absent("no runs recorded".into()),
            validation: Section::Absent("no validation against a gold standard performed".into()),
            robustness: Section::Absent("no robustness checks performed".into()),
        }
    }

    /// Block describing one pipeline run.
    pub fn for_run(book: &Promptbook, manifest: &RunManifest, records: &[CallRecord]) -> Self {
        let rendered = render_prompt(book);
        let versions: BTreeSet<String> = records
            .iter()
            .filter_map(|r| r.model_version_reported.clone())
            .collect();
        let dates: BTreeSet<String> = records
            .iter()
            .filter(|r| r.timestamp.len() >= 10)
            .map(|r| r.timestamp[..10].to_string())
            .collect();
        let m = &manifest.model;
        let mut block = Self::empty();
        block.prompts = Section::Recorded(vec![PromptDoc {
            promptbook_id: book.id.clone(),
            promptbook_version: book.version.clone(),
            content_hash: book.content_hash.clone(),
            system: rendered.system,
            user_template: rendered.user_template,
        }]);
        block.models = Section::Recorded(vec![ModelDoc {
            model_id: m.model_id.clone(),
            reported_versions: versions.into_iter().collect(),
            access_dates: dates.into_iter().collect(),
            access_date_source: if manifest.backend == "replay" { REPLAY_SOURCE } else { LIVE_SOURCE }
                .to_string(),
        }]);
        block.parameters = Section::Recorded(vec![ParametersDoc {
            model_id: m.model_id.clone(),
            backend: manifest.backend.clone(),
            temperature: m.temperature,
            top_p: m.top_p,
            max_output_tokens: m.max_output_tokens,
            context_window: m.context_window,
            rpm_limit: m.rpm_limit,
            tpm_limit: m.tpm_limit,
            retry: m.retry,
        }]);
        block.runs = Section::Recorded(vec![RunDoc {
            run_id: manifest.run_id.clone(),
            seed: manifest.seed,
            repeat_index: manifest.repeat_index,
            pilot: manifest.pilot,
            corpus_digest: manifest.corpus_digest.clone(),
            documents: manifest.corpus_size,
            counts: manifest.counts,
            started: manifest.started.clone(),
            finished: manifest.finished.clone(),
        }]);
        block
    }

    /// Union of several blocks (e.g. the runs compared by a stability check).
    /// Entries that appear in several blocks are kept once.
    pub fn merge(blocks: &[DocumentationBlock]) -> Self {
        fn union<T: Clone + PartialEq>(
            sections: impl Iterator<Item = Section<Vec<T>>>,
            absent: Section<Vec<T>>,
        ) -> Section<Vec<T>> {
            let mut out: Vec<T> = Vec::new();
            for s in sections {
                if let Section::Recorded(items) = s {
                    for it in items {
                        if !out.contains(&it) {
                            out.push(it);
                        }
                    }
                }
            }
            if out.is_empty() {
                absent
            } else {
                Section::Recorded(out)
            }
        }
        let e = Self::empty();
        DocumentationBlock {
            tool_version: TOOL_VERSION.to_string(),
            prompts: union(blocks.iter().map(|b| b.prompts.clone()), e.prompts),
            models: union(blocks.iter().map(|b| b.models.clone()), e.models),
            parameters: union(blocks.iter().map(|b| b.parameters.clone()), e.parameters),
            runs: union(blocks.iter().map(|b| b.runs.clone()), e.runs),
            validation: union(blocks.iter().map(|b| b.validation.clone()), e.validation),
            robustness: union(blocks.iter().map(|b| b.robustness.clone()), e.robustness),
        }
    }

    pub fn add_validation(&mut self, p: ProcedureDoc) {
        push(&mut self.validation, p);
    }

    pub fn add_robustness(&mut self, p: ProcedureDoc) {
        push(&mut self.robustness, p);
    }

    pub fn load(path: &Path) -> std::io::Result<Self> {
        let text = std::fs::read_to_string(path)?;
        serde_json::from_str(&text).map_err(|e| std::io::Error::new(std::io::ErrorKind::InvalidData, e))
    }

    pub fn write(&self, path: &Path) -> std::io::Result<()> {
        let json = serde_json::to_string_pretty(self).expect("documentation serializes");
        std::fs::write(path, json + "\n")
    }

    /// Plain-text rendering for reports.
    pub fn render_text(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "Tool: {}", self.tool_version);
        s.push_str("\nPrompts\n");
        match &self.prompts {
            Section::Recorded(ps) => {
                for p in ps {
                    let _ = writeln!(
                        s,
                        "- {} v{} ({})\n  System: {}\n  User template:\n{}",
                        p.promptbook_id,
                        p.promptbook_version,
                        &p.content_hash[..p.content_hash.len().min(12)],
                        p.system,
                        indent(&p.user_template)
                    );
                }
            }
            Section::Absent(why) => {
                let _ = writeln!(s, "- absent: {why}");
            }
        }
        s.push_str("\nModels\n");
        match &self.models {
            Section::Recorded(ms) => {
                for m in ms {
                    let _ = writeln!(
                        s,
                        "- {} (reported: {}; accessed: {}, {})",
                        m.model_id,
                        list_or_none(&m.reported_versions),
                        list_or_none(&m.access_dates),
                        m.access_date_source
                    );
                }
            }
            Section::Absent(why) => {
                let _ = writeln!(s, "- absent: {why}");
            }
        }
        s.push_str("\nParameters\n");
        match &self.parameters {
            Section::Recorded(ps) => {
                for p in ps {
                    let _ = writeln!(
                        s,
                        "- {} via {}: temperature={}, top_p={}, max_tokens={}, context={}, rpm={}, tpm={}, retries={}",
                        p.model_id,
                        p.backend,
                        p.temperature,
                        p.top_p,
                        p.max_output_tokens,
                        p.context_window,
                        p.rpm_limit,
                        p.tpm_limit,
                        p.retry.max_attempts
                    );
                }
            }
            Section::Absent(why) => {
                let _ = writeln!(s, "- absent: {why}");
            }
        }
        s.push_str("\nRuns\n");
        match &self.runs {
            Section::Recorded(rs) => {
                for r in rs {
                    let _ = writeln!(
                        s,
                        "- {} (repeat {}, seed {}{}): {} documents; ok {}, violations {}, failed_parse {}, failed_call {}",
                        r.run_id,
                        r.repeat_index,
                        r.seed,
                        if r.pilot { ", pilot" } else { "" },
                        r.documents,
                        r.counts.ok,
                        r.counts.violations,
                        r.counts.failed_parse,
                        r.counts.failed_call
                    );
                }
            }
            Section::Absent(why) => {
                let _ = writeln!(s, "- absent: {why}");
            }
        }
        for (title, section) in [("Validation", &self.validation), ("Robustness", &self.robustness)] {
            let _ = writeln!(s, "\n{title}");
            match section {
                Section::Recorded(ps) => {
                    for p in ps {
                        let _ = writeln!(s, "- {} (n={})", p.procedure, p.sample_size);
                    }
                }
                Section::Absent(why) => {
                    let _ = writeln!(s, "- absent: {why}");
                }
            }
        }
        s
    }
}

fn push(section: &mut Section<Vec<ProcedureDoc>>, p: ProcedureDoc) {
    match section {
        Section::Recorded(v) => v.push(p),
        Section::Absent(_) => *section = Section::Recorded(vec![p]),
    }
}

fn indent(text: &str) -> String {
    text.lines().map(|l| format!("    {l}")).collect::<Vec<_>>().join("\n")
}

fn list_or_none(items: &[String]) -> String {
    if items.is_empty() {
        "none".into()
    } else {
        items.join(", ")
    }
}
