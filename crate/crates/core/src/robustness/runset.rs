use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::RobustnessError;
use crate::pipeline::{read_manifest, read_table, LoadedTable, RowStatus, RunManifest, TABLE_FILE};
use crate::promptbook::{AnswerType, VariableSpec};

/// Which factor varies between the runs of a set.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Axis {
    /// Same prompt and model, repeated.
    Repeat,
    /// Paraphrased promptbooks against a baseline.
    PromptVariant,
    /// Same promptbook on different models.
    Model,
}

impl Axis {
    pub fn as_str(self) -> &'static str {
        match self {
            Axis::Repeat => "repeat",
            Axis::PromptVariant => "prompt_variant",
            Axis::Model => "model",
        }
    }
}

/// Runset file: `{"axis": "...", "runs": ["dir", ...], "baseline": "dir"}`.
/// Relative paths resolve against the file's directory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunSetFile {
    pub axis: Axis,
    pub runs: Vec<PathBuf>,
    #[serde(default)]
    pub baseline: Option<PathBuf>,
}

impl RunSetFile {
    /// Parse a runset file, resolving relative paths.
    pub fn load(path: &Path) -> Result<Self, RobustnessError> {
        let text = std::fs::read_to_string(path).map_err(|e| RobustnessError::Io(format!("{}: {e}", path.display())))?;
        let file: RunSetFile = serde_json::from_str(&text)
            .map_err(|e| RobustnessError::Precondition(format!("{}: {e}", path.display())))?;
        let base = path.parent().unwrap_or(Path::new("."));
        let resolve = |p: &Path| if p.is_absolute() { p.to_path_buf() } else { base.join(p) };
        Ok(RunSetFile {
            axis: file.axis,
            runs: file.runs.iter().map(|p| resolve(p)).collect(),
            baseline: file.baseline.as_deref().map(resolve),
        })
    }

    /// Every directory the file names, baseline last if not listed.
    pub fn dirs(&self) -> Vec<PathBuf> {
        let mut d = self.runs.clone();
        if let Some(b) = &self.baseline {
            if !d.contains(b) {
                d.push(b.clone());
            }
        }
        d
    }
}

/// One finished run: its manifest and table.
#[derive(Debug, Clone, PartialEq)]
pub struct LoadedRun {
    pub manifest: RunManifest,
    pub table: LoadedTable,
}

impl LoadedRun {
    pub fn load(dir: &Path) -> Result<Self, RobustnessError> {
        Ok(LoadedRun {
            manifest: read_manifest(dir)?,
            table: read_table(&dir.join(TABLE_FILE))?,
        })
    }

    pub fn run_id(&self) -> &str {
        &self.manifest.run_id
    }

    pub fn variable(&self, name: &str) -> Option<&VariableSpec> {
        self.manifest.variables.iter().find(|v| v.name == name)
    }

    /// Value of a variable for a document; failed rows and missing answers
    /// are `None`.
    pub fn value(&self, doc_id: &str, variable: &str) -> Option<String> {
        let spec = self.variable(variable)?;
        let row = self.table.row(doc_id)?;
        if row.status.is_some_and(RowStatus::is_failure) {
            return None;
        }
        self.table
            .value(doc_id, variable, &spec.missing_sentinel)
            .map(|v| v.trim().to_string())
    }
}

/// Runs to compare along one axis.
#[derive(Debug, Clone)]
pub struct RunSet {
    pub axis: Axis,
    pub runs: Vec<LoadedRun>,
    /// Run id of the baseline (prompt-variant axis).
    pub baseline: Option<String>,
}

impl RunSet {
    pub fn new(axis: Axis, runs: Vec<LoadedRun>, baseline: Option<String>) -> Self {
        RunSet { axis, runs, baseline }
    }

    /// Load a runset file and every run directory it lists.
    pub fn load(path: &Path) -> Result<Self, RobustnessError> {
        let file = RunSetFile::load(path)?;
        Self::from_dirs(file.axis, &file.runs, file.baseline.as_deref())
    }

    /// Load run directories; a baseline not listed among `dirs` is added.
    pub fn from_dirs(axis: Axis, dirs: &[PathBuf], baseline: Option<&Path>) -> Result<Self, RobustnessError> {
        let mut runs = Vec::new();
        for dir in dirs {
            runs.push(LoadedRun::load(dir)?);
        }
        let baseline = match baseline {
            Some(dir) => {
                let b = LoadedRun::load(dir)?;
                let id = b.run_id().to_string();
                if !runs.iter().any(|r| r.run_id() == id) {
                    runs.push(b);
                }
                Some(id)
            }
            None => None,
        };
        Ok(RunSet { axis, runs, baseline })
    }

    /// Documents shared by the set, in the first run's order.
    pub(crate) fn units(&self) -> Vec<String> {
        self.runs
            .first()
            .map(|r| r.manifest.processed_ids.clone())
            .unwrap_or_default()
    }

    pub(crate) fn check_same_corpus(&self) -> Result<(), RobustnessError> {
        if let Some(first) = self.runs.first() {
            for r in &self.runs[1..] {
                if r.manifest.corpus_digest != first.manifest.corpus_digest {
                    return Err(RobustnessError::ProtocolViolation(format!(
                        "runs {} and {} cover different corpora",
                        first.run_id(),
                        r.run_id()
                    )));
                }
            }
        }
        Ok(())
    }
}

/// Whether a variable is scored as a number (interval alpha, ICC, SD).
pub(crate) fn is_numeric(spec: &VariableSpec) -> bool {
    matches!(spec.answer_type, AnswerType::Integer | AnswerType::Decimal | AnswerType::Binary)
}
