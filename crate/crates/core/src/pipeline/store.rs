//! Append-only run directory layout.

use std::collections::{HashMap, HashSet};
use std::fs::{File, OpenOptions};
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde::Serialize;

use super::{PipelineError, Row, RunManifest};
use crate::gateway::CallRecord;

pub const TABLE_FILE: &str = "table.csv";
pub const RAW_LOG_FILE: &str = "raw_log.jsonl";
pub const ROWS_FILE: &str = "rows.jsonl";
pub const PROCESSED_FILE: &str = "processed.txt";
pub const MANIFEST_FILE: &str = "manifest.json";
pub const DOCUMENTATION_FILE: &str = "documentation.json";

/// State recovered from an interrupted run.
#[derive(Debug, Default)]
pub(crate) struct Previous {
    pub manifest: Option<RunManifest>,
    pub rows: HashMap<String, Row>,
    pub records: Vec<CallRecord>,
}

/// Single writer for the streaming files of a run directory.
pub(crate) struct RunWriter {
    dir: PathBuf,
    raw: File,
    rows: File,
    processed: File,
}

fn open_append(path: &Path) -> Result<File, PipelineError> {
    OpenOptions::new()
        .create(true)
        .append(true)
        .open(path)
        .map_err(|e| PipelineError::io(path, e))
}

fn json_line<T: Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string(value).expect("run artifacts serialize");
    s.push('\n');
    s
}

impl RunWriter {
    pub fn open(dir: &Path) -> Result<Self, PipelineError> {
        Ok(RunWriter {
            dir: dir.to_path_buf(),
            raw: open_append(&dir.join(RAW_LOG_FILE))?,
            rows: open_append(&dir.join(ROWS_FILE))?,
            processed: open_append(&dir.join(PROCESSED_FILE))?,
        })
    }

    fn write(file: &mut File, path: PathBuf, text: &str) -> Result<(), PipelineError> {
        file.write_all(text.as_bytes())
            .and_then(|_| file.flush())
            .map_err(|e| PipelineError::io(&path, e))
    }

    pub fn records(&mut self, records: &[CallRecord]) -> Result<(), PipelineError> {
        let text: String = records.iter().map(json_line).collect();
        Self::write(&mut self.raw, self.dir.join(RAW_LOG_FILE), &text)
    }

    /// Persist a finished row, then mark it processed. The processed list is
    /// written last, so it never names a document whose row is not on disk.
    pub fn row(&mut self, row: &Row) -> Result<(), PipelineError> {
        Self::write(&mut self.rows, self.dir.join(ROWS_FILE), &json_line(row))?;
        Self::write(&mut self.processed, self.dir.join(PROCESSED_FILE), &format!("{}\n", row.doc_id))
    }
}

/// Parse a JSONL file, skipping lines that do not parse (a torn final write).
fn read_jsonl<T: DeserializeOwned>(path: &Path) -> Result<Vec<T>, PipelineError> {
    if !path.exists() {
        return Ok(Vec::new());
    }
    let file = File::open(path).map_err(|e| PipelineError::io(path, e))?;
    let mut out = Vec::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| PipelineError::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        match serde_json::from_str(&line) {
            Ok(v) => out.push(v),
            Err(e) => log::warn!("{}:{}: skipping unreadable line: {e}", path.display(), i + 1),
        }
    }
    Ok(out)
}

pub(crate) fn read_processed(dir: &Path) -> Result<Vec<String>, PipelineError> {
    let path = dir.join(PROCESSED_FILE);
    if !path.exists() {
        return Ok(Vec::new());
    }
    let text = std::fs::read_to_string(&path).map_err(|e| PipelineError::io(&path, e))?;
    Ok(text.lines().map(str::trim).filter(|l| !l.is_empty()).map(str::to_string).collect())
}

pub fn read_manifest(dir: &Path) -> Result<RunManifest, PipelineError> {
    let path = dir.join(MANIFEST_FILE);
    let text = std::fs::read_to_string(&path).map_err(|e| PipelineError::io(&path, e))?;
    serde_json::from_str(&text).map_err(|e| PipelineError::Table(format!("{}: {e}", path.display())))
}

pub(crate) fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), PipelineError> {
    let text = serde_json::to_string_pretty(value).expect("run artifacts serialize") + "\n";
    std::fs::write(path, text).map_err(|e| PipelineError::io(path, e))
}

/// Load what an interrupted run left behind and truncate the streaming files
/// to the documents listed as processed.
pub(crate) fn recover(dir: &Path) -> Result<Previous, PipelineError> {
    let processed: HashSet<String> = read_processed(dir)?.into_iter().collect();
    let manifest = if dir.join(MANIFEST_FILE).exists() {
        Some(read_manifest(dir)?)
    } else {
        None
    };
    let mut rows = HashMap::new();
    for row in read_jsonl::<Row>(&dir.join(ROWS_FILE))? {
        if processed.contains(&row.doc_id) {
            rows.insert(row.doc_id.clone(), row);
        }
    }
    let records: Vec<CallRecord> = read_jsonl::<CallRecord>(&dir.join(RAW_LOG_FILE))?
        .into_iter()
        .filter(|r| processed.contains(&r.doc_id))
        .collect();

    // Every processed id must have its row; rewrite the files consistently.
    let mut ids: Vec<&String> = rows.keys().collect();
    ids.sort();
    let rewrite = |name: &str, text: String| {
        let path = dir.join(name);
        std::fs::write(&path, text).map_err(|e| PipelineError::io(&path, e))
    };
    let mut kept_rows: Vec<&Row> = rows.values().collect();
    kept_rows.sort_by(|a, b| a.doc_id.cmp(&b.doc_id));
    rewrite(ROWS_FILE, kept_rows.iter().map(|r| json_line(*r)).collect())?;
    rewrite(RAW_LOG_FILE, records.iter().map(json_line).collect())?;
    rewrite(PROCESSED_FILE, ids.iter().map(|id| format!("{id}\n")).collect())?;

    Ok(Previous { manifest, rows, records })
}

/// Remove streaming files left by an earlier run in `dir`.
pub(crate) fn reset(dir: &Path) -> Result<(), PipelineError> {
    for name in [RAW_LOG_FILE, ROWS_FILE, PROCESSED_FILE, TABLE_FILE, MANIFEST_FILE, DOCUMENTATION_FILE] {
        let path = dir.join(name);
        if path.exists() {
            std::fs::remove_file(&path).map_err(|e| PipelineError::io(&path, e))?;
        }
    }
    Ok(())
}
