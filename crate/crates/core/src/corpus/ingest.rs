use std::collections::{BTreeMap, HashMap};
use std::fs;
use std::path::Path;

use log::warn;

use super::{Corpus, CorpusError, Document};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum UnreadablePolicy {
    /// Abort ingestion on the first unreadable file.
    #[default]
    Fail,
    /// Skip the file and record a warning.
    Skip,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum EmptyTextPolicy {
    #[default]
    Fail,
    Skip,
    Keep,
}

#[derive(Debug, Clone, Default)]
pub struct IngestOptions {
    pub unreadable: UnreadablePolicy,
    pub empty_text: EmptyTextPolicy,
    /// Column names for tabular input; default `id` and `text`.
    pub id_column: Option<String>,
    pub text_column: Option<String>,
}

/// Load a directory of `.txt`/`.md` files or a delimited table.
pub fn load_corpus(
    path: &Path,
    opts: &IngestOptions,
) -> Result<(Corpus, Vec<String>), CorpusError> {
    if path.is_dir() {
        ingest_dir(path, opts)
    } else {
        ingest_table(
            path,
            opts.id_column.as_deref().unwrap_or("id"),
            opts.text_column.as_deref().unwrap_or("text"),
            opts,
        )
    }
}

/// One document per `.txt`/`.md` file, id = file stem, sorted by file name.
pub fn ingest_dir(
    path: &Path,
    opts: &IngestOptions,
) -> Result<(Corpus, Vec<String>), CorpusError> {
    let io = |source| CorpusError::Io {
        path: path.to_path_buf(),
        source,
    };
    let mut files = Vec::new();
    for entry in fs::read_dir(path).map_err(io)? {
        let entry = entry.map_err(io)?;
        let p = entry.path();
        let ext = p.extension().and_then(|e| e.to_str()).unwrap_or("");
        if p.is_file() && matches!(ext, "txt" | "md") {
            files.push(p);
        }
    }
    files.sort();

    let mut warnings = Vec::new();
    let mut docs: Vec<Document> = Vec::with_capacity(files.len());
    let mut by_stem: HashMap<String, String> = HashMap::new();
    for file in files {
        let stem = file
            .file_stem()
            .and_then(|s| s.to_str())
            .unwrap_or_default()
            .to_string();
        let source = file.display().to_string();
        if let Some(first) = by_stem.get(&stem) {
            return Err(CorpusError::DuplicateId {
                id: stem,
                first: first.clone(),
                second: source,
            });
        }
        by_stem.insert(stem.clone(), source.clone());

        let text = match fs::read_to_string(&file) {
            Ok(t) => t,
            Err(e) if opts.unreadable == UnreadablePolicy::Skip => {
                let msg = format!("skipping unreadable file {source}: {e}");
                warn!("{msg}");
                warnings.push(msg);
                continue;
            }
            Err(e) => {
                return Err(CorpusError::Io {
                    path: file,
                    source: e,
                })
            }
        };
        if text.trim().is_empty() {
            match opts.empty_text {
                EmptyTextPolicy::Fail => {
                    return Err(CorpusError::EmptyText {
                        id: stem,
                        location: source,
                    })
                }
                EmptyTextPolicy::Skip => {
                    warnings.push(format!("skipping empty document {source}"));
                    continue;
                }
                EmptyTextPolicy::Keep => {}
            }
        }
        let mut doc = Document::new(stem, text);
        doc.source = source;
        docs.push(doc);
    }

    if docs.is_empty() {
        let msg = format!("no .txt or .md documents in {}", path.display());
        warn!("{msg}");
        warnings.push(msg);
    }
    Ok((Corpus::new(docs)?, warnings))
}

/// One document per row of a delimited file with a header row. Columns
/// other than the id and text columns become metadata.
pub fn ingest_table(
    path: &Path,
    id_column: &str,
    text_column: &str,
    opts: &IngestOptions,
) -> Result<(Corpus, Vec<String>), CorpusError> {
    let delimiter = match path.extension().and_then(|e| e.to_str()) {
        Some("tsv") => b'\t',
        _ => b',',
    };
    let table_err = |e: csv::Error| CorpusError::Table {
        path: path.to_path_buf(),
        message: e.to_string(),
    };
    let mut reader = csv::ReaderBuilder::new()
        .delimiter(delimiter)
        .from_path(path)
        .map_err(table_err)?;
    let headers = reader.headers().map_err(table_err)?.clone();
    let col = |name: &str| {
        headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| CorpusError::MissingColumn(name.to_string()))
    };
    let id_idx = col(id_column)?;
    let text_idx = col(text_column)?;

    let mut warnings = Vec::new();
    let mut docs = Vec::new();
    let mut first_row: HashMap<String, u64> = HashMap::new();
    for record in reader.records() {
        let record = record.map_err(table_err)?;
        let line = record.position().map(|p| p.line()).unwrap_or(0);
        let location = format!("{}:{line}", path.display());
        let id = record.get(id_idx).unwrap_or_default().trim().to_string();
        let text = record.get(text_idx).unwrap_or_default().to_string();
        if let Some(prev) = first_row.get(&id) {
            return Err(CorpusError::DuplicateId {
                id,
                first: format!("row {prev}"),
                second: format!("row {line}"),
            });
        }
        first_row.insert(id.clone(), line);
        if text.trim().is_empty() {
            match opts.empty_text {
                EmptyTextPolicy::Fail => return Err(CorpusError::EmptyText { id, location }),
                EmptyTextPolicy::Skip => {
                    warnings.push(format!("skipping empty text for `{id}` at {location}"));
                    continue;
                }
                EmptyTextPolicy::Keep => {}
            }
        }
        let metadata: BTreeMap<String, String> = headers
            .iter()
            .enumerate()
            .filter(|(i, _)| *i != id_idx && *i != text_idx)
            .map(|(i, h)| (h.to_string(), record.get(i).unwrap_or_default().to_string()))
            .collect();
        let mut doc = Document::new(id, text);
        doc.source = location;
        doc.metadata = metadata;
        docs.push(doc);
    }
    Ok((Corpus::new(docs)?, warnings))
}
