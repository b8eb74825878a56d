//! Batch execution of a promptbook over a corpus.
//!
//! Each document is rendered into a prompt, sent through the [`Gateway`],
//! strictly parsed and validated. Worker threads do the calls; a single
//! writer on the calling thread appends every call record to
//! `raw_log.jsonl`, every finished row to `rows.jsonl`, and the document id
//! to `processed.txt`, in that order. The processed list is what a resumed
//! run trusts. `table.csv`, `manifest.json` and `documentation.json` are
//! written once all documents are done, with rows in corpus order, so the
//! table does not depend on worker count or on interruptions.

mod parse;
mod store;
mod table;

pub use parse::{parse_response, strip_code_fence, ParseFailure};
pub use store::{
    read_manifest, DOCUMENTATION_FILE, MANIFEST_FILE, PROCESSED_FILE, RAW_LOG_FILE, ROWS_FILE,
    TABLE_FILE,
};
pub use table::{read_table, AnnotationTable, LoadedRow, LoadedTable, Row, RowStatus};

use std::collections::HashMap;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicBool, AtomicUsize, Ordering};
use std::sync::mpsc;

use serde::{Deserialize, Serialize};

use crate::corpus::{sample_split, Corpus, CorpusError, Document, SampleStrategy};
use crate::digest::short_id;
use crate::docblock::DocumentationBlock;
use crate::gateway::{
    CallFailure, CallParams, CallRecord, CallSpec, CallStatus, ChatMessage, Completion,
    Gateway, GatewayError, ModelConfig,
};
use crate::promptbook::{
    render_prompt, schema_of, OutputSchema, Promptbook, RenderedPrompt, VariableSpec,
};
use crate::TOOL_VERSION;

/// Corrective follow-up sent once after an unparseable reply.
pub const REASK_INSTRUCTION: &str = "Return only the JSON array.";

#[derive(Debug, thiserror::Error)]
pub enum PipelineError {
    #[error("the corpus is empty")]
    EmptyCorpus,
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("{0}")]
    Table(String),
    #[error("run aborted at document `{doc_id}`: {error}")]
    Fatal { doc_id: String, error: GatewayError },
    #[error("run stopped after persisting {persisted} documents")]
    Interrupted { persisted: usize },
    #[error("{0} already holds a run; resume it or choose another output directory")]
    OutputExists(PathBuf),
    #[error("cannot resume: {0}")]
    IncompatibleResume(String),
    #[error("invalid options: {0}")]
    InvalidOptions(String),
    #[error(transparent)]
    Corpus(#[from] CorpusError),
}

impl PipelineError {
    pub(crate) fn io(path: &Path, source: std::io::Error) -> Self {
        PipelineError::Io { path: path.to_path_buf(), source }
    }
}

/// Row counts by status.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct RunCounts {
    pub ok: usize,
    pub violations: usize,
    pub failed_parse: usize,
    pub failed_call: usize,
}

impl RunCounts {
    pub fn add(&mut self, status: RowStatus) {
        match status {
            RowStatus::Ok => self.ok += 1,
            RowStatus::Violations => self.violations += 1,
            RowStatus::FailedParse => self.failed_parse += 1,
            RowStatus::FailedCall => self.failed_call += 1,
        }
    }

    pub fn total(&self) -> usize {
        self.ok + self.violations + self.failed_parse + self.failed_call
    }

    pub fn failed(&self) -> usize {
        self.failed_parse + self.failed_call
    }
}

/// What was run, with what, and how it went.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub run_id: String,
    pub tool_version: String,
    pub promptbook_id: String,
    pub promptbook_version: String,
    pub promptbook_hash: String,
    pub variables: Vec<VariableSpec>,
    pub model: ModelConfig,
    pub backend: String,
    pub seed: u64,
    pub repeat_index: u32,
    pub pilot: bool,
    pub corpus_digest: String,
    pub corpus_size: usize,
    pub started: String,
    pub finished: Option<String>,
    /// Processed documents, in corpus order.
    pub processed_ids: Vec<String>,
    pub counts: RunCounts,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunOptions {
    /// Concurrent model calls.
    pub workers: usize,
    /// 1-based index when the same configuration is run several times.
    pub repeat_index: u32,
    /// Continue the run found in `out_dir`.
    pub resume: bool,
    /// Seeds backoff jitter (and pilot sampling).
    pub seed: u64,
    pub pilot: bool,
    /// Where to persist artifacts; `None` keeps everything in memory.
    pub out_dir: Option<PathBuf>,
    /// Stop after persisting this many documents, as if the process had been
    /// killed. For exercising resume.
    pub stop_after: Option<usize>,
}

impl Default for RunOptions {
    fn default() -> Self {
        RunOptions {
            workers: 4,
            repeat_index: 1,
            resume: false,
            seed: 0,
            pilot: false,
            out_dir: None,
            stop_after: None,
        }
    }
}

#[derive(Debug, Clone)]
pub struct RunOutput {
    pub table: AnnotationTable,
    pub manifest: RunManifest,
    /// Every call record, in corpus order then call order.
    pub raw_log: Vec<CallRecord>,
    pub documentation: DocumentationBlock,
}

impl RunOutput {
    /// Rows whose document could not be coded.
    pub fn failures(&self) -> impl Iterator<Item = &Row> {
        self.table.rows.iter().filter(|r| r.status.is_failure())
    }
}

/// Deterministic run identifier from everything that shapes the output.
pub fn run_id(corpus: &Corpus, book: &Promptbook, config: &ModelConfig, backend: &str, opts: &RunOptions) -> String {
    let (base_url, model, temp, top_p, max_out) = config.sampling_signature();
    short_id(
        [
            book.content_hash.clone(),
            corpus.manifest_digest().to_string(),
            base_url,
            model,
            temp.to_string(),
            top_p.to_string(),
            max_out.to_string(),
            backend.to_string(),
            opts.seed.to_string(),
            opts.repeat_index.to_string(),
            opts.pilot.to_string(),
        ],
        16,
    )
}

fn now_rfc3339() -> String {
    chrono::Utc::now().to_rfc3339_opts(chrono::SecondsFormat::Millis, true)
}

/// Everything a worker produced for one document.
struct DocOutcome {
    records: Vec<CallRecord>,
    row: Row,
    fatal: Option<GatewayError>,
}

struct Worker<'a> {
    gateway: &'a Gateway,
    schema: OutputSchema,
    prompt: RenderedPrompt,
    book_version: String,
    run_id: String,
    repeat_index: u32,
}

impl Worker<'_> {
    fn call(
        &self,
        doc: &Document,
        call_seq: u32,
        prior_attempts: u32,
        messages: Vec<ChatMessage>,
    ) -> (Result<Completion, CallFailure>, CallRecord) {
        let timestamp = self
            .gateway
            .recorded_at(&doc.id, call_seq)
            .unwrap_or_else(now_rfc3339);
        let prompt_hash = crate::gateway::prompt_hash(&messages);
        let result = self.gateway.call(CallSpec {
            doc_id: &doc.id,
            doc_text: &doc.text,
            call_seq,
            prior_attempts,
            repeat_index: self.repeat_index,
            messages,
        });
        let config = self.gateway.config();
        let mut record = CallRecord {
            call_id: short_id([self.run_id.as_str(), doc.id.as_str(), &call_seq.to_string()], 16),
            doc_id: doc.id.clone(),
            call_seq,
            repeat_index: self.repeat_index,
            prompt_hash,
            promptbook_version: self.book_version.clone(),
            model_id: config.model_id.clone(),
            model_version_reported: None,
            params: CallParams {
                temperature: config.temperature,
                top_p: config.top_p,
                max_output_tokens: config.max_output_tokens,
            },
            timestamp,
            input_tokens: 0,
            output_tokens: 0,
            usage_reported: false,
            raw_output: String::new(),
            latency_ms: 0,
            status: CallStatus::Ok,
            attempt_errors: Vec::new(),
        };
        match &result {
            Ok(c) => {
                record.model_version_reported = c.reported_version.clone();
                record.input_tokens = c.usage.input;
                record.output_tokens = c.usage.output;
                record.usage_reported = c.usage_reported;
                record.raw_output = c.raw.clone();
                record.latency_ms = c.latency_ms;
                record.attempt_errors = c.attempt_errors.clone();
            }
            Err(f) => {
                record.latency_ms = f.latency_ms;
                record.status = CallStatus::Failed(f.error.kind);
                record.attempt_errors = f.attempt_errors.clone();
            }
        }
        (result, record)
    }

    fn failed_row(doc: &Document, record: &CallRecord, status: RowStatus, error: String) -> Row {
        Row {
            doc_id: doc.id.clone(),
            status,
            call_id: record.call_id.clone(),
            values: Vec::new(),
            violations: Vec::new(),
            error: Some(error),
        }
    }

    fn call_failed(doc: &Document, records: Vec<CallRecord>, failure: CallFailure) -> DocOutcome {
        let error = failure.error;
        let row = Self::failed_row(doc, records.last().unwrap(), RowStatus::FailedCall, error.to_string());
        DocOutcome {
            fatal: error.kind.is_fatal_for_run().then_some(error),
            records,
            row,
        }
    }

    /// A successful parse as a row.
    fn parsed_row(doc: &Document, record: &CallRecord, parsed: crate::promptbook::ValidatedRecord) -> Row {
        Row {
            doc_id: doc.id.clone(),
            status: if parsed.is_clean() { RowStatus::Ok } else { RowStatus::Violations },
            call_id: record.call_id.clone(),
            values: parsed.values,
            violations: parsed.violations,
            error: None,
        }
    }

    fn process(&self, doc: &Document) -> DocOutcome {
        let messages = vec![
            ChatMessage::system(self.prompt.system.clone()),
            ChatMessage::user(self.prompt.user_message(&doc.text)),
        ];
        let (first, mut record) = self.call(doc, 1, 0, messages.clone());
        let first = match first {
            Ok(c) => c,
            Err(f) => return Self::call_failed(doc, vec![record], f),
        };
        let mut failed_before = first.attempt_errors.len() as u32;
        if failed_before > 0 {
            record.status = CallStatus::RetriedOk(failed_before);
        }
        let parse_error = match parse_response(&first.raw, &self.schema, &doc.text, &doc.id) {
            Ok(parsed) => {
                let row = Self::parsed_row(doc, &record, parsed);
                return DocOutcome { records: vec![record], row, fatal: None };
            }
            Err(e) => e,
        };

        // One corrective re-ask, with the bad reply kept in the conversation.
        log::debug!("{}: {parse_error}; re-asking", doc.id);
        let mut reask = messages;
        reask.push(ChatMessage::assistant(first.raw.clone()));
        reask.push(ChatMessage::user(REASK_INSTRUCTION));
        let mut records = vec![record];
        let (second, mut record2) = self.call(doc, 2, first.attempts, reask);
        let second = match second {
            Ok(c) => c,
            Err(f) => {
                records.push(record2);
                return Self::call_failed(doc, records, f);
            }
        };
        failed_before += 1 + second.attempt_errors.len() as u32;
        record2.status = CallStatus::RetriedOk(failed_before);
        let row = match parse_response(&second.raw, &self.schema, &doc.text, &doc.id) {
            Ok(parsed) => Self::parsed_row(doc, &record2, parsed),
            Err(e) => Self::failed_row(
                doc,
                &record2,
                RowStatus::FailedParse,
                format!("first reply {parse_error}; re-ask reply {e}"),
            ),
        };
        records.push(record2);
        DocOutcome { records, row, fatal: None }
    }
}

/// Run `book` over every document of `corpus`.
///
/// Per-document failures become failed rows; an authentication failure
/// aborts the run with [`PipelineError::Fatal`] after persisting what was
/// finished. With `opts.resume`, documents listed in the output directory's
/// processed list are not called again.
pub fn run(
    corpus: &Corpus,
    book: &Promptbook,
    gateway: &Gateway,
    opts: &RunOptions,
) -> Result<RunOutput, PipelineError> {
    if corpus.is_empty() {
        return Err(PipelineError::EmptyCorpus);
    }
    if opts.workers == 0 {
        return Err(PipelineError::InvalidOptions("workers must be at least 1".into()));
    }
    if opts.repeat_index == 0 {
        return Err(PipelineError::InvalidOptions("repeat_index is 1-based".into()));
    }
    let backend = gateway.backend_name();
    let id = run_id(corpus, book, gateway.config(), backend, opts);

    let mut previous = store::Previous::default();
    let mut writer = None;
    if let Some(dir) = &opts.out_dir {
        std::fs::create_dir_all(dir).map_err(|e| PipelineError::io(dir, e))?;
        if opts.resume {
            previous = store::recover(dir)?;
            if let Some(m) = &previous.manifest {
                if m.run_id != id {
                    return Err(PipelineError::IncompatibleResume(format!(
                        "{} holds run {}, but these inputs define run {id}",
                        dir.display(),
                        m.run_id
                    )));
                }
            }
            if let Some(stray) = previous.rows.keys().find(|d| corpus.get(d).is_none()) {
                return Err(PipelineError::IncompatibleResume(format!(
                    "processed document `{stray}` is not in the corpus"
                )));
            }
        } else {
            if !store::read_processed(dir)?.is_empty() {
                return Err(PipelineError::OutputExists(dir.clone()));
            }
            store::reset(dir)?;
        }
        writer = Some(store::RunWriter::open(dir)?);
    } else if opts.resume {
        return Err(PipelineError::InvalidOptions("resume needs an output directory".into()));
    }

    let mut manifest = RunManifest {
        run_id: id.clone(),
        tool_version: TOOL_VERSION.to_string(),
        promptbook_id: book.id.clone(),
        promptbook_version: book.version.clone(),
        promptbook_hash: book.content_hash.clone(),
        variables: book.variables.iter().map(VariableSpec::from).collect(),
        model: gateway.config().clone(),
        backend: backend.to_string(),
        seed: opts.seed,
        repeat_index: opts.repeat_index,
        pilot: opts.pilot,
        corpus_digest: corpus.manifest_digest().to_string(),
        corpus_size: corpus.len(),
        started: previous
            .manifest
            .as_ref()
            .map_or_else(now_rfc3339, |m| m.started.clone()),
        finished: None,
        processed_ids: Vec::new(),
        counts: RunCounts::default(),
    };
    if let Some(dir) = &opts.out_dir {
        let mut snapshot = manifest.clone();
        snapshot.processed_ids = corpus
            .ids()
            .into_iter()
            .filter(|d| previous.rows.contains_key(d))
            .collect();
        store::write_json(&dir.join(MANIFEST_FILE), &snapshot)?;
    }

    let todo: Vec<&Document> = corpus
        .documents()
        .iter()
        .filter(|d| !previous.rows.contains_key(&d.id))
        .collect();
    log::info!(
        "run {id}: {} documents to process ({} already done), {} workers, {backend} backend",
        todo.len(),
        previous.rows.len(),
        opts.workers
    );

    let worker = Worker {
        gateway,
        schema: schema_of(book),
        prompt: render_prompt(book),
        book_version: book.version.clone(),
        run_id: id.clone(),
        repeat_index: opts.repeat_index,
    };
    let mut rows = std::mem::take(&mut previous.rows);
    let mut records = std::mem::take(&mut previous.records);
    let next = AtomicUsize::new(0);
    let stop = AtomicBool::new(false);
    let mut persisted = 0usize;
    let mut abort: Option<PipelineError> = None;

    std::thread::scope(|s| -> Result<(), PipelineError> {
        let (tx, rx) = mpsc::channel::<DocOutcome>();
        for _ in 0..opts.workers.min(todo.len().max(1)) {
            let tx = tx.clone();
            let (todo, next, stop, worker) = (&todo, &next, &stop, &worker);
            s.spawn(move || loop {
                if stop.load(Ordering::SeqCst) {
                    break;
                }
                let i = next.fetch_add(1, Ordering::SeqCst);
                let Some(doc) = todo.get(i) else { break };
                if tx.send(worker.process(doc)).is_err() {
                    break;
                }
            });
        }
        drop(tx);

        for outcome in rx {
            if let Some(w) = writer.as_mut() {
                w.records(&outcome.records)?;
            }
            records.extend(outcome.records);
            if let Some(error) = outcome.fatal {
                stop.store(true, Ordering::SeqCst);
                abort = Some(PipelineError::Fatal { doc_id: outcome.row.doc_id, error });
                break;
            }
            if let Some(w) = writer.as_mut() {
                w.row(&outcome.row)?;
            }
            rows.insert(outcome.row.doc_id.clone(), outcome.row);
            persisted += 1;
            if opts.stop_after.is_some_and(|n| persisted >= n) && rows.len() < corpus.len() {
                stop.store(true, Ordering::SeqCst);
                abort = Some(PipelineError::Interrupted { persisted });
                break;
            }
        }
        Ok(())
    })?;
    if let Some(e) = abort {
        return Err(e);
    }

    let order: HashMap<&str, usize> = corpus
        .documents()
        .iter()
        .enumerate()
        .map(|(i, d)| (d.id.as_str(), i))
        .collect();
    records.sort_by_key(|r| (order.get(r.doc_id.as_str()).copied().unwrap_or(usize::MAX), r.call_seq));
    let table_rows: Vec<Row> = corpus
        .documents()
        .iter()
        .map(|d| rows.remove(&d.id).expect("every document has a row"))
        .collect();
    for r in &table_rows {
        manifest.counts.add(r.status);
    }
    manifest.processed_ids = corpus.ids();
    manifest.finished = Some(now_rfc3339());
    let table = AnnotationTable {
        variables: manifest.variables.clone(),
        rows: table_rows,
    };
    let documentation = DocumentationBlock::for_run(book, &manifest, &records);

    if let Some(dir) = &opts.out_dir {
        table.write_csv(&dir.join(TABLE_FILE))?;
        store::write_json(&dir.join(MANIFEST_FILE), &manifest)?;
        let path = dir.join(DOCUMENTATION_FILE);
        documentation.write(&path).map_err(|e| PipelineError::io(&path, e))?;
    }
    log::info!(
        "run {id}: ok {}, violations {}, failed_parse {}, failed_call {}",
        manifest.counts.ok,
        manifest.counts.violations,
        manifest.counts.failed_parse,
        manifest.counts.failed_call
    );
    Ok(RunOutput { table, manifest, raw_log: records, documentation })
}

/// Default pilot sample size.
pub const DEFAULT_PILOT_SIZE: usize = 15;

/// Run on a seeded random sample of `n` documents, flagged as a pilot.
pub fn pilot(
    corpus: &Corpus,
    book: &Promptbook,
    gateway: &Gateway,
    n: usize,
    opts: &RunOptions,
) -> Result<RunOutput, PipelineError> {
    if n == 0 {
        return Err(PipelineError::InvalidOptions("pilot sample size must be at least 1".into()));
    }
    let split = sample_split(corpus, n, 0, &SampleStrategy::Simple, opts.seed)?;
    let opts = RunOptions { pilot: true, ..opts.clone() };
    run(&split.dev, book, gateway, &opts)
}

/// `(doc_id, status, error)` for every failed row.
pub fn failure_summary(rows: &[Row]) -> Vec<(String, RowStatus, String)> {
    rows.iter()
        .filter(|r| r.status.is_failure())
        .map(|r| (r.doc_id.clone(), r.status, r.error.clone().unwrap_or_default()))
        .collect()
}
