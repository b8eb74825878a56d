use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use serde_json::json;

use super::config::{Backend, PrefixMode, Settings};
use super::validation::{validate_run, ValidationOptions, ValidationReport};
use super::{
    CommandResult, RunsArgs, StabilityAxis, ValidateArgs, AGREEMENT_REPORT, EXIT_OK, EXIT_PARTIAL,
    EXIT_PROVIDER, EXIT_USER, REPORT_FILE, STABILITY_REPORT, VALIDATION_REPORT,
};
use crate::corpus::{load_corpus, Corpus, IngestOptions};
use crate::docblock::{DocumentationBlock, ProcedureDoc};
use crate::gateway::{
    estimate_cost, schema_responder, Clock, FaultScript, Gateway, HttpTransport, MockTransport,
    ReplayTransport, SimClock, SystemClock, Transport,
};
use crate::pipeline::{
    self, failure_summary, read_table, PipelineError, RunOptions, DOCUMENTATION_FILE,
    MANIFEST_FILE, PROCESSED_FILE, RAW_LOG_FILE, ROWS_FILE, TABLE_FILE,
};
use crate::promptbook::{parse_promptbook_with, schema_of, LintOptions, PrefixPolicy, Promptbook};
use crate::robustness::{evaluate, Axis, LoadedRun, RunSet, RunSetFile, StabilityReport};

pub(super) struct Failure {
    pub code: i32,
    pub message: String,
}

fn user(message: impl Into<String>) -> Failure {
    Failure { code: EXIT_USER, message: message.into() }
}

type Outcome = Result<CommandResult, Failure>;

fn lint_options(prefix: PrefixMode) -> LintOptions {
    LintOptions {
        prefix: match prefix {
            PrefixMode::Error => PrefixPolicy::Error,
            PrefixMode::Warn => PrefixPolicy::Warn,
        },
    }
}

fn require<'a>(p: &'a Option<PathBuf>, flag: &str) -> Result<&'a PathBuf, Failure> {
    p.as_ref().ok_or_else(|| user(format!("{flag} is required")))
}

/// Parse a promptbook, returning warnings as diagnostic lines.
fn load_book(path: &Path, prefix: PrefixMode) -> Result<(Promptbook, Vec<String>), Failure> {
    let source = std::fs::read_to_string(path).map_err(|e| user(format!("{}: {e}", path.display())))?;
    match parse_promptbook_with(&source, lint_options(prefix)) {
        Ok((book, warnings)) => {
            let lines = warnings.iter().map(|d| format!("{}: {d}", path.display())).collect();
            Ok((book, lines))
        }
        Err(e) => {
            let lines: Vec<String> = e.diagnostics.iter().map(|d| format!("{}: {d}", path.display())).collect();
            Err(user(lines.join("\n")))
        }
    }
}

fn load_docs(path: &Path) -> Result<(Corpus, Vec<String>), Failure> {
    let (corpus, warnings) = load_corpus(path, &IngestOptions::default()).map_err(|e| user(e.to_string()))?;
    Ok((corpus, warnings.into_iter().map(|w| format!("warning: {w}")).collect()))
}

pub(super) fn lint(path: Option<&PathBuf>, s: &Settings) -> Outcome {
    let path = match path {
        Some(p) => p,
        None => require(&s.promptbook, "a promptbook path or --promptbook")?,
    };
    let (book, diagnostics) = load_book(path, s.prefix)?;
    let output = format!(
        "{} v{}: {} variables, hash {}\n",
        book.id,
        book.version,
        book.variables.len(),
        &book.content_hash[..12]
    );
    Ok(CommandResult { exit_code: EXIT_OK, diagnostics, paths_written: Vec::new(), output })
}

pub(super) fn estimate(s: &Settings) -> Outcome {
    let (book, mut diagnostics) = load_book(require(&s.promptbook, "--promptbook")?, s.prefix)?;
    let (corpus, warnings) = load_docs(require(&s.corpus, "--corpus")?)?;
    diagnostics.extend(warnings);
    let e = estimate_cost(&corpus, &book, &s.model);
    let mut out = String::new();
    let _ = writeln!(out, "model:                     {}", s.model.model_id);
    let _ = writeln!(out, "documents:                 {}", e.documents);
    let _ = writeln!(out, "prompt tokens / document:  {}", e.prompt_tokens_per_document);
    let _ = writeln!(out, "input tokens:              {}", e.input_tokens);
    let _ = writeln!(out, "output tokens (at most):   {}", e.output_tokens_assumed);
    let _ = writeln!(out, "input cost:                {:.6} ({} per 1M)", e.input_cost, s.model.price_in);
    let _ = writeln!(out, "output cost (at most):     {:.6} ({} per 1M)", e.output_cost, s.model.price_out);
    let _ = writeln!(out, "total (at most):           {:.6}", e.cost);
    Ok(CommandResult { exit_code: EXIT_OK, diagnostics, paths_written: Vec::new(), output: out })
}

fn build_gateway(
    s: &Settings,
    book: &Promptbook,
    env: &dyn Fn(&str) -> Option<String>,
) -> Result<Gateway, Failure> {
    let (transport, clock): (Arc<dyn Transport>, Arc<dyn Clock>) = match s.backend {
        Backend::Mock => {
            let script = match &s.fault_script {
                Some(p) => FaultScript::load(p).map_err(|e| user(format!("{}: {e}", p.display())))?,
                None => FaultScript::default(),
            };
            let mock = MockTransport::new(script, schema_responder(schema_of(book)));
            (Arc::new(mock), Arc::new(SimClock::new()))
        }
        Backend::Replay => {
            let log = require(&s.replay_log, "--replay-log (with --backend replay)")?;
            let replay = ReplayTransport::load(log).map_err(|e| user(format!("{}: {e}", log.display())))?;
            (Arc::new(replay), Arc::new(SimClock::new()))
        }
        Backend::Live => {
            let var = &s.model.api_key_env;
            let key = env(var)
                .filter(|k| !k.is_empty())
                .ok_or_else(|| user(format!("environment variable {var} holds no API key")))?;
            (Arc::new(HttpTransport::new(&s.model, key)), Arc::new(SystemClock::new()))
        }
    };
    Ok(Gateway::new(s.model.clone(), transport, clock).with_seed(s.seed))
}

pub(super) enum RunKind {
    Pilot(usize),
    Full { repeat_index: u32, stop_after: Option<usize> },
}

pub(super) fn run(s: &Settings, env: &dyn Fn(&str) -> Option<String>, kind: RunKind) -> Outcome {
    let (book, mut diagnostics) = load_book(require(&s.promptbook, "--promptbook")?, s.prefix)?;
    let (corpus, warnings) = load_docs(require(&s.corpus, "--corpus")?)?;
    diagnostics.extend(warnings);
    let out = require(&s.out, "--out")?.clone();
    let gateway = build_gateway(s, &book, env)?;

    let mut opts = RunOptions {
        workers: s.workers,
        resume: s.resume,
        seed: s.seed,
        out_dir: Some(out.clone()),
        ..Default::default()
    };
    let result = match kind {
        RunKind::Pilot(n) => pipeline::pilot(&corpus, &book, &gateway, n, &opts),
        RunKind::Full { repeat_index, stop_after } => {
            opts.repeat_index = repeat_index;
            opts.stop_after = stop_after;
            pipeline::run(&corpus, &book, &gateway, &opts)
        }
    };
    let output = match result {
        Ok(o) => o,
        Err(e @ PipelineError::Fatal { .. }) => {
            diagnostics.push(format!("error: {e}"));
            return Ok(CommandResult { exit_code: EXIT_PROVIDER, diagnostics, ..Default::default() });
        }
        Err(e @ PipelineError::Interrupted { .. }) => {
            diagnostics.push(format!("error: {e}; continue with --resume"));
            return Ok(CommandResult { exit_code: EXIT_PARTIAL, diagnostics, ..Default::default() });
        }
        Err(e) => return Err(user(e.to_string())),
    };

    let c = output.manifest.counts;
    let mut text = format!(
        "{} {}: {} documents (ok {}, violations {}, failed_parse {}, failed_call {})\n",
        if output.manifest.pilot { "pilot" } else { "run" },
        output.manifest.run_id,
        c.total(),
        c.ok,
        c.violations,
        c.failed_parse,
        c.failed_call
    );
    let paths: Vec<PathBuf> = [TABLE_FILE, RAW_LOG_FILE, MANIFEST_FILE, DOCUMENTATION_FILE, PROCESSED_FILE, ROWS_FILE]
        .iter()
        .map(|f| out.join(f))
        .collect();
    for p in &paths {
        let _ = writeln!(text, "wrote {}", p.display());
    }
    let failures = failure_summary(&output.table.rows);
    for (doc, status, error) in &failures {
        diagnostics.push(format!("failed: {doc}: {}: {error}", status.as_str()));
    }
    let exit_code = if failures.is_empty() { EXIT_OK } else { EXIT_PARTIAL };
    Ok(CommandResult { exit_code, diagnostics, paths_written: paths, output: text })
}

fn load_or_empty_doc(dir: &Path) -> DocumentationBlock {
    DocumentationBlock::load(&dir.join(DOCUMENTATION_FILE)).unwrap_or_else(|_| DocumentationBlock::empty())
}

fn write_text(path: &Path, text: &str, written: &mut Vec<PathBuf>) -> Result<(), Failure> {
    std::fs::write(path, text).map_err(|e| user(format!("{}: {e}", path.display())))?;
    written.push(path.to_path_buf());
    Ok(())
}

fn write_json<T: serde::Serialize>(path: &Path, value: &T, written: &mut Vec<PathBuf>) -> Result<(), Failure> {
    let json = serde_json::to_string_pretty(value).expect("report serializes") + "\n";
    write_text(path, &json, written)
}

fn write_doc(dir: &Path, doc: &DocumentationBlock, written: &mut Vec<PathBuf>) -> Result<(), Failure> {
    let path = dir.join(DOCUMENTATION_FILE);
    doc.write(&path).map_err(|e| user(format!("{}: {e}", path.display())))?;
    written.push(path);
    Ok(())
}

fn point_estimates(report: &ValidationReport) -> BTreeMap<&str, BTreeMap<&str, Option<f64>>> {
    report
        .variables
        .iter()
        .map(|(v, ms)| (v.as_str(), ms.iter().map(|(m, r)| (m.as_str(), r.value)).collect()))
        .collect()
}

pub(super) fn validate(a: &ValidateArgs, s: &Settings) -> Outcome {
    let run = LoadedRun::load(&a.run).map_err(|e| user(e.to_string()))?;
    let gold = read_table(&a.gold).map_err(|e| user(e.to_string()))?;
    let opts = ValidationOptions {
        variables: a.variables.clone(),
        replicates: a.bootstrap,
        level: a.level,
        seed: s.seed,
    };
    let report = validate_run(&run, &gold, &opts).map_err(|e| user(format!("{}: {e}", a.gold.display())))?;

    let out = s.out.clone().unwrap_or_else(|| a.run.clone());
    std::fs::create_dir_all(&out).map_err(|e| user(format!("{}: {e}", out.display())))?;
    let mut written = Vec::new();
    write_json(&out.join(format!("{VALIDATION_REPORT}.json")), &report, &mut written)?;
    let text = report.render_text();
    write_text(&out.join(format!("{VALIDATION_REPORT}.txt")), &text, &mut written)?;

    let mut doc = load_or_empty_doc(&a.run);
    doc.add_validation(ProcedureDoc {
        procedure: "comparison with gold-standard codes".into(),
        sample_size: report.units,
        details: json!({
            "run_id": report.run_id,
            "gold_file": a.gold.file_name().map(|f| f.to_string_lossy().into_owned()),
            "bootstrap_replicates": report.bootstrap_replicates,
            "confidence_level": report.level,
            "seed": report.seed,
            "results": point_estimates(&report),
        }),
    });
    write_doc(&out, &doc, &mut written)?;
    Ok(CommandResult { exit_code: EXIT_OK, diagnostics: Vec::new(), paths_written: written, output: text })
}

fn procedure_name(axis: Axis) -> &'static str {
    match axis {
        Axis::Repeat => "intra-prompt stability (repeated runs)",
        Axis::PromptVariant => "inter-prompt stability (paraphrased prompts)",
        Axis::Model => "inter-model agreement",
    }
}

fn summary_of(r: &StabilityReport) -> serde_json::Value {
    match r.axis {
        Axis::Repeat => json!(r
            .variables
            .iter()
            .map(|v| (v.variable.clone(), json!({"alpha": v.alpha.value, "icc": v.icc.as_ref().and_then(|i| i.value)})))
            .collect::<BTreeMap<_, _>>()),
        Axis::PromptVariant => json!({
            "baseline": r.baseline,
            "pss": r.pss,
            "per_variable": r.prompt_stability.iter().map(|p| (p.variable.clone(), p.pss)).collect::<BTreeMap<_, _>>(),
        }),
        Axis::Model => json!(r
            .model_agreement
            .iter()
            .map(|m| (m.variable.clone(), m.pooled_alpha.value))
            .collect::<BTreeMap<_, _>>()),
    }
}

pub(super) fn robustness(a: &RunsArgs, s: &Settings, models: bool) -> Outcome {
    let (axis, dirs, baseline) = match &a.runset {
        Some(p) => {
            let f = RunSetFile::load(p).map_err(|e| user(e.to_string()))?;
            (f.axis, f.runs, f.baseline)
        }
        None => {
            if a.runs.is_empty() {
                return Err(user("give --runset FILE or --runs DIR..."));
            }
            let axis = if models {
                Axis::Model
            } else {
                match a.axis {
                    Some(StabilityAxis::PromptVariant) => Axis::PromptVariant,
                    Some(StabilityAxis::Repeat) => Axis::Repeat,
                    None if a.baseline.is_some() => Axis::PromptVariant,
                    None => Axis::Repeat,
                }
            };
            (axis, a.runs.clone(), a.baseline.clone())
        }
    };
    if models != (axis == Axis::Model) {
        let hint = if models { "stability" } else { "agreement" };
        return Err(user(format!("runset axis is {}; use `llmcoder {hint}`", axis.as_str())));
    }
    let out = require(&s.out, "--out")?.clone();
    let set = RunSet::from_dirs(axis, &dirs, baseline.as_deref()).map_err(|e| user(e.to_string()))?;
    let report = evaluate(&set).map_err(|e| user(e.to_string()))?;

    std::fs::create_dir_all(&out).map_err(|e| user(format!("{}: {e}", out.display())))?;
    let name = if models { AGREEMENT_REPORT } else { STABILITY_REPORT };
    let mut written = Vec::new();
    write_json(&out.join(format!("{name}.json")), &report, &mut written)?;
    let text = report.render_text();
    write_text(&out.join(format!("{name}.txt")), &text, &mut written)?;

    let mut all_dirs = dirs.clone();
    if let Some(b) = &baseline {
        if !all_dirs.contains(b) {
            all_dirs.push(b.clone());
        }
    }
    let blocks: Vec<DocumentationBlock> = all_dirs
        .iter()
        .filter_map(|d| DocumentationBlock::load(&d.join(DOCUMENTATION_FILE)).ok())
        .collect();
    let mut doc = DocumentationBlock::merge(&blocks);
    doc.add_robustness(ProcedureDoc {
        procedure: procedure_name(axis).into(),
        sample_size: report.units,
        details: json!({
            "axis": axis.as_str(),
            "runs": report.runs,
            "results": summary_of(&report),
        }),
    });
    write_doc(&out, &doc, &mut written)?;
    Ok(CommandResult { exit_code: EXIT_OK, diagnostics: Vec::new(), paths_written: written, output: text })
}

pub(super) fn report(dir: Option<&PathBuf>, s: &Settings) -> Outcome {
    let dir = match dir {
        Some(d) => d,
        None => require(&s.out, "--dir or --out")?,
    };
    let doc_path = dir.join(DOCUMENTATION_FILE);
    let doc = DocumentationBlock::load(&doc_path).map_err(|e| user(format!("{}: {e}", doc_path.display())))?;
    let mut text = doc.render_text();

    let read = |name: &str| std::fs::read_to_string(dir.join(format!("{name}.json"))).ok();
    if let Some(json) = read(VALIDATION_REPORT) {
        let r: ValidationReport = serde_json::from_str(&json).map_err(|e| user(format!("{VALIDATION_REPORT}.json: {e}")))?;
        text.push('\n');
        text.push_str(&r.render_text());
    }
    for name in [STABILITY_REPORT, AGREEMENT_REPORT] {
        if let Some(json) = read(name) {
            let r: StabilityReport = serde_json::from_str(&json).map_err(|e| user(format!("{name}.json: {e}")))?;
            text.push('\n');
            text.push_str(&r.render_text());
        }
    }
    let mut written = Vec::new();
    write_text(&dir.join(REPORT_FILE), &text, &mut written)?;
    Ok(CommandResult { exit_code: EXIT_OK, diagnostics: Vec::new(), paths_written: written, output: text })
}
