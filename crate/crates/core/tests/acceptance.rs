//! Acceptance suite: ten end-to-end criteria, one PASS/FAIL line each.
//!
//! Runs without the libtest harness so the verdict lines always print.

mod common;

use std::collections::BTreeSet;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::{Duration, Instant};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::{json, Value};

use common::oracle::{self, Level};
use common::{cli, fixture, s};
use llmcoder::corpus::{estimate_tokens, Corpus, Document};
use llmcoder::gateway::{
    estimate_cost, read_raw_log, schema_responder, CallContext, CallStatus, ChatRequest, Clock,
    Directive, FailureKind, FaultScript, Gateway, MockTransport, ModelConfig, RateLimiter,
    ReplayTransport, SimClock, MALFORMED_REPLY, WINDOW,
};
use llmcoder::metrics::{
    accuracy, cohens_kappa, complete_labels, icc, krippendorff_alpha, precision_recall_f1,
    Averaging, ConfusionMatrix, PrfTarget, RatingsMatrix, Scale,
};
use llmcoder::pipeline::{self, read_table, RowStatus, RunOptions, RAW_LOG_FILE, TABLE_FILE};
use llmcoder::promptbook::{
    parse_promptbook, render_prompt, schema_of, validate_record, Promptbook, ViolationKind,
    ONLY_JSON_DIRECTIVE,
};
use llmcoder::robustness::{evaluate, Axis, LoadedRun, RunSet};

type Verdict = Result<String, String>;
type Criterion = (&'static str, fn() -> Verdict);

macro_rules! ensure {
    ($cond:expr, $($msg:tt)+) => {
        if let false = $cond {
            return Err(format!($($msg)+));
        }
    };
}

const DATA: &str = env!("CARGO_MANIFEST_DIR");

// 1. Krippendorff's alpha against the brute-force pairing oracle.
fn alpha_oracle_equivalence() -> Verdict {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(0xA1FA);
    let mut compared = 0;
    let mut degenerate = 0;
    let mut worst: f64 = 0.0;
    for (scale, level) in [(Scale::Nominal, Level::Nominal), (Scale::Ordinal, Level::Ordinal), (Scale::Interval, Level::Interval)] {
        for case in 0..1000 {
            let units = rng.gen_range(1..=8);
            let raters = rng.gen_range(1..=4);
            let values = rng.gen_range(1..=4);
            let missing = rng.gen_range(0.0..=0.3);
            let rows: Vec<Vec<Option<f64>>> = (0..units)
                .map(|_| {
                    (0..raters)
                        .map(|_| (!rng.gen_bool(missing)).then(|| rng.gen_range(1..=values) as f64))
                        .collect()
                })
                .collect();
            let nan_rows: Vec<Vec<f64>> = rows.iter().map(|r| r.iter().map(|c| c.unwrap_or(f64::NAN)).collect()).collect();
            let m = RatingsMatrix::from_numeric(&nan_rows, scale).map_err(|e| e.to_string())?;
            match (krippendorff_alpha(&m), oracle::alpha(&rows, level)) {
                (Ok(r), Some(o)) if !r.degenerate => {
                    let d = (r.alpha - o).abs();
                    worst = worst.max(d);
                    ensure!(d <= 1e-9, "{scale:?} case {case}: alpha {} vs oracle {o} on {rows:?}", r.alpha);
                    compared += 1;
                }
                (Ok(r), None) if r.degenerate => degenerate += 1,
                (Err(_), None) => degenerate += 1,
                (lib, o) => return Err(format!("{scale:?} case {case}: library {lib:?} but oracle {o:?} on {rows:?}")),
            }
        }
    }
    let secs = start.elapsed().as_secs_f64();
    ensure!(compared >= 1000, "only {compared} matrices had a defined alpha");
    ensure!(secs < 60.0, "took {secs:.1}s");
    Ok(format!("{compared} defined + {degenerate} degenerate matrices, max |diff| {worst:.1e}, {secs:.2}s"))
}

// 2. Kappa fixed points and ICC(2,1) against the ANOVA oracle.
fn kappa_and_icc() -> Verdict {
    for v in [&["A", "B", "A", "C"][..], &["x", "y"], &["1", "0", "0", "1", "1"]] {
        let l = complete_labels(v);
        let k = cohens_kappa(&l, &l).map_err(|e| e.to_string())?.kappa;
        ensure!(k == 1.0, "kappa on identical {v:?} = {k}");
    }
    let k = cohens_kappa(&complete_labels(&["A", "A", "B", "B"]), &complete_labels(&["A", "B", "A", "B"]))
        .map_err(|e| e.to_string())?
        .kappa;
    ensure!(k.abs() <= 1e-12, "balanced independence kappa = {k}");

    let mut rng = ChaCha8Rng::seed_from_u64(0x1CC);
    let mut worst: f64 = 0.0;
    for case in 0..250 {
        let n = rng.gen_range(2..=10);
        let k = rng.gen_range(2..=5);
        let offsets: Vec<f64> = (0..k).map(|_| rng.gen_range(-2.0..2.0)).collect();
        let x: Vec<Vec<f64>> = (0..n)
            .map(|_| {
                let t = rng.gen_range(0.0..10.0);
                offsets.iter().map(|o| t + o + rng.gen_range(-1.5..1.5)).collect()
            })
            .collect();
        let m = RatingsMatrix::from_numeric(&x, Scale::Interval).map_err(|e| e.to_string())?;
        let lib = icc(&m).map_err(|e| format!("case {case}: {e}"))?.icc;
        let want = oracle::icc21(&x);
        let d = (lib - want).abs();
        worst = worst.max(d);
        ensure!(d <= 1e-9, "case {case}: icc {lib} vs oracle {want}");
    }
    Ok(format!("kappa 1 and 0 fixed points hold; 250 ICC matrices, max |diff| {worst:.1e}"))
}

// 3. Micro-averaged scores equal accuracy; F1 lies between P and R.
fn classification_identities() -> Verdict {
    let mut rng = ChaCha8Rng::seed_from_u64(0xC1A55);
    let mut bounded = 0;
    for case in 0..1000 {
        let k = rng.gen_range(2..=5);
        let classes: Vec<String> = (0..k).map(|i| format!("c{i}")).collect();
        let mut counts: Vec<Vec<u64>> = (0..k).map(|_| (0..k).map(|_| rng.gen_range(0..=20)).collect()).collect();
        if counts.iter().flatten().sum::<u64>() == 0 {
            counts[0][0] = 1;
        }
        let cm = ConfusionMatrix::from_counts(classes.clone(), counts);
        let acc = accuracy(&cm);
        let micro = precision_recall_f1(&cm, &PrfTarget::Average(Averaging::Micro));
        for (name, v) in [("P", micro.precision), ("R", micro.recall), ("F1", micro.f1)] {
            ensure!((v - acc).abs() <= 1e-12, "case {case}: micro-{name} {v} vs accuracy {acc}");
        }
        let mut check = |p: f64, r: f64, f1: f64, what: &str| -> Result<(), String> {
            bounded += 1;
            ensure!(p.min(r) <= f1 + 1e-12 && f1 <= p.max(r) + 1e-12, "case {case} {what}: P {p} R {r} F1 {f1}");
            Ok(())
        };
        for c in &micro.per_class {
            if !c.precision_undefined && !c.recall_undefined {
                check(c.precision, c.recall, c.f1, &c.class)?;
            }
        }
        let pos = precision_recall_f1(&cm, &PrfTarget::Positive(classes[0].clone()));
        if !pos.zero_support {
            check(pos.precision, pos.recall, pos.f1, "positive class")?;
        }
    }
    Ok(format!("1000 matrices; {bounded} defined F1 values within [min(P,R), max(P,R)]"))
}

// 4. Reference promptbook renders the documented prompt byte for byte.
fn golden_render() -> Verdict {
    let source = std::fs::read_to_string(format!("{DATA}/data/literature_review.json")).map_err(|e| e.to_string())?;
    let book = parse_promptbook(&source).map_err(|e| e.to_string())?;
    let a = render_prompt(&book);
    let b = render_prompt(&parse_promptbook(&source).map_err(|e| e.to_string())?);
    ensure!(a == b, "two renders differ");
    let sentence = "Return **ONLY** a JSON array of objects";
    ensure!(ONLY_JSON_DIRECTIVE.starts_with(sentence), "directive constant changed");
    ensure!(a.user_template.contains(sentence), "directive sentence missing");

    let golden = |name: &str| std::fs::read_to_string(format!("{DATA}/tests/golden/{name}")).map_err(|e| e.to_string());
    let manual = golden("literature_review_manual.txt")?;
    let want: Vec<&str> = manual.lines().collect();
    let got: Vec<&str> = a.user_template.lines().take_while(|l| !l.is_empty()).collect();
    ensure!(want.len() == 21, "golden manual has {} lines", want.len());
    ensure!(got == want, "manual lines differ:\n{}", got.join("\n"));

    let schema_block = golden("literature_review_schema.txt")?;
    ensure!(schema_of(&book).len() == 21, "schema has {} fields", schema_of(&book).len());
    ensure!(a.user_template.contains(&schema_block), "schema block differs");
    ensure!(
        a.system == "You are a researcher in Management. Please use the following coding manual to code the text.",
        "system prompt: {}",
        a.system
    );
    let full = golden("literature_review_user_template.txt")?;
    ensure!(a.user_template == full, "user template differs from golden file");
    Ok(format!("21 manual lines, 21-field schema, {} bytes stable", a.user_template.len()))
}

fn fault_script_json(ids: &[String], malformed: usize, rate: usize, timeout: usize, seed: u64) -> (Value, Vec<String>, Vec<String>, Vec<String>) {
    let mut order = ids.to_vec();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let m = order[..malformed].to_vec();
    let r = order[malformed..malformed + rate].to_vec();
    let t = order[malformed + rate..malformed + rate + timeout].to_vec();
    let mut docs = serde_json::Map::new();
    for d in &m {
        docs.insert(d.clone(), json!(["malformed_json"]));
    }
    for d in &r {
        docs.insert(d.clone(), json!(["rate_limit_once"]));
    }
    for d in &t {
        docs.insert(d.clone(), json!([{"timeout": 1}]));
    }
    (json!({ "docs": docs }), m, r, t)
}

fn cell_text(v: &Value) -> String {
    match v {
        Value::String(s) => s.clone(),
        other => other.to_string(),
    }
}

// 5. Strict parsing under injected faults, with exact retry accounting.
fn strict_parsing_contract() -> Verdict {
    let start = Instant::now();
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let (book, docs) = fixture(dir.path(), 100);
    let ids: Vec<String> = (0..100).map(|i| format!("doc{i:03}")).collect();
    let (script, malformed, rate, timeout) = fault_script_json(&ids, 10, 5, 2, 5);
    let script_path = dir.path().join("faults.json");
    std::fs::write(&script_path, script.to_string()).map_err(|e| e.to_string())?;
    let out = dir.path().join("run");
    let r = cli(&["run", "--promptbook", s(&book), "--corpus", s(&docs), "--out", s(&out), "--backend", "mock", "--fault-script", s(&script_path)]);
    ensure!(r.exit_code == 0, "exit {} {:?}", r.exit_code, r.diagnostics);

    let table = read_table(&out.join(TABLE_FILE)).map_err(|e| e.to_string())?;
    ensure!(table.rows.len() == 100, "{} rows", table.rows.len());
    ensure!(table.rows.iter().all(|row| row.status == Some(RowStatus::Ok)), "a row is not ok");
    let log = read_raw_log(&out.join(RAW_LOG_FILE)).map_err(|e| e.to_string())?;
    ensure!(log.len() == 110, "{} call records", log.len());

    for id in &ids {
        let recs: Vec<_> = log.iter().filter(|c| &c.doc_id == id).collect();
        let (n, first, last) = if malformed.contains(id) {
            (2, CallStatus::Ok, CallStatus::RetriedOk(1))
        } else if rate.contains(id) || timeout.contains(id) {
            (1, CallStatus::RetriedOk(1), CallStatus::RetriedOk(1))
        } else {
            (1, CallStatus::Ok, CallStatus::Ok)
        };
        ensure!(recs.len() == n, "{id}: {} records", recs.len());
        ensure!(recs[0].status == first && recs[n - 1].status == last, "{id}: statuses {:?}", recs.iter().map(|c| c.status).collect::<Vec<_>>());
        if malformed.contains(id) {
            ensure!(recs[0].raw_output == MALFORMED_REPLY, "{id}: first reply not the malformed one");
        }
        if rate.contains(id) {
            ensure!(recs[0].attempt_errors == vec![FailureKind::RateLimited], "{id}: {:?}", recs[0].attempt_errors);
        }
        if timeout.contains(id) {
            ensure!(recs[0].attempt_errors == vec![FailureKind::Timeout], "{id}: {:?}", recs[0].attempt_errors);
        }
        // The row must come verbatim from a reply that is valid JSON as sent.
        let last = recs[n - 1];
        let parsed: Value = serde_json::from_str(&last.raw_output).map_err(|e| format!("{id}: ok row from non-JSON reply: {e}"))?;
        let obj = parsed.get(0).and_then(Value::as_object).ok_or(format!("{id}: reply not an array of one object"))?;
        for var in &table.variables {
            let cell = table.value(id, var, "N/A").unwrap_or_default();
            let sent = obj.get(var).map(cell_text).unwrap_or_default();
            ensure!(cell == sent, "{id}.{var}: table `{cell}` vs reply `{sent}`");
        }
    }

    // Terminal failures surface in the exit code.
    let (script, _, _, _) = fault_script_json(&ids, 0, 0, 0, 0);
    let mut script = script;
    for id in ["doc010", "doc020", "doc030"] {
        script["docs"][id] = json!(["malformed_json", "malformed_json"]);
    }
    std::fs::write(&script_path, script.to_string()).map_err(|e| e.to_string())?;
    let out2 = dir.path().join("run2");
    let r = cli(&["run", "--promptbook", s(&book), "--corpus", s(&docs), "--out", s(&out2), "--backend", "mock", "--fault-script", s(&script_path)]);
    ensure!(r.exit_code == 3, "exit {} with terminal failures", r.exit_code);
    let table = read_table(&out2.join(TABLE_FILE)).map_err(|e| e.to_string())?;
    let failed: Vec<&str> = table.rows.iter().filter(|r| r.status == Some(RowStatus::FailedParse)).map(|r| r.doc_id.as_str()).collect();
    ensure!(failed == ["doc010", "doc020", "doc030"], "failed rows {failed:?}");
    ensure!(
        table.rows.iter().filter(|r| r.status == Some(RowStatus::FailedParse)).all(|r| r.cells.iter().all(Option::is_none)),
        "failed rows carry values"
    );
    let secs = start.elapsed().as_secs_f64();
    ensure!(secs < 30.0, "took {secs:.1}s");
    Ok(format!("100 rows, 10/5/2 faults accounted, 0 repaired, exit 0 then 3, {secs:.2}s"))
}

// 6. Interrupted and resumed replay runs, and worker counts, give identical tables.
fn resumability_and_determinism() -> Verdict {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let (book, docs) = fixture(dir.path(), 100);
    let ids: Vec<String> = (0..100).map(|i| format!("doc{i:03}")).collect();
    let (script, _, _, _) = fault_script_json(&ids, 10, 5, 2, 6);
    let script_path = dir.path().join("faults.json");
    std::fs::write(&script_path, script.to_string()).map_err(|e| e.to_string())?;
    let recorded = dir.path().join("recorded");
    let r = cli(&["run", "--promptbook", s(&book), "--corpus", s(&docs), "--out", s(&recorded), "--backend", "mock", "--fault-script", s(&script_path)]);
    ensure!(r.exit_code == 0, "recording run exit {}", r.exit_code);
    let log = recorded.join(RAW_LOG_FILE);

    let replay = |out: &Path, extra: &[&str]| {
        let mut args = vec!["run", "--promptbook", s(&book), "--corpus", s(&docs), "--out", s(out), "--backend", "replay", "--replay-log", s(&log)];
        args.extend_from_slice(extra);
        cli(&args)
    };
    let read = |p: &Path| std::fs::read(p.join(TABLE_FILE)).unwrap_or_default();

    let full = dir.path().join("full");
    ensure!(replay(&full, &["--workers", "4"]).exit_code == 0, "uninterrupted replay failed");
    let cut = dir.path().join("cut");
    let r = replay(&cut, &["--workers", "4", "--stop-after", "40"]);
    ensure!(r.exit_code == 3, "interrupted run exit {}", r.exit_code);
    ensure!(!cut.join(TABLE_FILE).exists(), "interrupted run wrote a table");
    let processed = std::fs::read_to_string(cut.join(pipeline::PROCESSED_FILE)).map_err(|e| e.to_string())?;
    ensure!(processed.lines().count() == 40, "{} processed before interruption", processed.lines().count());
    let r = replay(&cut, &["--workers", "4", "--resume"]);
    ensure!(r.exit_code == 0, "resume exit {} {:?}", r.exit_code, r.diagnostics);
    ensure!(read(&full) == read(&cut), "resumed table differs from uninterrupted table");
    let cut_log = read_raw_log(&cut.join(RAW_LOG_FILE)).map_err(|e| e.to_string())?;
    ensure!(cut_log.len() == 110, "resumed log has {} records", cut_log.len());

    let w1 = dir.path().join("w1");
    let w8 = dir.path().join("w8");
    ensure!(replay(&w1, &["--workers", "1"]).exit_code == 0, "workers=1 failed");
    ensure!(replay(&w8, &["--workers", "8"]).exit_code == 0, "workers=8 failed");
    ensure!(read(&w1) == read(&w8) && read(&w1) == read(&full), "worker count changed the table");
    ensure!(read(&full) == read(&recorded), "replay table differs from the recorded run");
    Ok(format!("resume at 40/100 byte-identical ({} bytes); workers 1 = 8", read(&full).len()))
}

// 7. Verbatim checks flag exactly the values with an injected token.
fn verbatim_detection() -> Verdict {
    let book = parse_promptbook(
        r#"{"id": "v", "version": "1", "role": "r", "variables": [
            {"name": "IE_QUOTE", "task": "extraction", "instruction": "Quote the claim.", "type": "string", "verbatim": true}]}"#,
    )
    .map_err(|e| e.to_string())?;
    let schema = schema_of(&book);
    let vocab = [
        "the", "market", "grew", "slowly", "while", "firms", "invested", "in", "new", "plants", "and", "workers",
        "moved", "north", "after", "prices", "rose", "sharply", "during", "winter",
    ];
    let mut rng = ChaCha8Rng::seed_from_u64(0x7E57);
    let (mut tp, mut fp, mut fn_, mut tn) = (0, 0, 0, 0);
    for case in 0..1000 {
        let words: Vec<&str> = (0..40).map(|_| vocab[rng.gen_range(0..vocab.len())]).collect();
        let seps = [" ", " ", " ", "\n", "  "];
        let doc: String = words.iter().map(|w| format!("{w}{}", seps[rng.gen_range(0..seps.len())])).collect();
        let len = rng.gen_range(2..=8);
        let at = rng.gen_range(0..=words.len() - len);
        let mut span: Vec<String> = words[at..at + len].iter().map(|w| w.to_string()).collect();
        let injected = case % 2 == 1;
        if injected {
            let pos = rng.gen_range(0..=span.len());
            span.insert(pos, format!("zq{case}x"));
        }
        let value = span.join(" ");
        let rec = validate_record(&schema, &json!([{ "IE_QUOTE": value }]), &doc, &format!("d{case}"))
            .map_err(|e| e.to_string())?;
        let flagged = rec.violations.iter().any(|v| v.kind == ViolationKind::VerbatimMismatch);
        match (injected, flagged) {
            (true, true) => tp += 1,
            (false, true) => fp += 1,
            (true, false) => fn_ += 1,
            (false, false) => tn += 1,
        }
    }
    ensure!(fp == 0 && fn_ == 0, "false positives {fp}, false negatives {fn_}");
    Ok(format!("{tp} injected flagged, {tn} true substrings passed, 0 FP, 0 FN"))
}

fn check_windows(history: &[(Duration, u64)], rpm: u64, tpm: u64) -> Result<(), String> {
    let mut j = 0;
    let mut tokens: u64 = 0;
    for i in 0..history.len() {
        if i > 0 {
            ensure!(history[i].0 >= history[i - 1].0, "grant times go backwards at {i}");
        }
        while j < history.len() && history[j].0 < history[i].0 + WINDOW {
            tokens += history[j].1;
            j += 1;
        }
        let count = (j - i) as u64;
        ensure!(count <= rpm, "{count} requests in the window starting at {:?}", history[i].0);
        ensure!(tokens <= tpm, "{tokens} tokens in the window starting at {:?}", history[i].0);
        tokens -= history[i].1;
    }
    Ok(())
}

// 8. No 60-second window exceeds either budget.
fn rate_limit_conformance() -> Verdict {
    let (rpm, tpm) = (40u64, 10_000u64);
    let clock = Arc::new(SimClock::new());
    let limiter = RateLimiter::new(rpm, tpm, clock.clone()).with_history();
    let mut rng = ChaCha8Rng::seed_from_u64(0x11A1);
    for i in 0..10_000 {
        let tokens = match i % 6 {
            0 => 1,
            1 => tpm,
            2 => tpm - 1,
            3 => tpm / 2 + 1,
            4 => rng.gen_range(1..=50),
            _ => rng.gen_range(1..=tpm),
        };
        limiter.acquire(tokens).map_err(|e| e.to_string())?;
        if i % 97 == 0 {
            clock.advance(Duration::from_millis(rng.gen_range(0..5000)));
        }
    }
    ensure!(limiter.acquire(tpm + 1).is_err(), "oversized request admitted");
    let h = limiter.history();
    ensure!(h.len() == 10_000, "{} grants", h.len());
    check_windows(&h, rpm, tpm)?;

    // Concurrent acquirers on one simulated clock.
    let clock: Arc<SimClock> = Arc::new(SimClock::new());
    let shared = Arc::new(RateLimiter::new(rpm, tpm, clock.clone() as Arc<dyn Clock>).with_history());
    let handles: Vec<_> = (0..8u64)
        .map(|t| {
            let l = shared.clone();
            std::thread::spawn(move || {
                let mut rng = ChaCha8Rng::seed_from_u64(t);
                for _ in 0..1250 {
                    let tokens = if rng.gen_bool(0.3) { rng.gen_range(tpm / 2..=tpm) } else { rng.gen_range(1..=100) };
                    l.acquire(tokens).unwrap();
                }
            })
        })
        .collect();
    for h in handles {
        h.join().map_err(|_| "acquirer thread panicked".to_string())?;
    }
    let h2 = shared.history();
    ensure!(h2.len() == 10_000, "{} concurrent grants", h2.len());
    check_windows(&h2, rpm, tpm)?;
    Ok(format!("2 x 10000 acquisitions (sequential and 8 threads), every window within {rpm} RPM / {tpm} TPM"))
}

const NUMERIC_BOOK: &str = r#"{"id": "stab", "version": "1", "role": "ROLE",
  "variables": [
    {"name": "AN_POSITIVE", "task": "annotation", "instruction": "1 if positive, else 0.", "type": "binary"},
    {"name": "AN_TOPIC", "task": "annotation", "instruction": "Main topic.", "type": "categorical", "categories": ["price", "quality", "service"]},
    {"name": "AN_SCORE", "task": "annotation", "instruction": "Score from 0 to 99.", "type": "integer"},
    {"name": "AN_SHARE", "task": "annotation", "instruction": "Share of praise in percent.", "type": "decimal"},
    {"name": "IE_OPENING", "task": "extraction", "instruction": "Quote the opening words.", "type": "string", "verbatim": true}
  ]}"#;

fn stab_book(role: &str) -> Promptbook {
    parse_promptbook(&NUMERIC_BOOK.replace("ROLE", role)).unwrap()
}

/// The default mock reply for a document, with `edit` applied.
fn reply(book: &Promptbook, doc: &Document, edit: impl Fn(&mut serde_json::Map<String, Value>)) -> String {
    let responder = schema_responder(schema_of(book));
    let ctx = CallContext {
        doc_id: doc.id.clone(),
        call_seq: 1,
        attempt: 1,
        doc_attempt: 1,
        repeat_index: 1,
        prompt_hash: String::new(),
        doc_text: doc.text.clone(),
    };
    let req = ChatRequest { model: String::new(), messages: Vec::new(), temperature: 0.0, top_p: 1.0, max_tokens: 1 };
    let mut v: Value = serde_json::from_str(&responder(&ctx, &req)).unwrap();
    edit(v[0].as_object_mut().unwrap());
    v.to_string()
}

struct RunSpec<'a> {
    book: &'a Promptbook,
    model: &'a str,
    repeat: u32,
    script: FaultScript,
}

fn mock_run(corpus: &Corpus, dir: &Path, name: &str, spec: RunSpec<'_>) -> PathBuf {
    let out = dir.join(name);
    let mock = Arc::new(MockTransport::new(spec.script, schema_responder(schema_of(spec.book))));
    let config = ModelConfig { model_id: spec.model.into(), ..Default::default() };
    let g = Gateway::new(config, mock, Arc::new(SimClock::new()));
    let opts = RunOptions { repeat_index: spec.repeat, out_dir: Some(out.clone()), ..Default::default() };
    pipeline::run(corpus, spec.book, &g, &opts).unwrap();
    out
}

fn flip_script(book: &Promptbook, corpus: &Corpus, docs: &[usize], var: &str) -> FaultScript {
    let mut s = FaultScript::default();
    for &i in docs {
        let d = &corpus.documents()[i];
        let r = reply(book, d, |o| {
            let v = o[var].as_i64().unwrap();
            o.insert(var.into(), json!(1 - v));
        });
        s.push(d.id.clone(), Directive::Respond(r));
    }
    s
}

fn all_orders(n: usize) -> Vec<Vec<usize>> {
    if n == 1 {
        return vec![vec![0]];
    }
    let mut out = Vec::new();
    for p in all_orders(n - 1) {
        for at in 0..=p.len() {
            let mut q = p.clone();
            q.insert(at, n - 1);
            out.push(q);
        }
    }
    out
}

fn permutation_invariant(axis: Axis, runs: &[LoadedRun], baseline: Option<String>) -> Result<usize, String> {
    let mut seen = BTreeSet::new();
    let orders = all_orders(runs.len());
    for order in &orders {
        let set = RunSet::new(axis, order.iter().map(|&i| runs[i].clone()).collect(), baseline.clone());
        let report = evaluate(&set).map_err(|e| e.to_string())?;
        seen.insert(serde_json::to_string(&report).unwrap());
    }
    ensure!(seen.len() == 1, "{axis:?}: {} distinct reports over {} orders", seen.len(), orders.len());
    Ok(orders.len())
}

// 9. Robustness protocols: identity, PSS oracle, permutation symmetry.
fn robustness_protocols() -> Verdict {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let corpus = common::corpus(30);
    let base_book = stab_book("You code product reviews.");

    // K identical replay runs.
    let recorded = mock_run(&corpus, dir.path(), "recorded", RunSpec { book: &base_book, model: "m", repeat: 1, script: FaultScript::default() });
    let log = read_raw_log(&recorded.join(RAW_LOG_FILE)).map_err(|e| e.to_string())?;
    let mut replays = Vec::new();
    for k in 1..=3u32 {
        let out = dir.path().join(format!("replay{k}"));
        let g = Gateway::new(ModelConfig { model_id: "m".into(), ..Default::default() }, Arc::new(ReplayTransport::new(log.clone())), Arc::new(SimClock::new()));
        let opts = RunOptions { repeat_index: k, out_dir: Some(out.clone()), ..Default::default() };
        pipeline::run(&corpus, &base_book, &g, &opts).map_err(|e| e.to_string())?;
        replays.push(LoadedRun::load(&out).map_err(|e| e.to_string())?);
    }
    let report = evaluate(&RunSet::new(Axis::Repeat, replays.clone(), None)).map_err(|e| e.to_string())?;
    ensure!(report.variables.len() == 5, "{} variables", report.variables.len());
    for v in &report.variables {
        ensure!(v.alpha.value == Some(1.0), "{}: alpha {:?}", v.variable, v.alpha.value);
        if let Some(icc) = &v.icc {
            ensure!(icc.value == Some(1.0), "{}: icc {:?}", v.variable, icc.value);
        }
    }
    ensure!(report.variables.iter().filter(|v| v.icc.is_some()).count() == 3, "ICC missing on a numeric variable");

    // PSS: one identical paraphrase and one that flips half of AN_POSITIVE.
    let half: Vec<usize> = (0..30).step_by(2).collect();
    let base_dir = recorded.clone();
    let v1_book = stab_book("You are coding customer reviews of products.");
    let v2_book = stab_book("Please code the following product review.");
    let v1 = mock_run(&corpus, dir.path(), "v1", RunSpec { book: &v1_book, model: "m", repeat: 1, script: FaultScript::default() });
    let v2 = mock_run(&corpus, dir.path(), "v2", RunSpec { book: &v2_book, model: "m", repeat: 1, script: flip_script(&v2_book, &corpus, &half, "AN_POSITIVE") });
    let base = LoadedRun::load(&base_dir).map_err(|e| e.to_string())?;
    let var1 = LoadedRun::load(&v1).map_err(|e| e.to_string())?;
    let var2 = LoadedRun::load(&v2).map_err(|e| e.to_string())?;
    let rows: Vec<Vec<Option<f64>>> = corpus
        .ids()
        .iter()
        .map(|d| {
            [&base, &var2]
                .iter()
                .map(|r| r.value(d, "AN_POSITIVE").and_then(|v| v.parse().ok()))
                .collect()
        })
        .collect();
    let alpha_half = oracle::alpha(&rows, Level::Interval).ok_or("oracle alpha undefined")?;
    let want = (1.0 + alpha_half) / 2.0;
    let set = RunSet::new(Axis::PromptVariant, vec![base.clone(), var1.clone(), var2.clone()], Some(base.run_id().to_string()));
    let pr = evaluate(&set).map_err(|e| e.to_string())?;
    let pss_of = |name: &str| pr.prompt_stability.iter().find(|p| p.variable == name).and_then(|p| p.pss);
    let got = pss_of("AN_POSITIVE").ok_or("PSS undefined")?;
    ensure!((got - want).abs() <= 1e-9, "PSS {got} vs oracle {want}");
    for other in ["AN_TOPIC", "AN_SCORE", "AN_SHARE", "IE_OPENING"] {
        ensure!(pss_of(other) == Some(1.0), "{other}: PSS {:?}", pss_of(other));
    }

    // Permutation symmetry of all three protocols on disagreeing runs.
    let mut repeats = Vec::new();
    for (k, docs) in [(1u32, vec![]), (2, vec![1usize, 4, 9, 16]), (3, vec![2, 4, 25])] {
        let out = mock_run(&corpus, dir.path(), &format!("rep{k}"), RunSpec { book: &base_book, model: "m", repeat: k, script: flip_script(&base_book, &corpus, &docs, "AN_POSITIVE") });
        repeats.push(LoadedRun::load(&out).map_err(|e| e.to_string())?);
    }
    let n_rep = permutation_invariant(Axis::Repeat, &repeats, None)?;
    let n_var = permutation_invariant(Axis::PromptVariant, &[base.clone(), var1, var2], Some(base.run_id().to_string()))?;
    let mut models = Vec::new();
    for (m, docs) in [("model-a", vec![0usize, 3]), ("model-b", vec![5, 6, 7]), ("model-c", vec![])] {
        let out = mock_run(&corpus, dir.path(), m, RunSpec { book: &base_book, model: m, repeat: 1, script: flip_script(&base_book, &corpus, &docs, "AN_POSITIVE") });
        models.push(LoadedRun::load(&out).map_err(|e| e.to_string())?);
    }
    let n_mod = permutation_invariant(Axis::Model, &models, None)?;
    Ok(format!(
        "3 replays give alpha = ICC = 1; PSS {got:.6} = oracle {want:.6}; invariant over {n_rep}/{n_var}/{n_mod} orders"
    ))
}

// 10. Token estimate and cost closed forms.
fn cost_estimation() -> Verdict {
    ensure!(estimate_tokens("one two three") == 4, "3 words -> {}", estimate_tokens("one two three"));
    let text = vec!["word"; 750].join(" ");
    ensure!(estimate_tokens(&text) == 1000, "750 words -> {}", estimate_tokens(&text));
    let words = |s: &str| s.split_whitespace().count() as u64;
    let tokens = |w: u64| (4 * w).div_ceil(3);
    for w in [0u64, 1, 2, 3, 4, 5, 6, 7, 299, 300, 301] {
        let t = vec!["w"; w as usize].join(" \n ");
        ensure!(estimate_tokens(&t) == tokens(w), "{w} words -> {}", estimate_tokens(&t));
    }

    let book = common::book();
    let docs: Vec<Document> = [7usize, 120, 3, 999, 40]
        .iter()
        .enumerate()
        .map(|(i, &n)| Document::new(format!("d{i}"), vec!["token"; n].join(" ")))
        .collect();
    let corpus = Corpus::new(docs).map_err(|e| e.to_string())?;
    let config = ModelConfig { price_in: 2.5, price_out: 10.0, max_output_tokens: 512, ..Default::default() };
    let e = estimate_cost(&corpus, &book, &config);
    let p = render_prompt(&book);
    let overhead = tokens(words(&p.system)) + tokens(words(&p.user_template.replace("{{document}}", "")));
    let input: u64 = corpus.documents().iter().map(|d| overhead + tokens(words(&d.text))).sum();
    let output = 5 * 512u64;
    let cost = input as f64 * 2.5 / 1_000_000.0 + output as f64 * 10.0 / 1_000_000.0;
    ensure!(e.input_tokens == input, "input tokens {} vs {input}", e.input_tokens);
    ensure!(e.output_tokens_assumed == output, "output tokens {}", e.output_tokens_assumed);
    ensure!((e.cost - cost).abs() <= 1e-12, "cost {} vs {cost}", e.cost);
    ensure!((e.input_cost + e.output_cost - e.cost).abs() <= 1e-12, "parts do not sum");
    Ok(format!("3 -> 4, 750 -> 1000; cost {:.9} exact", e.cost))
}

fn main() {
    let criteria: [Criterion; 10] = [
        ("alpha matches brute-force oracle", alpha_oracle_equivalence),
        ("kappa fixed points and ICC(2,1) vs ANOVA oracle", kappa_and_icc),
        ("classification metric identities", classification_identities),
        ("reference promptbook golden render", golden_render),
        ("strict parsing under injected faults", strict_parsing_contract),
        ("resumability and worker determinism", resumability_and_determinism),
        ("verbatim anti-hallucination", verbatim_detection),
        ("rate-limit conformance", rate_limit_conformance),
        ("robustness protocols", robustness_protocols),
        ("token and cost estimation", cost_estimation),
    ];
    let filter: Vec<String> = std::env::args().skip(1).filter(|a| !a.starts_with('-')).collect();
    let mut failed = 0;
    for (i, (name, f)) in criteria.iter().enumerate() {
        if !filter.is_empty() && !filter.iter().any(|p| name.contains(p.as_str())) {
            continue;
        }
        let verdict = catch_unwind(AssertUnwindSafe(f)).unwrap_or_else(|p| {
            let msg = p.downcast_ref::<String>().cloned().or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()));
            Err(format!("panicked: {}", msg.unwrap_or_default()))
        });
        match verdict {
            Ok(detail) => println!("PASS criterion {:>2}: {name}: {detail}", i + 1),
            Err(why) => {
                failed += 1;
                println!("FAIL criterion {:>2}: {name}: {why}", i + 1);
            }
        }
    }
    if failed > 0 {
        std::process::exit(1);
    }
}
