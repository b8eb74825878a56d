//! Helpers shared by the robustness examples.
#![allow(dead_code)]

use std::collections::hash_map::DefaultHasher;
use std::hash::{Hash, Hasher};
use std::path::{Path, PathBuf};
use std::sync::Arc;

use llmcoder::corpus::{load_corpus, Corpus, IngestOptions};
use llmcoder::gateway::{schema_responder, FaultScript, Gateway, MockTransport, ModelConfig, Responder, SimClock};
use llmcoder::pipeline::{self, RunOptions};
use llmcoder::promptbook::{parse_promptbook, schema_of, Promptbook};
use serde_json::{json, Value};

pub fn data() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("data/reviews")
}

pub fn reviews() -> (Promptbook, Corpus) {
    let book = parse_promptbook(&std::fs::read_to_string(data().join("promptbook.json")).unwrap()).unwrap();
    let (corpus, _) = load_corpus(&data().join("docs"), &IngestOptions::default()).unwrap();
    (book, corpus)
}

/// The same book with a reworded role, as a prompt paraphrase.
pub fn paraphrase(book: &Promptbook, role: &str) -> Promptbook {
    let mut source: Value = serde_json::from_str(&std::fs::read_to_string(data().join("promptbook.json")).unwrap()).unwrap();
    source["role"] = json!(role);
    source["version"] = json!(format!("{}-p", book.version));
    parse_promptbook(&source.to_string()).unwrap()
}

/// Schema replies where `noise` of the documents get a flipped polarity
/// and a shifted star count. Which ones depends on the document, the
/// repeat index, the model and the prompt.
pub fn noisy(book: &Promptbook, noise: f64) -> Responder {
    let base = schema_responder(schema_of(book));
    Arc::new(move |ctx, req| {
        let mut h = DefaultHasher::new();
        (&ctx.doc_id, ctx.repeat_index, &req.model, &ctx.prompt_hash).hash(&mut h);
        let u = (h.finish() % 10_000) as f64 / 10_000.0;
        let reply = base(ctx, req);
        if u >= noise {
            return reply;
        }
        let mut v: Value = serde_json::from_str(&reply).unwrap();
        let o = v[0].as_object_mut().unwrap();
        if let Some(p) = o.get("AN_POSITIVE").and_then(Value::as_i64) {
            o.insert("AN_POSITIVE".into(), json!(1 - p));
        }
        if let Some(s) = o.get("AN_STARS").and_then(Value::as_i64) {
            o.insert("AN_STARS".into(), json!(s + 7));
        }
        v.to_string()
    })
}

/// Run `book` with a noisy mock under `model`, writing to `dir`.
pub fn run(corpus: &Corpus, book: &Promptbook, model: &str, repeat: u32, noise: f64, dir: &Path) -> PathBuf {
    let mock = Arc::new(MockTransport::new(FaultScript::default(), noisy(book, noise)));
    let config = ModelConfig { model_id: model.into(), ..Default::default() };
    let gateway = Gateway::new(config, mock, Arc::new(SimClock::new()));
    let opts = RunOptions { repeat_index: repeat, out_dir: Some(dir.to_path_buf()), ..Default::default() };
    pipeline::run(corpus, book, &gateway, &opts).unwrap();
    dir.to_path_buf()
}

pub fn scratch(name: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("llmcoder-example-{name}-{}", std::process::id()));
    let _ = std::fs::remove_dir_all(&dir);
    dir
}
