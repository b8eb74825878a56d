//! Interrupt a run, resume it, and compare with an uninterrupted run.
//!
//! cargo run --example resume_run

use std::path::Path;
use std::sync::Arc;

use llmcoder::corpus::{load_corpus, IngestOptions};
use llmcoder::gateway::{schema_responder, FaultScript, Gateway, MockTransport, ModelConfig, SimClock};
use llmcoder::pipeline::{self, PipelineError, RunOptions, PROCESSED_FILE, TABLE_FILE};
use llmcoder::promptbook::{parse_promptbook, schema_of};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let data = Path::new(env!("CARGO_MANIFEST_DIR")).join("data/reviews");
    let book = parse_promptbook(&std::fs::read_to_string(data.join("promptbook.json"))?)?;
    let (corpus, _) = load_corpus(&data.join("docs"), &IngestOptions::default())?;
    let gateway = || {
        let mock = Arc::new(MockTransport::new(FaultScript::default(), schema_responder(schema_of(&book))));
        Gateway::new(ModelConfig::default(), mock, Arc::new(SimClock::new()))
    };
    let root = std::env::temp_dir().join(format!("llmcoder-example-resume-{}", std::process::id()));
    let _ = std::fs::remove_dir_all(&root);

    let full = root.join("full");
    pipeline::run(&corpus, &book, &gateway(), &RunOptions { out_dir: Some(full.clone()), ..Default::default() })?;

    let cut = root.join("cut");
    let opts = RunOptions { out_dir: Some(cut.clone()), stop_after: Some(5), ..Default::default() };
    match pipeline::run(&corpus, &book, &gateway(), &opts) {
        Err(PipelineError::Interrupted { .. }) => {}
        other => panic!("expected an interruption, got {:?}", other.map(|_| ())),
    }
    let done = std::fs::read_to_string(cut.join(PROCESSED_FILE))?;
    println!("interrupted after {} documents: {:?}", done.lines().count(), done.lines().collect::<Vec<_>>());

    let opts = RunOptions { out_dir: Some(cut.clone()), resume: true, ..Default::default() };
    let resumed = pipeline::run(&corpus, &book, &gateway(), &opts)?;
    println!("resumed run finished with {} rows", resumed.table.rows.len());

    let same = std::fs::read(full.join(TABLE_FILE))? == std::fs::read(cut.join(TABLE_FILE))?;
    println!("table.csv identical to the uninterrupted run: {same}");
    assert!(same);
    std::fs::remove_dir_all(&root)?;
    Ok(())
}
