//! Re-execute a run from its raw call log without contacting a model.
//!
//! cargo run --example replay_run

mod support;

use std::sync::Arc;

use llmcoder::gateway::{read_raw_log, Gateway, ModelConfig, ReplayTransport, SimClock};
use llmcoder::pipeline::{self, RunOptions, RAW_LOG_FILE, TABLE_FILE};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let (book, corpus) = support::reviews();
    let root = support::scratch("replay");
    let recorded = support::run(&corpus, &book, "gpt-4o-mini", 1, 0.3, &root.join("recorded"));

    let log = read_raw_log(&recorded.join(RAW_LOG_FILE))?;
    println!("replaying {} recorded calls", log.len());
    let config = ModelConfig { model_id: "gpt-4o-mini".into(), ..Default::default() };
    let gateway = Gateway::new(config, Arc::new(ReplayTransport::new(log)), Arc::new(SimClock::new()));
    let replayed = root.join("replayed");
    let opts = RunOptions { workers: 8, out_dir: Some(replayed.clone()), ..Default::default() };
    let out = pipeline::run(&corpus, &book, &gateway, &opts)?;
    println!("backend {}, run {}", out.manifest.backend, out.manifest.run_id);

    let same = std::fs::read(recorded.join(TABLE_FILE))? == std::fs::read(replayed.join(TABLE_FILE))?;
    println!("table.csv identical to the recorded run: {same}");
    std::fs::remove_dir_all(&root)?;
    Ok(())
}
