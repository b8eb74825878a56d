//! Score a run against hand-coded gold labels with bootstrap intervals.
//!
//! cargo run --example validate_against_gold

use std::path::Path;
use std::sync::Arc;

use llmcoder::cli::{validate_run, ValidationOptions};
use llmcoder::corpus::{load_corpus, IngestOptions};
use llmcoder::gateway::{schema_responder, FaultScript, Gateway, MockTransport, ModelConfig, SimClock};
use llmcoder::pipeline::{self, read_table, RunOptions};
use llmcoder::promptbook::{parse_promptbook, schema_of};
use llmcoder::robustness::LoadedRun;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let data = Path::new(env!("CARGO_MANIFEST_DIR")).join("data/reviews");
    let book = parse_promptbook(&std::fs::read_to_string(data.join("promptbook.json"))?)?;
    let (corpus, _) = load_corpus(&data.join("docs"), &IngestOptions::default())?;

    // The mock answers from a hash, so its scores sit near chance.
    let mock = Arc::new(MockTransport::new(FaultScript::default(), schema_responder(schema_of(&book))));
    let gateway = Gateway::new(ModelConfig::default(), mock, Arc::new(SimClock::new()));
    let out = std::env::temp_dir().join(format!("llmcoder-example-validate-{}", std::process::id()));
    let _ = std::fs::remove_dir_all(&out);
    pipeline::run(&corpus, &book, &gateway, &RunOptions { out_dir: Some(out.clone()), ..Default::default() })?;

    let run = LoadedRun::load(&out)?;
    let gold = read_table(&data.join("gold.csv"))?;
    let opts = ValidationOptions { replicates: 2000, level: 0.9, seed: 7, ..Default::default() };
    let report = validate_run(&run, &gold, &opts)?;
    print!("{}", report.render_text());
    std::fs::remove_dir_all(&out)?;
    Ok(())
}
