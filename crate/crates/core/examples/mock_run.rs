//! A full run against the mock backend with scripted faults.
//!
//! cargo run --example mock_run

use std::path::Path;
use std::sync::Arc;

use llmcoder::corpus::{load_corpus, IngestOptions};
use llmcoder::gateway::{schema_responder, Directive, FaultScript, Gateway, MockTransport, ModelConfig, SimClock};
use llmcoder::pipeline::{self, failure_summary, RunOptions};
use llmcoder::promptbook::{parse_promptbook, schema_of};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let data = Path::new(env!("CARGO_MANIFEST_DIR")).join("data/reviews");
    let book = parse_promptbook(&std::fs::read_to_string(data.join("promptbook.json"))?)?;
    let (corpus, _) = load_corpus(&data.join("docs"), &IngestOptions::default())?;

    let mut script = FaultScript::default();
    script.push("r02", Directive::MalformedJson); // recovered by the re-ask
    script.push("r05", Directive::RateLimitOnce); // recovered by a retry
    script.push("r07", Directive::MalformedJson).push("r07", Directive::MalformedJson); // fails
    script.push("r09", Directive::Respond(r#"[{"AN_POSITIVE": 7}]"#.into())); // schema violations

    let mock = Arc::new(MockTransport::new(script, schema_responder(schema_of(&book))));
    let gateway = Gateway::new(ModelConfig::default(), mock, Arc::new(SimClock::new()));
    let out = tempfile_dir("mock_run");
    let opts = RunOptions { workers: 4, out_dir: Some(out.clone()), ..Default::default() };
    let result = pipeline::run(&corpus, &book, &gateway, &opts)?;

    print!("{}", result.table.to_csv());
    for (doc, status, err) in failure_summary(&result.table.rows) {
        println!("{doc}: {} ({err})", status.as_str());
    }
    println!("{} call records; artifacts in {}", result.raw_log.len(), out.display());
    Ok(())
}

fn tempfile_dir(name: &str) -> std::path::PathBuf {
    let dir = std::env::temp_dir().join(format!("llmcoder-example-{name}-{}", std::process::id()));
    let _ = std::fs::remove_dir_all(&dir);
    dir
}
