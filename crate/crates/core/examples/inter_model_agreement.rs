//! Run one prompt on several models and compare their codes.
//!
//! cargo run --example inter_model_agreement

mod support;

use llmcoder::robustness::{inter_model_agreement, Axis, RunSet};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let (book, corpus) = support::reviews();
    let root = support::scratch("inter-model");
    let dirs: Vec<_> = ["gpt-4o", "gpt-4o-mini", "llama-3.1-70b"]
        .iter()
        .map(|m| support::run(&corpus, &book, m, 1, 0.3, &root.join(m)))
        .collect();
    let set = RunSet::from_dirs(Axis::Model, &dirs, None)?;
    let report = inter_model_agreement(&set)?;
    print!("{}", report.render_text());
    std::fs::remove_dir_all(&root)?;
    Ok(())
}
