//! Repeat one prompt several times and measure run-to-run agreement.
//!
//! cargo run --example intra_prompt_stability

mod support;

use llmcoder::robustness::{intra_prompt_stability, Axis, RunSet};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let (book, corpus) = support::reviews();
    let root = support::scratch("intra");
    let dirs: Vec<_> = (1..=3)
        .map(|k| support::run(&corpus, &book, "gpt-4o-mini", k, 0.2, &root.join(format!("repeat{k}"))))
        .collect();
    let set = RunSet::from_dirs(Axis::Repeat, &dirs, None)?;
    let report = intra_prompt_stability(&set)?;
    print!("{}", report.render_text());
    std::fs::remove_dir_all(&root)?;
    Ok(())
}
