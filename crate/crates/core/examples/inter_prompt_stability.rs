//! Compare paraphrased prompts against a baseline (prompt stability score).
//!
//! cargo run --example inter_prompt_stability

mod support;

use llmcoder::robustness::{inter_prompt_stability, Axis, RunSet};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let (book, corpus) = support::reviews();
    let root = support::scratch("inter-prompt");
    let baseline = support::run(&corpus, &book, "gpt-4o-mini", 1, 0.0, &root.join("baseline"));
    let mut dirs = vec![baseline.clone()];
    for (i, role) in [
        "You annotate customer feedback on household appliances.",
        "Act as a coder of online reviews for kitchen products.",
    ]
    .iter()
    .enumerate()
    {
        let variant = support::paraphrase(&book, role);
        dirs.push(support::run(&corpus, &variant, "gpt-4o-mini", 1, 0.25, &root.join(format!("variant{i}"))));
    }
    let set = RunSet::from_dirs(Axis::PromptVariant, &dirs, Some(&baseline))?;
    let report = inter_prompt_stability(&set)?;
    print!("{}", report.render_text());
    if let Some(pss) = report.pss {
        println!("mean PSS over variables: {pss:.3}");
    }
    std::fs::remove_dir_all(&root)?;
    Ok(())
}
