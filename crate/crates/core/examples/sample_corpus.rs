//! Seeded development/evaluation samples, simple and stratified.
//!
//! cargo run --example sample_corpus

use llmcoder::corpus::{sample_split, Corpus, Document, SampleStrategy};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let docs = (0..30)
        .map(|i| {
            let journal = ["AMJ", "SMJ", "ASQ"][i % 3];
            Document::new(format!("article{i:02}"), format!("Abstract of article {i}.")).with_metadata("journal", journal)
        })
        .collect();
    let corpus = Corpus::new(docs)?;

    let simple = sample_split(&corpus, 5, 10, &SampleStrategy::Simple, 42)?;
    println!("simple dev:  {:?}", simple.dev.ids());
    println!("simple eval: {:?}", simple.eval.ids());

    let by = SampleStrategy::Stratified { by: "journal".into() };
    let strat = sample_split(&corpus, 6, 9, &by, 42)?;
    for (name, part) in [("dev", &strat.dev), ("eval", &strat.eval)] {
        let mut per: std::collections::BTreeMap<&str, usize> = Default::default();
        for d in part.documents() {
            *per.entry(d.metadata["journal"].as_str()).or_default() += 1;
        }
        println!("stratified {name}: {per:?}");
    }

    // Same seed, same split.
    let again = sample_split(&corpus, 5, 10, &SampleStrategy::Simple, 42)?;
    assert_eq!(again.dev.ids(), simple.dev.ids());
    Ok(())
}
