//! Token and cost estimate for a corpus before any call is made.
//!
//! cargo run --example estimate_cost

use std::path::Path;

use llmcoder::corpus::{estimate_tokens, load_corpus, IngestOptions};
use llmcoder::gateway::{estimate_cost, ModelConfig};
use llmcoder::promptbook::parse_promptbook;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let data = Path::new(env!("CARGO_MANIFEST_DIR")).join("data/reviews");
    let book = parse_promptbook(&std::fs::read_to_string(data.join("promptbook.json"))?)?;
    let (corpus, skipped) = load_corpus(&data.join("docs"), &IngestOptions::default())?;
    assert!(skipped.is_empty());

    println!("\"one two three\" -> {} tokens", estimate_tokens("one two three"));
    let config = ModelConfig {
        model_id: "gpt-4o-mini".into(),
        price_in: 0.15,
        price_out: 0.60,
        max_output_tokens: 400,
        ..Default::default()
    };
    let e = estimate_cost(&corpus, &book, &config);
    println!("documents:             {}", e.documents);
    println!("prompt tokens per doc: {}", e.prompt_tokens_per_document);
    println!("input tokens:          {}", e.input_tokens);
    println!("output tokens (max):   {}", e.output_tokens_assumed);
    println!("cost (max):            ${:.6} = {:.6} in + {:.6} out", e.cost, e.input_cost, e.output_cost);

    // Scaled up to a corpus 1000 times larger.
    println!("at 12,000 documents:   ${:.2}", e.cost * 1000.0);
    Ok(())
}
