//! Print the system prompt and user template rendered from a promptbook.
//!
//! cargo run --example render_prompt -- data/literature_review.json

use llmcoder::promptbook::{parse_promptbook, render_prompt, schema_of};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let path = std::env::args()
        .nth(1)
        .unwrap_or_else(|| concat!(env!("CARGO_MANIFEST_DIR"), "/data/literature_review.json").to_string());
    let book = parse_promptbook(&std::fs::read_to_string(&path)?)?;
    let prompt = render_prompt(&book);
    eprintln!("{} v{}: {} fields", book.id, book.version, schema_of(&book).len());
    eprintln!("system: {}", prompt.system);
    print!("{}", prompt.user_template);
    Ok(())
}
