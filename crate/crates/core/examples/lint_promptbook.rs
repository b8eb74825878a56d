//! Lint promptbooks: one clean, one with a duplicate name and a bad prefix.
//!
//! cargo run --example lint_promptbook

use llmcoder::promptbook::{parse_promptbook_with, LintOptions, PrefixPolicy};

const BROKEN: &str = r#"{
  "id": "broken",
  "version": "0.1",
  "role": "You code reviews.",
  "variables": [
    {"name": "AN_TONE", "task": "annotation", "instruction": "Tone.", "type": "categorical", "categories": ["pos", "neg"]},
    {"name": "AN_TONE", "task": "annotation", "instruction": "Tone again.", "type": "binary"},
    {"name": "QUOTE", "task": "extraction", "instruction": "A quote.", "type": "string"}
  ]
}"#;

fn main() {
    let clean = std::fs::read_to_string(concat!(env!("CARGO_MANIFEST_DIR"), "/data/reviews/promptbook.json")).unwrap();
    for (label, source) in [("reviews", clean.as_str()), ("broken", BROKEN)] {
        for prefix in [PrefixPolicy::Error, PrefixPolicy::Warn] {
            println!("== {label}, prefix mismatches as {prefix:?}");
            match parse_promptbook_with(source, LintOptions { prefix }) {
                Ok((book, warnings)) => {
                    println!("ok: {} v{} with {} variables", book.id, book.version, book.variables.len());
                    for w in warnings {
                        println!("  {w}");
                    }
                }
                Err(e) => {
                    for d in &e.diagnostics {
                        println!("  {d}");
                    }
                }
            }
        }
    }
}
