//! Shared fixtures for integration tests.
#![allow(dead_code)]

pub mod oracle;

use std::path::{Path, PathBuf};

use clap::Parser;
use llmcoder::cli::{execute, Cli, CommandResult};
use llmcoder::corpus::{Corpus, Document};
use llmcoder::promptbook::{parse_promptbook, Promptbook};

pub const BOOK: &str = r#"{
  "id": "reviews",
  "version": "1",
  "role": "You are a careful research assistant coding product reviews.",
  "variables": [
    {"name": "AN_POSITIVE", "task": "annotation", "instruction": "1 if the review is positive, else 0.", "type": "binary"},
    {"name": "AN_TOPIC", "task": "annotation", "instruction": "Main topic of the review.", "type": "categorical", "categories": ["price", "quality", "service"]},
    {"name": "IE_OPENING", "task": "extraction", "instruction": "Quote the opening words.", "type": "string", "verbatim": true},
    {"name": "SU_GIST", "task": "summarization", "instruction": "One-sentence summary.", "type": "string"}
  ]
}"#;

pub fn book() -> Promptbook {
    parse_promptbook(BOOK).unwrap()
}

pub fn doc_text(i: usize) -> String {
    format!("Review {i}: the blender arrived on day {} and it works as described by the seller.", i % 7)
}

pub fn corpus(n: usize) -> Corpus {
    Corpus::new((0..n).map(|i| Document::new(format!("doc{i:03}"), doc_text(i))).collect()).unwrap()
}

/// Write a promptbook and an `n`-document corpus directory under `root`.
pub fn fixture(root: &Path, n: usize) -> (PathBuf, PathBuf) {
    let book = root.join("book.json");
    std::fs::write(&book, BOOK).unwrap();
    let docs = root.join("docs");
    std::fs::create_dir_all(&docs).unwrap();
    for i in 0..n {
        std::fs::write(docs.join(format!("doc{i:03}.txt")), doc_text(i)).unwrap();
    }
    (book, docs)
}

/// Execute a command line with an empty environment plus `env`.
pub fn cli_with_env(args: &[&str], env: &[(&str, &str)]) -> CommandResult {
    let mut argv = vec!["llmcoder"];
    argv.extend_from_slice(args);
    let cli = Cli::try_parse_from(argv).unwrap_or_else(|e| panic!("{e}"));
    let env: Vec<(String, String)> = env.iter().map(|(k, v)| (k.to_string(), v.to_string())).collect();
    execute(&cli, &move |k| env.iter().find(|(n, _)| n == k).map(|(_, v)| v.clone()))
}

pub fn cli(args: &[&str]) -> CommandResult {
    cli_with_env(args, &[])
}

pub fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}
