//! Promptbook-driven text annotation with large language models.
//!
//! The crate turns a folder (or table) of documents into a structured
//! annotation table by executing a declarative codebook ("promptbook")
//! against a chat-completions endpoint, and then measures how valid,
//! reliable and robust the resulting codes are.
//!
//! The main pieces:
//!
//! - [`promptbook`]: parse, lint and render codebooks; validate model replies.
//! - [`corpus`]: ingest documents, estimate tokens, draw seeded samples.
//! - [`gateway`]: rate-limited, retrying client with mock and replay backends.
//! - [`pipeline`]: resumable batch runs with a full call audit log.
//! - [`metrics`]: accuracy, P/R/F1, MAE, Cohen's kappa, Krippendorff's alpha,
//!   ICC(2,1) and percentile bootstrap intervals.
//! - [`robustness`]: intra-prompt, inter-prompt (PSS) and inter-model protocols.
//! - [`cli`]: the `llmcoder` command line and documentation blocks.
//!
//! See the `examples/` directory for one runnable program per capability.

pub mod cli;
pub mod corpus;
pub mod digest;
pub mod docblock;
pub mod gateway;
pub mod metrics;
pub mod pipeline;
pub mod promptbook;
pub mod robustness;

/// Version string recorded in manifests and documentation blocks.
pub const TOOL_VERSION: &str = concat!("llmcoder ", env!("CARGO_PKG_VERSION"));
