use serde::{Deserialize, Serialize};

use super::ModelConfig;
use crate::corpus::{estimate_tokens, Corpus};
use crate::promptbook::{render_prompt, Promptbook};

/// Budget for running a promptbook over a corpus.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CostEstimate {
    pub documents: usize,
    pub prompt_tokens_per_document: u64,
    pub input_tokens: u64,
    /// Upper bound: every reply assumed to use `max_output_tokens`.
    pub output_tokens_assumed: u64,
    pub input_cost: f64,
    pub output_cost: f64,
    pub cost: f64,
}

/// Cost of a token count at per-million prices.
pub fn price_tokens(input_tokens: u64, output_tokens: u64, config: &ModelConfig) -> (f64, f64) {
    (
        input_tokens as f64 * config.price_in / 1e6,
        output_tokens as f64 * config.price_out / 1e6,
    )
}

/// Input = sum over documents of prompt overhead + document tokens.
pub fn estimate_cost(corpus: &Corpus, book: &Promptbook, config: &ModelConfig) -> CostEstimate {
    let prompt = render_prompt(book);
    let overhead = estimate_tokens(&prompt.system) + estimate_tokens(&prompt.template_without_slot());
    let n = corpus.len() as u64;
    let input_tokens: u64 = corpus
        .documents()
        .iter()
        .map(|d| overhead + d.token_estimate)
        .sum();
    let output_tokens_assumed = n * u64::from(config.max_output_tokens);
    let (input_cost, output_cost) = price_tokens(input_tokens, output_tokens_assumed, config);
    CostEstimate {
        documents: corpus.len(),
        prompt_tokens_per_document: overhead,
        input_tokens,
        output_tokens_assumed,
        input_cost,
        output_cost,
        cost: input_cost + output_cost,
    }
}
