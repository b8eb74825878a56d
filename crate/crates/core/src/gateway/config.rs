use serde::{Deserialize, Serialize};

use super::RetryPolicy;

/// Environment variable holding the bearer token by default.
pub const DEFAULT_API_KEY_ENV: &str = "LLM_API_KEY";

/// Endpoint, sampling parameters, budgets and prices for one model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ModelConfig {
    pub base_url: String,
    pub model_id: String,
    pub temperature: f64,
    pub top_p: f64,
    pub max_output_tokens: u32,
    /// Context window in tokens.
    pub context_window: u64,
    /// Currency per 1,000,000 input tokens.
    pub price_in: f64,
    /// Currency per 1,000,000 output tokens.
    pub price_out: f64,
    pub rpm_limit: u64,
    pub tpm_limit: u64,
    pub request_timeout_secs: u64,
    /// Name of the environment variable with the API key.
    pub api_key_env: String,
    pub retry: RetryPolicy,
}

impl Default for ModelConfig {
    fn default() -> Self {
        ModelConfig {
            base_url: "https://api.openai.com/v1".into(),
            model_id: "gpt-4o-mini".into(),
            temperature: 0.0,
            top_p: 1.0,
            max_output_tokens: 4096,
            context_window: 128_000,
            price_in: 0.0,
            price_out: 0.0,
            rpm_limit: 60,
            tpm_limit: 200_000,
            request_timeout_secs: 120,
            api_key_env: DEFAULT_API_KEY_ENV.into(),
            retry: RetryPolicy::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("invalid model config: {0}")]
pub struct ConfigError(pub String);

impl ModelConfig {
    pub fn validate(&self) -> Result<(), ConfigError> {
        let err = |m: &str| Err(ConfigError(m.to_string()));
        if self.model_id.trim().is_empty() {
            return err("model_id is empty");
        }
        if !(self.temperature.is_finite() && self.temperature >= 0.0) {
            return err("temperature must be >= 0");
        }
        if !(self.top_p > 0.0 && self.top_p <= 1.0) {
            return err("top_p must be in (0, 1]");
        }
        if self.max_output_tokens == 0 || self.context_window == 0 {
            return err("max_output_tokens and context_window must be positive");
        }
        if self.rpm_limit == 0 || self.tpm_limit == 0 {
            return err("rpm_limit and tpm_limit must be positive");
        }
        if !(self.price_in >= 0.0 && self.price_out >= 0.0) {
            return err("prices must be >= 0");
        }
        if self.retry.max_attempts == 0 || !(0.0..1.0).contains(&self.retry.jitter) {
            return err("retry.max_attempts must be positive and retry.jitter in [0, 1)");
        }
        Ok(())
    }

    /// Parameters that must match across runs compared for stability.
    pub fn sampling_signature(&self) -> (String, String, u64, u64, u32) {
        (
            self.base_url.clone(),
            self.model_id.clone(),
            self.temperature.to_bits(),
            self.top_p.to_bits(),
            self.max_output_tokens,
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_validate_and_partial_json_fills_in() {
        ModelConfig::default().validate().unwrap();
        let c: ModelConfig = serde_json::from_str(r#"{"model_id": "m", "temperature": 0.5}"#).unwrap();
        assert_eq!(c.temperature, 0.5);
        assert_eq!(c.retry.max_attempts, 5);
        let bad = ModelConfig { top_p: 0.0, ..Default::default() };
        assert!(bad.validate().is_err());
    }
}
