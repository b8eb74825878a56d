//! Flag, config-file and environment resolution.
//!
//! Precedence is flags, then the `--config` JSON file, then environment
//! variables, then built-in defaults.

use std::path::{Path, PathBuf};

use clap::{Args, ValueEnum};
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::gateway::ModelConfig;

/// Environment variable naming the default model id.
pub const MODEL_ENV: &str = "LLM_MODEL";
/// Environment variable naming the default endpoint.
pub const BASE_URL_ENV: &str = "LLM_BASE_URL";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Backend {
    #[default]
    Live,
    Mock,
    Replay,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PrefixMode {
    #[default]
    Error,
    Warn,
}

/// Flags shared by every subcommand.
#[derive(Debug, Clone, Default, Args)]
pub struct SharedArgs {
    /// Promptbook JSON file.
    #[arg(long, global = true, value_name = "PATH")]
    pub promptbook: Option<PathBuf>,
    /// Directory of .txt/.md files, or a CSV/TSV/JSONL table.
    #[arg(long, global = true, value_name = "PATH")]
    pub corpus: Option<PathBuf>,
    /// JSON file mirroring these flags.
    #[arg(long, global = true, value_name = "PATH")]
    pub config: Option<PathBuf>,
    /// Output directory.
    #[arg(long, global = true, value_name = "DIR")]
    pub out: Option<PathBuf>,
    #[arg(long, global = true, value_name = "ID")]
    pub model: Option<String>,
    #[arg(long, global = true, value_name = "URL")]
    pub base_url: Option<String>,
    #[arg(long, global = true, value_name = "X")]
    pub temperature: Option<f64>,
    #[arg(long, global = true, value_name = "X")]
    pub top_p: Option<f64>,
    /// Maximum output tokens per call.
    #[arg(long, global = true, value_name = "N")]
    pub max_tokens: Option<u32>,
    #[arg(long, global = true, value_name = "N")]
    pub workers: Option<usize>,
    #[arg(long, global = true, value_name = "N")]
    pub seed: Option<u64>,
    /// Continue the run already in --out.
    #[arg(long, global = true)]
    pub resume: bool,
    #[arg(long, global = true, value_enum)]
    pub backend: Option<Backend>,
    /// Fault-injection script for the mock backend.
    #[arg(long, global = true, value_name = "PATH")]
    pub fault_script: Option<PathBuf>,
    /// Recorded raw_log.jsonl for the replay backend.
    #[arg(long, global = true, value_name = "PATH")]
    pub replay_log: Option<PathBuf>,
    /// How a name prefix that disagrees with its task is reported.
    #[arg(long, global = true, value_enum)]
    pub prefix: Option<PrefixMode>,
}

/// `--config` file contents. Relative paths resolve against the file's
/// directory; `model_config` overlays any [`ModelConfig`] field.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ConfigFile {
    pub promptbook: Option<PathBuf>,
    pub corpus: Option<PathBuf>,
    pub out: Option<PathBuf>,
    pub model: Option<String>,
    pub base_url: Option<String>,
    pub temperature: Option<f64>,
    pub top_p: Option<f64>,
    pub max_tokens: Option<u32>,
    pub workers: Option<usize>,
    pub seed: Option<u64>,
    pub resume: Option<bool>,
    pub backend: Option<Backend>,
    pub fault_script: Option<PathBuf>,
    pub replay_log: Option<PathBuf>,
    pub prefix: Option<PrefixMode>,
    pub model_config: Option<Value>,
}

impl ConfigFile {
    pub fn load(path: &Path) -> Result<Self, String> {
        let text = std::fs::read_to_string(path).map_err(|e| format!("{}: {e}", path.display()))?;
        let mut file: ConfigFile =
            serde_json::from_str(&text).map_err(|e| format!("{}: {e}", path.display()))?;
        let base = path.parent().unwrap_or(Path::new("."));
        for p in [
            &mut file.promptbook,
            &mut file.corpus,
            &mut file.out,
            &mut file.fault_script,
            &mut file.replay_log,
        ]
        .into_iter()
        .flatten()
        {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        }
        Ok(file)
    }
}

/// Settings after applying precedence.
#[derive(Debug, Clone, PartialEq)]
pub struct Settings {
    pub promptbook: Option<PathBuf>,
    pub corpus: Option<PathBuf>,
    pub out: Option<PathBuf>,
    pub workers: usize,
    pub seed: u64,
    pub resume: bool,
    pub backend: Backend,
    pub fault_script: Option<PathBuf>,
    pub replay_log: Option<PathBuf>,
    pub prefix: PrefixMode,
    pub model: ModelConfig,
}

fn overlay(base: &mut Value, top: &Value) {
    match (base, top) {
        (Value::Object(b), Value::Object(t)) => {
            for (k, v) in t {
                overlay(b.entry(k.clone()).or_insert(Value::Null), v);
            }
        }
        (b, t) => *b = t.clone(),
    }
}

/// Merge flags, config file and environment. `env` is a lookup so tests
/// need not touch the process environment.
pub fn resolve(
    args: &SharedArgs,
    env: &dyn Fn(&str) -> Option<String>,
) -> Result<Settings, String> {
    let file = match &args.config {
        Some(p) => ConfigFile::load(p)?,
        None => ConfigFile::default(),
    };

    let mut model = ModelConfig::default();
    if let Some(m) = env(MODEL_ENV).filter(|s| !s.is_empty()) {
        model.model_id = m;
    }
    if let Some(u) = env(BASE_URL_ENV).filter(|s| !s.is_empty()) {
        model.base_url = u;
    }
    if let Some(mc) = &file.model_config {
        let mut v = serde_json::to_value(&model).expect("config serializes");
        overlay(&mut v, mc);
        model = serde_json::from_value(v).map_err(|e| format!("model_config: {e}"))?;
    }
    let layers = [
        (file.model.clone(), file.base_url.clone(), file.temperature, file.top_p, file.max_tokens),
        (args.model.clone(), args.base_url.clone(), args.temperature, args.top_p, args.max_tokens),
    ];
    for (m, u, t, p, k) in layers {
        if let Some(m) = m {
            model.model_id = m;
        }
        if let Some(u) = u {
            model.base_url = u;
        }
        if let Some(t) = t {
            model.temperature = t;
        }
        if let Some(p) = p {
            model.top_p = p;
        }
        if let Some(k) = k {
            model.max_output_tokens = k;
        }
    }
    model.validate().map_err(|e| e.to_string())?;

    Ok(Settings {
        promptbook: args.promptbook.clone().or(file.promptbook),
        corpus: args.corpus.clone().or(file.corpus),
        out: args.out.clone().or(file.out),
        workers: args.workers.or(file.workers).unwrap_or(4),
        seed: args.seed.or(file.seed).unwrap_or(0),
        resume: args.resume || file.resume.unwrap_or(false),
        backend: args.backend.or(file.backend).unwrap_or_default(),
        fault_script: args.fault_script.clone().or(file.fault_script),
        replay_log: args.replay_log.clone().or(file.replay_log),
        prefix: args.prefix.or(file.prefix).unwrap_or_default(),
        model,
    })
}
