//! The `llmcoder` command line.
//!
//! Commands communicate only through files: a run directory holds
//! `table.csv`, `raw_log.jsonl`, `manifest.json`, `processed.txt` and
//! `documentation.json`; `validate`, `stability` and `agreement` read run
//! directories and write their reports next to a fresh documentation block.
//!
//! Exit codes: 0 success, 1 user error (bad flags, files, promptbook,
//! config), 2 provider or fatal error (authentication), 3 some documents
//! failed.

mod commands;
pub mod config;
mod validation;

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

pub use config::{resolve, Backend, ConfigFile, PrefixMode, Settings, SharedArgs};
pub use validation::{scorable, validate_run, ValidationError, ValidationOptions, ValidationReport};

use crate::pipeline::DEFAULT_PILOT_SIZE;

pub const EXIT_OK: i32 = 0;
pub const EXIT_USER: i32 = 1;
pub const EXIT_PROVIDER: i32 = 2;
pub const EXIT_PARTIAL: i32 = 3;

pub const VALIDATION_REPORT: &str = "validation_report";
pub const STABILITY_REPORT: &str = "stability_report";
pub const AGREEMENT_REPORT: &str = "agreement_report";
pub const REPORT_FILE: &str = "report.txt";

#[derive(Debug, Parser)]
#[command(name = "llmcoder", version, about = "Annotate text with LLMs from a declarative promptbook")]
pub struct Cli {
    /// More logging (-v info, -vv debug).
    #[arg(short, long, action = clap::ArgAction::Count, global = true)]
    pub verbose: u8,
    #[command(flatten)]
    pub shared: SharedArgs,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Check a promptbook and print its diagnostics.
    Lint {
        /// Promptbook file (defaults to --promptbook).
        path: Option<PathBuf>,
    },
    /// Estimate tokens and cost of running a promptbook over a corpus.
    Estimate,
    /// Run on a seeded random sample of the corpus.
    Pilot {
        #[arg(long, default_value_t = DEFAULT_PILOT_SIZE)]
        n: usize,
    },
    /// Code every document of the corpus.
    Run {
        /// 1-based index when repeating the same configuration.
        #[arg(long, default_value_t = 1)]
        repeat_index: u32,
        /// Stop after this many documents, as if killed.
        #[arg(long, hide = true)]
        stop_after: Option<usize>,
    },
    /// Score a run against gold-standard codes.
    Validate(ValidateArgs),
    /// Agreement across repeated runs or prompt variants.
    Stability(RunsArgs),
    /// Agreement across models.
    Agreement(RunsArgs),
    /// Render the documentation block and reports of a directory.
    Report {
        /// Directory to report on (defaults to --out).
        #[arg(long)]
        dir: Option<PathBuf>,
    },
}

#[derive(Debug, Clone, Args)]
pub struct ValidateArgs {
    /// Run directory to score.
    #[arg(long, value_name = "DIR")]
    pub run: PathBuf,
    /// CSV/TSV with a doc_id column and one column per variable.
    #[arg(long, value_name = "FILE")]
    pub gold: PathBuf,
    /// Comma-separated variables to score (default: annotation and extraction variables).
    #[arg(long, value_delimiter = ',')]
    pub variables: Option<Vec<String>>,
    /// Bootstrap replicates for confidence intervals.
    #[arg(long, default_value_t = 1000)]
    pub bootstrap: usize,
    /// Confidence level.
    #[arg(long, default_value_t = 0.95)]
    pub level: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum StabilityAxis {
    Repeat,
    PromptVariant,
}

#[derive(Debug, Clone, Args)]
pub struct RunsArgs {
    /// Runset JSON: {"axis": ..., "runs": [...], "baseline": ...}.
    #[arg(long, value_name = "FILE", conflicts_with = "runs")]
    pub runset: Option<PathBuf>,
    /// Run directories to compare.
    #[arg(long, value_name = "DIR", num_args = 1..)]
    pub runs: Vec<PathBuf>,
    /// What varies between --runs (stability only).
    #[arg(long, value_enum)]
    pub axis: Option<StabilityAxis>,
    /// Baseline run directory for prompt variants.
    #[arg(long, value_name = "DIR")]
    pub baseline: Option<PathBuf>,
}

/// Outcome of one command.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct CommandResult {
    pub exit_code: i32,
    /// Lines for standard error.
    pub diagnostics: Vec<String>,
    pub paths_written: Vec<PathBuf>,
    /// Text for standard output.
    pub output: String,
}

impl CommandResult {
    fn fail(code: i32, message: impl Into<String>) -> Self {
        CommandResult { exit_code: code, diagnostics: vec![message.into()], ..Default::default() }
    }
}

/// Run a parsed command. `env` looks up environment variables.
pub fn execute(cli: &Cli, env: &dyn Fn(&str) -> Option<String>) -> CommandResult {
    let settings = match resolve(&cli.shared, env) {
        Ok(s) => s,
        Err(e) => return CommandResult::fail(EXIT_USER, format!("error: {e}")),
    };
    let result = match &cli.command {
        Command::Lint { path } => commands::lint(path.as_ref(), &settings),
        Command::Estimate => commands::estimate(&settings),
        Command::Pilot { n } => commands::run(&settings, env, commands::RunKind::Pilot(*n)),
        Command::Run { repeat_index, stop_after } => commands::run(
            &settings,
            env,
            commands::RunKind::Full { repeat_index: *repeat_index, stop_after: *stop_after },
        ),
        Command::Validate(a) => commands::validate(a, &settings),
        Command::Stability(a) => commands::robustness(a, &settings, false),
        Command::Agreement(a) => commands::robustness(a, &settings, true),
        Command::Report { dir } => commands::report(dir.as_ref(), &settings),
    };
    result.unwrap_or_else(|e| CommandResult::fail(e.code, format!("error: {}", e.message)))
}

/// Print a result's output and diagnostics; returns its exit code.
pub fn emit(result: &CommandResult) -> i32 {
    if !result.output.is_empty() {
        print!("{}", result.output);
    }
    for d in &result.diagnostics {
        eprintln!("{d}");
    }
    result.exit_code
}

/// Parse `args` (program name first), execute against the process
/// environment, print, and return the exit code.
pub fn run_cli<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    match Cli::try_parse_from(args) {
        Ok(cli) => emit(&execute(&cli, &|k| std::env::var(k).ok())),
        Err(e) => {
            let _ = e.print();
            if e.use_stderr() {
                EXIT_USER
            } else {
                EXIT_OK
            }
        }
    }
}
