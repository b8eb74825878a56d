use clap::Parser;
use llmcoder::cli::{emit, execute, Cli, EXIT_OK, EXIT_USER};

fn main() {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            std::process::exit(if e.use_stderr() { EXIT_USER } else { EXIT_OK });
        }
    };
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    let result = execute(&cli, &|k| std::env::var(k).ok());
    std::process::exit(emit(&result));
}
