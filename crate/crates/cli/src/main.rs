use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Result;
use clap::Parser;
use countflow::{run_command, CommandKind, Environment, RunConfig, Settings};

/// Simulate, fit and diagnose multivariate Poisson count time series.
#[derive(Debug, Parser)]
#[command(name = "countflow", version)]
struct Cli {
    command: CommandKind,
    /// TOML or JSON file with default settings; flags override its keys
    #[arg(long, short)]
    config: Option<PathBuf>,
    /// Suppress the summary on stdout
    #[arg(long, short)]
    quiet: bool,
    #[command(flatten)]
    settings: Settings,
}

fn run(cli: Cli) -> Result<()> {
    let file = match &cli.config {
        Some(path) => Settings::from_file(path)?,
        None => Settings::default(),
    };
    let config = RunConfig::resolve(cli.command, cli.settings.over(file), &Environment::from_process()?)?;
    let summary = run_command(&config)?;
    if !cli.quiet {
        // a closed stdout is not a failure of the command
        let mut out = std::io::stdout().lock();
        let _ = write!(out, "{}", summary.text);
        for f in &summary.files {
            let _ = writeln!(out, "wrote {}", f.display());
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
