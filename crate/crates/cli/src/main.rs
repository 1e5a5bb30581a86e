use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Result;
use ccl_cli::commands;
use ccl_cli::config::{Command, RunConfig};
use ccl_cli::output::write_all;
use clap::{Parser, Subcommand};

#[derive(Parser)]
#[command(name = "ccl", version, about = "Continuous chain-ladder reserving")]
struct Cli {
    /// TOML run configuration.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Overrides the configured seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Overrides the configured output directory.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[command(subcommand)]
    command: Sub,
}

#[derive(Subcommand, Clone, Copy)]
enum Sub {
    /// Fit the delay and accident densities.
    Estimate,
    /// Estimate the outstanding reserve and its cash flows.
    Reserve,
    /// Simulate a scenario sample or a micro event log.
    Simulate,
    /// Run a replicated simulation study.
    Bench,
    /// Check the independence and multiplicativity assumptions.
    Diagnose,
}

impl From<Sub> for Command {
    fn from(s: Sub) -> Self {
        match s {
            Sub::Estimate => Command::Estimate,
            Sub::Reserve => Command::Reserve,
            Sub::Simulate => Command::Simulate,
            Sub::Bench => Command::Bench,
            Sub::Diagnose => Command::Diagnose,
        }
    }
}

fn run(cli: Cli) -> Result<()> {
    let mut config = match &cli.config {
        Some(path) => RunConfig::from_path(path)?,
        None => RunConfig::from_toml("")?,
    };
    if let Some(seed) = cli.seed {
        config.seed = seed;
    }
    if let Some(out) = cli.out {
        config.output = Some(out);
    }
    let files = commands::run(cli.command.into(), &config)?;
    let dir = config.output_dir();
    write_all(&dir, &files)?;
    for f in &files {
        println!("{}", dir.join(&f.name).display());
    }
    Ok(())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
