use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand};
use delocspec::commands;
use delocspec::config::{Experiment, ExperimentConfig, Overrides};
use delocspec::report::Report;

#[derive(Parser)]
#[command(
    name = "delocspec",
    version,
    about = "Spectral density and kernel coefficient experiments over group rings"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Step functions of every stage, plus oracle samples.
    Density(Shared),
    /// Kernel coefficients per stage against their limits.
    Converge(Shared),
    /// Stage determinants, deviated determinants and lower bounds.
    Detbound(Shared),
    /// det* over labeled graphs.
    Sofic(Shared),
    /// Oracle values only.
    Oracle(Shared),
}

#[derive(Args)]
struct Shared {
    /// Experiment config (TOML).
    #[arg(long)]
    config: PathBuf,
    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Stage list, e.g. `2..64`, `2..64:2` or `4,8,16`.
    #[arg(long)]
    stages: Option<String>,
    /// Comma separated group words to track.
    #[arg(long)]
    track: Option<String>,
    /// Single-threaded, deterministic run.
    #[arg(long)]
    reproducible: bool,
    /// Oracle quadrature grid per torus direction.
    #[arg(long, conflicts_with = "no_oracle")]
    grid: Option<usize>,
    /// Skip the oracle.
    #[arg(long)]
    no_oracle: bool,
}

fn load(s: &Shared) -> Result<Experiment> {
    let text = std::fs::read_to_string(&s.config)
        .with_context(|| format!("reading {}", s.config.display()))?;
    let config =
        ExperimentConfig::from_toml(&text).with_context(|| format!("in {}", s.config.display()))?;
    let ov = Overrides {
        out: s.out.clone(),
        stages: s.stages.clone(),
        track: s.track.clone(),
        reproducible: s.reproducible,
        grid: s.grid,
        no_oracle: s.no_oracle,
    };
    Experiment::new(config, &ov).with_context(|| format!("in {}", s.config.display()))
}

fn run(cli: Cli) -> Result<Report> {
    match cli.command {
        Command::Density(s) => commands::density_cmd(&load(&s)?),
        Command::Converge(s) => Ok(commands::converge(&load(&s)?)?.1),
        Command::Detbound(s) => commands::detbound(&load(&s)?),
        Command::Sofic(s) => commands::sofic_cmd(&load(&s)?),
        Command::Oracle(s) => commands::oracle_cmd(&load(&s)?),
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(report) => {
            for c in &report.checks {
                let status = if c.pass() { "PASS" } else { "FAIL" };
                println!(
                    "{}: {status} ({}/{})",
                    c.name,
                    c.total - c.failed.len(),
                    c.total
                );
            }
            if report.pass() {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(1)
            }
        }
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
