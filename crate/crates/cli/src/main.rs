use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Context;
use clap::{Parser, Subcommand};
use grade2::config::{parse_config, RunConfig};
use grade2::par::init_threads_from_env;
use grade2::runner::{run, Command, Overrides};

/// Stochastic second-grade fluid on the unit disk: Galerkin simulation and
/// verification experiments.
#[derive(Parser, Debug)]
#[command(name = "grade2", version)]
struct Cli {
    #[command(subcommand)]
    command: Cmd,

    /// JSON run configuration; defaults apply to every omitted key.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Output directory (overrides `output.directory`).
    #[arg(long, global = true)]
    out: Option<PathBuf>,

    /// Base seed (overrides `ensemble.base_seed`).
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Number of paths (overrides `ensemble.paths`).
    #[arg(long, global = true)]
    paths: Option<usize>,

    /// Suppress the summary on stdout.
    #[arg(long, global = true)]
    quiet: bool,
}

#[derive(Subcommand, Debug, Clone, Copy)]
enum Cmd {
    /// Build (or load) the Galerkin eigenbasis and write its spectrum.
    Basis,
    /// Simulate individual paths and write their ledgers as CSV.
    Simulate,
    /// Monte Carlo ensemble with observed constants of the a priori estimates.
    Ensemble,
    /// Paired-path stability scaling in the perturbation size.
    Stability,
    /// Self-convergence of nested Galerkin truncations.
    Converge,
    /// Identity checks and observed-constant probes.
    Verify,
}

impl From<Cmd> for Command {
    fn from(c: Cmd) -> Self {
        match c {
            Cmd::Basis => Command::Basis,
            Cmd::Simulate => Command::Simulate,
            Cmd::Ensemble => Command::Ensemble,
            Cmd::Stability => Command::Stability,
            Cmd::Converge => Command::Converge,
            Cmd::Verify => Command::Verify,
        }
    }
}

fn load(cli: &Cli) -> anyhow::Result<RunConfig> {
    let text = match &cli.config {
        Some(p) => std::fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?,
        None => "{}".to_string(),
    };
    let cfg = parse_config(&text)?;
    let overrides = Overrides {
        seed: cli.seed,
        paths: cli.paths,
        out: cli.out.clone(),
    };
    Ok(overrides.apply(&cfg)?)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    init_threads_from_env();
    let result = load(&cli).and_then(|cfg| Ok(run(cli.command.into(), &cfg)?));
    match result {
        Ok(outcome) => {
            if !cli.quiet {
                println!("{}", outcome.summary);
                println!("wrote {}", outcome.manifest.config.output.directory.display());
            }
            if outcome.manifest.success {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(1)
            }
        }
        Err(e) => {
            eprintln!("grade2: {e:#}");
            ExitCode::from(2)
        }
    }
}
