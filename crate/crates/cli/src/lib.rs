//! Scenario-driven front end to `esdyn-core`: JSON configs in, CSV and JSON
//! results out.

pub mod commands;
pub mod config;

use std::path::PathBuf;

use clap::{Parser, Subcommand};

pub use commands::{cmd_catalog, cmd_classify, cmd_fates, cmd_simulate, CliError};
pub use config::{ConfigError, Overrides, ScenarioConfig};

#[derive(Debug, Parser)]
#[command(name = "esdyn", version, about = "Entanglement fates and asymptotic classes of two-qubit Lindblad dynamics")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    /// Scenario config (JSON).
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Output directory; overrides `output.directory`.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Seed; overrides `run.seed` and `ensemble.seed`.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Worker threads for ensemble runs.
    #[arg(long, global = true)]
    pub workers: Option<usize>,
}

#[derive(Debug, Clone, Copy, Subcommand)]
pub enum Command {
    /// Propagate one initial state and detect its fate.
    Simulate,
    /// Compute the asymptotic set and its theorem class.
    Classify,
    /// Fate proportions over an ensemble of initial states.
    Fates,
    /// List the six catalog generators and write their configs.
    Catalog,
}

fn load(cli: &Cli) -> Result<ScenarioConfig, CliError> {
    let path = cli.config.as_ref().ok_or_else(|| ConfigError::new("--config", "required by this command"))?;
    let overrides = Overrides { seed: cli.seed, out: cli.out.clone() };
    Ok(ScenarioConfig::load(path)?.resolve(&overrides)?)
}

/// Run a parsed command line; returns the process exit status.
pub fn run(cli: &Cli) -> i32 {
    if cli.workers == Some(0) {
        eprintln!("error: ConfigError: --workers: must be at least 1");
        return 2;
    }
    let result = match cli.command {
        Command::Catalog => cmd_catalog(cli.out.as_deref()).map(|_| ()),
        Command::Simulate => load(cli).and_then(|c| cmd_simulate(&c)),
        Command::Classify => load(cli).and_then(|c| cmd_classify(&c).map(|_| ())),
        Command::Fates => load(cli).and_then(|c| cmd_fates(&c, cli.workers).map(|_| ())),
    };
    match result {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
