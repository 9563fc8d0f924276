//! Experiment runner for `noma-sec`: parses a TOML experiment file, runs the
//! solvers over seeds and task sizes, and writes one CSV plus a manifest per
//! subcommand.

pub mod checks;
pub mod commands;
pub mod config;
pub mod table;

use std::path::PathBuf;

use clap::{Parser, Subcommand};

use crate::commands::{EXIT_FAILURE, EXIT_USAGE};
use crate::config::{parse_seeds, ExperimentConfig};

#[derive(Debug, Parser)]
#[command(
    name = "noma-sec",
    version,
    about = "Secure NOMA offloading experiments"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    /// Experiment file (TOML); defaults apply to every missing key.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Output directory, overriding `output.dir`.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Seeds as `a..b` or `0,1,2`; replaces the seed list the command uses.
    #[arg(long, global = true)]
    pub seeds: Option<String>,
    /// Worker threads (default: all cores).
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    /// Monte-Carlo samples per estimate, overriding `oracle.mc_samples`.
    #[arg(long, global = true)]
    pub mc_samples: Option<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Subcommand)]
pub enum Command {
    /// Solve every (seed, task size, scheme) cell of the sweep.
    Run,
    /// Per-iteration traces of the proposed scheme.
    Convergence,
    /// Run the oracle suite and report pass/fail with margins.
    Validate,
    /// Brute-force grid and Monte-Carlo comparison on small instances.
    Oracle,
}

/// Loads the config and applies command-line overrides.
pub fn resolve(cli: &Cli) -> Result<ExperimentConfig, String> {
    let mut cfg = match &cli.config {
        Some(path) => ExperimentConfig::load(path).map_err(|e| e.to_string())?,
        None => ExperimentConfig::default(),
    };
    if let Some(dir) = &cli.out {
        cfg.output.dir = dir.clone();
    }
    if let Some(n) = cli.mc_samples {
        cfg.oracle.mc_samples = n;
    }
    if let Some(s) = &cli.seeds {
        let seeds = parse_seeds(s).map_err(|e| format!("--seeds: {e}"))?;
        match cli.command {
            Command::Run => cfg.sweep.seeds = seeds,
            Command::Convergence => cfg.convergence.seed = seeds[0],
            Command::Validate | Command::Oracle => cfg.oracle.grid_seeds = seeds,
        }
    }
    cfg.validate().map_err(|e| e.to_string())?;
    Ok(cfg)
}

pub fn execute(cli: &Cli) -> u8 {
    let cfg = match resolve(cli) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: {e}");
            return EXIT_USAGE;
        }
    };
    if let Some(n) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
        {
            eprintln!("error: --threads: {e}");
            return EXIT_FAILURE;
        }
    }
    match cli.command {
        Command::Run => commands::run(&cfg),
        Command::Convergence => commands::convergence(&cfg),
        Command::Validate => commands::validate(&cfg),
        Command::Oracle => commands::oracle(&cfg),
    }
}
