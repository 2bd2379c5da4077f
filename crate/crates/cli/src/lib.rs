//! Command-line front end: experiment files, run and comparison outputs, and the
//! brute-force oracles used to check the library.

pub mod compare;
pub mod error;
pub mod experiment;
pub mod oracle;
pub mod output;

use std::io::Read;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};
use serde::de::DeserializeOwned;
use serde::Serialize;

pub use error::{CliError, CliResult};
pub use experiment::{Experiment, ExperimentFile};

#[derive(Debug, Parser)]
#[command(name = "flowlearn", version, about = "Active learning of turbulent flow fields with a simulated mobile sensor")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run one experiment and write its outputs.
    Run {
        #[arg(long)]
        config: PathBuf,
        /// Overrides the seed in the config.
        #[arg(long)]
        seed: Option<u64>,
        /// Overrides output.dir in the config.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run several planning metrics over many seeds and summarise the errors.
    Compare {
        #[arg(long)]
        config: PathBuf,
        /// Comma-separated list of entropy, mi, lattice.
        #[arg(long, default_value = "entropy,mi,lattice")]
        metrics: String,
        #[arg(long, default_value_t = 20)]
        seeds: u64,
        /// Step at which the summary also reports the mean error.
        #[arg(long, default_value_t = 30)]
        at: usize,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Reference values for a JSON instance read from a file or stdin.
    Oracle {
        #[command(subcommand)]
        kind: OracleKind,
    },
}

#[derive(Debug, Subcommand)]
pub enum OracleKind {
    /// Dense posterior mean and variance.
    DenseGp { input: Option<PathBuf> },
    /// Gaussian-mixture moments, closed form and sampled.
    MixtureMoments { input: Option<PathBuf> },
    /// Sampled moments of a measurement with Gaussian location error.
    SromMoments { input: Option<PathBuf> },
    /// Exhaustive best subset by joint entropy.
    SubsetEntropy { input: Option<PathBuf> },
    /// Spread of the intensity estimate over regenerated records.
    NestedBootstrap { input: Option<PathBuf> },
}

fn read_instance<T: DeserializeOwned>(input: Option<&Path>) -> CliResult<T> {
    let text = match input {
        Some(p) => std::fs::read_to_string(p).map_err(|e| CliError::Config(format!("{}: {e}", p.display())))?,
        None => {
            let mut s = String::new();
            std::io::stdin().read_to_string(&mut s).map_err(|e| CliError::Config(e.to_string()))?;
            s
        }
    };
    serde_json::from_str(&text).map_err(|e| CliError::Config(format!("malformed oracle instance: {e}")))
}

fn to_json<T: Serialize>(v: &T) -> CliResult<String> {
    serde_json::to_string_pretty(v).map_err(|e| CliError::Runtime(e.to_string()))
}

/// Execute a parsed command; returns what to print on stdout.
pub fn execute(cli: Cli) -> CliResult<String> {
    match cli.command {
        Command::Run { config, seed, out } => {
            let exp = Experiment::load(&config)?;
            let dir = exp.output_dir(out.as_deref())?;
            let mut cfg = exp.config.clone();
            if let Some(s) = seed {
                cfg.seed = s;
            }
            log::info!("running {} with seed {}", config.display(), cfg.seed);
            let log = flowlearn::orchestrator::run_experiment(&cfg).map_err(|e| match e {
                flowlearn::Error::Config { .. } => CliError::from(e),
                other => CliError::Runtime(format!("run failed: {other}")),
            })?;
            output::write_run(&dir, &log)?;
            let ev = &log.evaluation;
            Ok(format!(
                "{} measurements, converged {}, most probable model {} (p = {:.3}), e_0 = {:.4}, e_final = {:.4}\n",
                log.measurements(),
                log.converged,
                log.model_ids[log.map_model],
                log.final_probabilities[log.map_model],
                ev.e_0.e,
                ev.e_final.e
            ))
        }
        Command::Compare { config, metrics, seeds, at, out } => {
            let metrics = compare::parse_metrics(&metrics)?;
            let exp = Experiment::load(&config)?;
            let dir = exp.output_dir(out.as_deref())?;
            if seeds == 0 {
                return Err(CliError::Config("--seeds must be at least 1".into()));
            }
            let workers = compare::worker_count()?;
            let outcome = compare::run_compare(&exp.config, &metrics, seeds, at, workers)?;
            compare::write_compare(&dir, &outcome)?;
            Ok(compare::format_summary(&outcome.summary, at))
        }
        Command::Oracle { kind } => match kind {
            OracleKind::DenseGp { input } => to_json(&oracle::dense_gp(&read_instance(input.as_deref())?)?),
            OracleKind::MixtureMoments { input } => to_json(&oracle::mixture_moments(&read_instance(input.as_deref())?)?),
            OracleKind::SromMoments { input } => to_json(&oracle::srom_moments(&read_instance(input.as_deref())?)?),
            OracleKind::SubsetEntropy { input } => to_json(&oracle::subset_entropy(&read_instance(input.as_deref())?)?),
            OracleKind::NestedBootstrap { input } => to_json(&oracle::nested_bootstrap(&read_instance(input.as_deref())?)?),
        }
        .map(|s| s + "\n"),
    }
}
