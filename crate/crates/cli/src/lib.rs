//! Command-line experiments built on `uqkit`.
//!
//! Every subcommand resolves a JSON-serializable config (defaults, then an
//! optional `--config` file, then flags), runs, and writes its CSV/SVG
//! artifacts plus a `manifest.json` holding the resolved config. Feeding that
//! manifest back through `--config` reproduces the CSV outputs byte for byte.

pub mod commands;
pub mod config;
pub mod output;
pub mod svg;

use std::path::PathBuf;

use anyhow::{Context, Result};
use clap::{Parser, Subcommand};

pub use config::{CommonArgs, RunConfig};

#[derive(Debug, Parser)]
#[command(
    name = "uqkit",
    version,
    about = "Uncertainty quantification experiments"
)]
pub struct Cli {
    /// Worker threads for parallel sections; outputs do not depend on it.
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Least-squares prediction intervals on synthetic scenarios or a CSV.
    Ols(commands::ols::OlsArgs),
    /// Random forest entropy decomposition and accuracy-rejection curves.
    ForestUq(commands::forest_uq::ForestUqArgs),
    /// Monte Carlo dropout regression with RMSE-rejection curves.
    Bnn(commands::bnn::BnnArgs),
    /// Split conformal prediction sets from a random forest.
    Conformal(commands::conformal::ConformalArgs),
    /// Write a synthetic dataset as CSV.
    Synth(commands::synth::SynthArgs),
    /// Download the covertype table and convert it to CSV.
    FetchCovertype(commands::fetch::FetchArgs),
}

/// Runs one subcommand and returns its output directory.
pub fn run(cli: Cli) -> Result<PathBuf> {
    match cli.threads {
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .context("building thread pool")?
            .install(|| dispatch(cli.command)),
        None => dispatch(cli.command),
    }
}

fn dispatch(command: Command) -> Result<PathBuf> {
    match command {
        Command::Ols(args) => commands::ols::run(args),
        Command::ForestUq(args) => commands::forest_uq::run(args),
        Command::Bnn(args) => commands::bnn::run(args),
        Command::Conformal(args) => commands::conformal::run(args),
        Command::Synth(args) => commands::synth::run(args),
        Command::FetchCovertype(args) => commands::fetch::run(args),
    }
}
