//! Command-line surface: `sample`, `track`, `anneal`, `predict`,
//! `diagnose`. Every stochastic output carries its seed in a `#` header
//! line or JSON field, and identical config + seed produces byte-identical
//! files.

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

pub mod commands;
pub mod config;

#[derive(Parser, Debug)]
#[command(name = "dikin", version, about = "Dikin-walk sampling and tracking of log-concave targets")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Run one or more fixed-target chains and write the visited points.
    Sample(SampleArgs),
    /// Track a streaming posterior or drifting target from a center/data stream.
    Track(TrackArgs),
    /// Minimize a linear objective by simulated annealing.
    Anneal(AnnealArgs),
    /// Play the sampling forecaster against a loss stream.
    Predict(PredictArgs),
    /// Run the geometry and reversibility property checks.
    Diagnose(DiagnoseArgs),
}

#[derive(Args, Debug)]
pub struct CommonArgs {
    /// Run configuration (TOML).
    #[arg(long)]
    pub config: PathBuf,
    /// RNG seed; overrides the config. One of the two must be present.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Tracker constant C; overrides the config.
    #[arg(long = "constant-C")]
    pub constant_c: Option<f64>,
}

#[derive(Args, Debug)]
pub struct SampleArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    /// Walk steps per chain; overrides the config.
    #[arg(long)]
    pub steps: Option<u64>,
    /// Samples CSV destination.
    #[arg(long, default_value = "samples.csv")]
    pub out: PathBuf,
    /// Number of independent chains (distinct RNG streams under one seed).
    #[arg(long, default_value_t = 1)]
    pub chains: u64,
    /// Worker threads for multi-chain runs.
    #[arg(long, default_value_t = 1)]
    pub workers: usize,
    /// Plot-data CSV of total variation against step count (1D/2D bodies).
    #[arg(long)]
    pub curve: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct TrackArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    /// Stream of observations/centers, one CSV line per round (`-` = stdin).
    #[arg(long)]
    pub stream: String,
    /// Per-round sample CSV destination (omit to skip sample output).
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Round-report JSONL destination (default: stdout).
    #[arg(long)]
    pub report: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct AnnealArgs {
    #[command(flatten)]
    pub common: CommonArgs,
}

#[derive(Args, Debug)]
pub struct PredictArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    /// Stream of loss vectors, one CSV line per round (`-` = stdin).
    #[arg(long)]
    pub stream: String,
    /// Per-round decision CSV destination (omit to skip).
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Plot-data CSV of cumulative regret against round count (1D/2D bodies).
    #[arg(long)]
    pub curve: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct DiagnoseArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    /// Trials per property check.
    #[arg(long, default_value_t = 1_000)]
    pub trials: usize,
}

pub fn run(cli: Cli) -> anyhow::Result<()> {
    match cli.command {
        Command::Sample(args) => commands::sample(args),
        Command::Track(args) => commands::track(args),
        Command::Anneal(args) => commands::anneal(args),
        Command::Predict(args) => commands::predict(args),
        Command::Diagnose(args) => commands::diagnose(args),
    }
}
