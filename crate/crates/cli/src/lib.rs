//! The `isgp` command line: `generate`, `run`, `report` and `session`.

pub mod commands;
pub mod server;

use std::net::SocketAddr;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use isgp::experiment::StreamOrder;
use isgp::PolicyKind;

#[derive(Debug, Parser)]
#[command(name = "isgp", version, about = "Incremental skeptical Gaussian processes")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Write a synthetic dataset as CSV.
    Generate(GenerateArgs),
    /// Run an experiment and write result tables.
    Run(RunArgs),
    /// Draw figures and summary tables from a results directory.
    Report(ReportArgs),
    /// Serve live annotation sessions over HTTP.
    Session(SessionArgs),
}

/// Flags that override fields of the experiment config.
#[derive(Debug, Default, Clone, Args)]
pub struct Overrides {
    /// Experiment config (TOML). Defaults apply when omitted.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Replace the seed list (run) or the data seed (generate).
    #[arg(long)]
    pub seed: Option<u64>,
    /// Comma-separated policies: isgp, gp_never, gp_always.
    #[arg(long, value_delimiter = ',')]
    pub policies: Option<Vec<PolicyKind>>,
    /// Annotator noise rate.
    #[arg(long)]
    pub eta: Option<f64>,
    /// random_shuffle or sequential_clusters.
    #[arg(long)]
    pub ordering: Option<StreamOrder>,
    #[arg(long)]
    pub folds: Option<usize>,
}

#[derive(Debug, Clone, Args)]
pub struct GenerateArgs {
    #[command(flatten)]
    pub overrides: Overrides,
    /// Output CSV file.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Args)]
pub struct RunArgs {
    #[command(flatten)]
    pub overrides: Overrides,
    /// Output directory.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Args)]
pub struct ReportArgs {
    /// Directory written by `run`.
    pub results: PathBuf,
    /// Where to put figures; defaults to the results directory.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct SessionArgs {
    /// Directory holding persisted sessions.
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value = "127.0.0.1:7878")]
    pub addr: SocketAddr,
}
