//! Benchmark harness: synthetic data, cross-validated episodes, metrics and
//! reports.

mod config;
mod dataset;
mod folds;
mod metrics;
pub mod report;
mod runner;
mod synthetic;

use std::path::{Path, PathBuf};

use thiserror::Error;

pub use config::{DataSource, ExperimentConfig, CONFIG_VERSION};
pub use dataset::{Dataset, Standardization};
pub use folds::{derive_seed, make_folds, order_instances, Fold, StreamOrder};
pub use metrics::{aggregate, macro_f1, mean_se, AggregateRow, EpisodeSummary, MetricsRow};
pub use report::{emit_report, ReportFiles};
pub use runner::{run_experiment, run_experiment_in, EpisodeFailure, EpisodeKey, EpisodeResult, ExperimentOutcome};
pub use synthetic::{generate_synthetic, CenterPlacement, SyntheticSpec};

use crate::kernels::KernelError;

#[derive(Debug, Error)]
pub enum ExperimentError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error(transparent)]
    Toml(#[from] toml::de::Error),
    #[error(transparent)]
    Kernel(#[from] KernelError),
    #[error("label column `{0}` not found")]
    MissingLabelColumn(String),
    #[error("row {row}, column `{column}`: `{value}` is not a finite number")]
    NonNumeric { row: usize, column: String, value: String },
    #[error("no data")]
    EmptyData,
}

impl ExperimentError {
    pub(crate) fn io(path: &Path, source: std::io::Error) -> Self {
        ExperimentError::Io {
            path: path.to_owned(),
            source,
        }
    }
}

impl From<std::io::Error> for ExperimentError {
    fn from(source: std::io::Error) -> Self {
        ExperimentError::Io {
            path: PathBuf::new(),
            source,
        }
    }
}
