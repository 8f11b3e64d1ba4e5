//! Experiment runner behind the `homopt` binary: JSON configs in, per-trial
//! CSVs and a JSON summary out.

pub mod config;
pub mod experiment;

use std::path::PathBuf;

use thiserror::Error;

pub use config::{BaseKind, Method, ObjectiveSpec, RunConfig};
pub use experiment::{execute, recompute_regret, run_experiment, write_outputs, ExperimentResult, TrialRow};

pub const EXIT_CONFIG: i32 = 1;
pub const EXIT_RUNTIME: i32 = 2;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("{message}")]
    Parse {
        line: usize,
        column: usize,
        message: String,
    },
    #[error("invalid `{field}`: {message}")]
    Invalid { field: String, message: String },
    #[error("cannot read {}: {message}", path.display())]
    Io { path: PathBuf, message: String },
}

#[derive(Debug, Error)]
pub enum CliError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Driver(#[from] homopt::DriverError),
    #[error(transparent)]
    Metrics(#[from] homopt::MetricsError),
    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => EXIT_CONFIG,
            _ => EXIT_RUNTIME,
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>) -> impl FnOnce(std::io::Error) -> CliError {
        let path = path.into();
        move |source| CliError::Io { path, source }
    }
}
