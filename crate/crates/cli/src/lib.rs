//! Experiment runner: configuration, the experiment registry and reports.

pub mod config;
pub mod experiments;
pub mod report;

pub use config::ExperimentConfig;
pub use report::{ExperimentReport, Measurement, SuiteReport, Table};

/// Errors of the runner.
#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("configuration: {0}")]
    Config(String),
    #[error(transparent)]
    Core(#[from] wavetile::Error),
    #[error("i/o: {0}")]
    Io(#[from] std::io::Error),
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, CliError>;
