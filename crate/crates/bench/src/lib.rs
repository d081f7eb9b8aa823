//! Experiment harness for `delta-aqm`: scenario files, target calibration,
//! CoDel tuning, parallel suite execution and CSV reports.

pub mod calibrate;
pub mod config;
pub mod dataset_io;
pub mod report;
pub mod runner;
pub mod tune;

use std::path::Path;

use thiserror::Error;

pub use calibrate::{calibrate_targets, nearest_rank, required_packets, Calibrator};
pub use config::{AqmSpec, GammaParams, ScenarioConfig, SearchKind, Suite, TargetSpec};
pub use report::{BenchReport, Row, RowError};
pub use runner::{run_benchmark, RunOptions, Runner};
pub use tune::{default_grid, tune_codel};

/// Errors carry owned text so cached results can be shared across threads.
#[derive(Clone, Debug, Error, PartialEq)]
pub enum BenchError {
    #[error("config: {field}: {reason}")]
    Config { field: String, reason: String },
    #[error("parse: {0}")]
    Parse(String),
    #[error("io: {0}")]
    Io(String),
    #[error("model: {path}: {reason}")]
    Model { path: String, reason: String },
    #[error("calibration: quantile {quantile} needs m >= {required}, got m = {m}")]
    TooFewPackets { quantile: f64, m: u64, required: u64 },
    #[error("fit: {0}")]
    Fit(String),
}

impl BenchError {
    pub fn io(path: &Path, e: std::io::Error) -> Self {
        BenchError::Io(format!("{}: {e}", path.display()))
    }

    /// Prefixes a config field with the scenario it belongs to.
    pub fn in_scenario(self, id: &str) -> Self {
        match self {
            BenchError::Config { field, reason } => BenchError::Config {
                field: format!("scenario[{id}].{field}"),
                reason,
            },
            other => other,
        }
    }

    /// Short machine-readable category.
    pub fn kind(&self) -> &'static str {
        match self {
            BenchError::Config { .. } => "config",
            BenchError::Parse(_) => "parse",
            BenchError::Io(_) => "io",
            BenchError::Model { .. } => "model",
            BenchError::TooFewPackets { .. } => "calibration",
            BenchError::Fit(_) => "fit",
        }
    }
}

impl From<delta_aqm::ConfigError> for BenchError {
    fn from(e: delta_aqm::ConfigError) -> Self {
        BenchError::Config {
            field: e.field.to_string(),
            reason: e.reason.clone(),
        }
    }
}

impl From<csv::Error> for BenchError {
    fn from(e: csv::Error) -> Self {
        BenchError::Parse(e.to_string())
    }
}

impl From<delta_aqm::FitError> for BenchError {
    fn from(e: delta_aqm::FitError) -> Self {
        BenchError::Fit(e.to_string())
    }
}
