//! Experiment harness: TOML-configured sweeps over sketch families and sizes,
//! written as reproducible CSV files.

pub mod config;
pub mod plot;
pub mod run;
pub mod table;

use std::path::PathBuf;

pub use config::{Experiment, ExperimentConfig};
pub use plot::emit_plot_data;
pub use run::{run_experiment, Report};
pub use table::{ResultRow, ResultTable, RowKey};

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("config error at `{field}`: {msg}")]
    Config { field: String, msg: String },
    #[error("dataset not found: {}", .0.display())]
    DatasetNotFound(PathBuf),
    #[error("unknown experiment `{0}`")]
    UnknownExperiment(String),
    #[error("no data to plot for `{0}`")]
    EmptySeries(String),
    #[error("invalid result table: {0}")]
    Table(String),
    #[error(transparent)]
    Core(#[from] sketchrate::Error),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

impl CliError {
    /// 1 for configuration problems, 2 for failures while running.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config { .. } | CliError::DatasetNotFound(_) | CliError::UnknownExperiment(_) => 1,
            _ => 2,
        }
    }
}
