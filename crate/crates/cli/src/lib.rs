//! Pipeline runner for the `sobolev-trace` toolkit: experiment configs, the
//! scalar and jet extension pipelines, and the batch verification suite.

pub mod config;
pub mod fixtures;
pub mod pipeline;
pub mod suite;

use thiserror::Error;

pub use config::{load_experiment, Data, Experiment, ExperimentConfig, Overrides, Provenance};
pub use pipeline::{run_jet_pipeline, run_l1p_pipeline, PipelineResult, PipelineSummary};
pub use suite::{run_verification_suite, Status, SuiteOptions, SuiteReport, SuiteRow};

#[derive(Debug, Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(String),

    #[error(transparent)]
    Core(#[from] sobolev_trace::Error),

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),

    #[error("{0}")]
    Failed(String),
}

impl CliError {
    /// 2 for configuration errors, 1 otherwise.
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Config(_) => 2,
            _ => 1,
        }
    }
}
