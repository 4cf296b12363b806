//! File-based pipeline: sample, register, train, embed, evaluate, match.
//!
//! Every command reads and writes plain files so stages can be re-run
//! independently. Seeds derive from one global seed by stage name.

mod commands;
mod config;
mod manifest;
mod samples;

use thiserror::Error;

use crate::evaluation::EvalError;
use crate::experiment::ExperimentError;
use crate::geometry::GeometryError;
use crate::network::NetworkError;
use crate::registration::RegistrationError;
use crate::viewselect::ViewError;

pub use commands::{
    cmd_embed, cmd_evaluate, load_model, cmd_match, cmd_register, cmd_sample, cmd_toy, cmd_train, EmbedInputs, PairSpec, RegisterSummary,
    TrainSummary,
};
pub use config::{EvalOptions, PipelineConfig};
pub use manifest::{Manifest, ManifestEntry};
pub use samples::{read_samples, write_samples};

#[derive(Debug, Error)]
pub enum PipelineError {
    /// Bad or missing input (exit code 1).
    #[error("{0}")]
    Input(String),
    #[error("config: {0}")]
    Config(String),
    /// NaN or infinity during computation (exit code 2).
    #[error("numerical failure: {0}")]
    Numerical(String),
}

impl PipelineError {
    pub fn exit_code(&self) -> i32 {
        match self {
            PipelineError::Numerical(_) => 2,
            _ => 1,
        }
    }
}

impl From<std::io::Error> for PipelineError {
    fn from(e: std::io::Error) -> Self {
        PipelineError::Input(e.to_string())
    }
}

impl From<GeometryError> for PipelineError {
    fn from(e: GeometryError) -> Self {
        PipelineError::Input(e.to_string())
    }
}

impl From<ViewError> for PipelineError {
    fn from(e: ViewError) -> Self {
        match e {
            ViewError::InvalidConfig(m) => PipelineError::Config(m),
            e => PipelineError::Input(e.to_string()),
        }
    }
}

impl From<NetworkError> for PipelineError {
    fn from(e: NetworkError) -> Self {
        match e {
            NetworkError::NonFinite { .. } => PipelineError::Numerical(e.to_string()),
            NetworkError::Config(m) => PipelineError::Config(m),
            NetworkError::View(v) => v.into(),
            e => PipelineError::Input(e.to_string()),
        }
    }
}

impl From<RegistrationError> for PipelineError {
    fn from(e: RegistrationError) -> Self {
        match e {
            RegistrationError::NonFinite(_) => PipelineError::Numerical(e.to_string()),
            e => PipelineError::Input(e.to_string()),
        }
    }
}

impl From<EvalError> for PipelineError {
    fn from(e: EvalError) -> Self {
        PipelineError::Input(e.to_string())
    }
}

impl From<ExperimentError> for PipelineError {
    fn from(e: ExperimentError) -> Self {
        match e {
            ExperimentError::Geometry(e) => e.into(),
            ExperimentError::View(e) => e.into(),
            ExperimentError::Registration(e) => e.into(),
            ExperimentError::Network(e) => e.into(),
            ExperimentError::Eval(e) => e.into(),
        }
    }
}
