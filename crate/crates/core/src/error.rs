use std::path::PathBuf;

use thiserror::Error;

/// Errors produced anywhere in the pipeline.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    Parameter(String),

    #[error("resource limit: {0}")]
    Resource(String),

    #[error("eigensolver did not converge after {iterations} iterations; residuals {residuals:?}")]
    NoConvergence {
        iterations: usize,
        residuals: Vec<f64>,
    },

    #[error("propagation failed at t = {time}: {reason}")]
    Propagation { time: f64, reason: String },

    #[error("checkpoint {path} does not match the configuration (expected key {expected}, found {found}); rerun `diagonalize`")]
    StaleCheckpoint {
        path: PathBuf,
        expected: String,
        found: String,
    },

    #[error("malformed input {what}: {reason}")]
    Format { what: String, reason: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn param(msg: impl Into<String>) -> Self {
        Error::Parameter(msg.into())
    }

    /// Process exit code for the command-line front end.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Parameter(_) | Error::Format { .. } => 2,
            Error::Resource(_) | Error::NoConvergence { .. } | Error::Propagation { .. } => 3,
            Error::StaleCheckpoint { .. } => 4,
            Error::Io(_) | Error::Json(_) => 1,
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
