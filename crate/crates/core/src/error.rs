use std::path::PathBuf;

use thiserror::Error;

/// Errors produced by every module of the crate.
#[derive(Debug, Error)]
pub enum Error {
    #[error("node {0} has zero degree; the normalized Laplacian is undefined")]
    ZeroDegreeNode(usize),

    #[error("invalid graph: {0}")]
    InvalidGraph(String),

    #[error("format error at line {line}: {msg}")]
    Format { line: usize, msg: String },

    #[error("invalid specification: {0}")]
    Spec(String),

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("camera centers coincide; the epipolar constraint is vacuous")]
    DegenerateBaseline,

    #[error("forward cache does not match the current model or input: {0}")]
    StaleCache(String),

    #[error("eigensolver did not meet its residual tolerance ({residual:.3e} > {tolerance:.3e})")]
    ConvergenceFailure { residual: f64, tolerance: f64 },

    #[error("normal equations are singular; increase the ridge parameter")]
    SingularSystem,

    #[error("Sinkhorn projection did not reach tolerance after {sweeps} sweeps (max deviation {deviation:.3e})")]
    SinkhornNoConverge { sweeps: usize, deviation: f64 },

    #[error("non-finite loss at training step {step}")]
    NonFiniteLoss { step: usize },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl Error {
    pub(crate) fn format(line: usize, msg: impl Into<String>) -> Self {
        Error::Format {
            line,
            msg: msg.into(),
        }
    }

    pub(crate) fn dims(msg: impl Into<String>) -> Self {
        Error::DimensionMismatch(msg.into())
    }
}
