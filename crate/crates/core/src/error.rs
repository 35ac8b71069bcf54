use std::path::PathBuf;

use thiserror::Error;

/// Errors raised by the model, simulation, learning and harness layers.
#[derive(Debug, Error)]
pub enum Error {
    #[error("sum of D_j D_j^T is not positive definite (smallest eigenvalue {min_eigenvalue:e})")]
    NotPositiveDefinite { min_eigenvalue: f64 },

    #[error("weight {name} must be non-negative, got {value}")]
    NegativeWeight { name: &'static str, value: f64 },

    #[error("horizon T must be positive and finite, got {0}")]
    BadHorizon(f64),

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("c_gamma = {c_gamma} must exceed the largest eigenvalue {lambda_max} of sum D_j D_j^T")]
    BadCGamma { c_gamma: f64, lambda_max: f64 },

    #[error("covariance matrix is not numerically positive definite")]
    CholeskyFail,

    #[error("non-finite value encountered at step {step}")]
    NonFinite { step: usize },

    #[error("regression design is rank deficient")]
    SingularRegression,

    #[error("log-log fit is degenerate: {0}")]
    DegenerateFit(&'static str),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("all {0} runs failed")]
    AllRunsFailed(usize),

    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
