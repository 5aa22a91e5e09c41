use std::path::PathBuf;

use thiserror::Error;

/// Errors raised by the numerical and data layers.
#[derive(Debug, Error)]
pub enum BfmError {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("invalid parameter `{name}` = {value}: {reason}")]
    InvalidParameter {
        name: &'static str,
        value: f64,
        reason: &'static str,
    },

    #[error("configuration error: {0}")]
    Config(String),

    #[error("no convergence after {iterations} iterations: {detail}")]
    Convergence { iterations: usize, detail: String },

    #[error("quadrature did not reach tolerance (value {value}, error estimate {error})")]
    Quadrature { value: f64, error: f64 },

    #[error("singular Hessian (condition number {condition:e})")]
    SingularHessian { condition: f64 },

    #[error("parse error at line {line}, column {column}: {reason}")]
    Parse { line: usize, column: usize, reason: String },

    #[error("validation error: {0}")]
    Validation(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

pub type Result<T> = std::result::Result<T, BfmError>;

pub(crate) fn domain<T>(msg: impl Into<String>) -> Result<T> {
    Err(BfmError::Domain(msg.into()))
}
