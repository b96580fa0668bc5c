use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("{file}:{line}: {message}")]
    Parse {
        file: String,
        line: usize,
        message: String,
    },

    #[error("invalid model: {0}")]
    Invariant(String),

    #[error("{what} = {value} outside domain [{lo}, {hi}]")]
    OutOfRange {
        what: &'static str,
        value: f64,
        lo: f64,
        hi: f64,
    },

    #[error("dimension mismatch: expected {expected}, got {got}")]
    Dimension { expected: usize, got: usize },

    #[error("quasi-steady validity violation: relative along-wind velocity {0} m/s is not positive")]
    QuasiSteadyValidity(f64),

    #[error("resource limit: {0}")]
    Resource(String),

    #[error("interaction iteration did not converge at t = {t} s after {iterations} iterations (residual {residual:e})")]
    NonConvergence {
        t: f64,
        iterations: usize,
        residual: f64,
    },

    #[error("non-finite state detected at t = {0} s")]
    NonFinite(f64),

    #[error("grid mismatch: {0}")]
    GridMismatch(String),

    #[error("configuration: {}", .0.join("; "))]
    Config(Vec<String>),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{0}")]
    Analysis(String),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn parse(file: impl Into<String>, line: usize, message: impl Into<String>) -> Self {
        Error::Parse {
            file: file.into(),
            line,
            message: message.into(),
        }
    }
}
