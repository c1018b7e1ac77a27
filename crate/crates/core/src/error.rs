use std::path::PathBuf;

use thiserror::Error;

/// Errors raised anywhere in the scenario pipeline.
///
/// Each variant belongs to one failure class; [`Error::exit_code`] maps the
/// class onto the frozen CLI exit-code table.
#[derive(Debug, Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("ingestion error: {0}")]
    Ingest(String),

    #[error("unknown unit {unit:?} for variable {variable:?}")]
    Unit { variable: String, unit: String },

    #[error("calibration did not converge after {iterations} iterations (residual {residual:.3e})")]
    Calibration {
        iterations: usize,
        residual: f64,
        profile: Vec<f64>,
    },

    #[error("solver failure: {reason} (iterations {iterations}, projected gradient {gradient_norm:.3e})")]
    Solver {
        reason: String,
        iterations: usize,
        gradient_norm: f64,
    },

    #[error("numeric error: {0}")]
    Numeric(String),

    #[error("range error: {0}")]
    Range(String),

    #[error("state error: {0}")]
    State(String),

    #[error("{context}: {source}")]
    Context {
        context: String,
        #[source]
        source: Box<Error>,
    },

    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("parse error: {0}")]
    Parse(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }

    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// Wraps the error with a scenario or file context.
    pub fn context(self, context: impl Into<String>) -> Self {
        Error::Context {
            context: context.into(),
            source: Box::new(self),
        }
    }

    /// Innermost error, skipping context wrappers.
    pub fn root(&self) -> &Error {
        match self {
            Error::Context { source, .. } => source.root(),
            other => other,
        }
    }

    /// Process exit code: 2 ingest, 3 calibration, 4 solver, 5 numeric, 64 usage.
    pub fn exit_code(&self) -> i32 {
        match self.root() {
            Error::Ingest(_) | Error::Unit { .. } | Error::Parse(_) => 2,
            Error::Calibration { .. } => 3,
            Error::Solver { .. } => 4,
            Error::Domain(_) | Error::Numeric(_) | Error::Range(_) | Error::State(_) => 5,
            Error::Config(_) => 64,
            Error::Io { .. } => 2,
            Error::Context { .. } => unreachable!(),
        }
    }
}
