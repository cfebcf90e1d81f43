use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Errors surfaced by every pipeline stage.
///
/// Each variant maps to a stable machine-readable code (see [`Error::code`])
/// that the CLI prints on failure and the annotation API puts in error bodies.
#[derive(Debug, Error)]
pub enum Error {
    #[error("io error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("ingest error: {0}")]
    Ingest(String),

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("undefined: {0}")]
    Undefined(String),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("size error: {0}")]
    Size(String),

    #[error("parameter error: {0}")]
    Parameter(String),

    #[error("not found: {0}")]
    NotFound(String),

    #[error("permission denied: {0}")]
    Permission(String),

    #[error("conflict: {0}")]
    Conflict(String),

    #[error("integrity error: {0}")]
    Integrity(String),

    #[error("stratification error: {0}")]
    Stratification(String),

    #[error("degenerate training data: {0}")]
    DegenerateTraining(String),

    #[error("training diverged at iteration {iteration}: loss is {loss}")]
    Divergence { iteration: usize, loss: f64 },

    #[error("transport error: {0}")]
    Transport(String),

    #[error("authentication failed: {0}")]
    Auth(String),

    #[error("forbidden: {0}")]
    Forbidden(String),

    #[error("invalid state: {0}")]
    State(String),

    #[error("format error: {0}")]
    Format(String),

    #[error("config error: {0}")]
    Config(String),
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// Stable snake_case code used in CLI error lines and HTTP error bodies.
    pub fn code(&self) -> &'static str {
        match self {
            Error::Io { .. } => "io",
            Error::Ingest(_) => "ingest",
            Error::Dimension(_) => "dimension",
            Error::Undefined(_) => "undefined",
            Error::Domain(_) => "domain",
            Error::Size(_) => "size",
            Error::Parameter(_) => "parameter",
            Error::NotFound(_) => "not_found",
            Error::Permission(_) => "permission",
            Error::Conflict(_) => "conflict",
            Error::Integrity(_) => "integrity",
            Error::Stratification(_) => "stratification",
            Error::DegenerateTraining(_) => "degenerate_training",
            Error::Divergence { .. } => "divergence",
            Error::Transport(_) => "transport",
            Error::Auth(_) => "auth",
            Error::Forbidden(_) => "forbidden",
            Error::State(_) => "state",
            Error::Format(_) => "format",
            Error::Config(_) => "config",
        }
    }
}

impl From<serde_json::Error> for Error {
    fn from(e: serde_json::Error) -> Self {
        Error::Format(e.to_string())
    }
}
