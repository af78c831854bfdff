use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid domain: lo = {lo}, hi = {hi} (need lo < hi)")]
    InvalidDomain { lo: f64, hi: f64 },

    #[error("invalid size: {0}")]
    InvalidSize(String),

    #[error("index {index} out of range (len {len})")]
    IndexOutOfRange { index: usize, len: usize },

    #[error("non-finite input: {0}")]
    NonFinite(String),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("parameter vector length mismatch: expected {expected}, got {got}")]
    LengthMismatch { expected: usize, got: usize },

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("structural failure: {0}")]
    Structural(String),

    #[error("degenerate channel `{0}`: zero standard deviation")]
    DegenerateChannel(String),

    #[error("channel `{0}` missing from normalization stats")]
    MissingChannel(String),

    #[error("degenerate fit: {0}")]
    DegenerateFit(String),

    #[error("domain error in `{node}`: {detail}")]
    Domain { node: String, detail: String },

    #[error("all candidates infeasible")]
    InfeasibleCandidates,

    #[error("invalid scenario: {0}")]
    InvalidScenario(String),

    #[error("invalid config: {0}")]
    InvalidConfig(String),

    #[error("{path}: line {line}: {message}")]
    Parse {
        path: PathBuf,
        line: u64,
        message: String,
    },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn parse(path: impl Into<PathBuf>, line: u64, message: impl Into<String>) -> Self {
        Error::Parse {
            path: path.into(),
            line,
            message: message.into(),
        }
    }

    /// True for failures caused by bad input (files, flags, schemas) rather
    /// than by the numerics. The CLI maps these to exit code 2.
    pub fn is_input_error(&self) -> bool {
        matches!(
            self,
            Error::Parse { .. }
                | Error::Io { .. }
                | Error::InvalidConfig(_)
                | Error::InvalidScenario(_)
                | Error::MissingChannel(_)
                | Error::DimensionMismatch { .. }
        )
    }
}
