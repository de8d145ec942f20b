use std::io;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("i/o error: {0}")]
    Io(#[from] io::Error),

    #[error("line {line}: {msg}")]
    Format { line: usize, msg: String },

    #[error("line {line}: timestamp {found} precedes previous timestamp {previous}")]
    NonMonotoneTimestamp { line: usize, previous: f64, found: f64 },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("location index {index} out of range for {n} locations")]
    LocationOutOfRange { index: usize, n: usize },

    #[error("locations {0} and {1} are not neighbors")]
    NotAdjacent(usize, usize),

    #[error("length mismatch: expected {expected}, found {found}")]
    LengthMismatch { expected: usize, found: usize },

    #[error("frame at t={0} has no reading for any usable stream")]
    NoUsableReadings(f64),

    #[error("exhaustive search limited to {max} locations, got {n}")]
    TooManyLocations { n: usize, max: usize },

    #[error("unsupported fingerprint format version {found} (expected {expected})")]
    Version { found: u16, expected: u16 },

    #[error("corrupt fingerprint file: {0}")]
    Corrupt(String),

    #[error("timestamp mismatch: estimate at t={estimate}, ground truth at t={truth}")]
    TimestampMismatch { estimate: f64, truth: f64 },

    #[error("{stage}: {source}")]
    Stage {
        stage: &'static str,
        #[source]
        source: Box<Error>,
    },
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }

    pub(crate) fn format(line: usize, msg: impl Into<String>) -> Self {
        Error::Format { line, msg: msg.into() }
    }

    /// Wraps the error with the pipeline stage it came from.
    pub fn in_stage(self, stage: &'static str) -> Self {
        Error::Stage {
            stage,
            source: Box::new(self),
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
