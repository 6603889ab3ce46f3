//! Error types shared across the crate.

use thiserror::Error;

/// Errors produced by the library.
#[derive(Debug, Error)]
pub enum Error {
    /// A parameter violated its documented precondition.
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    /// An operation received an empty sample where at least one
    /// observation is required.
    #[error("empty input: {0}")]
    EmptyInput(String),

    /// A covariate split left one side without observations.
    #[error("degenerate split: the {side} side of the cutoff {cutoff} is empty")]
    DegenerateSplit { side: &'static str, cutoff: f64 },

    /// Sample moments needed by the tuning rule are degenerate.
    #[error("degenerate moments: {0}")]
    DegenerateMoments(String),

    /// The requested statistic is undefined on the given sample.
    #[error("undefined statistic: {0}")]
    UndefinedStatistic(String),

    /// The problem size exceeds what the requested method supports.
    #[error("unsupported size: {0}")]
    UnsupportedSize(String),

    /// A CSV row could not be parsed. Line numbers are 1-based and
    /// include the header.
    #[error("parse error at line {line}: {msg}")]
    Parse { line: u64, msg: String },

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),

    /// An error from a per-target computation, with the target attached.
    #[error("at target {target}: {source}")]
    AtTarget {
        target: f64,
        #[source]
        source: Box<Error>,
    },
}

impl Error {
    pub(crate) fn at_target(self, target: f64) -> Error {
        Error::AtTarget {
            target,
            source: Box::new(self),
        }
    }

    /// Clone preserving the variant for the data-free kinds; wrapper kinds
    /// (io, csv, json) collapse to their message.
    pub(crate) fn clone_shallow(&self) -> Error {
        match self {
            Error::InvalidParameter(s) => Error::InvalidParameter(s.clone()),
            Error::EmptyInput(s) => Error::EmptyInput(s.clone()),
            Error::DegenerateSplit { side, cutoff } => Error::DegenerateSplit {
                side,
                cutoff: *cutoff,
            },
            Error::DegenerateMoments(s) => Error::DegenerateMoments(s.clone()),
            Error::UndefinedStatistic(s) => Error::UndefinedStatistic(s.clone()),
            Error::UnsupportedSize(s) => Error::UnsupportedSize(s.clone()),
            Error::Parse { line, msg } => Error::Parse {
                line: *line,
                msg: msg.clone(),
            },
            Error::AtTarget { target, source } => Error::AtTarget {
                target: *target,
                source: Box::new(source.clone_shallow()),
            },
            other => Error::InvalidParameter(other.to_string()),
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
