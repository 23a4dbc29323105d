use thiserror::Error;

/// Errors raised by the swarm-control library.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("{what}: matrix is not symmetric positive-definite")]
    NotPositiveDefinite { what: String },

    #[error("{what}: matrix is not symmetric (|a_ij - a_ji| = {deviation:e})")]
    NotSymmetric { what: String, deviation: f64 },

    #[error("{what}: dimension mismatch (expected {expected}, found {found})")]
    DimensionMismatch {
        what: String,
        expected: usize,
        found: usize,
    },

    #[error("invalid parameter {name}: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("mixture is empty")]
    EmptyMixture,

    #[error("{what}: mixture has zero norm")]
    ZeroNorm { what: &'static str },

    #[error("index {index} out of range for {len} components")]
    IndexOutOfRange { index: usize, len: usize },

    #[error("measurement {index}: update denominator vanished (no clutter and no predicted support)")]
    ZeroDenominator { index: usize },

    #[error("non-finite value: {0}")]
    NonFinite(String),

    #[error("unknown scenario case {0} (expected 1, 2, 3 or 4)")]
    UnknownCase(u32),

    #[error("step {step}: {source}")]
    AtStep {
        step: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("scenario '{name}': {source}")]
    InScenario {
        name: String,
        #[source]
        source: Box<Error>,
    },
}

impl Error {
    pub(crate) fn dim(what: impl Into<String>, expected: usize, found: usize) -> Self {
        Error::DimensionMismatch {
            what: what.into(),
            expected,
            found,
        }
    }

    pub(crate) fn param(name: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            name,
            reason: reason.into(),
        }
    }

    pub(crate) fn at_step(self, step: usize) -> Self {
        Error::AtStep {
            step,
            source: Box::new(self),
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
