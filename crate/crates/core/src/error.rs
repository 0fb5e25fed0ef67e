use thiserror::Error;

use crate::hilbert::AtomLevel;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("photon number {n} exceeds cutoff {cutoff} of {mode}")]
    IndexOutOfRange {
        mode: &'static str,
        n: usize,
        cutoff: usize,
    },

    #[error("state is unnormalizable (norm {norm:e})")]
    Unnormalizable { norm: f64 },

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("space mismatch: {0}")]
    SpaceMismatch(String),

    #[error("numerical consistency violated: {0}")]
    NumericalConsistency(String),

    #[error("outcome {level:?} is impossible (weight {weight:e})")]
    OutcomeImpossible { level: AtomLevel, weight: f64 },

    #[error("truncation violated: amplitude {amplitude:e} at the top Fock level of {mode}")]
    Truncation { mode: &'static str, amplitude: f64 },

    #[error("eigendecomposition failed: {0}")]
    EigenFailure(String),

    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("field state leaves the Bell support (off-support weight {weight:e})")]
    SupportViolation { weight: f64 },

    #[error("density matrix invariant violated: {0}")]
    InvariantViolation(String),

    #[error("block decomposition mismatch: {0}")]
    ResidualMismatch(String),
}

impl Error {
    pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            name,
            reason: reason.into(),
        }
    }
}
