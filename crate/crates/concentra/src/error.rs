//! Crate-wide error type.

use thiserror::Error;

/// Errors produced by the bound computations and estimators.
#[derive(Debug, Clone, Error)]
pub enum Error {
    /// An operation received an empty sample or function list.
    #[error("empty input: {0}")]
    EmptyInput(&'static str),

    /// A parameter is outside its admissible range.
    #[error("invalid parameter {name}: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    /// A point lies outside the domain of a ξ function or covering spec.
    #[error("domain violation: {0}")]
    Domain(String),

    /// A ξ evaluator returned a negative or otherwise nonsensical value.
    #[error("invalid xi function: {0}")]
    InvalidXi(String),

    /// `moment_inner > moment_full`, contradicting Jensen's inequality; the
    /// moment estimates are mutually inconsistent.
    #[error("Jensen violation: moment_inner {inner} > moment_full {full}")]
    JensenViolation { inner: f64, full: f64 },

    /// A numerical routine failed to converge or met a degenerate system.
    #[error("numeric failure: {0}")]
    Numeric(String),
}

impl Error {
    pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            name,
            reason: reason.into(),
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
