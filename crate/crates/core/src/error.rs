use thiserror::Error;

/// Errors raised by geometry, sampling, solver and experiment operations.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    /// An argument lies outside the domain of the operation (mismatched
    /// spaces, tangent vector anchored elsewhere, parameter out of range).
    #[error("domain error: {0}")]
    Domain(String),
    /// A value failed a structural check (non-SPD matrix, non-finite entry,
    /// non-monotone survival function).
    #[error("validation error: {0}")]
    Validation(String),
    /// Inputs for which the requested check is vacuous.
    #[error("degenerate input: {0}")]
    Degenerate(String),
    /// A statistical precondition does not hold (e.g. infinite variance).
    #[error("precondition violated: {0}")]
    Precondition(String),
    /// An experiment configuration is inconsistent.
    #[error("invalid configuration: {0}")]
    Config(String),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

pub(crate) fn domain(msg: impl Into<String>) -> Error {
    Error::Domain(msg.into())
}

pub(crate) fn validation(msg: impl Into<String>) -> Error {
    Error::Validation(msg.into())
}
