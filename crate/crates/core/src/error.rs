use thiserror::Error;

/// Errors raised by the solver library.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("operator assembly failed: {0}")]
    AssemblyFailure(String),

    #[error("numerical consistency violated: {0}")]
    NumericalConsistency(String),

    #[error("solution blew up at step {step} (t = {time:.6e}, tau = {tau:.3e}, cfl = {cfl:.3e}): {detail}")]
    BlowUp {
        step: usize,
        time: f64,
        tau: f64,
        cfl: f64,
        detail: String,
    },

    #[error("unsupported: {0}")]
    Unsupported(String),

    #[error("resource limit exceeded: {0}")]
    Resource(String),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidArgument(msg.into())
}
