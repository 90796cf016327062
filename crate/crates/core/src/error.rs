use thiserror::Error;

/// Errors raised by the solvers and their helpers.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    /// A parameter violates a documented precondition.
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    /// An iterative routine failed to reach its tolerance.
    #[error("no convergence in {stage}: {detail}")]
    NonConvergence { stage: String, detail: String },

    /// No policy satisfies the power constraints.
    #[error("infeasible problem: {0}")]
    Infeasible(String),

    /// A numerical invariant was broken (corrupt input or quadrature failure).
    #[error("numerical failure: {0}")]
    Numerical(String),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidParameter(msg.into())
}
