//! Error type shared by every module of the crate.

use thiserror::Error;

/// Errors raised by numerical routines and parameter validation.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    /// A parameter lies outside the domain where the model or operation is defined.
    #[error("domain error: {0}")]
    Domain(String),

    /// An adaptive quadrature did not reach its tolerance.
    #[error("quadrature did not converge: estimate {estimate:e}, residual {residual:e}")]
    NonConvergence { estimate: f64, residual: f64 },

    /// A covariance matrix could not be factorized.
    #[error("covariance factorization failed for {model} on a {points}-point grid")]
    Factorization { model: String, points: usize },

    /// A grid is unusable for the requested operation.
    #[error("invalid grid: {0}")]
    Grid(String),

    /// A replication configuration violates its admissibility window.
    #[error("invalid configuration: {0}")]
    Config(String),

    /// A root bracket could not be found.
    #[error("no sign change in bracket: {0}")]
    Bracket(String),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn domain(msg: impl Into<String>) -> Error {
    Error::Domain(msg.into())
}
