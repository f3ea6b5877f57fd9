use thiserror::Error;

use crate::lattice::DyadicCube;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// A caller-side precondition was not met.
    #[error("contract violation: {0}")]
    Contract(String),

    #[error("grid mismatch: {0}")]
    GridMismatch(String),

    #[error("value {value} outside the range of {what}")]
    Range { what: String, value: f64 },

    #[error("luxemburg bisection did not converge on cube {cube:?}: {reason}")]
    Overflow { cube: DyadicCube, reason: String },

    #[error("precondition failed at t = {witness}: {reason}")]
    Precondition { witness: f64, reason: String },

    /// A self-check of a closed-form bound failed; indicates a bug.
    #[error("internal consistency check failed: {0}")]
    Internal(String),

    #[error("invalid config: {0}")]
    Config(String),

    #[error("parse error: {0}")]
    Parse(String),
}

impl Error {
    pub(crate) fn contract(msg: impl Into<String>) -> Self {
        Error::Contract(msg.into())
    }

    pub(crate) fn config(msg: impl Into<String>) -> Self {
        Error::Config(msg.into())
    }

    pub(crate) fn parse(msg: impl Into<String>) -> Self {
        Error::Parse(msg.into())
    }
}
