use thiserror::Error;

use crate::ensemble::Regime;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("negative Taylor coefficient c_{index} = {value:e} for exponent {exponent}")]
    NegativeCoefficient {
        index: usize,
        value: f64,
        exponent: f64,
    },

    #[error("{operation} is not defined in regime {regime}")]
    Regime {
        regime: Regime,
        operation: &'static str,
    },

    #[error("quadrature did not converge: {0}")]
    Quadrature(String),

    #[error("solver did not converge after {iterations} iterations (residual {residual:e})")]
    Convergence { iterations: usize, residual: f64 },

    #[error("truncation error: {0}")]
    Truncation(String),

    #[error("count distribution tail not resolved within {terms} terms")]
    Tail { terms: usize },

    #[error(
        "rejection budget exhausted after {attempts} attempts (acceptance rate {acceptance_rate:e}, expected about {expected_rate:e})"
    )]
    BudgetExhausted {
        attempts: u64,
        acceptance_rate: f64,
        expected_rate: f64,
    },

    #[error("coefficient table error: {0}")]
    Table(String),

    #[error("unknown ensemble name `{0}`")]
    UnknownName(String),

    #[error("invalid parameter: {0}")]
    Param(String),

    #[error("fit unstable: {0}")]
    FitUnstable(String),

    #[error("no closed form available for {0}")]
    Unavailable(String),

    #[error("config error at `{field}`: {message}")]
    Config { field: String, message: String },
}

impl Error {
    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }

    pub(crate) fn param(msg: impl Into<String>) -> Self {
        Error::Param(msg.into())
    }
}
