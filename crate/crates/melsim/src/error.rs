//! Crate-wide error type.

use thiserror::Error;

/// Errors produced by model construction, solvers and the experiment harness.
#[derive(Debug, Error)]
pub enum Error {
    /// An input value is outside the domain of an operation.
    #[error("domain error: {0}")]
    Domain(String),

    /// A learner has zero achievable rate towards an orchestrator.
    #[error("unreachable learner {learner} for orchestrator {orchestrator}: zero rate")]
    UnreachableLearner { learner: usize, orchestrator: usize },

    /// The convergence bound is not valid at the requested number of local iterations.
    #[error("convergence bound invalid at tau={tau}: rate condition violated")]
    InvalidRegime { tau: u32 },

    /// Regression over the bound samples could not be performed.
    #[error("fit error: {0}")]
    Fit(String),

    /// The instance (or a sub-problem) admits no feasible solution.
    #[error("infeasible: {0}")]
    Infeasible(String),

    /// The exact solver guard was exceeded.
    #[error("instance too large for exhaustive solve: {0}")]
    TooLargeForOracle(String),

    /// A solver ran out of its node/iteration budget without a usable result.
    #[error("solver budget exhausted: {0}")]
    BudgetExhausted(String),

    /// Configuration document failed validation.
    #[error("config error at `{field}`: {message}")]
    Config { field: String, message: String },

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    #[error("serialization error: {0}")]
    Serde(#[from] serde_json::Error),

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }

    pub(crate) fn infeasible(msg: impl Into<String>) -> Self {
        Error::Infeasible(msg.into())
    }

    pub(crate) fn config(field: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Config {
            field: field.into(),
            message: message.into(),
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
