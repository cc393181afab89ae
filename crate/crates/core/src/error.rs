//! Crate-wide error type.

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// A power-law exponent exceeded the overflow guard. Signals unphysical
    /// parameters (e.g. Mbit workloads over kHz bandwidth) rather than
    /// silently returning infinity.
    #[error("exponent {exponent} exceeds overflow guard {limit}; rescale workload/bandwidth")]
    ExponentOverflow { exponent: f64, limit: f64 },

    /// End-to-end latency reached the deadline: the QoE log argument
    /// `1 + eps_n - t_tot` is no longer positive.
    #[error("deadline infeasible: latency {latency}s against budget {budget}s")]
    DeadlineInfeasible { latency: f64, budget: f64 },

    #[error("division by zero in {context}")]
    DivisionByZero { context: &'static str },

    /// The follower derivative was found non-monotone on the bisection
    /// bracket, so the strict-concavity assumption does not hold for these
    /// parameters.
    #[error("concavity violation at o={at}: derivative rose from {prev} to {next}")]
    ConcavityViolation { at: f64, prev: f64, next: f64 },

    #[error("invalid parameter {name}: {reason}")]
    InvalidParameter { name: String, reason: String },

    #[error("auction already terminated at round {round}")]
    AuctionTerminated { round: usize },

    #[error("auction still open: {0}")]
    AuctionOpen(&'static str),

    #[error("auction cannot open: {0}")]
    AuctionInvalid(String),

    #[error("config error at `{key}`: {reason}")]
    Config { key: String, reason: String },

    /// Training aborted on a non-finite loss or metric.
    #[error("non-finite value in {context}: {value}")]
    NonFinite { context: String, value: f64 },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub fn config(key: impl Into<String>, reason: impl Into<String>) -> Self {
        Error::Config { key: key.into(), reason: reason.into() }
    }

    pub fn invalid(name: impl Into<String>, reason: impl Into<String>) -> Self {
        Error::InvalidParameter { name: name.into(), reason: reason.into() }
    }
}
