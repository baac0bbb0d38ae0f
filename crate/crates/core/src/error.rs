use thiserror::Error;

/// Errors produced by the solvers, field containers and file formats.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("numerical failure: {0}")]
    NumericalFailure(String),

    #[error("{what} did not converge after {iterations} iterations (last residual {residual:.3e})")]
    NonConvergence {
        what: String,
        iterations: usize,
        residual: f64,
        /// Sup-norm potential changes of the outer iterations, oldest first.
        history: Vec<f64>,
    },

    #[error("time step failed at t = {t}: {reason}")]
    StepFailure { t: f64, reason: String },

    #[error("no eigenfunction matches the requested selector: {0}")]
    SelectionFailure(String),

    #[error("ambiguous branch: candidates with energies {first} and {second} have overlaps within 1%")]
    AmbiguousBranch { first: f64, second: f64 },

    #[error("branch lost during continuation (overlap {overlap:.3}); last good omega = {last_good_omega}")]
    BranchLost { last_good_omega: f64, overlap: f64 },

    #[error("residual-probability bound inapplicable: initial energy {0} is not negative")]
    BoundInapplicable(f64),

    #[error("indeterminate: {0}")]
    Indeterminate(String),

    #[error("fit meaningless: on-grid probability {0} is below 0.01")]
    FitMeaningless(f64),

    #[error("config error at line {line}: key `{key}`: {message}")]
    Config { line: usize, key: String, message: String },

    #[error("parse error: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidArgument(msg.into())
}
