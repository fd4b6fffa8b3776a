use thiserror::Error;

/// Errors raised by the path samplers, quadrature routines and experiment harness.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("time {t} outside path range [0, {end}]")]
    OutOfRange { t: f64, end: f64 },

    #[error("outer path covers [0, {covered}] but composition needs [0, {required}]")]
    Coverage { required: f64, covered: f64 },

    #[error("non-finite value encountered: {0}")]
    NumericalDomain(String),

    #[error("quadrature did not reach tolerance {requested:e} (achieved {achieved:e})")]
    Accuracy { requested: f64, achieved: f64 },

    #[error("path budget of {steps} steps exhausted before exit")]
    BudgetExceeded { steps: u64 },

    #[error("only {effective:.1} effective samples in the kernel window (need {required})")]
    InsufficientData { effective: f64, required: usize },

    #[error("degenerate statistics: {0}")]
    DegenerateStatistics(String),

    #[error("usage: {0}")]
    Usage(String),

    #[error("io: {0}")]
    Io(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidInput(msg.into())
    }
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}
