use thiserror::Error;

pub type Result<T> = std::result::Result<T, QviError>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum QviError {
    #[error("unknown regime {0}")]
    UnknownRegime(usize),

    #[error("{what} must be positive, got {value}")]
    NonPositive { what: &'static str, value: f64 },

    #[error("invalid problem: {0}")]
    InvalidProblem(String),

    #[error("closed form unavailable: {0}")]
    AnalyticPrecondition(String),

    #[error("proposition precondition failed: {0}")]
    PropositionPrecondition(String),

    #[error("target capital {target} is unreachable from {start} in regime {regime}")]
    Unreachable { regime: usize, start: f64, target: f64 },

    #[error("{what} = {value} is out of range")]
    OutOfRange { what: &'static str, value: f64 },

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
}
