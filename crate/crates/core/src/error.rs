use thiserror::Error;

/// Errors produced by the workbench.
///
/// The variants line up with the CLI exit-code contract: parameter and
/// configuration problems are "config" failures, a law outside the
/// right-transient κ > 2 regime is a "regime" failure, and everything that
/// goes wrong while computing (horizons, ranges, failed identity checks) is
/// a "numeric" failure.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    Parameter(String),

    #[error("regime error: {0}")]
    Regime(String),

    #[error("index out of range: {0}")]
    Range(String),

    #[error("horizon error: {0}")]
    Horizon(String),

    #[error("numeric failure: {0}")]
    Numeric(String),

    #[error("config error: {0}")]
    Config(String),

    #[error("empty input: {0}")]
    Empty(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn param(msg: impl Into<String>) -> Self {
        Error::Parameter(msg.into())
    }

    pub(crate) fn regime(msg: impl Into<String>) -> Self {
        Error::Regime(msg.into())
    }

    pub(crate) fn range(msg: impl Into<String>) -> Self {
        Error::Range(msg.into())
    }

    pub(crate) fn horizon(msg: impl Into<String>) -> Self {
        Error::Horizon(msg.into())
    }

    pub(crate) fn numeric(msg: impl Into<String>) -> Self {
        Error::Numeric(msg.into())
    }

    /// Process exit code for this error: 2 = config, 3 = regime, 4 = numeric.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Parameter(_) | Error::Config(_) | Error::Empty(_) => 2,
            Error::Regime(_) => 3,
            Error::Range(_) | Error::Horizon(_) | Error::Numeric(_) | Error::Io(_) | Error::Csv(_) | Error::Json(_) => {
                4
            }
        }
    }
}
