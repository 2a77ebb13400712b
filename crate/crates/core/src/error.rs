use thiserror::Error;

/// Errors raised anywhere in the backtesting library.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    /// A loss or forecast falls outside the domain a kernel is defined on.
    #[error("domain error: {0}")]
    Domain(String),

    /// A betting fraction would drive the wealth negative.
    #[error("invalid step at t={t}: 1 + lambda * payoff = {factor}")]
    InvalidStep { t: usize, factor: f64 },

    /// Input series disagree in length or index.
    #[error("alignment error: {0}")]
    Alignment(String),

    /// A model estimation step failed.
    #[error("fit error: {0}")]
    Fit(String),

    /// A configuration value is missing or malformed.
    #[error("config error: {0}")]
    Config(String),

    /// The requested kernel or functional combination has no implementation.
    #[error("unsupported: {0}")]
    Unsupported(String),

    #[error("io error: {0}")]
    Io(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

impl From<csv::Error> for Error {
    fn from(e: csv::Error) -> Self {
        Error::Io(e.to_string())
    }
}

impl From<serde_json::Error> for Error {
    fn from(e: serde_json::Error) -> Self {
        Error::Io(e.to_string())
    }
}
