use thiserror::Error;

/// Errors produced by grid construction, kernel evaluation, the recursion
/// itself, and the surrounding drivers.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    Argument(String),

    #[error("domain error: {0}")]
    Domain(String),

    /// The predictive density of an observation vanished on the whole grid.
    /// Carries the (zero-based) index of the offending observation.
    #[error("degenerate observation at index {index}: predictive density is zero on the grid")]
    DegenerateObservation { index: usize },

    #[error("kernel does not support {0}")]
    Capability(String),

    #[error("objective evaluated to a non-finite value at {0:?}")]
    NonFinite(Vec<f64>),

    #[error("config error: {0}")]
    Config(String),

    #[error("csv error at line {line}: {msg}")]
    Csv { line: usize, msg: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl From<csv::Error> for Error {
    fn from(e: csv::Error) -> Self {
        let line = e.position().map(|p| p.line() as usize).unwrap_or(0);
        Error::Csv {
            line,
            msg: e.to_string(),
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub fn argument(msg: impl Into<String>) -> Self {
        Error::Argument(msg.into())
    }

    pub fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }
}
