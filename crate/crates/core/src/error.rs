use thiserror::Error;

/// Errors raised by the analysis pipeline.
#[derive(Debug, Error)]
pub enum Error {
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("line {line}: {field} {value} out of range")]
    CoordinateRange {
        line: usize,
        field: &'static str,
        value: f64,
    },

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("entropy exceeds random entropy: S = {entropy} > log2 N = {max}")]
    EntropyAboveRandom { entropy: f64, max: f64 },

    #[error("KL divergence undefined: q has no mass on symbol {symbol}")]
    SupportViolation { symbol: u64 },

    #[error("transition matrix row {row} sums to {sum}, expected 1")]
    NotStochastic { row: usize, sum: f64 },

    #[error("transition matrix is reducible")]
    Reducible,

    #[error("non-finite loss at epoch {epoch}")]
    NonFiniteLoss { epoch: usize },

    #[error("numeric failure: {0}")]
    Numeric(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidInput(msg.into())
    }

    /// True for failures of a numerical routine rather than of the input data.
    pub fn is_numeric(&self) -> bool {
        matches!(self, Error::NonFiniteLoss { .. } | Error::Numeric(_))
    }
}

pub type Result<T> = std::result::Result<T, Error>;
