use thiserror::Error;

/// Errors raised by the toolkit.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("probability vector is empty")]
    EmptyDistribution,

    #[error("entry {index} is not a probability: {value}")]
    InvalidProbability { index: usize, value: f64 },

    #[error("probability vector sums to {sum}, not 1")]
    NotNormalized { sum: f64 },

    #[error("channel row {row}: {reason}")]
    InvalidRow { row: usize, reason: String },

    #[error("channel must be at least 2x2, got {rows}x{cols}")]
    ChannelTooSmall { rows: usize, cols: usize },

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("domain error: {0}")]
    Domain(String),

    #[error("support violation at index {index}: q is zero where p is positive")]
    SupportViolation { index: usize },

    #[error("infeasible target: {0}")]
    Infeasible(String),

    #[error("matrix must be square, got {rows}x{cols}")]
    NotSquare { rows: usize, cols: usize },

    #[error("chain is reducible: state {state} cannot reach every other state")]
    Reducible { state: usize },

    #[error("chain is periodic with period {period}")]
    Periodic { period: usize },

    #[error("stationary iteration did not reach residual {target:e} (got {residual:e})")]
    StationaryNotConverged { residual: f64, target: f64 },

    #[error("insufficient trials: need at least {needed}, found {found}")]
    InsufficientTrials { needed: usize, found: usize },

    #[error("harmonic {harmonic} of {frequency} Hz is at or above Nyquist ({nyquist} Hz)")]
    Nyquist { frequency: f64, harmonic: usize, nyquist: f64 },

    #[error("invalid band {low}-{high} Hz: {reason}")]
    InvalidBand { low: f64, high: f64, reason: String },

    #[error("class {class} has no test trials")]
    EmptyConfusionRow { class: usize },

    #[error("degenerate input: {0}")]
    Degenerate(String),

    #[error("matrix is not positive definite")]
    NotPositiveDefinite,

    #[error("parse error at line {line}, column {column}: {message}")]
    Parse { line: usize, column: usize, message: String },

    #[error("invalid configuration `{key}`: {reason}")]
    Config { key: String, reason: String },

    #[error("i/o error: {0}")]
    Io(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}
