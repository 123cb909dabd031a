use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("kernel is singular on the diagonal (x = y = {0})")]
    Singular(f64),

    #[error("{what} = {value} is not aligned with the grid of step {step}; regrid so that it is {requirement}")]
    Misaligned {
        what: &'static str,
        value: f64,
        step: f64,
        requirement: &'static str,
    },

    #[error("grid mismatch: {0}")]
    GridMismatch(String),

    #[error("interval ({lo}, {hi}) contains no grid node")]
    EmptyIntersection { lo: f64, hi: f64 },

    #[error("symbol is constant on I({center}, {radius}); no oscillation to build a test function from")]
    NoOscillation { center: f64, radius: f64 },

    #[error("interval #{index} fails the oscillation precondition: M(b, I) = {oscillation} <= {threshold}")]
    WeakOscillation {
        index: usize,
        oscillation: f64,
        threshold: f64,
    },

    #[error("config: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidInput(msg.into())
}
