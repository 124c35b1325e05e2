use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("spectral spaces differ (N = {left} vs N = {right})")]
    SpaceMismatch { left: usize, right: usize },

    /// Every importance weight vanished, so no normalized estimate exists.
    #[error("degenerate sample: {0}")]
    DegenerateSample(String),

    #[error("optimizer failure at epoch {epoch}: {reason}")]
    OptimizerFailure { epoch: usize, reason: String },

    #[error("quadrature grid too small: lost mass {lost_mass:e}")]
    GridTooSmall { lost_mass: f64 },

    #[error("malformed record: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidArgument(msg.into())
}
