use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("convergence failure: {0}")]
    Convergence(String),

    #[error("above the single-mode threshold: C^2 - (a_perp k0)^2 = {0:.6e} < 0")]
    AboveThreshold(f64),

    #[error("configuration error: {0}")]
    Configuration(String),

    #[error("norm drift {drift:.3e} in a single step exceeds {limit:.1e}")]
    Instability { drift: f64, limit: f64 },

    #[error("extraction requested before the packet left the interaction region: {0}")]
    Stale(String),

    #[error("shape mismatch: expected {expected} values, got {got}")]
    Shape { expected: usize, got: usize },

    #[error("checkpoint: {0}")]
    Checkpoint(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn domain<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::Domain(msg.into()))
}
