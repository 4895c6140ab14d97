use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// Invalid parameters, stability-bound violations, malformed config files.
    #[error("configuration error: {0}")]
    Config(String),

    /// A point fell outside the simulation box.
    #[error("position ({x}, {y}, {z}) lies outside the domain")]
    Domain { x: f64, y: f64, z: f64 },

    /// Not enough rows/windows for the requested split, embedding or horizon.
    #[error("insufficient data: {0}")]
    InsufficientData(String),

    /// A metric was undefined (zero variance, constant series).
    #[error("metric undefined: {0}")]
    Metric(String),

    /// The colony died out during a simulation.
    #[error("bacterial population went extinct at window {window}")]
    Extinct { window: usize },

    /// A CSV or trajectory file did not match the expected layout.
    #[error("schema mismatch: {0}")]
    Schema(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn config(msg: impl Into<String>) -> Self {
        Error::Config(msg.into())
    }

    pub(crate) fn insufficient(msg: impl Into<String>) -> Self {
        Error::InsufficientData(msg.into())
    }

    pub(crate) fn schema(msg: impl Into<String>) -> Self {
        Error::Schema(msg.into())
    }
}
