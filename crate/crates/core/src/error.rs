use thiserror::Error;

/// Errors raised across the laboratory. Each variant names the module-level
/// contract that was violated.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid potential: {0}")]
    InvalidPotential(String),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("resolution error: {0}")]
    Resolution(String),

    #[error("certificate domain error: {0}")]
    CertificateDomain(String),

    #[error("regime error: {0}")]
    Regime(String),

    #[error("configuration error: {0}")]
    Configuration(String),

    #[error("integration failure at t = {time}: non-finite value in cell {cell}")]
    IntegrationFailure { time: f64, cell: usize },

    #[error("contraction failure: measured ratio {ratio} >= 1 in window starting at t = {window_start}")]
    ContractionFailure { ratio: f64, window_start: f64 },

    #[error("capacity exceeded: {0}")]
    Capacity(String),

    #[error("consistency error: {0}")]
    Consistency(String),

    #[error("insufficient data: {0}")]
    InsufficientData(String),

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
