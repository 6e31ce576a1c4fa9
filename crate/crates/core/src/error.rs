//! Error types shared across the crate.

use thiserror::Error;

/// Crate-wide error type.
#[derive(Debug, Error)]
pub enum Error {
    /// Bad user input: malformed config, unknown names, grid mismatches.
    #[error("config error: {0}")]
    Config(String),

    /// Violated numeric precondition (empty sample, asymmetric matrix, ...).
    #[error("invalid input: {0}")]
    InvalidInput(String),

    /// Model parameters or loss became non-finite outside a recorded run.
    #[error("diverged state: {0}")]
    Diverged(String),

    /// Spectrum too small for a tail fit.
    #[error("insufficient spectrum: {0}")]
    InsufficientSpectrum(String),

    /// Malformed checkpoint or results file.
    #[error("format error: {0}")]
    Format(String),

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
