//! Crate-wide error type.

use thiserror::Error;

/// Errors surfaced by configuration, generation, simulation and measurement.
#[derive(Debug, Error)]
pub enum Error {
    /// Invalid or inconsistent configuration input.
    #[error("config error: {0}")]
    Config(String),

    /// Initial placement could not fit the requested particle count.
    #[error("capacity error: {0}")]
    Capacity(String),

    /// The explicit integrator blew up (speed guard tripped).
    #[error("numerical abort at step {step} (t = {time:.6e} s): max particle speed {max_speed:.3e} m/s exceeds {limit:.1e} m/s")]
    Instability {
        step: u64,
        time: f64,
        max_speed: f64,
        limit: f64,
    },

    /// A post-run measurement could not be taken (e.g. heap too small).
    #[error("measurement error: {0}")]
    Measurement(String),

    /// Surface-energy calibration could not proceed.
    #[error("calibration error: {0}")]
    Calibration(String),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    /// Process exit code convention: 1 for configuration problems,
    /// 2 for numerical aborts.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Instability { .. } => 2,
            _ => 1,
        }
    }
}
