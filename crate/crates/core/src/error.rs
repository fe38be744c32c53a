use thiserror::Error;

/// Errors raised by the model, the cohort engine and the analysis routines.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid tumor state: {0}")]
    InvalidState(String),

    #[error("invalid model parameters: {0}")]
    InvalidParams(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("invalid solver settings: {0}")]
    Settings(String),

    /// The state stopped being finite during the step ending at `time`.
    #[error("integration blow-up at t = {time}")]
    Blowup { time: f64 },

    #[error("{0}")]
    Misuse(String),

    #[error("spectral equation has no positive root: {0}")]
    NoRoot(String),

    #[error("domain error: {0}")]
    Domain(String),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
