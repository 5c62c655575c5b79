use crate::hashcore::MerlinError;
use crate::ledger::LedgerError;

use super::logs::LogParseError;

/// A scenario config problem, pinned to the offending field.
#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("{field}: {message}")]
pub struct ConfigError {
    pub field: String,
    pub message: String,
}

impl ConfigError {
    pub fn new(field: impl Into<String>, message: impl Into<String>) -> Self {
        ConfigError {
            field: field.into(),
            message: message.into(),
        }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum ExperimentError {
    #[error("invalid config: {0}")]
    Config(#[from] ConfigError),
    #[error("config json: {0}")]
    ConfigJson(#[from] serde_json::Error),
    #[error(transparent)]
    Ledger(#[from] LedgerError),
    #[error(transparent)]
    Merlin(#[from] MerlinError),
    #[error(transparent)]
    Parse(#[from] LogParseError),
    #[error("fraction list is empty")]
    EmptyFractions,
    #[error("coalition fraction {0} outside [0, 1]")]
    InvalidFraction(f64),
    #[error("need at least {min} trials, got {got}")]
    TooFewTrials { min: u64, got: u64 },
    #[error("candidate attempts must be between 1 and 64")]
    InvalidAttempts,
}

impl ExperimentError {
    /// Errors caused by the caller's input rather than the run itself.
    pub fn is_config(&self) -> bool {
        !matches!(
            self,
            ExperimentError::Ledger(_) | ExperimentError::Merlin(_)
        )
    }
}
