//! Experiment harness: configuration, Monte-Carlo trials, CSV and JSON output,
//! and the verification suites.

pub mod config;
pub mod experiments;
pub mod verify;

use manoma_core::CoreError;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("{0}")]
    Validation(String),
    #[error("verification failed: {0}")]
    Verify(String),
    #[error("{0}")]
    Runtime(String),
}

impl From<CoreError> for HarnessError {
    fn from(e: CoreError) -> Self {
        match e {
            CoreError::Numerical(_) => HarnessError::Runtime(e.to_string()),
            _ => HarnessError::Validation(e.to_string()),
        }
    }
}

impl HarnessError {
    /// Process exit code: 1 validation, 2 verification, 3 runtime.
    pub fn exit_code(&self) -> u8 {
        match self {
            HarnessError::Validation(_) => 1,
            HarnessError::Verify(_) => 2,
            HarnessError::Runtime(_) => 3,
        }
    }
}
