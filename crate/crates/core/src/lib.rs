//! Sum-rate maximization for a movable-antenna downlink NOMA system.
//!
//! The crate models the field-response channel, evaluates adaptive-SIC rates,
//! and runs the two-stage optimization: a decoding order from channel-gain
//! maximization, then alternating beamforming, antenna-position and
//! decoding-indicator updates. Baseline schemes and brute-force oracles are in
//! [`benchmarks`].

pub mod benchmarks;
pub mod channel;
pub mod frcalc;
pub mod ga;
pub mod orchestrator;
pub mod rates;
pub mod solver;
pub mod stage_one;

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum CoreError {
    #[error("invalid configuration field `{field}`: {reason}")]
    InvalidConfig { field: String, reason: String },
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("invalid decoding indicator matrix: {0}")]
    InvalidIndicator(String),
    #[error("enumeration cap exceeded: {0}")]
    CapExceeded(String),
    #[error("numerical failure: {0}")]
    Numerical(String),
}
