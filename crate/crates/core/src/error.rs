//! Error type shared across the crate.

use alloc::string::String;

/// Errors reported by fitting, codelength and selection routines.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("invalid alphabet: {0}")]
    InvalidAlphabet(String),

    #[error("invalid sample: {0}")]
    InvalidSample(String),

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    /// `|symbol|^power` is not representable as a finite `f64`.
    #[error("feature overflow: |{symbol}|^{power} is not representable")]
    FeatureOverflow { symbol: f64, power: u32 },

    /// The requested moments lie outside the moment polytope.
    #[error("infeasible moment constraints: component {index} deviates by {deviation:e}")]
    InfeasibleMoments { index: usize, deviation: f64 },

    /// The Newton solver hit its iteration cap with the residual still large.
    #[error(
        "solver did not converge after {iterations} iterations (max moment residual {residual:e})"
    )]
    NotConverged { iterations: usize, residual: f64 },

    /// An enumeration would exceed the configured cap.
    #[error("{what} needs {required} evaluations, over the cap of {cap}{hint}")]
    CapExceeded {
        what: &'static str,
        required: u128,
        cap: u64,
        hint: &'static str,
    },

    #[error("invalid input: {0}")]
    InvalidInput(String),

    /// Every candidate in a selection run failed; the payload lists causes.
    #[error("all candidates failed: {0}")]
    AllCandidatesFailed(String),
}

pub type Result<T> = core::result::Result<T, Error>;
