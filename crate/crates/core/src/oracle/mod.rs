//! Exact brute-force references for tiny instances.
//!
//! Everything here enumerates outcome spaces outright: `n`-letter marginals,
//! variational distances, every deterministic detector, every
//! (message, encoder draw, jammer draw) triple, and a grid over the
//! marginal-matching polytope. The fast paths elsewhere are tested against
//! these.

mod error_prob;
mod grid;
mod marginal;

use thiserror::Error;

pub use error_prob::{exact_error_probability, ErrorProbability, Jamming};
pub use grid::{grid_solve_b, GridSolution, MAX_GRID_ALPHABET, MAX_GRID_DIMENSION};
pub use marginal::{
    brute_force_best_detector, detector_errors, exact_active_marginal, exact_stealth_gap, exhaustive_best_detector,
    innocent_block_marginal, typicality_partition, BestDetector, GapPartition, StealthGap,
};

use crate::adversary::AdversaryError;
use crate::codec::CodecError;
use crate::probkit::ProbError;
use crate::ratesolver::RateError;

/// Largest `|X_J|^n` for exact marginals.
pub const MARGINAL_BUDGET: u128 = 1 << 22;
/// Largest observation space for detector optimization.
pub const DETECTOR_BUDGET: u128 = 1 << 16;
/// Observation spaces up to this size are searched over every detector.
pub const BRUTE_FORCE_OBSERVATIONS: usize = 16;
/// Largest number of enumerated states in an exact error probability.
pub const ERROR_BUDGET: u128 = 1 << 22;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum OracleError {
    #[error(transparent)]
    Codec(#[from] CodecError),
    #[error(transparent)]
    Adversary(#[from] AdversaryError),
    #[error(transparent)]
    Prob(#[from] ProbError),
    #[error(transparent)]
    Rate(#[from] RateError),
    #[error("{what}: {states} states exceed the exact budget of {budget}; use Monte Carlo estimates instead")]
    Budget { what: &'static str, states: u128, budget: u128 },
    #[error("grid needs |X| <= {max}, got {found}")]
    AlphabetTooLarge { found: usize, max: usize },
    #[error("polytope has dimension {found} after elimination, the grid handles at most {max}")]
    DimensionTooLarge { found: usize, max: usize },
    #[error("grid resolution must lie in (0, 1], got {0}")]
    BadResolution(f64),
    #[error("no grid point is feasible at resolution {0}")]
    NoFeasiblePoint(f64),
    #[error("jamming mode does not fit the decoder")]
    JammingMismatch,
}

fn check_budget(what: &'static str, states: Option<u128>, budget: u128) -> Result<u128, OracleError> {
    match states {
        Some(s) if s <= budget => Ok(s),
        s => Err(OracleError::Budget { what, states: s.unwrap_or(u128::MAX), budget }),
    }
}
