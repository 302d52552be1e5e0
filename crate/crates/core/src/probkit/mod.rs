//! Finite-alphabet probability primitives: distributions, marginals,
//! information measures (in bits), variational distance, strong typicality
//! and seeded sampling.

mod block;
mod dist;
mod sample;
mod typical;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use block::{step_indices, BlockDistribution};
pub(crate) use block::block_at;
pub use dist::{ConditionalKernel, Distribution, JointDistribution, PROB_TOL, RENORM_TOL};
pub(crate) use dist::{entropy_bits, flat_index, marginal_mass, unflatten};
pub use sample::{sample_conditional, sample_iid, Sampler};
pub use typical::{
    counts_typical, empirical_type, is_jointly_typical, is_strongly_typical, TypicalityParams, DEFAULT_GAMMA,
};

/// A symbol index within some finite alphabet.
pub type Symbol = u16;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ProbError {
    #[error("alphabet must be non-empty")]
    EmptyAlphabet,
    #[error("mass at index {index} is not finite")]
    NonFinite { index: usize },
    #[error("mass at index {index} is negative ({value})")]
    NegativeMass { index: usize, value: f64 },
    #[error("masses sum to {total}, not 1")]
    BadTotal { total: f64 },
    #[error("size mismatch: expected {expected}, found {found}")]
    SizeMismatch { expected: usize, found: usize },
    #[error("component {component} out of range for a joint with {factors} factors")]
    ComponentOutOfRange { component: usize, factors: usize },
    #[error("component sets overlap")]
    OverlappingParts,
    #[error("symbol {symbol} out of range for alphabet of size {alphabet_size}")]
    SymbolOutOfRange { symbol: usize, alphabet_size: usize },
    #[error("sequence lengths differ ({left} vs {right})")]
    LengthMismatch { left: usize, right: usize },
    #[error("sequence is empty")]
    EmptySequence,
    #[error("typicality slack must be positive and finite, got {0}")]
    BadGamma(f64),
}

/// A length-`n` vector of symbol indices.
#[derive(Clone, Debug, Default, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct SymbolSequence {
    symbols: Vec<Symbol>,
}

impl SymbolSequence {
    pub fn new(symbols: Vec<Symbol>) -> Self {
        SymbolSequence { symbols }
    }

    pub fn len(&self) -> usize {
        self.symbols.len()
    }

    pub fn is_empty(&self) -> bool {
        self.symbols.is_empty()
    }

    pub fn as_slice(&self) -> &[Symbol] {
        &self.symbols
    }

    pub fn into_vec(self) -> Vec<Symbol> {
        self.symbols
    }

    /// Largest symbol index plus one, or 0 if empty.
    pub fn max_symbol(&self) -> usize {
        self.symbols.iter().map(|&s| s as usize + 1).max().unwrap_or(0)
    }
}

impl From<Vec<Symbol>> for SymbolSequence {
    fn from(symbols: Vec<Symbol>) -> Self {
        SymbolSequence { symbols }
    }
}

/// Shannon entropy of `d` in bits.
pub fn entropy(d: &Distribution) -> f64 {
    d.entropy()
}

/// `1/2 sum |p_i - q_i|`.
pub fn variational_distance(p: &Distribution, q: &Distribution) -> Result<f64, ProbError> {
    if p.alphabet_size() != q.alphabet_size() {
        return Err(ProbError::SizeMismatch { expected: p.alphabet_size(), found: q.alphabet_size() });
    }
    Ok(tv_distance(p.mass(), q.mass()))
}

/// Variational distance on raw, equally long mass vectors.
pub fn tv_distance(p: &[f64], q: &[f64]) -> f64 {
    let s: f64 = p.iter().zip(q).map(|(a, b)| (a - b).abs()).sum();
    (0.5 * s).clamp(0.0, 1.0)
}
