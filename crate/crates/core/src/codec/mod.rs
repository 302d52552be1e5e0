//! Random codes for stealthy transmission and their decoders.
//!
//! * [`DirectCode`]: i.i.d. codewords `x(m)` drawn from `P_X`, decoded under
//!   overwrite jamming by exact matching on every candidate unjammed set.
//! * [`LayeredCode`]: i.i.d. intermediate codewords `u(m)` drawn from `P_U`,
//!   mapped through `P_{X|U}` afresh at every transmission, decoded under
//!   erasure jamming by joint typicality on the surviving links.

mod code;
mod codebook;
mod decode;
mod surrogates;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use code::{build_direct_code, build_layered_code, encode, innocent_links, CodeOptions, CodeRef, DirectCode, LayeredCode, StealthCode};
pub use codebook::{RandomCodebook, Storage, DEFAULT_MEMORY_BUDGET, LEAF_MAX};
pub(crate) use codebook::{Budget, Filter};
pub use decode::{decode_erasure, decode_layered_overwrite, decode_overwrite, DecodeResult, Decoder, Verdict};
pub use surrogates::{claim1_count, dump_codebook, lemma2_ratio, Claim1Count, Lemma2Ratio};

use crate::probkit::{ProbError, SymbolSequence};
use crate::ratesolver::{JamSet, RateError};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum CodecError {
    #[error(transparent)]
    Prob(#[from] ProbError),
    #[error(transparent)]
    Rate(#[from] RateError),
    #[error("blocklength must be positive")]
    ZeroBlocklength,
    #[error("a code needs at least one message")]
    NoMessages,
    #[error("rate must be positive and finite, got {0}")]
    BadRate(f64),
    #[error("n * R = {0} bits exceeds the supported 127")]
    TooManyMessages(f64),
    #[error("message {message} out of range 1..={messages}")]
    MessageOutOfRange { message: u128, messages: u128 },
    #[error("innocent transmissions carry message 0, active ones 1..=N")]
    StatusMessageMismatch,
    #[error("codebook needs {requested:?} symbols, over the in-memory budget of {budget}")]
    MemoryBudget { requested: Option<u128>, budget: u128 },
    #[error("{messages} codewords exceed the enumeration budget of {budget}")]
    EnumerationBudget { messages: u128, budget: u128 },
    #[error("codebook search exceeded its work budget")]
    SearchBudget,
    #[error("code and model disagree on the link alphabets")]
    AlphabetMismatch,
    #[error("expected {expected} links of length {n}")]
    ShapeMismatch { expected: usize, n: usize },
    #[error("jam set {0} is not valid here")]
    BadJamSet(JamSet),
    #[error("decoder does not apply to this code family")]
    WrongCodeFamily,
    #[error("i/o: {0}")]
    Io(String),
}

/// Blocklength, rate and message count of a code.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CodeParams {
    n: usize,
    rate: f64,
    messages: u128,
    seed: u64,
}

impl CodeParams {
    /// `N = floor(2^{nR})` messages.
    pub fn new(n: usize, rate: f64, seed: u64) -> Result<Self, CodecError> {
        if n == 0 {
            return Err(CodecError::ZeroBlocklength);
        }
        if !(rate > 0.0 && rate.is_finite()) {
            return Err(CodecError::BadRate(rate));
        }
        let mut bits = n as f64 * rate;
        if bits >= 127.0 {
            return Err(CodecError::TooManyMessages(bits));
        }
        // forgive float dust around integer exponents
        if (bits - bits.round()).abs() < 1e-9 {
            bits = bits.round();
        }
        let messages = 2f64.powf(bits).floor() as u128;
        Ok(CodeParams { n, rate, messages: messages.max(1), seed })
    }

    /// Exactly `messages` messages; the rate is `log2(N) / n`.
    pub fn with_messages(n: usize, messages: u128, seed: u64) -> Result<Self, CodecError> {
        if n == 0 {
            return Err(CodecError::ZeroBlocklength);
        }
        if messages == 0 {
            return Err(CodecError::NoMessages);
        }
        Ok(CodeParams { n, rate: (messages as f64).log2() / n as f64, messages, seed })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn rate(&self) -> f64 {
        self.rate
    }

    pub fn messages(&self) -> u128 {
        self.messages
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }
}

/// Whether Alice is communicating.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Status {
    Innocent,
    Active,
}

impl Status {
    pub fn bit(self) -> u8 {
        match self {
            Status::Innocent => 0,
            Status::Active => 1,
        }
    }
}

/// What Alice puts on the links.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Transmission {
    pub status: Status,
    /// 0 when innocent, `1..=N` when active.
    pub message: u128,
    pub links: Vec<SymbolSequence>,
}

impl Transmission {
    pub fn blocklength(&self) -> usize {
        self.links.first().map_or(0, SymbolSequence::len)
    }

    /// The sub-sequences on the links of `j`, in link order.
    pub fn restrict(&self, j: &JamSet) -> Vec<SymbolSequence> {
        j.links().iter().map(|&l| self.links[l].clone()).collect()
    }
}

/// One link as Bob sees it.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LinkObservation {
    Erased,
    Symbols(SymbolSequence),
}

/// Bob's observation: every link fully erased or fully symbol-valued.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ReceivedWord {
    pub links: Vec<LinkObservation>,
}

impl ReceivedWord {
    /// The unjammed word.
    pub fn clean(tx: &Transmission) -> Self {
        ReceivedWord { links: tx.links.iter().cloned().map(LinkObservation::Symbols).collect() }
    }

    pub fn erased_links(&self) -> Vec<usize> {
        (0..self.links.len()).filter(|&l| matches!(self.links[l], LinkObservation::Erased)).collect()
    }

    pub fn link(&self, l: usize) -> Option<&SymbolSequence> {
        match &self.links[l] {
            LinkObservation::Symbols(s) => Some(s),
            LinkObservation::Erased => None,
        }
    }
}
