//! The eavesdrop-and-jam adversary.
//!
//! James picks a jam set `J`, sees the whole block `x_J` on those links and
//! knows the codebook. Under erasure jamming he can only blank `J`; under
//! overwrite jamming a [`JammingStrategy`] chooses what Bob sees there.
//! Detection is evaluated separately from jamming on the same observation.

mod detect;
mod strategies;

use thiserror::Error;

pub use detect::{
    detector_from_id, estimate_alpha_beta, list_detectors, optimal_detect, AlwaysActive, AlwaysInnocent, Detector, DetectorStats,
    OptimalDetector, TypeTestDetector,
};
pub use strategies::{
    list_strategies, strategy_from_spec, JamPoint, JammingStrategy, ParamInfo, Passthrough, ResampleInnocent, SpoofCodeword,
    SpoofConsistent, StrategyInfo, StrategySpec, Symmetrize, UniformRandom, DEFAULT_MAX_TRIES,
};

use crate::codec::{CodeRef, CodecError, LinkObservation, ReceivedWord, Transmission};
use crate::probkit::{ProbError, SymbolSequence};
use crate::ratesolver::{JamSet, NetworkModel, RateError};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum AdversaryError {
    #[error(transparent)]
    Codec(#[from] CodecError),
    #[error(transparent)]
    Rate(#[from] RateError),
    #[error(transparent)]
    Prob(#[from] ProbError),
    #[error("unknown strategy `{0}`; `stealthpath attack --list` shows the registered ones")]
    UnknownStrategy(String),
    #[error("unknown detector `{0}`")]
    UnknownDetector(String),
    #[error("strategy `{strategy}`: {reason}")]
    BadParameter { strategy: String, reason: String },
    #[error("symmetrization needs a model with the budget check bypassed and |J| >= C/2 (|J| = {jammed}, C = {links})")]
    RequiresBypass { jammed: usize, links: usize },
    #[error("strategy produced {found} sequences where {expected} links of length {n} were jammed")]
    BadOutput { expected: usize, found: usize, n: usize },
    #[error("strategy `{0}` has no enumerable output law here")]
    NotEnumerable(String),
    #[error("{states} enumerated states exceed the exact budget of {budget}; use an empirical detector instead")]
    OracleBudget { states: u128, budget: u128 },
    #[error("marginals disagree on the observation space")]
    MarginalMismatch,
    #[error("at least one trial per hypothesis is required")]
    NoTrials,
}

/// Everything a strategy may look at besides the observed block.
#[derive(Clone, Copy, Debug)]
pub struct JamContext<'a> {
    pub model: &'a NetworkModel,
    pub code: CodeRef<'a>,
    pub j: &'a JamSet,
}

impl JamContext<'_> {
    /// Alphabet sizes of the jammed links, in link order.
    pub fn jammed_sizes(&self) -> Vec<usize> {
        self.j.links().iter().map(|&l| self.model.link_alphabet_sizes()[l]).collect()
    }

    pub fn blocklength(&self) -> usize {
        self.code.code().params().n()
    }
}

/// Erases every link of `j` and copies the rest. Links of `j` outside the
/// transmission are ignored.
pub fn erasure_jam(tx: &Transmission, j: &JamSet) -> ReceivedWord {
    let links = tx
        .links
        .iter()
        .enumerate()
        .map(|(l, s)| if j.contains(l) { LinkObservation::Erased } else { LinkObservation::Symbols(s.clone()) })
        .collect();
    ReceivedWord { links }
}

/// Replaces the links of `ctx.j` by the strategy's output; the other links are
/// copied verbatim.
pub fn overwrite_jam(
    tx: &Transmission,
    strategy: &dyn JammingStrategy,
    ctx: &JamContext<'_>,
    seed: u64,
) -> Result<ReceivedWord, AdversaryError> {
    ctx.model.check_jam_set(ctx.j)?;
    if tx.links.len() != ctx.model.link_count() {
        return Err(CodecError::ShapeMismatch { expected: ctx.model.link_count(), n: tx.blocklength() }.into());
    }
    let x_j = tx.restrict(ctx.j);
    let y_j = strategy.jam(ctx, &x_j, seed)?;
    check_output(ctx, &y_j, tx.blocklength())?;
    let mut links: Vec<LinkObservation> = tx.links.iter().cloned().map(LinkObservation::Symbols).collect();
    for (&l, y) in ctx.j.links().iter().zip(y_j) {
        links[l] = LinkObservation::Symbols(y);
    }
    Ok(ReceivedWord { links })
}

fn check_output(ctx: &JamContext<'_>, y_j: &[SymbolSequence], n: usize) -> Result<(), AdversaryError> {
    let bad = || AdversaryError::BadOutput { expected: ctx.j.len(), found: y_j.len(), n };
    if y_j.len() != ctx.j.len() {
        return Err(bad());
    }
    for (y, k) in y_j.iter().zip(ctx.jammed_sizes()) {
        if y.len() != n || y.as_slice().iter().any(|&s| s as usize >= k) {
            return Err(bad());
        }
    }
    Ok(())
}
