use rand::Rng;
use serde::{Deserialize, Serialize};

use super::AdversaryError;
use crate::codec::{encode, innocent_links, StealthCode, Status};
use crate::exec::Exec;
use crate::probkit::{counts_typical, step_indices, BlockDistribution, SymbolSequence, TypicalityParams};
use crate::ratesolver::{JamSet, NetworkModel};
use crate::rng;

/// Decides from `x_J` whether Alice is communicating (1) or innocent (0).
pub trait Detector: Send + Sync {
    fn id(&self) -> &str;
    fn verdict(&self, x_j: &[SymbolSequence]) -> Result<u8, AdversaryError>;
}

/// Always says innocent.
#[derive(Clone, Copy, Debug, Default)]
pub struct AlwaysInnocent;

impl Detector for AlwaysInnocent {
    fn id(&self) -> &str {
        "always-innocent"
    }

    fn verdict(&self, _: &[SymbolSequence]) -> Result<u8, AdversaryError> {
        Ok(0)
    }
}

/// Always says active.
#[derive(Clone, Copy, Debug, Default)]
pub struct AlwaysActive;

impl Detector for AlwaysActive {
    fn id(&self) -> &str {
        "always-active"
    }

    fn verdict(&self, _: &[SymbolSequence]) -> Result<u8, AdversaryError> {
        Ok(1)
    }
}

/// Flags any block that is not typical for the innocent law on `J`.
#[derive(Clone, Debug)]
pub struct TypeTestDetector {
    sizes: Vec<usize>,
    law: Vec<f64>,
    typicality: TypicalityParams,
}

impl TypeTestDetector {
    pub fn new(model: &NetworkModel, j: &JamSet, typicality: TypicalityParams) -> Result<Self, AdversaryError> {
        model.check_jam_set(j)?;
        let sizes = j.links().iter().map(|&l| model.link_alphabet_sizes()[l]).collect();
        Ok(TypeTestDetector { sizes, law: model.innocent_marginal(j), typicality })
    }
}

impl Detector for TypeTestDetector {
    fn id(&self) -> &str {
        "type-test"
    }

    fn verdict(&self, x_j: &[SymbolSequence]) -> Result<u8, AdversaryError> {
        let steps = step_indices(&self.sizes, x_j)?;
        if steps.is_empty() {
            return Ok(0);
        }
        let mut counts = vec![0u64; self.law.len()];
        for s in &steps {
            counts[*s] += 1;
        }
        Ok(u8::from(!counts_typical(&counts, steps.len(), &self.law, self.typicality.gamma())))
    }
}

/// The likelihood-ratio test between exact `n`-letter marginals.
#[derive(Clone, Debug)]
pub struct OptimalDetector {
    innocent: BlockDistribution,
    active: BlockDistribution,
}

impl OptimalDetector {
    pub fn new(innocent: BlockDistribution, active: BlockDistribution) -> Result<Self, AdversaryError> {
        if innocent.link_sizes() != active.link_sizes() || innocent.blocklength() != active.blocklength() {
            return Err(AdversaryError::MarginalMismatch);
        }
        Ok(OptimalDetector { innocent, active })
    }

    pub fn innocent(&self) -> &BlockDistribution {
        &self.innocent
    }

    pub fn active(&self) -> &BlockDistribution {
        &self.active
    }
}

impl Detector for OptimalDetector {
    fn id(&self) -> &str {
        "optimal-oracle"
    }

    fn verdict(&self, x_j: &[SymbolSequence]) -> Result<u8, AdversaryError> {
        optimal_detect(x_j, &self.innocent, &self.active)
    }
}

/// 1 iff the active marginal gives `x_j` strictly more mass than the innocent
/// one; ties go to innocent.
pub fn optimal_detect(x_j: &[SymbolSequence], innocent: &BlockDistribution, active: &BlockDistribution) -> Result<u8, AdversaryError> {
    if innocent.link_sizes() != active.link_sizes() || innocent.blocklength() != active.blocklength() {
        return Err(AdversaryError::MarginalMismatch);
    }
    let i = innocent.index_of(x_j)?;
    Ok(u8::from(active.mass()[i] > innocent.mass()[i]))
}

/// Plug-in detectors selectable by id.
pub fn list_detectors() -> Vec<&'static str> {
    vec!["always-innocent", "always-active", "type-test"]
}

pub fn detector_from_id(
    id: &str,
    model: &NetworkModel,
    j: &JamSet,
    typicality: TypicalityParams,
) -> Result<Box<dyn Detector>, AdversaryError> {
    Ok(match id {
        "always-innocent" => Box::new(AlwaysInnocent),
        "always-active" => Box::new(AlwaysActive),
        "type-test" => Box::new(TypeTestDetector::new(model, j, typicality)?),
        other => return Err(AdversaryError::UnknownDetector(other.to_string())),
    })
}

/// Empirical false-alarm and missed-detection rates.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DetectorStats {
    pub alpha: f64,
    pub beta: f64,
    pub innocent_trials: u64,
    pub active_trials: u64,
    pub false_alarms: u64,
    pub misses: u64,
}

impl DetectorStats {
    pub fn from_counts(false_alarms: u64, innocent_trials: u64, misses: u64, active_trials: u64) -> Self {
        DetectorStats {
            alpha: false_alarms as f64 / innocent_trials.max(1) as f64,
            beta: misses as f64 / active_trials.max(1) as f64,
            innocent_trials,
            active_trials,
            false_alarms,
            misses,
        }
    }
}

/// Runs `trials` innocent and `trials` active transmissions (uniform message)
/// and scores `detector` on what James sees on `j`.
pub fn estimate_alpha_beta(
    detector: &dyn Detector,
    model: &NetworkModel,
    code: &dyn StealthCode,
    j: &JamSet,
    trials: u64,
    seed: u64,
    exec: Exec,
) -> Result<DetectorStats, AdversaryError> {
    if trials == 0 {
        return Err(AdversaryError::NoTrials);
    }
    model.check_jam_set(j)?;
    let n = code.params().n();
    let messages = code.params().messages();
    let restrict = |links: Vec<SymbolSequence>| -> Vec<SymbolSequence> { j.links().iter().map(|&l| links[l].clone()).collect() };
    let alarms = exec.map(0..trials, |i| -> Result<u64, AdversaryError> {
        let x = restrict(innocent_links(model, n, rng::derive_seed(seed, "detect-innocent", i)));
        Ok(u64::from(detector.verdict(&x)?))
    });
    let misses = exec.map(0..trials, |i| -> Result<u64, AdversaryError> {
        let m = rng::stream(seed, "detect-message", i).random_range(1..=messages);
        let tx = encode(code, model, Status::Active, m, rng::derive_seed(seed, "detect-active", i))?;
        Ok(1 - u64::from(detector.verdict(&restrict(tx.links))?))
    });
    let fa = alarms.into_iter().sum::<Result<u64, _>>()?;
    let ms = misses.into_iter().sum::<Result<u64, _>>()?;
    Ok(DetectorStats::from_counts(fa, trials, ms, trials))
}
