use serde::{Deserialize, Serialize};

use super::HarnessError;
use crate::adversary::{detector_from_id, strategy_from_spec, StrategySpec};
use crate::codec::CodeOptions;
use crate::probkit::{TypicalityParams, DEFAULT_GAMMA};
use crate::ratesolver::{JamSet, NetworkModel, Scheme, SolverConfig};

/// The only config layout this build reads.
pub const CONFIG_SCHEMA: u32 = 1;
pub const DEFAULT_TRIALS: u64 = 10_000;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ExperimentScheme {
    /// Layered code, erasure jamming, typicality decoding.
    ErasureLayered,
    /// Direct code, overwrite jamming, exact-match list decoding.
    OverwriteDirect,
    /// Layered code under overwrite jamming. Exploratory: no rate is proven.
    LayeredUnderOverwrite,
}

impl ExperimentScheme {
    pub fn name(self) -> &'static str {
        match self {
            ExperimentScheme::ErasureLayered => "erasure-layered",
            ExperimentScheme::OverwriteDirect => "overwrite-direct",
            ExperimentScheme::LayeredUnderOverwrite => "layered-under-overwrite",
        }
    }

    pub fn is_layered(self) -> bool {
        self != ExperimentScheme::OverwriteDirect
    }

    pub fn is_overwrite(self) -> bool {
        self != ExperimentScheme::ErasureLayered
    }

    /// Which bound a `bound-minus-epsilon` rate refers to. The exploratory
    /// layered-under-overwrite scheme borrows the erasure bound.
    pub fn rate_scheme(self) -> Scheme {
        match self {
            ExperimentScheme::OverwriteDirect => Scheme::Overwrite,
            _ => Scheme::Erasure,
        }
    }
}

/// How the rate of a sweep point is chosen.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RateRule {
    /// Bits per channel use.
    Absolute(f64),
    /// The scheme's rate bound minus this many bits.
    BoundMinusEpsilon(f64),
}

/// Where the code's single-letter laws come from.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CodeDesign {
    /// The optimizer of the scheme's program: `P_X` from (B) for direct codes,
    /// `(P_U, P_{X|U})` from (A) for layered codes.
    #[default]
    Solve,
    /// Layered code with `U = X`: `P_U` is the (B) optimizer and the kernel is the identity.
    UEqualsX,
    /// The innocent law itself (identity kernel for layered codes).
    Innocent,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CodeSweep {
    pub n: Vec<usize>,
    pub rates: Vec<RateRule>,
    #[serde(default)]
    pub design: CodeDesign,
    #[serde(default)]
    pub options: CodeOptions,
}

/// Which jam sets the adversary uses.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum JamRule {
    /// Every `J` in the family; report the worst.
    WorstOverFamily,
    Fixed(Vec<usize>),
}

impl JamRule {
    pub fn name(&self) -> &'static str {
        match self {
            JamRule::WorstOverFamily => "worst-over-family",
            JamRule::Fixed(_) => "fixed",
        }
    }

    pub fn sets(&self, model: &NetworkModel) -> Vec<JamSet> {
        match self {
            JamRule::WorstOverFamily => model.jam_family().sets().to_vec(),
            JamRule::Fixed(links) => vec![JamSet::new(links.clone())],
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AdversaryConfig {
    pub jam_sets: JamRule,
    /// Overwrite strategies; ignored (and must be empty) for erasure jamming.
    #[serde(default)]
    pub strategies: Vec<StrategySpec>,
}

fn default_gamma() -> Vec<f64> {
    vec![DEFAULT_GAMMA]
}

fn default_detector() -> String {
    "optimal-oracle".to_string()
}

fn default_trials() -> u64 {
    DEFAULT_TRIALS
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub schema: u32,
    pub model: NetworkModel,
    pub scheme: ExperimentScheme,
    pub code: CodeSweep,
    /// Typicality slack of the decoders and of `spoof-codeword` defaults.
    #[serde(default = "default_gamma")]
    pub gamma: Vec<f64>,
    pub adversary: AdversaryConfig,
    /// `optimal-oracle`, `none`, or a plug-in detector id.
    #[serde(default = "default_detector")]
    pub detector: String,
    #[serde(default = "default_trials")]
    pub trials: u64,
    pub master_seed: u64,
    #[serde(default)]
    pub solver: SolverConfig,
    /// Keep one [`TrialRecord`](super::TrialRecord) per transmission.
    #[serde(default)]
    pub record_trials: bool,
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self, HarnessError> {
        let value: serde_json::Value = serde_json::from_str(text).map_err(|e| HarnessError::Validation(e.to_string()))?;
        // report a version mismatch before any field the old layout lacks
        match value.get("schema").and_then(serde_json::Value::as_u64) {
            Some(v) if v == u64::from(CONFIG_SCHEMA) => {}
            Some(v) => return Err(HarnessError::Validation(format!("schema {v} is not supported (expected {CONFIG_SCHEMA})"))),
            None => return Err(HarnessError::Validation("config needs a top-level \"schema\": 1".into())),
        }
        let cfg: ExperimentConfig = serde_json::from_value(value).map_err(|e| HarnessError::Validation(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), HarnessError> {
        let bad = |m: String| Err(HarnessError::Validation(m));
        if self.schema != CONFIG_SCHEMA {
            return bad(format!("schema {} is not supported (expected {CONFIG_SCHEMA})", self.schema));
        }
        if self.trials == 0 {
            return bad("trials must be positive".into());
        }
        if self.code.n.is_empty() || self.code.n.contains(&0) {
            return bad("code.n must list positive blocklengths".into());
        }
        if self.code.rates.is_empty() {
            return bad("code.rates must not be empty".into());
        }
        for r in &self.code.rates {
            let v = match r {
                RateRule::Absolute(v) | RateRule::BoundMinusEpsilon(v) => *v,
            };
            if !(v > 0.0 && v.is_finite()) {
                return bad(format!("rate rule {r:?} needs a positive value"));
            }
        }
        if self.gamma.is_empty() {
            return bad("gamma must not be empty".into());
        }
        for &g in &self.gamma {
            TypicalityParams::new(g).map_err(|e| HarnessError::Validation(e.to_string()))?;
        }
        if self.scheme == ExperimentScheme::OverwriteDirect && self.code.design == CodeDesign::UEqualsX {
            return bad("design u-equals-x needs a layered scheme".into());
        }
        if self.scheme.is_overwrite() {
            if self.adversary.strategies.is_empty() {
                return bad("overwrite schemes need at least one strategy".into());
            }
            for s in &self.adversary.strategies {
                strategy_from_spec(s).map_err(|e| HarnessError::Validation(e.to_string()))?;
            }
        } else if !self.adversary.strategies.is_empty() {
            return bad("erasure jamming takes no strategies".into());
        }
        for j in self.adversary.jam_sets.sets(&self.model) {
            self.model.check_jam_set(&j).map_err(|e| HarnessError::Validation(e.to_string()))?;
            if !matches!(self.detector.as_str(), "optimal-oracle" | "none") {
                detector_from_id(&self.detector, &self.model, &j, TypicalityParams::default())
                    .map_err(|e| HarnessError::Validation(e.to_string()))?;
            }
        }
        self.solver.validate().map_err(|e| HarnessError::Validation(e.to_string()))?;
        Ok(())
    }
}
