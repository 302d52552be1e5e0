use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::{check_budget, OracleError, BRUTE_FORCE_OBSERVATIONS, MARGINAL_BUDGET};
use crate::codec::{CodeRef, CodecError, StealthCode};
use crate::probkit::{counts_typical, tv_distance, BlockDistribution, TypicalityParams};
use crate::ratesolver::{JamSet, NetworkModel};

fn jammed_sizes(code: &dyn StealthCode, j: &JamSet) -> Result<Vec<usize>, OracleError> {
    if let Some(l) = j.max_link().filter(|&l| l >= code.link_count()) {
        return Err(CodecError::BadJamSet(JamSet::new(vec![l])).into());
    }
    Ok(j.links().iter().map(|&l| code.link_sizes()[l]).collect())
}

fn check_model(code: &dyn StealthCode, model: &NetworkModel, j: &JamSet) -> Result<(), OracleError> {
    if code.link_sizes() != model.link_alphabet_sizes() {
        return Err(CodecError::AlphabetMismatch.into());
    }
    model.check_jam_set(j)?;
    Ok(())
}

/// The codebook-averaged law of `x_J`: `(1/N) sum_m P(x_J | m)`, where for a
/// layered code `P(x_J | u(m))` is the per-position product of kernel rows.
pub fn exact_active_marginal(code: CodeRef<'_>, j: &JamSet, budget: u128) -> Result<BlockDistribution, OracleError> {
    let c = code.code();
    let sizes = jammed_sizes(c, j)?;
    let n = c.params().n();
    let blocks = check_budget("n-letter marginal", BlockDistribution::block_count(&sizes, n), budget)? as usize;
    let messages = c.params().messages();
    check_budget("codebook enumeration", Some(messages), budget)?;
    let k: usize = sizes.iter().product();
    let mut mass = vec![0.0; blocks];
    match code {
        CodeRef::Direct(d) => {
            let comps = d.link_count();
            let mut counts = vec![0u64; blocks];
            d.book().for_each(messages, |_, w| {
                let idx = (0..n).fold(0usize, |acc, t| {
                    let step = j.links().iter().zip(&sizes).fold(0usize, |a, (&l, &s)| a * s + w[t * comps + l] as usize);
                    acc * k + step
                });
                counts[idx] += 1;
            })?;
            for (m, &cnt) in mass.iter_mut().zip(&counts) {
                *m = cnt as f64 / messages as f64;
            }
        }
        CodeRef::Layered(l) => {
            let mut distinct: BTreeMap<Vec<u16>, u64> = BTreeMap::new();
            l.book().for_each(messages, |_, w| *distinct.entry(w.to_vec()).or_insert(0) += 1)?;
            let rows = l.restricted_kernel(j);
            for (u, cnt) in distinct {
                let mut law = vec![1.0];
                for &s in &u {
                    let row = &rows[s as usize];
                    law = law.iter().flat_map(|&a| row.iter().map(move |&b| a * b)).collect();
                }
                let w = cnt as f64 / messages as f64;
                for (m, p) in mass.iter_mut().zip(law) {
                    *m += w * p;
                }
            }
        }
    }
    Ok(BlockDistribution::new(sizes, n, mass)?)
}

/// `n`-fold product of the innocent marginal on `j`.
pub fn innocent_block_marginal(model: &NetworkModel, j: &JamSet, n: usize, budget: u128) -> Result<BlockDistribution, OracleError> {
    model.check_jam_set(j)?;
    let sizes: Vec<usize> = j.links().iter().map(|&l| model.link_alphabet_sizes()[l]).collect();
    check_budget("n-letter marginal", BlockDistribution::block_count(&sizes, n), budget)?;
    Ok(BlockDistribution::iid(sizes, n, &model.innocent_marginal(j))?)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct StealthGap {
    pub gap: f64,
    pub observations: u128,
}

/// `V(P^_{X_J}, P^inn_{X_J})` over `n`-letter blocks.
pub fn exact_stealth_gap(code: CodeRef<'_>, model: &NetworkModel, j: &JamSet, budget: u128) -> Result<StealthGap, OracleError> {
    check_model(code.code(), model, j)?;
    let active = exact_active_marginal(code, j, budget)?;
    let innocent = innocent_block_marginal(model, j, code.code().params().n(), budget)?;
    Ok(StealthGap { gap: tv_distance(active.mass(), innocent.mass()), observations: active.mass().len() as u128 })
}

/// False-alarm and missed-detection probabilities of the detector that says
/// active exactly where `active_set` is true.
pub fn detector_errors(innocent: &[f64], active: &[f64], active_set: &[bool]) -> (f64, f64) {
    let mut alpha = 0.0;
    let mut beta = 0.0;
    for ((&pi, &pa), &flag) in innocent.iter().zip(active).zip(active_set) {
        if flag {
            alpha += pi;
        } else {
            beta += pa;
        }
    }
    (alpha, beta)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BestDetector {
    pub alpha: f64,
    pub beta: f64,
    pub sum: f64,
    /// `1 - V`, computed separately as a cross-check.
    pub one_minus_gap: f64,
    pub observations: u128,
    /// Whether every deterministic detector was tried (else the pointwise rule).
    pub exhaustive: bool,
}

/// Tries all `2^|obs|` deterministic detectors; the first minimiser wins.
pub fn brute_force_best_detector(innocent: &[f64], active: &[f64]) -> Result<BestDetector, OracleError> {
    let obs = innocent.len();
    if obs != active.len() {
        return Err(crate::adversary::AdversaryError::MarginalMismatch.into());
    }
    if obs > BRUTE_FORCE_OBSERVATIONS {
        return Err(OracleError::Budget { what: "detector enumeration", states: 1u128 << obs.min(127), budget: 1 << BRUTE_FORCE_OBSERVATIONS });
    }
    let mut best = (f64::INFINITY, 0.0, 0.0);
    let mut set = vec![false; obs];
    for mask in 0u32..(1u32 << obs) {
        for (i, f) in set.iter_mut().enumerate() {
            *f = mask >> i & 1 == 1;
        }
        let (a, b) = detector_errors(innocent, active, &set);
        if a + b < best.0 {
            best = (a + b, a, b);
        }
    }
    Ok(BestDetector {
        alpha: best.1,
        beta: best.2,
        sum: best.0,
        one_minus_gap: 1.0 - tv_distance(active, innocent),
        observations: obs as u128,
        exhaustive: true,
    })
}

/// Minimum of `alpha + beta` over deterministic detectors on `x_J`: by full
/// enumeration when there are at most 16 observations, otherwise by the
/// pointwise rule (active where `P^ > P^inn`).
pub fn exhaustive_best_detector(code: CodeRef<'_>, model: &NetworkModel, j: &JamSet, budget: u128) -> Result<BestDetector, OracleError> {
    check_model(code.code(), model, j)?;
    let active = exact_active_marginal(code, j, budget.min(MARGINAL_BUDGET))?;
    let obs = check_budget("detector observation space", Some(active.mass().len() as u128), budget)?;
    let innocent = innocent_block_marginal(model, j, code.code().params().n(), budget)?;
    if obs as usize <= BRUTE_FORCE_OBSERVATIONS {
        return brute_force_best_detector(innocent.mass(), active.mass());
    }
    let set: Vec<bool> = active.mass().iter().zip(innocent.mass()).map(|(a, i)| a > i).collect();
    let (alpha, beta) = detector_errors(innocent.mass(), active.mass(), &set);
    Ok(BestDetector {
        alpha,
        beta,
        sum: alpha + beta,
        one_minus_gap: 1.0 - tv_distance(active.mass(), innocent.mass()),
        observations: obs,
        exhaustive: false,
    })
}

/// The stealth gap split over typical and atypical blocks `x_J` (typical for
/// the innocent law on `J`).
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GapPartition {
    pub total: f64,
    /// `1/2 sum_{typical} |P^ - P^inn|`
    pub typical: f64,
    /// `1/2 sum_{atypical} |P^ - P^inn|`
    pub atypical: f64,
    /// `1/2 (P^(atypical) + P^inn(atypical))`, the triangle-inequality bound on `atypical`.
    pub atypical_bound: f64,
    pub typical_mass_active: f64,
    pub typical_mass_innocent: f64,
}

pub fn typicality_partition(
    code: CodeRef<'_>,
    model: &NetworkModel,
    j: &JamSet,
    tp: TypicalityParams,
    budget: u128,
) -> Result<GapPartition, OracleError> {
    check_model(code.code(), model, j)?;
    let n = code.code().params().n();
    let active = exact_active_marginal(code, j, budget)?;
    let innocent = innocent_block_marginal(model, j, n, budget)?;
    let law = model.innocent_marginal(j);
    let k = law.len();
    let mut part = GapPartition {
        total: tv_distance(active.mass(), innocent.mass()),
        typical: 0.0,
        atypical: 0.0,
        atypical_bound: 0.0,
        typical_mass_active: 0.0,
        typical_mass_innocent: 0.0,
    };
    let mut counts = vec![0u64; k];
    for (idx, (&pa, &pi)) in active.mass().iter().zip(innocent.mass()).enumerate() {
        counts.iter_mut().for_each(|c| *c = 0);
        let mut rest = idx;
        for _ in 0..n {
            counts[rest % k] += 1;
            rest /= k;
        }
        let d = 0.5 * (pa - pi).abs();
        if counts_typical(&counts, n, &law, tp.gamma()) {
            part.typical += d;
            part.typical_mass_active += pa;
            part.typical_mass_innocent += pi;
        } else {
            part.atypical += d;
            part.atypical_bound += 0.5 * (pa + pi);
        }
    }
    Ok(part)
}
