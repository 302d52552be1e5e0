use serde::{Deserialize, Serialize};

use super::config::ExperimentConfig;
use super::run::{for_each_point, jam_label, strategy_list};
use super::HarnessError;
use crate::exec::Exec;
use crate::oracle::{exact_error_probability, exhaustive_best_detector, Jamming, ERROR_BUDGET, MARGINAL_BUDGET};

/// Exact stealth figures of one (code point, jam set).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScanRow {
    pub scheme: String,
    pub n: usize,
    pub rate_bits: Option<f64>,
    pub gamma: f64,
    pub jam_set: String,
    /// Size of `X_J^n`.
    pub observations: Option<u64>,
    pub stealth_gap: Option<f64>,
    /// Errors of the optimal detector.
    pub best_alpha: Option<f64>,
    pub best_beta: Option<f64>,
    pub status: String,
}

/// Exact error probability of one (code point, strategy, jam set).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OracleRow {
    pub scheme: String,
    pub n: usize,
    pub rate_bits: Option<f64>,
    pub gamma: f64,
    pub jam_set: String,
    pub strategy: String,
    pub p_err: Option<f64>,
    pub p_err_innocent: Option<f64>,
    pub p_err_active: Option<f64>,
    /// Decoder calls the enumeration made.
    pub states: Option<u64>,
    pub status: String,
}

/// Exact gap and optimal detector for every code point and jam set of `cfg`,
/// with no Monte Carlo. Points beyond the enumeration budget get a status.
pub fn stealth_scan(cfg: &ExperimentConfig, exec: Exec) -> Result<Vec<ScanRow>, HarnessError> {
    cfg.validate()?;
    let sets = cfg.adversary.jam_sets.sets(&cfg.model);
    let mut rows = Vec::new();
    for_each_point(cfg, exec, |p| {
        for j in &sets {
            let mut row = ScanRow {
                scheme: cfg.scheme.name().to_string(),
                n: p.n,
                rate_bits: p.rate,
                gamma: p.gamma,
                jam_set: j.to_string(),
                observations: None,
                stealth_gap: None,
                best_alpha: None,
                best_beta: None,
                status: "ok".to_string(),
            };
            match &p.built {
                Err(reason) => row.status = format!("failed: {reason}"),
                Ok(b) => match exhaustive_best_detector(b.code_ref(), &cfg.model, j, MARGINAL_BUDGET) {
                    Ok(d) => {
                        row.observations = u64::try_from(d.observations).ok();
                        row.stealth_gap = Some(1.0 - d.one_minus_gap);
                        row.best_alpha = Some(d.alpha);
                        row.best_beta = Some(d.beta);
                    }
                    Err(e) => row.status = format!("failed: {e}"),
                },
            }
            rows.push(row);
        }
        Ok(())
    })?;
    Ok(rows)
}

/// Exact error probabilities for every code point, strategy and jam set of `cfg`.
pub fn oracle_scan(cfg: &ExperimentConfig, exec: Exec) -> Result<Vec<OracleRow>, HarnessError> {
    cfg.validate()?;
    let sets = cfg.adversary.jam_sets.sets(&cfg.model);
    let strategies = strategy_list(cfg);
    let mut rows = Vec::new();
    for_each_point(cfg, exec, |p| {
        let decoder = p.decoder(cfg.scheme)?;
        for s in &strategies {
            let jamming = match s {
                Some(spec) => Jamming::Overwrite { strategy: spec.clone() },
                None => Jamming::Erasure,
            };
            for j in &sets {
                let mut row = OracleRow {
                    scheme: cfg.scheme.name().to_string(),
                    n: p.n,
                    rate_bits: p.rate,
                    gamma: p.gamma,
                    jam_set: j.to_string(),
                    strategy: jam_label(s.as_ref()),
                    p_err: None,
                    p_err_innocent: None,
                    p_err_active: None,
                    states: None,
                    status: "ok".to_string(),
                };
                match &p.built {
                    Err(reason) => row.status = format!("failed: {reason}"),
                    Ok(b) => match exact_error_probability(b.code_ref(), &cfg.model, j, &jamming, decoder, ERROR_BUDGET, exec) {
                        Ok(e) => {
                            row.p_err = Some(e.total);
                            row.p_err_innocent = Some(e.innocent);
                            row.p_err_active = Some(e.active);
                            row.states = u64::try_from(e.states).ok();
                        }
                        Err(e) => row.status = format!("failed: {e}"),
                    },
                }
                rows.push(row);
            }
        }
        Ok(())
    })?;
    Ok(rows)
}
