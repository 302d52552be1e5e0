use std::cell::OnceCell;
use std::time::Instant;

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::config::{CodeDesign, ExperimentConfig, ExperimentScheme, RateRule};
use super::metrics::{sum_half_width, MetricsRow};
use super::HarnessError;
use crate::adversary::{
    detector_from_id, erasure_jam, overwrite_jam, strategy_from_spec, Detector, JamContext, JammingStrategy, OptimalDetector, StrategySpec,
};
use crate::codec::{
    build_direct_code, build_layered_code, encode, CodeParams, CodeRef, Decoder, DirectCode, LayeredCode, Status,
    Transmission, Verdict,
};
use crate::exec::Exec;
use crate::oracle::{exact_active_marginal, innocent_block_marginal, MARGINAL_BUDGET};
use crate::probkit::{tv_distance, ConditionalKernel, Distribution, TypicalityParams};
use crate::ratesolver::{achievable_rate, solve_a, solve_b, JamSet, NetworkModel, SolutionA, SolutionB, SolverConfig};
use crate::rng;

/// Seed of one transmission: `(master, code point, hypothesis, trial)`.
pub fn trial_seed(master: u64, point: u64, hypothesis: u8, trial: u64) -> u64 {
    let k = rng::child_key(rng::derive_seed(master, "trial", point), u64::from(hypothesis));
    rng::child_key(k, trial)
}

/// One simulated transmission.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrialRecord {
    pub code_point: usize,
    pub n: usize,
    pub rate_bits: f64,
    pub gamma: f64,
    pub strategy: String,
    pub jam_set: String,
    pub hypothesis: u8,
    pub message: u128,
    pub decode_verdict: Verdict,
    pub decode_error: bool,
    pub detector_verdict: Option<u8>,
    pub wall_time_ns: u64,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ExperimentOutput {
    pub rows: Vec<MetricsRow>,
    /// Filled only when the config asks for trial records.
    pub trials: Vec<TrialRecord>,
}

fn rate_from_bound(rule: RateRule, bound: Option<f64>) -> Result<f64, HarnessError> {
    match rule {
        RateRule::Absolute(r) => Ok(r),
        RateRule::BoundMinusEpsilon(eps) => {
            let b = bound.ok_or(HarnessError::Infeasible)?;
            if b - eps <= 0.0 {
                return Err(HarnessError::Runtime(format!("bound {b} minus {eps} leaves no positive rate")));
            }
            Ok(b - eps)
        }
    }
}

/// The rate in bits that `rule` gives for `scheme` on `model`.
pub fn rate_rule_resolve(rule: RateRule, model: &NetworkModel, scheme: ExperimentScheme, cfg: &SolverConfig) -> Result<f64, HarnessError> {
    match rule {
        RateRule::Absolute(r) => Ok(r),
        RateRule::BoundMinusEpsilon(eps) => {
            let b = achievable_rate(model, scheme.rate_scheme(), eps, cfg).map_err(|e| HarnessError::Runtime(e.to_string()))?;
            rate_from_bound(rule, b.bound)
        }
    }
}

/// Solver results shared by every sweep point, computed on first use.
struct Solutions<'a> {
    model: &'a NetworkModel,
    cfg: SolverConfig,
    a: OnceCell<Result<Option<SolutionA>, String>>,
    b: OnceCell<Result<Option<SolutionB>, String>>,
}

impl Solutions<'_> {
    fn a(&self) -> Result<Option<&SolutionA>, String> {
        self.a
            .get_or_init(|| solve_a(self.model, None, &self.cfg).map(|s| s.feasible()).map_err(|e| e.to_string()))
            .as_ref()
            .map(Option::as_ref)
            .map_err(Clone::clone)
    }

    fn b(&self) -> Result<Option<&SolutionB>, String> {
        self.b
            .get_or_init(|| solve_b(self.model, &self.cfg).map(|s| s.feasible()).map_err(|e| e.to_string()))
            .as_ref()
            .map(Option::as_ref)
            .map_err(Clone::clone)
    }

    fn bound(&self, scheme: ExperimentScheme) -> Result<Option<f64>, String> {
        Ok(match scheme.rate_scheme() {
            crate::ratesolver::Scheme::Erasure => self.a()?.map(|s| s.value),
            crate::ratesolver::Scheme::Overwrite => self.b()?.map(|s| s.value),
        })
    }
}

pub(super) enum Built {
    Direct(DirectCode),
    Layered(LayeredCode),
}

impl Built {
    pub fn code_ref(&self) -> CodeRef<'_> {
        match self {
            Built::Direct(c) => CodeRef::Direct(c),
            Built::Layered(c) => CodeRef::Layered(c),
        }
    }
}

fn infeasible() -> String {
    "infeasible".to_string()
}

fn build(cfg: &ExperimentConfig, sol: &Solutions<'_>, params: CodeParams) -> Result<Built, String> {
    let model = &cfg.model;
    let opts = cfg.code.options;
    let e = |x: crate::codec::CodecError| x.to_string();
    let identity = || ConditionalKernel::identity(model.alphabet_size()).map_err(|x| x.to_string());
    match (cfg.scheme.is_layered(), cfg.code.design) {
        (false, CodeDesign::Solve) => {
            let b = sol.b()?.ok_or_else(infeasible)?;
            build_direct_code(&b.p_x, params, opts).map(Built::Direct).map_err(e)
        }
        (false, _) => build_direct_code(model.innocent(), params, opts).map(Built::Direct).map_err(e),
        (true, CodeDesign::Solve) => {
            let a = sol.a()?.ok_or_else(infeasible)?;
            build_layered_code(&a.p_u, &a.kernel, model.link_alphabet_sizes(), params, opts).map(Built::Layered).map_err(e)
        }
        (true, CodeDesign::UEqualsX) => {
            let b = sol.b()?.ok_or_else(infeasible)?;
            build_layered_code(&b.p_x.to_distribution(), &identity()?, model.link_alphabet_sizes(), params, opts)
                .map(Built::Layered)
                .map_err(e)
        }
        (true, CodeDesign::Innocent) => {
            let p_u: Distribution = model.innocent().to_distribution();
            build_layered_code(&p_u, &identity()?, model.link_alphabet_sizes(), params, opts).map(Built::Layered).map_err(e)
        }
    }
}

/// What one (code point, jam set) contributes to a row.
#[derive(Clone, Debug, Default)]
struct PerJam {
    errors: [u64; 2],
    /// False alarms and misses.
    detection: Option<[u64; 2]>,
    gap: Option<f64>,
    notes: Vec<String>,
}

#[derive(Clone)]
struct Trial {
    message: u128,
    verdict: Verdict,
    error: bool,
    wall: u64,
}

struct PointRun<'a> {
    cfg: &'a ExperimentConfig,
    point: u64,
    code: CodeRef<'a>,
    decoder: Decoder,
    exec: Exec,
}

impl PointRun<'_> {
    fn transmission(&self, h: u8, i: u64) -> Result<Transmission, String> {
        let ts = trial_seed(self.cfg.master_seed, self.point, h, i);
        let c = self.code.code();
        let tx_seed = rng::derive_seed(ts, "encode", 0);
        let r = if h == 0 {
            encode(c, &self.cfg.model, Status::Innocent, 0, tx_seed)
        } else {
            let m = rng::stream(ts, "message", 0).random_range(1..=c.params().messages());
            encode(c, &self.cfg.model, Status::Active, m, tx_seed)
        };
        r.map_err(|e| e.to_string())
    }

    fn decode_trials(&self, j: &JamSet, strategy: Option<&dyn JammingStrategy>, h: u8) -> Result<Vec<Trial>, String> {
        let ctx = JamContext { model: &self.cfg.model, code: self.code, j };
        let timed = self.cfg.record_trials;
        let out = self.exec.map(0..self.cfg.trials, |i| -> Result<Trial, String> {
            let start = timed.then(Instant::now);
            let tx = self.transmission(h, i)?;
            let rx = match strategy {
                None => erasure_jam(&tx, j),
                Some(s) => {
                    let seed = rng::derive_seed(trial_seed(self.cfg.master_seed, self.point, h, i), "jam", 0);
                    overwrite_jam(&tx, s, &ctx, seed).map_err(|e| e.to_string())?
                }
            };
            let verdict = self.decoder.decode(self.code, &rx, &self.cfg.model).map_err(|e| e.to_string())?.verdict;
            let expect = if h == 0 { Verdict::Innocent } else { Verdict::Message(tx.message) };
            let wall = start.map_or(0, |s| s.elapsed().as_nanos() as u64);
            Ok(Trial { message: tx.message, verdict, error: verdict != expect, wall })
        });
        out.into_iter().collect()
    }

    fn detect_trials(&self, j: &JamSet, detector: &dyn Detector, h: u8) -> Result<Vec<u8>, String> {
        let out = self.exec.map(0..self.cfg.trials, |i| -> Result<u8, String> {
            let tx = self.transmission(h, i)?;
            detector.verdict(&tx.restrict(j)).map_err(|e| e.to_string())
        });
        out.into_iter().collect()
    }

    /// Exact gap and the detector for `j`; both may be unavailable.
    fn stealth(&self, j: &JamSet, gamma: f64, notes: &mut Vec<String>) -> (Option<f64>, Option<Box<dyn Detector>>) {
        let n = self.code.code().params().n();
        let exact = exact_active_marginal(self.code, j, MARGINAL_BUDGET)
            .and_then(|a| Ok((a, innocent_block_marginal(&self.cfg.model, j, n, MARGINAL_BUDGET)?)));
        let gap = exact.as_ref().ok().map(|(a, i)| tv_distance(a.mass(), i.mass()));
        let detector: Option<Box<dyn Detector>> = match self.cfg.detector.as_str() {
            "none" => None,
            "optimal-oracle" => match exact {
                Ok((a, i)) => OptimalDetector::new(i, a).ok().map(|d| Box::new(d) as Box<dyn Detector>),
                Err(e) => {
                    notes.push(format!("no optimal-oracle detector on {j}: {e}"));
                    None
                }
            },
            id => match TypicalityParams::new(gamma).map_err(|e| e.to_string()).and_then(|tp| {
                detector_from_id(id, &self.cfg.model, j, tp).map_err(|e| e.to_string())
            }) {
                Ok(d) => Some(d),
                Err(e) => {
                    notes.push(e);
                    None
                }
            },
        };
        (gap, detector)
    }
}

pub(super) fn jam_label(spec: Option<&StrategySpec>) -> String {
    spec.map_or_else(|| "erasure".to_string(), ToString::to_string)
}

fn failure_row(cfg: &ExperimentConfig, n: usize, rate: Option<f64>, gamma: f64, strategy: String, reason: &str) -> MetricsRow {
    MetricsRow {
        scheme: cfg.scheme.name().to_string(),
        n,
        rate_bits: rate,
        gamma,
        jam_rule: cfg.adversary.jam_sets.name().to_string(),
        jam_set: String::new(),
        strategy,
        trials: cfg.trials,
        p_err_hat: None,
        p_err_ci: None,
        alpha_hat: None,
        beta_hat: None,
        ab_ci: None,
        stealth_gap: None,
        status: format!("failed: {reason}"),
        p_err_innocent: None,
        p_err_active: None,
    }
}

/// One `(n, rate rule, gamma)` point of a sweep with its code, or the reason
/// it could not be built.
pub(super) struct CodePoint {
    pub index: u64,
    pub n: usize,
    pub gamma: f64,
    pub rate: Option<f64>,
    pub built: Result<Built, String>,
}

impl CodePoint {
    pub fn decoder(&self, scheme: ExperimentScheme) -> Result<Decoder, HarnessError> {
        let tp = TypicalityParams::new(self.gamma).map_err(|e| HarnessError::Validation(e.to_string()))?;
        Ok(match scheme {
            ExperimentScheme::ErasureLayered => Decoder::Erasure(tp),
            ExperimentScheme::OverwriteDirect => Decoder::Overwrite,
            ExperimentScheme::LayeredUnderOverwrite => Decoder::LayeredOverwrite(tp),
        })
    }
}

/// Visits the sweep points of a validated `cfg` in order: n, then rate rule,
/// then gamma. The index keys the codebook and trial seeds.
pub(super) fn for_each_point(cfg: &ExperimentConfig, exec: Exec, mut f: impl FnMut(CodePoint) -> Result<(), HarnessError>) -> Result<(), HarnessError> {
    let sol = Solutions { model: &cfg.model, cfg: SolverConfig { exec, ..cfg.solver.clone() }, a: OnceCell::new(), b: OnceCell::new() };
    let mut index = 0u64;
    for &n in &cfg.code.n {
        for &rule in &cfg.code.rates {
            for &gamma in &cfg.gamma {
                let rate = match rule {
                    RateRule::Absolute(r) => Ok(r),
                    RateRule::BoundMinusEpsilon(_) => sol.bound(cfg.scheme).map_err(HarnessError::Runtime).and_then(|b| rate_from_bound(rule, b)),
                };
                let point = match rate {
                    Ok(rate) => {
                        let seed = rng::derive_seed(cfg.master_seed, "codebook", index);
                        let built = CodeParams::new(n, rate, seed).map_err(|e| e.to_string()).and_then(|p| build(cfg, &sol, p));
                        CodePoint { index, n, gamma, rate: Some(rate), built }
                    }
                    Err(HarnessError::Infeasible) => CodePoint { index, n, gamma, rate: None, built: Err(infeasible()) },
                    Err(e) => CodePoint { index, n, gamma, rate: None, built: Err(e.to_string()) },
                };
                f(point)?;
                index += 1;
            }
        }
    }
    Ok(())
}

pub(super) fn strategy_list(cfg: &ExperimentConfig) -> Vec<Option<StrategySpec>> {
    if cfg.scheme.is_overwrite() {
        cfg.adversary.strategies.iter().cloned().map(Some).collect()
    } else {
        vec![None]
    }
}

/// Runs every sweep point of `cfg`. Module failures become failed rows; only
/// an invalid configuration is an error.
pub fn run_experiment(cfg: &ExperimentConfig, exec: Exec) -> Result<ExperimentOutput, HarnessError> {
    cfg.validate()?;
    let strategies = strategy_list(cfg);
    let sets = cfg.adversary.jam_sets.sets(&cfg.model);
    let mut out = ExperimentOutput::default();
    for_each_point(cfg, exec, |point| {
        let built = match &point.built {
            Ok(b) => b,
            Err(reason) => {
                for s in &strategies {
                    out.rows.push(failure_row(cfg, point.n, point.rate, point.gamma, jam_label(s.as_ref()), reason));
                }
                return Ok(());
            }
        };
        let rate = point.rate.expect("built codes have a rate");
        let run = PointRun { cfg, point: point.index, code: built.code_ref(), decoder: point.decoder(cfg.scheme)?, exec };
        run_point(&run, &sets, &strategies, point.n, rate, point.gamma, &mut out);
        Ok(())
    })?;
    Ok(out)
}

#[allow(clippy::too_many_arguments)]
fn run_point(
    run: &PointRun<'_>,
    sets: &[JamSet],
    strategies: &[Option<StrategySpec>],
    n: usize,
    rate: f64,
    gamma: f64,
    out: &mut ExperimentOutput,
) {
    let cfg = run.cfg;
    // detection and exact gaps do not depend on the strategy
    let mut stealth = Vec::with_capacity(sets.len());
    for j in sets {
        let mut notes = Vec::new();
        let (gap, detector) = run.stealth(j, gamma, &mut notes);
        let verdicts = detector.map(|d| -> Result<[Vec<u8>; 2], String> { Ok([run.detect_trials(j, d.as_ref(), 0)?, run.detect_trials(j, d.as_ref(), 1)?]) });
        let verdicts = match verdicts.transpose() {
            Ok(v) => v,
            Err(e) => {
                notes.push(e);
                None
            }
        };
        stealth.push((gap, verdicts, notes));
    }
    // with nothing jammed, every overwrite strategy is the identity
    let mut unjammed: Option<Result<[Vec<Trial>; 2], String>> = None;
    for spec in strategies {
        let strategy = spec.as_ref().map(|s| strategy_from_spec(s).expect("validated"));
        let mut per = Vec::with_capacity(sets.len());
        let mut failure = None;
        for (j, (gap, verdicts, notes)) in sets.iter().zip(&stealth) {
            let trials = |run: &PointRun<'_>| -> Result<[Vec<Trial>; 2], String> {
                Ok([run.decode_trials(j, strategy.as_deref(), 0)?, run.decode_trials(j, strategy.as_deref(), 1)?])
            };
            let res = if j.is_empty() && strategy.is_some() {
                unjammed.get_or_insert_with(|| trials(run)).clone()
            } else {
                trials(run)
            };
            let trials = match res {
                Ok(t) => t,
                Err(e) => {
                    failure = Some(e);
                    break;
                }
            };
            if cfg.record_trials {
                for (h, ts) in trials.iter().enumerate() {
                    for (i, t) in ts.iter().enumerate() {
                        out.trials.push(TrialRecord {
                            code_point: run.point as usize,
                            n,
                            rate_bits: rate,
                            gamma,
                            strategy: jam_label(spec.as_ref()),
                            jam_set: j.to_string(),
                            hypothesis: h as u8,
                            message: t.message,
                            decode_verdict: t.verdict,
                            decode_error: t.error,
                            detector_verdict: verdicts.as_ref().map(|v| v[h][i]),
                            wall_time_ns: t.wall,
                        });
                    }
                }
            }
            let count = |ts: &[Trial]| ts.iter().filter(|t| t.error).count() as u64;
            per.push(PerJam {
                errors: [count(&trials[0]), count(&trials[1])],
                detection: verdicts.as_ref().map(|v| {
                    [v[0].iter().filter(|&&x| x == 1).count() as u64, v[1].iter().filter(|&&x| x == 0).count() as u64]
                }),
                gap: *gap,
                notes: notes.clone(),
            });
        }
        let label = jam_label(spec.as_ref());
        match failure {
            Some(reason) => out.rows.push(failure_row(cfg, n, Some(rate), gamma, label, &reason)),
            None => out.rows.push(aggregate(cfg, sets, &per, n, rate, gamma, label)),
        }
    }
}

/// Worst case over the jam sets: the largest error rate, the smallest
/// `alpha + beta` and the largest exact gap, each from its own maximising set.
fn aggregate(cfg: &ExperimentConfig, sets: &[JamSet], per: &[PerJam], n: usize, rate: f64, gamma: f64, strategy: String) -> MetricsRow {
    let t = cfg.trials;
    let tf = t as f64;
    let p_err = |p: &PerJam| (p.errors[0] + p.errors[1]) as f64 / tf;
    let mut worst = 0;
    for (k, p) in per.iter().enumerate() {
        if p_err(p) > p_err(&per[worst]) {
            worst = k;
        }
    }
    let w = &per[worst];
    let mut ab: Option<(f64, [u64; 2])> = None;
    for d in per.iter().filter_map(|p| p.detection) {
        let s = (d[0] + d[1]) as f64 / tf;
        if ab.is_none_or(|(b, _)| s < b) {
            ab = Some((s, d));
        }
    }
    let gap = per.iter().map(|p| p.gap).try_fold(0.0f64, |acc, g| g.map(|g| acc.max(g)));
    let mut notes: Vec<String> = per.iter().flat_map(|p| p.notes.iter().cloned()).collect();
    notes.dedup();
    if per.iter().any(|p| p.detection.is_none()) && per.iter().any(|p| p.detection.is_some()) {
        notes.push("alpha/beta over the jam sets with a detector only".to_string());
    }
    MetricsRow {
        scheme: cfg.scheme.name().to_string(),
        n,
        rate_bits: Some(rate),
        gamma,
        jam_rule: cfg.adversary.jam_sets.name().to_string(),
        jam_set: sets[worst].to_string(),
        strategy,
        trials: t,
        p_err_hat: Some(p_err(w)),
        p_err_ci: Some(sum_half_width(w.errors[0], t, w.errors[1], t)),
        alpha_hat: ab.map(|(_, d)| d[0] as f64 / tf),
        beta_hat: ab.map(|(_, d)| d[1] as f64 / tf),
        ab_ci: ab.map(|(_, d)| sum_half_width(d[0], t, d[1], t)),
        stealth_gap: gap,
        status: if notes.is_empty() { "ok".to_string() } else { notes.join("; ") },
        p_err_innocent: Some(w.errors[0] as f64 / tf),
        p_err_active: Some(w.errors[1] as f64 / tf),
    }
}
