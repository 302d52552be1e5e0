use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::{Distribution as _, Exp1};
use serde::{Deserialize, Serialize};

use super::project::Polytope;
use super::{check_feasibility_b, FeasibilityReport, NetworkModel, RateError, Solved, SolverConfig, SolverMeta};
use crate::probkit::{entropy_bits, flat_index, unflatten, JointDistribution};
use crate::rng;

/// Softmin temperatures, in bits, visited in order.
const TEMPERATURES: [f64; 7] = [0.1, 0.03, 0.01, 3e-3, 1e-3, 3e-4, 1e-4];
const STEP_START: f64 = 0.5;
const STEP_MIN: f64 = 1e-12;
const MIN_GAIN: f64 = 1e-8;
const STALL_LIMIT: usize = 20;
const IPF_SWEEPS: usize = 2000;
const GRAD_CAP: f64 = 60.0;

/// A maximizer of `min_J H(X_{J^c})` over distributions matching the innocent
/// marginals of every jam set.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SolutionB {
    pub p_x: JointDistribution,
    pub value: f64,
    pub feasibility_margin: f64,
    pub report: FeasibilityReport,
    pub meta: SolverMeta,
}

/// The marginal-matching polytope restricted to atoms that can carry mass.
pub(crate) struct MarginalPolytope {
    pub sizes: Vec<usize>,
    /// Atoms of the product alphabet whose every jam-set marginal is positive.
    pub support: Vec<usize>,
    pub poly: Polytope,
    /// For each jam set `J`: the marginal index of `x_{J^c}` for every support atom.
    retained_index: Vec<Vec<usize>>,
    retained_len: Vec<usize>,
    /// `(marginal index per support atom, innocent marginal)` for every nonempty `J`.
    constraints: Vec<(Vec<usize>, Vec<f64>)>,
}

fn projection_index(sizes: &[usize], links: &[usize], atom: usize) -> usize {
    let sym = unflatten(sizes, atom);
    let sub_sizes: Vec<usize> = links.iter().map(|&l| sizes[l]).collect();
    let sub: Vec<usize> = links.iter().map(|&l| sym[l]).collect();
    flat_index(&sub_sizes, &sub)
}

impl MarginalPolytope {
    pub fn new(model: &NetworkModel) -> Result<Self, RateError> {
        let sizes = model.link_alphabet_sizes().to_vec();
        let family = model.jam_family();
        let total = model.alphabet_size();
        let marginals: Vec<Vec<f64>> = family.iter().map(|j| model.innocent_marginal(j)).collect();
        let support: Vec<usize> = (0..total)
            .filter(|&x| {
                family.iter().zip(&marginals).all(|(j, m)| m[projection_index(&sizes, j.links(), x)] > 0.0)
            })
            .collect();
        let mut rows: Vec<Vec<f64>> = Vec::new();
        let mut rhs = Vec::new();
        let mut constraints = Vec::new();
        for (j, m) in family.iter().zip(&marginals) {
            let idx: Vec<usize> = support.iter().map(|&x| projection_index(&sizes, j.links(), x)).collect();
            for (xj, &target) in m.iter().enumerate() {
                if target > 0.0 {
                    rows.push(idx.iter().map(|&i| if i == xj { 1.0 } else { 0.0 }).collect());
                    rhs.push(target);
                }
            }
            if !j.is_empty() {
                constraints.push((idx, m.clone()));
            }
        }
        let a = DMatrix::from_fn(rows.len(), support.len(), |r, c| rows[r][c]);
        let poly = Polytope::new(a, DVector::from_vec(rhs))?;
        let c = model.link_count();
        let mut retained_index = Vec::new();
        let mut retained_len = Vec::new();
        for j in family.iter() {
            let comp = j.complement(c);
            retained_index.push(support.iter().map(|&x| projection_index(&sizes, &comp, x)).collect());
            retained_len.push(model.alphabet_size_of(&comp));
        }
        Ok(MarginalPolytope { sizes, support, poly, retained_index, retained_len, constraints })
    }

    pub fn scatter(&self, p: &[f64]) -> Vec<f64> {
        let mut full = vec![0.0; self.sizes.iter().product()];
        for (&x, &v) in self.support.iter().zip(p) {
            full[x] = v;
        }
        full
    }

    fn retained_marginal(&self, k: usize, p: &[f64]) -> Vec<f64> {
        let mut m = vec![0.0; self.retained_len[k]];
        for (&i, &v) in self.retained_index[k].iter().zip(p) {
            m[i] += v;
        }
        m
    }

    /// `H(X_{J^c})` for every jam set, in family order.
    pub fn retained_entropies(&self, p: &[f64]) -> Vec<f64> {
        (0..self.retained_index.len()).map(|k| entropy_bits(&self.retained_marginal(k, p))).collect()
    }

    fn softmin(&self, p: &[f64], tau: f64) -> f64 {
        let h = self.retained_entropies(p);
        let lo = h.iter().copied().fold(f64::INFINITY, f64::min);
        let s: f64 = h.iter().map(|v| (-(v - lo) / tau).exp()).sum();
        lo - tau * s.ln()
    }

    fn softmin_gradient(&self, p: &[f64], tau: f64) -> Vec<f64> {
        let h = self.retained_entropies(p);
        let lo = h.iter().copied().fold(f64::INFINITY, f64::min);
        let w: Vec<f64> = h.iter().map(|v| (-(v - lo) / tau).exp()).collect();
        let z: f64 = w.iter().sum();
        let mut g = vec![0.0; p.len()];
        for (k, wk) in w.iter().enumerate() {
            if *wk / z < 1e-15 {
                continue;
            }
            let m = self.retained_marginal(k, p);
            for (gi, &i) in g.iter_mut().zip(&self.retained_index[k]) {
                let d = if m[i] > 0.0 { (-m[i].log2()).min(GRAD_CAP) } else { GRAD_CAP };
                *gi += wk / z * d;
            }
        }
        g
    }

    /// The maximum-entropy point of the polytope, by iterative proportional fitting.
    pub fn max_entropy_point(&self) -> Vec<f64> {
        let mut p = vec![1.0 / self.support.len() as f64; self.support.len()];
        for _ in 0..IPF_SWEEPS {
            let mut change: f64 = 0.0;
            for (idx, target) in &self.constraints {
                let mut m = vec![0.0; target.len()];
                for (&i, &v) in idx.iter().zip(&p) {
                    m[i] += v;
                }
                for (v, &i) in p.iter_mut().zip(idx) {
                    if m[i] > 0.0 {
                        let nv = *v * target[i] / m[i];
                        change = change.max((nv - *v).abs());
                        *v = nv;
                    }
                }
            }
            if change < 1e-15 {
                break;
            }
        }
        self.poly.project(&p)
    }

    /// Projected ascent on the softmin of the retained entropies, annealing the
    /// temperature. Returns the final point and the number of iterations.
    pub fn ascend(&self, mut p: Vec<f64>, max_iters: usize) -> (Vec<f64>, usize) {
        let mut iters = 0;
        for &tau in &TEMPERATURES {
            let mut f = self.softmin(&p, tau);
            let mut stall = 0;
            for _ in 0..max_iters {
                iters += 1;
                let g = self.softmin_gradient(&p, tau);
                let mut step = STEP_START;
                let mut gain = None;
                while step > STEP_MIN {
                    let trial: Vec<f64> = p.iter().zip(&g).map(|(a, b)| a + step * b).collect();
                    let cand = self.poly.project(&trial);
                    let fc = self.softmin(&cand, tau);
                    if fc > f {
                        gain = Some(fc - f);
                        p = cand;
                        f = fc;
                        break;
                    }
                    step *= 0.5;
                }
                match gain {
                    None => break,
                    Some(d) if d < MIN_GAIN => {
                        stall += 1;
                        if stall >= STALL_LIMIT {
                            break;
                        }
                    }
                    Some(_) => stall = 0,
                }
            }
        }
        (p, iters)
    }
}

struct Candidate {
    full: Vec<f64>,
    value: f64,
    margin: f64,
    gap_ok: bool,
    iterations: usize,
}

/// Maximizes `min_J H(X_{J^c})` subject to every jam-set marginal matching the
/// innocent one and `min_J H(X_{J^c}) - max_J H(X_J) > delta_feas`.
pub fn solve_b(model: &NetworkModel, cfg: &SolverConfig) -> Result<Solved<SolutionB>, RateError> {
    cfg.validate()?;
    if model.bypasses_budget_check() && 2 * model.adversary_budget() >= model.link_count() {
        return Err(RateError::BudgetTooLarge { z: model.adversary_budget(), c: model.link_count() });
    }
    let mp = MarginalPolytope::new(model)?;
    let center = mp.max_entropy_point();
    let leaked_max = model
        .jam_family()
        .iter()
        .map(|j| entropy_bits(&model.innocent_marginal(j)))
        .fold(0.0, f64::max);

    let run = |r: u64| -> Candidate {
        let start = if r == 0 {
            center.clone()
        } else {
            let mut g = rng::stream(cfg.seed, "solve-b-restart", r);
            let raw: Vec<f64> = (0..mp.support.len()).map(|_| Exp1.sample(&mut g)).collect();
            let t: f64 = raw.iter().sum();
            let proj = mp.poly.project(&raw.iter().map(|v| v / t).collect::<Vec<_>>());
            let lambda = g.random_range(0.2..0.8);
            proj.iter().zip(&center).map(|(a, b)| lambda * a + (1.0 - lambda) * b).collect()
        };
        let (p, iterations) = mp.ascend(start, cfg.max_iters);
        let value = mp.retained_entropies(&p).into_iter().fold(f64::INFINITY, f64::min);
        let full = mp.scatter(&p);
        let gap_ok = mp.poly.residual(&p) <= cfg.tol_marg;
        Candidate { full, value, margin: value - leaked_max, gap_ok, iterations }
    };
    let cands = cfg.exec.map(0..cfg.restarts as u64, run);
    let iterations = cands.iter().map(|c| c.iterations).sum();

    let best = pick_best(cands.iter().enumerate().filter(|(_, c)| c.gap_ok && c.margin > cfg.delta_feas).map(|(i, c)| (i, c.value, &c.full)));
    let Some(best) = best else {
        let top = cands.iter().max_by(|a, b| a.margin.total_cmp(&b.margin)).expect("at least one restart");
        return Ok(Solved::Infeasible(super::InfeasibleReport {
            best_value: Some(top.value),
            best_margin: Some(top.margin),
            restarts: cfg.restarts,
            reason: format!("no restart reached a margin above {} bits", cfg.delta_feas),
        }));
    };
    let c = &cands[best];
    let p_x = JointDistribution::new(mp.sizes.clone(), c.full.clone())?;
    let report = check_feasibility_b(&p_x, model, cfg.tol_marg, cfg.delta_feas)?;
    Ok(Solved::Feasible(SolutionB {
        value: report.value,
        feasibility_margin: report.margin,
        p_x,
        report,
        meta: SolverMeta { seed: cfg.seed, restarts: cfg.restarts, iterations, best_restart: best },
    }))
}

/// Highest value after rounding to 1e-9; ties go to the lexicographically
/// smallest mass vector, then the lowest restart index.
pub(crate) fn pick_best<'a>(items: impl Iterator<Item = (usize, f64, &'a Vec<f64>)>) -> Option<usize> {
    let key = |v: f64| (v * 1e9).round() as i64;
    let mut best: Option<(usize, i64, &Vec<f64>)> = None;
    for (i, v, m) in items {
        let k = key(v);
        let better = match &best {
            None => true,
            Some((_, bk, bm)) => k > *bk || (k == *bk && lex_less(m, bm)),
        };
        if better {
            best = Some((i, k, m));
        }
    }
    best.map(|b| b.0)
}

fn lex_less(a: &[f64], b: &[f64]) -> bool {
    a.iter().zip(b).find(|(x, y)| x != y).is_some_and(|(x, y)| x < y)
}
