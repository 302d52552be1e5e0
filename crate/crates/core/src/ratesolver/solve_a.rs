use nalgebra::{DMatrix, DVector};
use rand_distr::{Distribution as _, Exp1};
use serde::{Deserialize, Serialize};

use super::project::Polytope;
use super::solve_b::{pick_best, MarginalPolytope};
use super::{
    check_feasibility_a, solve_b, FeasibilityReport, InfeasibleReport, NetworkModel, RateError, Solved, SolverConfig,
    SolverMeta,
};
use crate::probkit::{entropy_bits, flat_index, marginal_mass, unflatten, ConditionalKernel, Distribution};
use crate::rng;

const TAU: f64 = 1e-3;
const STEP_START: f64 = 0.5;
const STEP_MIN: f64 = 1e-10;
const MIN_GAIN: f64 = 1e-8;
const STALL_LIMIT: usize = 20;
const INNER_STEPS: usize = 3;
const GRAD_CAP: f64 = 60.0;
const PROJ_TOL: f64 = 1e-12;

/// `|X| + 2|family| - 1`: an auxiliary alphabet this large loses nothing.
pub fn cardinality_bound(alphabet_size: usize, jam_family_size: usize) -> usize {
    alphabet_size + 2 * jam_family_size - 1
}

/// A feasible `(P_U, P_{X|U})` for the auxiliary-variable program.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SolutionA {
    pub p_u: Distribution,
    pub kernel: ConditionalKernel,
    /// `min_J I(U;X_{J^c})`.
    pub value: f64,
    pub feasibility_margin: f64,
    pub report: FeasibilityReport,
    pub meta: SolverMeta,
}

struct Problem {
    k: usize,
    nx: usize,
    sizes_ux: Vec<usize>,
    /// Link sets `(J, J^c)` in family order.
    parts: Vec<(Vec<usize>, Vec<usize>)>,
    /// Atom to `x_S` index for each `S` in `parts` (leaked then retained).
    proj: Vec<(Vec<usize>, Vec<usize>)>,
    /// Nonempty jam sets: atom to `x_J` index and the innocent marginal.
    targets: Vec<(Vec<usize>, Vec<f64>)>,
    support: Vec<usize>,
    delta: f64,
}

#[derive(Clone)]
struct State {
    pu: Vec<f64>,
    kern: Vec<f64>,
}

struct Eval {
    leaked: Vec<f64>,
    retained: Vec<f64>,
}

impl Eval {
    fn value(&self) -> f64 {
        self.retained.iter().copied().fold(f64::INFINITY, f64::min)
    }
    fn margin(&self) -> f64 {
        self.value() - self.leaked.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }
}

fn soft_weights(v: &[f64], sign: f64) -> (f64, Vec<f64>) {
    // sign = 1 for softmin, -1 for softmax
    let lo = v.iter().map(|x| sign * x).fold(f64::INFINITY, f64::min);
    let w: Vec<f64> = v.iter().map(|x| (-(sign * x - lo) / TAU).exp()).collect();
    let z: f64 = w.iter().sum();
    (sign * (lo - TAU * z.ln()), w.into_iter().map(|x| x / z).collect())
}

fn atom_projection(sizes: &[usize], links: &[usize], atom: usize) -> usize {
    let sym = unflatten(sizes, atom);
    let sub_sizes: Vec<usize> = links.iter().map(|&l| sizes[l]).collect();
    flat_index(&sub_sizes, &links.iter().map(|&l| sym[l]).collect::<Vec<_>>())
}

impl Problem {
    fn new(model: &NetworkModel, k: usize, support: Vec<usize>, delta: f64) -> Self {
        let sizes = model.link_alphabet_sizes();
        let nx = model.alphabet_size();
        let c = model.link_count();
        let family = model.jam_family();
        let parts: Vec<(Vec<usize>, Vec<usize>)> =
            family.iter().map(|j| (j.links().to_vec(), j.complement(c))).collect();
        let map = |links: &[usize]| (0..nx).map(|x| atom_projection(sizes, links, x)).collect::<Vec<_>>();
        let proj = parts.iter().map(|(a, b)| (map(a), map(b))).collect();
        let targets = family
            .iter()
            .filter(|j| !j.is_empty())
            .map(|j| (map(j.links()), model.innocent_marginal(j)))
            .collect();
        let mut sizes_ux = vec![k];
        sizes_ux.extend_from_slice(sizes);
        Problem { k, nx, sizes_ux, parts, proj, targets, support, delta }
    }

    fn joint(&self, s: &State) -> Vec<f64> {
        let mut q = vec![0.0; self.k * self.nx];
        for u in 0..self.k {
            for x in 0..self.nx {
                q[u * self.nx + x] = s.pu[u] * s.kern[u * self.nx + x];
            }
        }
        q
    }

    /// `I(U;X_S)` and, if asked, its gradient in the joint `q(u, x)`.
    fn info(&self, q: &[f64], q_u: &[f64], h_u: f64, links: &[usize], atom_to_s: &[usize], grad: Option<&mut [f64]>, w: f64) -> f64 {
        let shifted: Vec<usize> = links.iter().map(|l| l + 1).collect();
        let q_s = marginal_mass(&self.sizes_ux, q, &shifted);
        let mut with_u = vec![0];
        with_u.extend(&shifted);
        let q_us = marginal_mass(&self.sizes_ux, q, &with_u);
        let i = (h_u + entropy_bits(&q_s) - entropy_bits(&q_us)).max(0.0);
        if let Some(g) = grad {
            let ns = q_s.len();
            let lg = |v: f64| if v > 0.0 { v.log2() } else { -GRAD_CAP };
            for u in 0..self.k {
                for x in 0..self.nx {
                    let xs = atom_to_s[x];
                    let d = (lg(q_us[u * ns + xs]) - lg(q_u[u]) - lg(q_s[xs])).clamp(-GRAD_CAP, GRAD_CAP);
                    g[u * self.nx + x] += w * d;
                }
            }
        }
        i
    }

    fn evaluate(&self, s: &State) -> Eval {
        let q = self.joint(s);
        let h_u = entropy_bits(&s.pu);
        let mut leaked = Vec::new();
        let mut retained = Vec::new();
        for ((a, b), (pa, pb)) in self.parts.iter().zip(&self.proj) {
            leaked.push(self.info(&q, &s.pu, h_u, a, pa, None, 0.0));
            retained.push(self.info(&q, &s.pu, h_u, b, pb, None, 0.0));
        }
        Eval { leaked, retained }
    }

    /// Smoothed objective of the current phase; `None` if `s` would leave phase two.
    fn score(&self, s: &State, phase_two: bool) -> Option<f64> {
        let e = self.evaluate(s);
        if phase_two {
            (e.margin() > self.delta).then(|| soft_weights(&e.retained, 1.0).0)
        } else {
            Some(soft_weights(&e.retained, 1.0).0 - soft_weights(&e.leaked, -1.0).0)
        }
    }

    /// Gradient of the phase objective in the joint `q(u, x)`.
    fn joint_gradient(&self, s: &State, phase_two: bool) -> Vec<f64> {
        let q = self.joint(s);
        let h_u = entropy_bits(&s.pu);
        let e = self.evaluate(s);
        let mut g = vec![0.0; q.len()];
        let (_, wr) = soft_weights(&e.retained, 1.0);
        for (k, w) in wr.iter().enumerate() {
            if *w > 1e-15 {
                self.info(&q, &s.pu, h_u, &self.parts[k].1, &self.proj[k].1, Some(&mut g), *w);
            }
        }
        if !phase_two {
            let (_, wl) = soft_weights(&e.leaked, -1.0);
            for (k, w) in wl.iter().enumerate() {
                if *w > 1e-15 && !self.parts[k].0.is_empty() {
                    self.info(&q, &s.pu, h_u, &self.parts[k].0, &self.proj[k].0, Some(&mut g), -*w);
                }
            }
        }
        g
    }

    /// Constraints on the kernel (support atoms only) for fixed `P_U`.
    fn kernel_polytope(&self, pu: &[f64]) -> Result<Polytope, RateError> {
        let ns = self.support.len();
        let cols = self.k * ns;
        let mut rows: Vec<Vec<f64>> = Vec::new();
        let mut rhs = Vec::new();
        for u in 0..self.k {
            let mut r = vec![0.0; cols];
            r[u * ns..(u + 1) * ns].iter_mut().for_each(|v| *v = 1.0);
            rows.push(r);
            rhs.push(1.0);
        }
        for (map, target) in &self.targets {
            for (xj, &t) in target.iter().enumerate() {
                if t <= 0.0 {
                    continue;
                }
                let mut r = vec![0.0; cols];
                for u in 0..self.k {
                    for (i, &x) in self.support.iter().enumerate() {
                        if map[x] == xj {
                            r[u * ns + i] = pu[u];
                        }
                    }
                }
                rows.push(r);
                rhs.push(t);
            }
        }
        Polytope::new(DMatrix::from_fn(rows.len(), cols, |r, c| rows[r][c]), DVector::from_vec(rhs))
    }

    /// Constraints on `P_U` for a fixed kernel.
    fn pu_polytope(&self, kern: &[f64]) -> Result<Polytope, RateError> {
        let mut rows = vec![vec![1.0; self.k]];
        let mut rhs = vec![1.0];
        for (map, target) in &self.targets {
            for (xj, &t) in target.iter().enumerate() {
                if t <= 0.0 {
                    continue;
                }
                let r: Vec<f64> = (0..self.k)
                    .map(|u| (0..self.nx).filter(|&x| map[x] == xj).map(|x| kern[u * self.nx + x]).sum())
                    .collect();
                rows.push(r);
                rhs.push(t);
            }
        }
        Polytope::new(DMatrix::from_fn(rows.len(), self.k, |r, c| rows[r][c]), DVector::from_vec(rhs))
    }

    fn pack_kernel(&self, kern: &[f64]) -> Vec<f64> {
        (0..self.k).flat_map(|u| self.support.iter().map(move |&x| kern[u * self.nx + x])).collect()
    }

    fn unpack_kernel(&self, packed: &[f64]) -> Vec<f64> {
        let ns = self.support.len();
        let mut kern = vec![0.0; self.k * self.nx];
        for u in 0..self.k {
            for (i, &x) in self.support.iter().enumerate() {
                kern[u * self.nx + x] = packed[u * ns + i];
            }
        }
        kern
    }

    /// Up to [`INNER_STEPS`] backtracking projected-ascent steps on one block.
    fn block_ascent(
        &self,
        s: &mut State,
        f: &mut f64,
        phase_two: bool,
        on_kernel: bool,
    ) -> Result<bool, RateError> {
        let poly = if on_kernel { self.kernel_polytope(&s.pu)? } else { self.pu_polytope(&s.kern)? };
        let mut moved = false;
        for _ in 0..INNER_STEPS {
            let gq = self.joint_gradient(s, phase_two);
            let (x, g): (Vec<f64>, Vec<f64>) = if on_kernel {
                let g: Vec<f64> = (0..self.k * self.nx).map(|i| s.pu[i / self.nx] * gq[i]).collect();
                (self.pack_kernel(&s.kern), self.pack_kernel(&g))
            } else {
                let g = (0..self.k)
                    .map(|u| (0..self.nx).map(|x| s.kern[u * self.nx + x] * gq[u * self.nx + x]).sum())
                    .collect();
                (s.pu.clone(), g)
            };
            let mut step = STEP_START;
            let mut accepted = false;
            while step > STEP_MIN {
                let trial: Vec<f64> = x.iter().zip(&g).map(|(a, b)| a + step * b).collect();
                let cand_x = poly.project(&trial);
                if poly.residual(&cand_x) > PROJ_TOL {
                    step *= 0.5;
                    continue;
                }
                let cand = if on_kernel {
                    State { pu: s.pu.clone(), kern: self.unpack_kernel(&cand_x) }
                } else {
                    State { pu: cand_x, kern: s.kern.clone() }
                };
                if let Some(fc) = self.score(&cand, phase_two) {
                    if fc > *f {
                        *s = cand;
                        *f = fc;
                        accepted = true;
                        break;
                    }
                }
                step *= 0.5;
            }
            if !accepted {
                break;
            }
            moved = true;
        }
        Ok(moved)
    }

    /// Alternating ascent from `s`; returns the best state that cleared the
    /// margin, with its exact value, and the outer-iteration count.
    fn run(&self, mut s: State, max_outer: usize) -> Result<(Option<(State, f64)>, usize), RateError> {
        let mut best: Option<(State, f64)> = None;
        let keep_best = |s: &State, best: &mut Option<(State, f64)>| {
            let e = self.evaluate(s);
            if e.margin() > self.delta && best.as_ref().is_none_or(|b| e.value() > b.1) {
                *best = Some((s.clone(), e.value()));
            }
        };
        keep_best(&s, &mut best);
        let mut stall = 0;
        let mut iters = 0;
        let mut phase_two = self.evaluate(&s).margin() > self.delta;
        let mut f = self.score(&s, phase_two).unwrap_or(f64::NEG_INFINITY);
        for _ in 0..max_outer {
            iters += 1;
            let before = f;
            let a = self.block_ascent(&mut s, &mut f, phase_two, true)?;
            let b = self.block_ascent(&mut s, &mut f, phase_two, false)?;
            keep_best(&s, &mut best);
            if !phase_two && self.evaluate(&s).margin() > self.delta {
                phase_two = true;
                f = self.score(&s, true).unwrap_or(f64::NEG_INFINITY);
                stall = 0;
                continue;
            }
            if !a && !b {
                break;
            }
            if f - before < MIN_GAIN {
                stall += 1;
                if stall >= STALL_LIMIT {
                    break;
                }
            } else {
                stall = 0;
            }
        }
        Ok((best, iters))
    }
}

/// Best-effort maximization of `min_J I(U;X_{J^c})` over `(P_U, P_{X|U})` whose
/// induced jam-set marginals match the innocent ones, with
/// `min_J I(U;X_{J^c}) - max_J I(U;X_J) > delta_feas`.
///
/// The program is not concave in the pair, so the result is a feasible lower
/// bound on the optimum. Restart 0 starts from the `U = X` embedding of the
/// [`solve_b`] optimum; the others start from random feasible points.
pub fn solve_a(model: &NetworkModel, u_size: Option<usize>, cfg: &SolverConfig) -> Result<Solved<SolutionA>, RateError> {
    cfg.validate()?;
    if 2 * model.adversary_budget() >= model.link_count() {
        return Err(RateError::BudgetTooLarge { z: model.adversary_budget(), c: model.link_count() });
    }
    let family_len = model.jam_family().len();
    let k = u_size.unwrap_or_else(|| cardinality_bound(model.alphabet_size(), family_len));
    if k == 0 {
        return Err(RateError::EmptyAuxiliary);
    }
    let nx = model.alphabet_size();
    let mp = MarginalPolytope::new(model)?;
    let problem = Problem::new(model, k, mp.support.clone(), cfg.delta_feas);
    let innocent = model.innocent().mass();

    let warm = match solve_b(model, cfg)? {
        Solved::Feasible(b) => {
            let atoms: Vec<usize> = (0..nx).filter(|&x| b.p_x.mass()[x] > 0.0).collect();
            (atoms.len() <= k).then(|| {
                let mut pu = vec![0.0; k];
                let mut kern: Vec<f64> = (0..k).flat_map(|_| innocent.iter().copied()).collect();
                for (u, &x) in atoms.iter().enumerate() {
                    pu[u] = b.p_x.mass()[x];
                    kern[u * nx..(u + 1) * nx].iter_mut().for_each(|v| *v = 0.0);
                    kern[u * nx + x] = 1.0;
                }
                State { pu, kern }
            })
        }
        Solved::Infeasible(_) => None,
    };

    let run = |r: u64| -> Result<(Option<(State, f64)>, usize), RateError> {
        let start = match (&warm, r) {
            (Some(w), 0) => w.clone(),
            _ => {
                let mut g = rng::stream(cfg.seed, "solve-a-restart", r);
                let mut pu: Vec<f64> = (0..k).map(|_| Exp1.sample(&mut g)).collect();
                let t: f64 = pu.iter().sum();
                pu.iter_mut().for_each(|v| *v /= t);
                let mut kern = vec![0.0; k * nx];
                for u in 0..k {
                    for &x in &problem.support {
                        kern[u * nx + x] = Exp1.sample(&mut g);
                    }
                }
                let poly = problem.kernel_polytope(&pu)?;
                let packed = poly.project(&problem.pack_kernel(&kern));
                if poly.residual(&packed) > PROJ_TOL {
                    return Ok((None, 0));
                }
                State { pu, kern: problem.unpack_kernel(&packed) }
            }
        };
        problem.run(start, cfg.max_outer_a)
    };
    let runs = cfg.exec.map(0..cfg.restarts as u64, run);
    let mut results = Vec::with_capacity(runs.len());
    for r in runs {
        results.push(r?);
    }
    let iterations = results.iter().map(|r| r.1).sum();

    // candidates are re-checked exactly; only those that pass compete
    let mut checked: Vec<Option<(Distribution, ConditionalKernel, FeasibilityReport, Vec<f64>)>> = Vec::new();
    for (best, _) in &results {
        checked.push(best.as_ref().and_then(|(s, _)| {
            let p_u = Distribution::new(s.pu.clone()).ok()?;
            let rows = (0..k)
                .map(|u| Distribution::new(s.kern[u * nx..(u + 1) * nx].to_vec()))
                .collect::<Result<Vec<_>, _>>()
                .ok()?;
            let kernel = ConditionalKernel::new(rows).ok()?;
            let report = check_feasibility_a(&p_u, &kernel, model, cfg.tol_marg, cfg.delta_feas).ok()?;
            let key: Vec<f64> = s.pu.iter().chain(&s.kern).copied().collect();
            report.passed.then_some((p_u, kernel, report, key))
        }));
    }
    let best = pick_best(checked.iter().enumerate().filter_map(|(i, c)| c.as_ref().map(|c| (i, c.2.value, &c.3))));
    let Some(best) = best else {
        return Ok(Solved::Infeasible(InfeasibleReport {
            best_value: None,
            best_margin: None,
            restarts: cfg.restarts,
            reason: format!("no restart reached a margin above {} bits", cfg.delta_feas),
        }));
    };
    let (p_u, kernel, report, _) = checked.swap_remove(best).expect("picked a checked candidate");
    Ok(Solved::Feasible(SolutionA {
        value: report.value,
        feasibility_margin: report.margin,
        p_u,
        kernel,
        report,
        meta: SolverMeta { seed: cfg.seed, restarts: cfg.restarts, iterations, best_restart: best },
    }))
}
