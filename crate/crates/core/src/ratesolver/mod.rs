//! Achievable-rate bounds.
//!
//! Two max-min programs over the stealth-constrained set:
//!
//! * [`solve_b`] maximizes `min_J H(X_{J^c})` over `P_X` whose size-`<= Z`
//!   marginals equal the innocent ones. Its value is the overwrite-jamming rate
//!   bound `K_lower`.
//! * [`solve_a`] adds an auxiliary `U` and maximizes `min_J I(U;X_{J^c})`.
//!   Its value is the erasure-jamming rate bound `K_upper`.
//!
//! The strict inequality separating retained from leaked information is
//! enforced as a margin greater than `delta_feas`.

mod feasibility;
mod jamsets;
mod model;
mod project;
mod rate;
mod solve_a;
mod solve_b;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use feasibility::{
    check_feasibility_a, check_feasibility_b, FeasibilityReport, FeasibilityRow, DEFAULT_DELTA_FEAS, DEFAULT_TOL_MARG,
};
pub use jamsets::{enumerate_jam_sets, JamSet, JamSetFamily};
pub use model::NetworkModel;
pub use rate::{achievable_rate, RateBound, Scheme};
pub use solve_a::{cardinality_bound, solve_a, SolutionA};
pub use solve_b::{solve_b, SolutionB};

use crate::exec::Exec;
use crate::probkit::ProbError;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum RateError {
    #[error(transparent)]
    Prob(#[from] ProbError),
    #[error("the network needs at least one link")]
    NoLinks,
    #[error("adversary budget Z={z} needs 2Z < C (C={c})")]
    BudgetTooLarge { z: usize, c: usize },
    #[error("product alphabet of size {0} is too large")]
    AlphabetTooLarge(usize),
    #[error("distribution alphabets do not match the model")]
    AlphabetMismatch,
    #[error("jam set of size {size} exceeds budget {budget}")]
    JamSetTooLarge { size: usize, budget: usize },
    #[error("link {link} out of range for {links} links")]
    LinkOutOfRange { link: usize, links: usize },
    #[error("auxiliary alphabet must be non-empty")]
    EmptyAuxiliary,
    #[error("invalid solver configuration: {0}")]
    BadConfig(String),
    #[error("numerical failure: {0}")]
    Numerical(String),
}

/// Knobs shared by both solvers.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolverConfig {
    pub restarts: usize,
    pub opt_tol: f64,
    pub tol_marg: f64,
    pub delta_feas: f64,
    pub seed: u64,
    /// Iteration cap per softmin temperature of the (B) ascent.
    pub max_iters: usize,
    /// Cap on alternating rounds of the (A) ascent.
    pub max_outer_a: usize,
    #[serde(skip)]
    pub exec: Exec,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            restarts: 32,
            opt_tol: 1e-3,
            tol_marg: DEFAULT_TOL_MARG,
            delta_feas: DEFAULT_DELTA_FEAS,
            seed: 0,
            max_iters: 500,
            max_outer_a: 200,
            exec: Exec::default(),
        }
    }
}

impl SolverConfig {
    pub fn with_seed(seed: u64) -> Self {
        SolverConfig { seed, ..SolverConfig::default() }
    }

    pub fn validate(&self) -> Result<(), RateError> {
        let bad = |m: &str| Err(RateError::BadConfig(m.to_string()));
        if self.restarts == 0 {
            return bad("restarts must be positive");
        }
        if !(self.opt_tol > 0.0 && self.tol_marg > 0.0 && self.delta_feas >= 0.0) {
            return bad("tolerances must be positive");
        }
        if self.max_iters == 0 || self.max_outer_a == 0 {
            return bad("iteration caps must be positive");
        }
        Ok(())
    }
}

/// How a solution was found.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SolverMeta {
    pub seed: u64,
    pub restarts: usize,
    pub iterations: usize,
    pub best_restart: usize,
}

/// Why no feasible point was returned.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct InfeasibleReport {
    pub best_value: Option<f64>,
    pub best_margin: Option<f64>,
    pub restarts: usize,
    pub reason: String,
}

/// Solver outcome: infeasibility is a result, not an error.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum Solved<S> {
    Feasible(S),
    Infeasible(InfeasibleReport),
}

impl<S> Solved<S> {
    pub fn feasible(self) -> Option<S> {
        match self {
            Solved::Feasible(s) => Some(s),
            Solved::Infeasible(_) => None,
        }
    }

    pub fn as_feasible(&self) -> Option<&S> {
        match self {
            Solved::Feasible(s) => Some(s),
            Solved::Infeasible(_) => None,
        }
    }
}
