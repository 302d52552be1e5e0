use serde::{Deserialize, Serialize};

use super::{solve_a, solve_b, NetworkModel, RateError, Solved, SolverConfig};

/// Which jamming model a rate is meant for.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scheme {
    /// Layered code, uses the (A) bound.
    Erasure,
    /// Direct code, uses the (B) bound.
    Overwrite,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RateBound {
    /// `bound - epsilon`, never negative.
    pub rate: f64,
    /// The solver value, absent when infeasible.
    pub bound: Option<f64>,
    pub clamped: bool,
    pub infeasible: bool,
}

/// `K_upper - epsilon` for erasure jamming, `K_lower - epsilon` for overwrite
/// jamming, clamped at zero.
pub fn achievable_rate(model: &NetworkModel, scheme: Scheme, epsilon: f64, cfg: &SolverConfig) -> Result<RateBound, RateError> {
    if !(epsilon > 0.0 && epsilon.is_finite()) {
        return Err(RateError::BadConfig(format!("epsilon must be positive, got {epsilon}")));
    }
    let bound = match scheme {
        Scheme::Erasure => match solve_a(model, None, cfg)? {
            Solved::Feasible(s) => Some(s.value),
            Solved::Infeasible(_) => None,
        },
        Scheme::Overwrite => match solve_b(model, cfg)? {
            Solved::Feasible(s) => Some(s.value),
            Solved::Infeasible(_) => None,
        },
    };
    Ok(match bound {
        Some(b) => RateBound { rate: (b - epsilon).max(0.0), bound: Some(b), clamped: b - epsilon < 0.0, infeasible: false },
        None => RateBound { rate: 0.0, bound: None, clamped: true, infeasible: true },
    })
}
