//! Euclidean projection onto `{x : A x = b, x >= 0}`.
//!
//! Solved through the dual: the projection of `y` is `max(0, y + A^T l)` for the
//! multiplier `l` solving `A max(0, y + A^T l) = b`, found by a semismooth
//! Newton iteration damped on the residual norm.

use nalgebra::{DMatrix, DVector};

use super::RateError;

const MAX_NEWTON: usize = 200;
const RESIDUAL_TOL: f64 = 1e-14;
const SVD_EPS: f64 = 1e-12;

#[derive(Clone, Debug)]
pub(crate) struct Polytope {
    a: DMatrix<f64>,
    b: DVector<f64>,
}

impl Polytope {
    pub fn new(a: DMatrix<f64>, b: DVector<f64>) -> Result<Self, RateError> {
        if a.nrows() != b.len() {
            return Err(RateError::Numerical("constraint matrix and right-hand side disagree".into()));
        }
        Ok(Polytope { a, b })
    }

    /// Largest absolute constraint residual.
    pub fn residual(&self, x: &[f64]) -> f64 {
        let x = DVector::from_column_slice(x);
        (&self.a * x - &self.b).amax()
    }

    fn primal(&self, y: &DVector<f64>, lambda: &DVector<f64>) -> DVector<f64> {
        (y + self.a.tr_mul(lambda)).map(|v| v.max(0.0))
    }

    /// Nearest point of the polytope to `y`. If the polytope is empty the
    /// result violates the equalities; check [`Polytope::residual`].
    pub fn project(&self, y: &[f64]) -> Vec<f64> {
        let y = DVector::from_column_slice(y);
        let mut lambda = DVector::zeros(self.a.nrows());
        let mut x = self.primal(&y, &lambda);
        for _ in 0..MAX_NEWTON {
            let grad = &self.b - &self.a * &x;
            if grad.amax() < RESIDUAL_TOL {
                break;
            }
            let active: Vec<usize> = (0..x.len()).filter(|&i| x[i] > 0.0).collect();
            let a_act = self.a.select_columns(active.iter());
            let h = &a_act * a_act.transpose();
            let dir = match h.svd(true, true).solve(&grad, SVD_EPS) {
                Ok(d) if d.iter().all(|v| v.is_finite()) && d.norm() > 0.0 => d,
                _ => grad.clone(),
            };
            let r0 = grad.norm();
            let mut t = 1.0;
            let mut moved = false;
            while t > 1e-12 {
                let cand = &lambda + &dir * t;
                let xc = self.primal(&y, &cand);
                if (&self.b - &self.a * &xc).norm() < (1.0 - 1e-4 * t) * r0 {
                    lambda = cand;
                    x = xc;
                    moved = true;
                    break;
                }
                t *= 0.5;
            }
            if !moved {
                break;
            }
        }
        x.iter().copied().collect()
    }
}
