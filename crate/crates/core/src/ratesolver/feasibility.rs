use serde::{Deserialize, Serialize};

use super::{JamSet, NetworkModel, RateError};
use crate::probkit::{entropy_bits, marginal_mass, tv_distance, ConditionalKernel, Distribution, JointDistribution};

/// Default tolerance on marginal matching (total variation).
pub const DEFAULT_TOL_MARG: f64 = 1e-9;
/// Default strict-inequality margin in bits.
pub const DEFAULT_DELTA_FEAS: f64 = 1e-3;

/// One jam set's line of a feasibility table.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FeasibilityRow {
    pub jam_set: JamSet,
    /// Total variation between the candidate's and the innocent marginal on `J`.
    pub marginal_gap: f64,
    /// `H(X_J)` for (B), `I(U;X_J)` for (A).
    pub leaked: f64,
    /// `H(X_{J^c})` for (B), `I(U;X_{J^c})` for (A).
    pub retained: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FeasibilityReport {
    pub rows: Vec<FeasibilityRow>,
    /// `min_J retained`.
    pub value: f64,
    /// `min_J retained - max_J leaked`.
    pub margin: f64,
    pub max_marginal_gap: f64,
    pub tol_marg: f64,
    pub delta_feas: f64,
    pub passed: bool,
}

impl FeasibilityReport {
    fn from_rows(rows: Vec<FeasibilityRow>, tol_marg: f64, delta_feas: f64) -> Self {
        let value = rows.iter().map(|r| r.retained).fold(f64::INFINITY, f64::min);
        let leaked = rows.iter().map(|r| r.leaked).fold(f64::NEG_INFINITY, f64::max);
        let max_marginal_gap = rows.iter().map(|r| r.marginal_gap).fold(0.0, f64::max);
        let margin = value - leaked;
        FeasibilityReport {
            passed: max_marginal_gap <= tol_marg && margin > delta_feas,
            rows,
            value,
            margin,
            max_marginal_gap,
            tol_marg,
            delta_feas,
        }
    }
}

/// Checks a candidate `P_X` against the marginal constraints and the strict
/// entropy inequality.
pub fn check_feasibility_b(
    p_x: &JointDistribution,
    model: &NetworkModel,
    tol_marg: f64,
    delta_feas: f64,
) -> Result<FeasibilityReport, RateError> {
    if p_x.factor_sizes() != model.link_alphabet_sizes() {
        return Err(RateError::AlphabetMismatch);
    }
    let sizes = model.link_alphabet_sizes();
    let c = model.link_count();
    let rows = model
        .jam_family()
        .iter()
        .map(|j| {
            let mj = marginal_mass(sizes, p_x.mass(), j.links());
            let mjc = marginal_mass(sizes, p_x.mass(), &j.complement(c));
            FeasibilityRow {
                jam_set: j.clone(),
                marginal_gap: tv_distance(&mj, &model.innocent_marginal(j)),
                leaked: entropy_bits(&mj),
                retained: entropy_bits(&mjc),
            }
        })
        .collect();
    Ok(FeasibilityReport::from_rows(rows, tol_marg, delta_feas))
}

/// Checks a candidate `(P_U, P_{X|U})` against the induced marginal
/// constraints and the strict mutual-information inequality.
pub fn check_feasibility_a(
    p_u: &Distribution,
    kernel: &ConditionalKernel,
    model: &NetworkModel,
    tol_marg: f64,
    delta_feas: f64,
) -> Result<FeasibilityReport, RateError> {
    if kernel.output_size() != model.alphabet_size() {
        return Err(RateError::AlphabetMismatch);
    }
    let joint = kernel.joint_with(p_u)?;
    Ok(feasibility_a_from_joint(joint.mass(), p_u.alphabet_size(), model, tol_marg, delta_feas))
}

pub(crate) fn feasibility_a_from_joint(
    q: &[f64],
    u_size: usize,
    model: &NetworkModel,
    tol_marg: f64,
    delta_feas: f64,
) -> FeasibilityReport {
    let c = model.link_count();
    let mut sizes = vec![u_size];
    sizes.extend_from_slice(model.link_alphabet_sizes());
    let h_u = entropy_bits(&marginal_mass(&sizes, q, &[0]));
    let info = |links: &[usize]| -> (Vec<f64>, f64) {
        let shifted: Vec<usize> = links.iter().map(|l| l + 1).collect();
        let mx = marginal_mass(&sizes, q, &shifted);
        let mut with_u = vec![0];
        with_u.extend(&shifted);
        let mux = marginal_mass(&sizes, q, &with_u);
        let i = (h_u + entropy_bits(&mx) - entropy_bits(&mux)).max(0.0);
        (mx, i)
    };
    let rows = model
        .jam_family()
        .iter()
        .map(|j| {
            let (mj, leaked) = info(j.links());
            let (_, retained) = info(&j.complement(c));
            FeasibilityRow {
                jam_set: j.clone(),
                marginal_gap: tv_distance(&mj, &model.innocent_marginal(j)),
                leaked,
                retained,
            }
        })
        .collect();
    FeasibilityReport::from_rows(rows, tol_marg, delta_feas)
}
