use serde::{Deserialize, Serialize};

/// One sweep point's outcome. The first fourteen fields are the CSV columns
/// in order; `status` and the per-hypothesis error rates follow.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricsRow {
    pub scheme: String,
    pub n: usize,
    pub rate_bits: Option<f64>,
    pub gamma: f64,
    pub jam_rule: String,
    pub jam_set: String,
    pub strategy: String,
    pub trials: u64,
    /// `P(M^ != 0 | T=0) + P(M^ != M | T=1)`, estimated.
    pub p_err_hat: Option<f64>,
    pub p_err_ci: Option<f64>,
    pub alpha_hat: Option<f64>,
    pub beta_hat: Option<f64>,
    /// Half-width for `alpha_hat + beta_hat`.
    pub ab_ci: Option<f64>,
    pub stealth_gap: Option<f64>,
    /// `ok`, or why some metrics are missing.
    pub status: String,
    pub p_err_innocent: Option<f64>,
    pub p_err_active: Option<f64>,
}

/// 95% normal-approximation half-width for `k` successes in `trials`; at 0
/// or `trials` successes the rule-of-three bound `3 / trials` instead.
pub fn binomial_half_width(k: u64, trials: u64) -> f64 {
    if trials == 0 {
        return f64::INFINITY;
    }
    let t = trials as f64;
    if k == 0 || k == trials {
        return 3.0 / t;
    }
    let p = k as f64 / t;
    1.96 * (p * (1.0 - p) / t).sqrt()
}

/// Half-width for the sum of two independent frequencies.
pub fn sum_half_width(k0: u64, t0: u64, k1: u64, t1: u64) -> f64 {
    binomial_half_width(k0, t0).hypot(binomial_half_width(k1, t1))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn half_widths() {
        assert_eq!(binomial_half_width(0, 100), 0.03);
        assert_eq!(binomial_half_width(100, 100), 0.03);
        assert!((binomial_half_width(50, 100) - 0.098).abs() < 1e-12);
        assert!((sum_half_width(0, 100, 0, 100) - 0.03 * 2f64.sqrt()).abs() < 1e-15);
    }
}
