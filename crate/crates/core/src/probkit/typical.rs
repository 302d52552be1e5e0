use serde::{Deserialize, Serialize};

use super::{Distribution, JointDistribution, ProbError, SymbolSequence};

/// Default typicality slack for desk-scale blocklengths.
pub const DEFAULT_GAMMA: f64 = 0.1;

/// Slack of the gamma-strongly typical sets.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "f64", into = "f64")]
pub struct TypicalityParams {
    gamma: f64,
}

impl TypicalityParams {
    pub fn new(gamma: f64) -> Result<Self, ProbError> {
        if !(gamma > 0.0 && gamma.is_finite()) {
            return Err(ProbError::BadGamma(gamma));
        }
        Ok(TypicalityParams { gamma })
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }
}

impl Default for TypicalityParams {
    fn default() -> Self {
        TypicalityParams { gamma: DEFAULT_GAMMA }
    }
}

impl TryFrom<f64> for TypicalityParams {
    type Error = ProbError;
    fn try_from(g: f64) -> Result<Self, ProbError> {
        TypicalityParams::new(g)
    }
}

impl From<TypicalityParams> for f64 {
    fn from(t: TypicalityParams) -> f64 {
        t.gamma
    }
}

/// Strong-typicality test on raw occurrence counts: no occurrences of
/// zero-probability symbols, and `sum |N(x)/n - P(x)| <= gamma`.
pub fn counts_typical(counts: &[u64], n: usize, probs: &[f64], gamma: f64) -> bool {
    let n = n as f64;
    let mut dev = 0.0;
    for (&c, &p) in counts.iter().zip(probs) {
        if p == 0.0 && c > 0 {
            return false;
        }
        dev += (c as f64 / n - p).abs();
    }
    dev <= gamma + 1e-12
}

/// Membership in the gamma-strongly typical set of `d`.
///
/// A symbol outside `d`'s alphabet is treated as having probability zero.
pub fn is_strongly_typical(s: &SymbolSequence, d: &Distribution, tp: TypicalityParams) -> bool {
    if s.is_empty() {
        return false;
    }
    let mut counts = vec![0u64; d.alphabet_size()];
    for &x in s.as_slice() {
        match counts.get_mut(x as usize) {
            Some(c) => *c += 1,
            None => return false,
        }
    }
    counts_typical(&counts, s.len(), d.mass(), tp.gamma())
}

/// Membership of the pair `(su, sx)` in the gamma-strongly jointly typical set
/// of the two-factor joint `j` (factor 0 pairs with `su`, factor 1 with `sx`).
pub fn is_jointly_typical(
    su: &SymbolSequence,
    sx: &SymbolSequence,
    j: &JointDistribution,
    tp: TypicalityParams,
) -> Result<bool, ProbError> {
    if su.len() != sx.len() {
        return Err(ProbError::LengthMismatch { left: su.len(), right: sx.len() });
    }
    if j.factor_count() != 2 {
        return Err(ProbError::SizeMismatch { expected: 2, found: j.factor_count() });
    }
    if su.is_empty() {
        return Ok(false);
    }
    let (ku, kx) = (j.factor_sizes()[0], j.factor_sizes()[1]);
    let mut counts = vec![0u64; ku * kx];
    for (&u, &x) in su.as_slice().iter().zip(sx.as_slice()) {
        let (u, x) = (u as usize, x as usize);
        if u >= ku || x >= kx {
            return Ok(false);
        }
        counts[u * kx + x] += 1;
    }
    Ok(counts_typical(&counts, su.len(), j.mass(), tp.gamma()))
}

/// `N(x; s) / n` for every symbol of a `k`-ary alphabet.
pub fn empirical_type(s: &SymbolSequence, alphabet_size: usize) -> Result<Distribution, ProbError> {
    if s.is_empty() {
        return Err(ProbError::EmptySequence);
    }
    let mut counts = vec![0u64; alphabet_size];
    for &x in s.as_slice() {
        *counts.get_mut(x as usize).ok_or(ProbError::SymbolOutOfRange { symbol: x as usize, alphabet_size })? += 1;
    }
    let n = s.len() as f64;
    Distribution::new(counts.into_iter().map(|c| c as f64 / n).collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn seq(v: &[u16]) -> SymbolSequence {
        SymbolSequence::from(v.to_vec())
    }

    #[test]
    fn exact_type_is_typical() {
        let d = Distribution::new(vec![0.5, 0.25, 0.25]).unwrap();
        let tp = TypicalityParams::new(1e-9).unwrap();
        assert!(is_strongly_typical(&seq(&[0, 1, 0, 2]), &d, tp));
    }

    #[test]
    fn zero_probability_symbol_is_atypical() {
        let d = Distribution::new(vec![0.5, 0.5, 0.0]).unwrap();
        let tp = TypicalityParams::new(10.0).unwrap();
        assert!(!is_strongly_typical(&seq(&[0, 1, 2, 0]), &d, tp));
    }

    #[test]
    fn deviation_sum_rule() {
        // |3/4 - 1/2| + |1/4 - 1/2| = 0.5
        let d = Distribution::uniform(2).unwrap();
        assert!(!is_strongly_typical(&seq(&[0, 0, 0, 1]), &d, TypicalityParams::new(0.4).unwrap()));
        assert!(is_strongly_typical(&seq(&[0, 0, 0, 1]), &d, TypicalityParams::new(0.5).unwrap()));
    }

    #[test]
    fn joint_typicality_cases() {
        let diag = JointDistribution::new(vec![2, 2], vec![0.5, 0.0, 0.0, 0.5]).unwrap();
        let tp = TypicalityParams::new(0.1).unwrap();
        let u = seq(&[0, 1, 0, 1]);
        assert!(is_jointly_typical(&u, &u, &diag, tp).unwrap());
        // (0,1) has zero joint mass
        assert!(!is_jointly_typical(&u, &seq(&[1, 1, 0, 1]), &diag, tp).unwrap());
        // Both marginals exactly uniform, joint counts far from the independent joint.
        let indep = JointDistribution::new(vec![2, 2], vec![0.25; 4]).unwrap();
        let x = seq(&[0, 1, 0, 1]);
        let d = Distribution::uniform(2).unwrap();
        assert!(is_strongly_typical(&u, &d, tp) && is_strongly_typical(&x, &d, tp));
        assert!(!is_jointly_typical(&u, &x, &indep, tp).unwrap());
        // permuting x to [0,0,1,1] gives the pairs (0,0),(1,0),(0,1),(1,1): exact
        assert!(is_jointly_typical(&u, &seq(&[0, 0, 1, 1]), &indep, tp).unwrap());
        assert!(is_jointly_typical(&u, &seq(&[0, 1]), &indep, tp).is_err());
    }

    #[test]
    fn empirical_types() {
        assert_eq!(empirical_type(&seq(&[0, 1, 0, 1]), 2).unwrap().mass(), &[0.5, 0.5]);
        assert_eq!(empirical_type(&seq(&[0, 0, 0]), 2).unwrap().mass(), &[1.0, 0.0]);
        assert_eq!(empirical_type(&seq(&[0, 0, 1, 2]), 3).unwrap().mass(), &[0.5, 0.25, 0.25]);
        assert!(empirical_type(&seq(&[]), 3).is_err());
        assert!(TypicalityParams::new(0.0).is_err());
    }
}
