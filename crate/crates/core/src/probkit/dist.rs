use serde::{Deserialize, Serialize};

use super::ProbError;

/// Tolerance on the total mass of a validated distribution.
pub const PROB_TOL: f64 = 1e-12;
/// Inputs whose total mass is off by more than [`PROB_TOL`] but less than this
/// are renormalized; anything further off is rejected.
pub const RENORM_TOL: f64 = 1e-9;

fn validate_mass(mut mass: Vec<f64>) -> Result<Vec<f64>, ProbError> {
    if mass.is_empty() {
        return Err(ProbError::EmptyAlphabet);
    }
    for (i, p) in mass.iter_mut().enumerate() {
        if !p.is_finite() {
            return Err(ProbError::NonFinite { index: i });
        }
        if *p < 0.0 {
            if *p < -PROB_TOL {
                return Err(ProbError::NegativeMass { index: i, value: *p });
            }
            *p = 0.0;
        }
    }
    let total: f64 = mass.iter().sum();
    let off = (total - 1.0).abs();
    if off > RENORM_TOL {
        return Err(ProbError::BadTotal { total });
    }
    if off > PROB_TOL {
        mass.iter_mut().for_each(|p| *p /= total);
    }
    Ok(mass)
}

/// A probability mass function over `{0, .., alphabet_size - 1}`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawDistribution", into = "RawDistribution")]
pub struct Distribution {
    mass: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct RawDistribution {
    alphabet_size: usize,
    mass: Vec<f64>,
}

impl TryFrom<RawDistribution> for Distribution {
    type Error = ProbError;
    fn try_from(raw: RawDistribution) -> Result<Self, ProbError> {
        if raw.alphabet_size != raw.mass.len() {
            return Err(ProbError::SizeMismatch { expected: raw.alphabet_size, found: raw.mass.len() });
        }
        Distribution::new(raw.mass)
    }
}

impl From<Distribution> for RawDistribution {
    fn from(d: Distribution) -> Self {
        RawDistribution { alphabet_size: d.mass.len(), mass: d.mass }
    }
}

impl Distribution {
    pub fn new(mass: Vec<f64>) -> Result<Self, ProbError> {
        Ok(Distribution { mass: validate_mass(mass)? })
    }

    pub fn uniform(k: usize) -> Result<Self, ProbError> {
        if k == 0 {
            return Err(ProbError::EmptyAlphabet);
        }
        Ok(Distribution { mass: vec![1.0 / k as f64; k] })
    }

    pub fn point(k: usize, at: usize) -> Result<Self, ProbError> {
        if at >= k {
            return Err(ProbError::SymbolOutOfRange { symbol: at, alphabet_size: k });
        }
        let mut mass = vec![0.0; k];
        mass[at] = 1.0;
        Ok(Distribution { mass })
    }

    /// `P(1) = p` on a binary alphabet.
    pub fn bernoulli(p: f64) -> Result<Self, ProbError> {
        Distribution::new(vec![1.0 - p, p])
    }

    pub fn alphabet_size(&self) -> usize {
        self.mass.len()
    }

    pub fn mass(&self) -> &[f64] {
        &self.mass
    }

    pub fn prob(&self, symbol: usize) -> f64 {
        self.mass.get(symbol).copied().unwrap_or(0.0)
    }

    pub fn into_mass(self) -> Vec<f64> {
        self.mass
    }

    /// Shannon entropy in bits, `0 log 0 = 0`.
    pub fn entropy(&self) -> f64 {
        let h = entropy_bits(&self.mass);
        h.clamp(0.0, (self.mass.len() as f64).log2())
    }
}

/// `-sum p log2 p` over a raw mass slice.
pub(crate) fn entropy_bits(mass: &[f64]) -> f64 {
    let h: f64 = mass.iter().filter(|&&p| p > 0.0).map(|&p| -p * p.log2()).sum();
    h.max(0.0)
}

/// A joint distribution over a product of finite alphabets, row-major
/// (the last factor varies fastest).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawJoint", into = "RawJoint")]
pub struct JointDistribution {
    factor_sizes: Vec<usize>,
    mass: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct RawJoint {
    alphabet_size: usize,
    factor_sizes: Vec<usize>,
    mass: Vec<f64>,
}

impl TryFrom<RawJoint> for JointDistribution {
    type Error = ProbError;
    fn try_from(raw: RawJoint) -> Result<Self, ProbError> {
        if raw.alphabet_size != raw.mass.len() {
            return Err(ProbError::SizeMismatch { expected: raw.alphabet_size, found: raw.mass.len() });
        }
        JointDistribution::new(raw.factor_sizes, raw.mass)
    }
}

impl From<JointDistribution> for RawJoint {
    fn from(j: JointDistribution) -> Self {
        RawJoint { alphabet_size: j.mass.len(), factor_sizes: j.factor_sizes, mass: j.mass }
    }
}

impl JointDistribution {
    pub fn new(factor_sizes: Vec<usize>, mass: Vec<f64>) -> Result<Self, ProbError> {
        if factor_sizes.iter().any(|&s| s == 0) {
            return Err(ProbError::EmptyAlphabet);
        }
        let total: usize = factor_sizes.iter().product();
        if total != mass.len() {
            return Err(ProbError::SizeMismatch { expected: total, found: mass.len() });
        }
        Ok(JointDistribution { factor_sizes, mass: validate_mass(mass)? })
    }

    /// Independent product of the given factors.
    pub fn product(factors: &[Distribution]) -> Self {
        let mut mass = vec![1.0];
        for f in factors {
            let mut next = Vec::with_capacity(mass.len() * f.alphabet_size());
            for &a in &mass {
                for &b in f.mass() {
                    next.push(a * b);
                }
            }
            mass = next;
        }
        JointDistribution { factor_sizes: factors.iter().map(Distribution::alphabet_size).collect(), mass }
    }

    /// Reinterprets a flat distribution as a joint over `factor_sizes`.
    pub fn from_flat(d: &Distribution, factor_sizes: Vec<usize>) -> Result<Self, ProbError> {
        JointDistribution::new(factor_sizes, d.mass().to_vec())
    }

    pub fn factor_sizes(&self) -> &[usize] {
        &self.factor_sizes
    }

    pub fn factor_count(&self) -> usize {
        self.factor_sizes.len()
    }

    pub fn alphabet_size(&self) -> usize {
        self.mass.len()
    }

    pub fn mass(&self) -> &[f64] {
        &self.mass
    }

    pub fn to_distribution(&self) -> Distribution {
        Distribution { mass: self.mass.clone() }
    }

    pub fn entropy(&self) -> f64 {
        entropy_bits(&self.mass).clamp(0.0, (self.mass.len() as f64).log2())
    }

    /// Flat index of a tuple of per-factor symbols.
    pub fn index_of(&self, symbols: &[usize]) -> usize {
        flat_index(&self.factor_sizes, symbols)
    }

    /// Per-factor symbols of a flat index.
    pub fn symbols_of(&self, index: usize) -> Vec<usize> {
        unflatten(&self.factor_sizes, index)
    }

    fn check_components(&self, comps: &[usize]) -> Result<Vec<usize>, ProbError> {
        let mut keep = comps.to_vec();
        keep.sort_unstable();
        keep.dedup();
        if let Some(&bad) = keep.iter().find(|&&c| c >= self.factor_sizes.len()) {
            return Err(ProbError::ComponentOutOfRange { component: bad, factors: self.factor_sizes.len() });
        }
        Ok(keep)
    }

    /// Marginal over the components in `keep` (sorted ascending; duplicates ignored).
    pub fn marginal(&self, keep: &[usize]) -> Result<JointDistribution, ProbError> {
        let keep = self.check_components(keep)?;
        let sizes: Vec<usize> = keep.iter().map(|&c| self.factor_sizes[c]).collect();
        let mass = marginal_mass(&self.factor_sizes, &self.mass, &keep);
        Ok(JointDistribution { factor_sizes: sizes, mass })
    }

    /// Marginal over `keep`, flattened to a single-alphabet distribution.
    pub fn marginalize(&self, keep: &[usize]) -> Result<Distribution, ProbError> {
        Ok(self.marginal(keep)?.to_distribution())
    }

    /// `I(A;B) = H(A) + H(B) - H(A,B)` in bits, clamped at zero.
    pub fn mutual_information(&self, part_a: &[usize], part_b: &[usize]) -> Result<f64, ProbError> {
        let a = self.check_components(part_a)?;
        let b = self.check_components(part_b)?;
        if a.iter().any(|c| b.contains(c)) {
            return Err(ProbError::OverlappingParts);
        }
        let ab: Vec<usize> = a.iter().chain(b.iter()).copied().collect();
        let ha = self.marginal(&a)?.entropy();
        let hb = self.marginal(&b)?.entropy();
        let hab = self.marginal(&ab)?.entropy();
        Ok((ha + hb - hab).max(0.0))
    }
}

pub(crate) fn flat_index(sizes: &[usize], symbols: &[usize]) -> usize {
    sizes.iter().zip(symbols).fold(0, |acc, (&s, &x)| acc * s + x)
}

pub(crate) fn unflatten(sizes: &[usize], mut index: usize) -> Vec<usize> {
    let mut out = vec![0; sizes.len()];
    for (slot, &s) in out.iter_mut().zip(sizes).rev() {
        *slot = index % s;
        index /= s;
    }
    out
}

/// Sums `mass` (row-major over `sizes`) down to the components in `keep`
/// (sorted, in range).
pub(crate) fn marginal_mass(sizes: &[usize], mass: &[f64], keep: &[usize]) -> Vec<f64> {
    let kept_sizes: Vec<usize> = keep.iter().map(|&c| sizes[c]).collect();
    let out_len: usize = kept_sizes.iter().product();
    let mut out = vec![0.0; out_len];
    // stride of each full component inside the marginal index (0 if summed out)
    let mut stride = vec![0usize; sizes.len()];
    let mut acc = 1;
    for (k, &c) in keep.iter().enumerate().rev() {
        stride[c] = acc;
        acc *= kept_sizes[k];
    }
    let mut digits = vec![0usize; sizes.len()];
    let mut target = 0usize;
    for &p in mass {
        out[target] += p;
        // increment the mixed-radix counter and keep `target` in sync
        for c in (0..sizes.len()).rev() {
            digits[c] += 1;
            target += stride[c];
            if digits[c] < sizes[c] {
                break;
            }
            target -= stride[c] * digits[c];
            digits[c] = 0;
        }
    }
    out
}

/// A row-stochastic map from an input alphabet to an output alphabet.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConditionalKernel {
    input_size: usize,
    output_size: usize,
    rows: Vec<Distribution>,
}

impl ConditionalKernel {
    pub fn new(rows: Vec<Distribution>) -> Result<Self, ProbError> {
        let first = rows.first().ok_or(ProbError::EmptyAlphabet)?;
        let output_size = first.alphabet_size();
        if let Some(r) = rows.iter().find(|r| r.alphabet_size() != output_size) {
            return Err(ProbError::SizeMismatch { expected: output_size, found: r.alphabet_size() });
        }
        Ok(ConditionalKernel { input_size: rows.len(), output_size, rows })
    }

    pub fn identity(k: usize) -> Result<Self, ProbError> {
        ConditionalKernel::new((0..k).map(|i| Distribution::point(k, i)).collect::<Result<_, _>>()?)
    }

    /// Every input maps to the same output law.
    pub fn constant(input_size: usize, row: Distribution) -> Result<Self, ProbError> {
        if input_size == 0 {
            return Err(ProbError::EmptyAlphabet);
        }
        ConditionalKernel::new(vec![row; input_size])
    }

    pub fn input_size(&self) -> usize {
        self.input_size
    }

    pub fn output_size(&self) -> usize {
        self.output_size
    }

    pub fn row(&self, input: usize) -> &Distribution {
        &self.rows[input]
    }

    pub fn rows(&self) -> &[Distribution] {
        &self.rows
    }

    /// True when every row is a point mass.
    pub fn is_deterministic(&self) -> bool {
        self.rows.iter().all(|r| r.mass().iter().filter(|&&p| p > 0.0).count() == 1)
    }

    /// `P_U * P_{X|U}` as a two-factor joint `[U, X]`.
    pub fn joint_with(&self, p_u: &Distribution) -> Result<JointDistribution, ProbError> {
        if p_u.alphabet_size() != self.input_size {
            return Err(ProbError::SizeMismatch { expected: self.input_size, found: p_u.alphabet_size() });
        }
        let mut mass = Vec::with_capacity(self.input_size * self.output_size);
        for (pu, row) in p_u.mass().iter().zip(&self.rows) {
            mass.extend(row.mass().iter().map(|px| pu * px));
        }
        JointDistribution::new(vec![self.input_size, self.output_size], mass)
    }

    /// Output law `sum_u P_U(u) P_{X|U}(.|u)`.
    pub fn output_law(&self, p_u: &Distribution) -> Result<Distribution, ProbError> {
        Ok(self.joint_with(p_u)?.marginalize(&[1])?)
    }
}
