use serde::{Deserialize, Serialize};

use super::{ProbError, SymbolSequence, PROB_TOL};

/// A law on blocks of `n` time steps over the product alphabet of a group of
/// links. Block index: time step 0 is most significant, and each step is the
/// flattened tuple of the group's symbols (first link most significant).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BlockDistribution {
    link_sizes: Vec<usize>,
    n: usize,
    mass: Vec<f64>,
}

impl BlockDistribution {
    /// Number of blocks, or `None` on overflow.
    pub fn block_count(link_sizes: &[usize], n: usize) -> Option<u128> {
        let step: u128 = link_sizes.iter().map(|&k| k as u128).product();
        (0..n).try_fold(1u128, |acc, _| acc.checked_mul(step))
    }

    pub fn new(link_sizes: Vec<usize>, n: usize, mass: Vec<f64>) -> Result<Self, ProbError> {
        let expected = Self::block_count(&link_sizes, n).unwrap_or(u128::MAX);
        if mass.len() as u128 != expected {
            return Err(ProbError::SizeMismatch { expected: expected as usize, found: mass.len() });
        }
        for (index, &v) in mass.iter().enumerate() {
            if !v.is_finite() {
                return Err(ProbError::NonFinite { index });
            }
            if v < 0.0 {
                return Err(ProbError::NegativeMass { index, value: v });
            }
        }
        let total: f64 = mass.iter().sum();
        if (total - 1.0).abs() > PROB_TOL {
            return Err(ProbError::BadTotal { total });
        }
        Ok(BlockDistribution { link_sizes, n, mass })
    }

    /// The `n`-fold product of a single-step law over the flattened group alphabet.
    pub fn iid(link_sizes: Vec<usize>, n: usize, step: &[f64]) -> Result<Self, ProbError> {
        let k: usize = link_sizes.iter().product();
        if step.len() != k {
            return Err(ProbError::SizeMismatch { expected: k, found: step.len() });
        }
        let mut mass = vec![1.0];
        for _ in 0..n {
            mass = mass.iter().flat_map(|&a| step.iter().map(move |&b| a * b)).collect();
        }
        BlockDistribution::new(link_sizes, n, mass)
    }

    pub fn link_sizes(&self) -> &[usize] {
        &self.link_sizes
    }

    pub fn blocklength(&self) -> usize {
        self.n
    }

    pub fn step_size(&self) -> usize {
        self.link_sizes.iter().product()
    }

    pub fn mass(&self) -> &[f64] {
        &self.mass
    }

    /// Block index of the group's sequences (one per link, each of length `n`).
    pub fn index_of(&self, seqs: &[SymbolSequence]) -> Result<usize, ProbError> {
        block_index(&self.link_sizes, self.n, seqs)
    }

    pub fn prob(&self, seqs: &[SymbolSequence]) -> Result<f64, ProbError> {
        Ok(self.mass[self.index_of(seqs)?])
    }

    /// The per-link sequences of block `index`.
    pub fn block(&self, index: usize) -> Vec<SymbolSequence> {
        block_at(&self.link_sizes, self.n, index)
    }
}

/// Flattened symbol of `seqs` at every time step.
pub fn step_indices(link_sizes: &[usize], seqs: &[SymbolSequence]) -> Result<Vec<usize>, ProbError> {
    if seqs.len() != link_sizes.len() {
        return Err(ProbError::SizeMismatch { expected: link_sizes.len(), found: seqs.len() });
    }
    let n = seqs.first().map_or(0, SymbolSequence::len);
    let mut out = vec![0usize; n];
    for (s, &k) in seqs.iter().zip(link_sizes) {
        if s.len() != n {
            return Err(ProbError::LengthMismatch { left: n, right: s.len() });
        }
        for (o, &x) in out.iter_mut().zip(s.as_slice()) {
            if x as usize >= k {
                return Err(ProbError::SymbolOutOfRange { symbol: x as usize, alphabet_size: k });
            }
            *o = *o * k + x as usize;
        }
    }
    Ok(out)
}

pub(crate) fn block_index(link_sizes: &[usize], n: usize, seqs: &[SymbolSequence]) -> Result<usize, ProbError> {
    let steps = step_indices(link_sizes, seqs)?;
    if steps.len() != n && !link_sizes.is_empty() {
        return Err(ProbError::LengthMismatch { left: n, right: steps.len() });
    }
    let k: usize = link_sizes.iter().product();
    Ok(steps.iter().fold(0, |acc, &s| acc * k + s))
}

pub(crate) fn block_at(link_sizes: &[usize], n: usize, mut index: usize) -> Vec<SymbolSequence> {
    let k: usize = link_sizes.iter().product();
    let mut steps = vec![0usize; n];
    for t in (0..n).rev() {
        steps[t] = index % k;
        index /= k;
    }
    let mut links = vec![vec![0u16; n]; link_sizes.len()];
    for (t, &s) in steps.iter().enumerate() {
        let mut s = s;
        for l in (0..link_sizes.len()).rev() {
            links[l][t] = (s % link_sizes[l]) as u16;
            s /= link_sizes[l];
        }
    }
    links.into_iter().map(SymbolSequence::from).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn indexing_round_trips() {
        let sizes = vec![2, 3];
        let n = 3;
        let total = BlockDistribution::block_count(&sizes, n).unwrap() as usize;
        assert_eq!(total, 216);
        for i in 0..total {
            assert_eq!(block_index(&sizes, n, &block_at(&sizes, n, i)).unwrap(), i);
        }
    }

    #[test]
    fn iid_products() {
        let b = BlockDistribution::iid(vec![2], 2, &[0.25, 0.75]).unwrap();
        assert_eq!(b.mass(), &[0.0625, 0.1875, 0.1875, 0.5625]);
        let seqs = vec![SymbolSequence::from(vec![1, 0])];
        assert_eq!(b.prob(&seqs).unwrap(), 0.1875);
        assert!(BlockDistribution::iid(vec![2], 2, &[1.0]).is_err());
    }

    #[test]
    fn empty_group_has_one_block() {
        let b = BlockDistribution::iid(vec![], 4, &[1.0]).unwrap();
        assert_eq!(b.mass(), &[1.0]);
        assert_eq!(b.index_of(&[]).unwrap(), 0);
    }
}
