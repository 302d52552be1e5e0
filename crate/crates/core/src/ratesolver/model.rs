use serde::{Deserialize, Serialize};

use super::{enumerate_jam_sets, JamSet, JamSetFamily, RateError};
use crate::probkit::{marginal_mass, Distribution, JointDistribution};

/// `C` parallel links, an adversary budget `Z` and the innocent law over the links.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawModel", into = "RawModel")]
pub struct NetworkModel {
    link_count: usize,
    adversary_budget: usize,
    link_alphabet_sizes: Vec<usize>,
    innocent: JointDistribution,
    bypass_budget_check: bool,
}

#[derive(Serialize, Deserialize)]
struct RawModel {
    link_count: usize,
    adversary_budget: usize,
    link_alphabet_sizes: Vec<usize>,
    innocent: JointDistribution,
    #[serde(default)]
    bypass_budget_check: bool,
}

impl TryFrom<RawModel> for NetworkModel {
    type Error = RateError;
    fn try_from(r: RawModel) -> Result<Self, RateError> {
        let m = NetworkModel::build(r.adversary_budget, r.innocent, r.bypass_budget_check)?;
        if m.link_count != r.link_count || m.link_alphabet_sizes != r.link_alphabet_sizes {
            return Err(RateError::AlphabetMismatch);
        }
        Ok(m)
    }
}

impl From<NetworkModel> for RawModel {
    fn from(m: NetworkModel) -> Self {
        RawModel {
            link_count: m.link_count,
            adversary_budget: m.adversary_budget,
            link_alphabet_sizes: m.link_alphabet_sizes,
            innocent: m.innocent,
            bypass_budget_check: m.bypass_budget_check,
        }
    }
}

impl NetworkModel {
    /// A model whose links are the factors of `innocent`. Requires `2Z < C`.
    pub fn new(adversary_budget: usize, innocent: JointDistribution) -> Result<Self, RateError> {
        NetworkModel::build(adversary_budget, innocent, false)
    }

    /// Like [`NetworkModel::new`] but accepts any `Z <= C`. Only meant for
    /// demonstrating what goes wrong once the adversary controls half the links.
    pub fn with_budget_bypass(adversary_budget: usize, innocent: JointDistribution) -> Result<Self, RateError> {
        NetworkModel::build(adversary_budget, innocent, true)
    }

    /// Links carrying independent innocent symbols.
    pub fn independent(adversary_budget: usize, links: &[Distribution]) -> Result<Self, RateError> {
        if links.is_empty() {
            return Err(RateError::NoLinks);
        }
        NetworkModel::new(adversary_budget, JointDistribution::product(links))
    }

    fn build(z: usize, innocent: JointDistribution, bypass: bool) -> Result<Self, RateError> {
        let c = innocent.factor_count();
        if c == 0 {
            return Err(RateError::NoLinks);
        }
        if z > c || (!bypass && 2 * z >= c) {
            return Err(RateError::BudgetTooLarge { z, c });
        }
        if innocent.alphabet_size() > u16::MAX as usize {
            return Err(RateError::AlphabetTooLarge(innocent.alphabet_size()));
        }
        Ok(NetworkModel {
            link_count: c,
            adversary_budget: z,
            link_alphabet_sizes: innocent.factor_sizes().to_vec(),
            innocent,
            bypass_budget_check: bypass,
        })
    }

    pub fn link_count(&self) -> usize {
        self.link_count
    }

    pub fn adversary_budget(&self) -> usize {
        self.adversary_budget
    }

    pub fn link_alphabet_sizes(&self) -> &[usize] {
        &self.link_alphabet_sizes
    }

    pub fn innocent(&self) -> &JointDistribution {
        &self.innocent
    }

    pub fn bypasses_budget_check(&self) -> bool {
        self.bypass_budget_check
    }

    /// `|X|`, the size of the product alphabet.
    pub fn alphabet_size(&self) -> usize {
        self.innocent.alphabet_size()
    }

    pub fn jam_family(&self) -> JamSetFamily {
        enumerate_jam_sets(self.link_count, self.adversary_budget)
    }

    /// Size of the product alphabet of the links in `j`.
    pub fn alphabet_size_of(&self, links: &[usize]) -> usize {
        links.iter().map(|&l| self.link_alphabet_sizes[l]).product()
    }

    /// Innocent marginal over the links in `j` (flattened, row-major).
    pub fn innocent_marginal(&self, j: &JamSet) -> Vec<f64> {
        marginal_mass(&self.link_alphabet_sizes, self.innocent.mass(), j.links())
    }

    pub fn check_jam_set(&self, j: &JamSet) -> Result<(), RateError> {
        if j.len() > self.adversary_budget {
            return Err(RateError::JamSetTooLarge { size: j.len(), budget: self.adversary_budget });
        }
        if let Some(l) = j.max_link().filter(|&l| l >= self.link_count) {
            return Err(RateError::LinkOutOfRange { link: l, links: self.link_count });
        }
        Ok(())
    }

    /// The model with its links and per-link symbols relabeled: link `l` of the
    /// result is link `link_perm[l]` of `self`, and symbol `s` on result link `l`
    /// is symbol `symbol_perms[l][s]` of the source link.
    pub fn relabeled(&self, link_perm: &[usize], symbol_perms: &[Vec<usize>]) -> Result<Self, RateError> {
        let src = &self.link_alphabet_sizes;
        let sizes: Vec<usize> = link_perm.iter().map(|&l| src[l]).collect();
        let total: usize = sizes.iter().product();
        let mut mass = vec![0.0; total];
        let mut src_sym = vec![0usize; src.len()];
        for (idx, slot) in mass.iter_mut().enumerate() {
            let sym = crate::probkit::unflatten(&sizes, idx);
            for (l, &s) in sym.iter().enumerate() {
                src_sym[link_perm[l]] = symbol_perms[l][s];
            }
            *slot = self.innocent.mass()[crate::probkit::flat_index(src, &src_sym)];
        }
        let innocent = JointDistribution::new(sizes, mass)?;
        NetworkModel::build(self.adversary_budget, innocent, self.bypass_budget_check)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn bits(c: usize) -> Vec<Distribution> {
        vec![Distribution::uniform(2).unwrap(); c]
    }

    #[test]
    fn budget_rule() {
        assert!(NetworkModel::independent(1, &bits(3)).is_ok());
        assert!(matches!(NetworkModel::independent(1, &bits(2)), Err(RateError::BudgetTooLarge { .. })));
        let inn = JointDistribution::product(&bits(2));
        assert!(NetworkModel::with_budget_bypass(1, inn.clone()).is_ok());
        assert!(NetworkModel::with_budget_bypass(3, inn).is_err());
    }

    #[test]
    fn json_round_trip() {
        let m = NetworkModel::independent(1, &bits(3)).unwrap();
        let s = serde_json::to_string(&m).unwrap();
        let back: NetworkModel = serde_json::from_str(&s).unwrap();
        assert_eq!(back, m);
        let bad = s.replace("\"link_count\":3", "\"link_count\":4");
        assert!(serde_json::from_str::<NetworkModel>(&bad).is_err());
    }

    #[test]
    fn relabel_swaps_links() {
        let inn = JointDistribution::product(&[Distribution::bernoulli(0.3).unwrap(), Distribution::uniform(3).unwrap()]);
        let m = NetworkModel::new(0, inn).unwrap();
        let r = m.relabeled(&[1, 0], &[vec![2, 0, 1], vec![1, 0]]).unwrap();
        assert_eq!(r.link_alphabet_sizes(), &[3, 2]);
        let first = r.innocent().marginalize(&[1]).unwrap();
        assert!((first.prob(0) - 0.3).abs() < 1e-15);
    }
}
