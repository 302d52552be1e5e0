use std::fmt;

use serde::{Deserialize, Serialize};

/// A set of links the adversary eavesdrops on and jams (0-based indices, sorted).
#[derive(Clone, Debug, Default, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct JamSet {
    links: Vec<usize>,
}

impl JamSet {
    pub fn empty() -> Self {
        JamSet { links: Vec::new() }
    }

    /// Builds a jam set from arbitrary link indices (sorted and de-duplicated).
    pub fn new(mut links: Vec<usize>) -> Self {
        links.sort_unstable();
        links.dedup();
        JamSet { links }
    }

    pub fn links(&self) -> &[usize] {
        &self.links
    }

    pub fn len(&self) -> usize {
        self.links.len()
    }

    pub fn is_empty(&self) -> bool {
        self.links.is_empty()
    }

    pub fn contains(&self, link: usize) -> bool {
        self.links.binary_search(&link).is_ok()
    }

    /// The links of `{0..link_count}` not in this set.
    pub fn complement(&self, link_count: usize) -> Vec<usize> {
        (0..link_count).filter(|l| !self.contains(*l)).collect()
    }

    pub fn max_link(&self) -> Option<usize> {
        self.links.last().copied()
    }
}

impl fmt::Display for JamSet {
    /// Links are shown 1-based, e.g. `{1,3}`.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("{")?;
        for (k, l) in self.links.iter().enumerate() {
            if k > 0 {
                f.write_str(",")?;
            }
            write!(f, "{}", l + 1)?;
        }
        f.write_str("}")
    }
}

/// All jam sets of size at most `Z`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct JamSetFamily {
    link_count: usize,
    sets: Vec<JamSet>,
}

impl JamSetFamily {
    pub fn sets(&self) -> &[JamSet] {
        &self.sets
    }

    pub fn len(&self) -> usize {
        self.sets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sets.is_empty()
    }

    pub fn link_count(&self) -> usize {
        self.link_count
    }

    pub fn iter(&self) -> std::slice::Iter<'_, JamSet> {
        self.sets.iter()
    }

    /// Sets of the largest size present; every other member is a subset of one of them.
    pub fn maximal(&self) -> impl Iterator<Item = &JamSet> {
        let top = self.sets.last().map_or(0, JamSet::len);
        self.sets.iter().filter(move |s| s.len() == top)
    }

    pub fn position(&self, j: &JamSet) -> Option<usize> {
        self.sets.iter().position(|s| s == j)
    }
}

/// Every subset of `{0..c}` with at most `z` elements, the empty set first,
/// then by size and lexicographically within a size.
pub fn enumerate_jam_sets(c: usize, z: usize) -> JamSetFamily {
    let mut sets = Vec::new();
    for k in 0..=z.min(c) {
        let mut idx: Vec<usize> = (0..k).collect();
        loop {
            sets.push(JamSet { links: idx.clone() });
            // advance to the next k-combination
            let mut i = k;
            while i > 0 && idx[i - 1] == c - k + i - 1 {
                i -= 1;
            }
            if i == 0 {
                break;
            }
            idx[i - 1] += 1;
            for j in i..k {
                idx[j] = idx[j - 1] + 1;
            }
        }
    }
    JamSetFamily { link_count: c, sets }
}
