use serde::{Deserialize, Serialize};

use super::{CodeParams, CodecError, RandomCodebook, Status, Storage, Transmission, DEFAULT_MEMORY_BUDGET};
use crate::probkit::{marginal_mass, unflatten, ConditionalKernel, Distribution, JointDistribution, Sampler, SymbolSequence};
use crate::ratesolver::{JamSet, NetworkModel};
use crate::rng;

/// Resource limits for building and searching codebooks.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CodeOptions {
    pub storage: Storage,
    /// Largest `N * n * comps` kept in memory.
    pub memory_budget: u128,
    /// Work units (tree nodes plus leaf codewords) one decoder search may spend.
    pub search_budget: u64,
}

impl Default for CodeOptions {
    fn default() -> Self {
        CodeOptions { storage: Storage::Auto, memory_budget: DEFAULT_MEMORY_BUDGET, search_budget: 1 << 26 }
    }
}

/// Behaviour shared by both code families.
pub trait StealthCode: Send + Sync {
    fn params(&self) -> &CodeParams;
    fn options(&self) -> &CodeOptions;
    fn link_sizes(&self) -> &[usize];

    /// Alice's links when sending message `m` (1-based). `tx_seed` drives any
    /// encoder randomness.
    fn active_links(&self, m: u128, tx_seed: u64) -> Result<Vec<SymbolSequence>, CodecError>;

    /// For message `m`, the law of the symbols on `j` at every time step, each
    /// over the flattened alphabet of `j`. Time steps are independent given `m`.
    fn restricted_laws(&self, m: u128, j: &JamSet) -> Result<Vec<Vec<f64>>, CodecError>;

    /// Single-letter law of one time step of a codeword, over the links.
    fn link_law(&self) -> &JointDistribution;

    fn link_count(&self) -> usize {
        self.link_sizes().len()
    }
}

fn atoms_to_links(atoms: impl Iterator<Item = usize>, sizes: &[usize], n: usize) -> Vec<SymbolSequence> {
    let mut links = vec![Vec::with_capacity(n); sizes.len()];
    for a in atoms {
        for (l, s) in unflatten(sizes, a).into_iter().enumerate() {
            links[l].push(s as u16);
        }
    }
    links.into_iter().map(SymbolSequence::from).collect()
}

fn restrict_index(sizes: &[usize], links: &[usize], symbols: impl Fn(usize) -> usize) -> usize {
    links.iter().fold(0, |acc, &l| acc * sizes[l] + symbols(l))
}

/// I.i.d. codewords over the product alphabet of the links.
#[derive(Clone, Debug)]
pub struct DirectCode {
    params: CodeParams,
    options: CodeOptions,
    p_x: JointDistribution,
    book: RandomCodebook,
}

pub fn build_direct_code(p_x: &JointDistribution, params: CodeParams, options: CodeOptions) -> Result<DirectCode, CodecError> {
    let book = RandomCodebook::new(p_x, params.n(), params.messages(), params.seed(), options.storage, options.memory_budget)?;
    Ok(DirectCode { params, options, p_x: p_x.clone(), book })
}

impl DirectCode {
    pub fn p_x(&self) -> &JointDistribution {
        &self.p_x
    }

    pub fn book(&self) -> &RandomCodebook {
        &self.book
    }

    /// Codeword `m` split into per-link sequences.
    pub fn codeword(&self, m: u128) -> Result<Vec<SymbolSequence>, CodecError> {
        let w = self.book.codeword(m)?;
        Ok(split_time_major(&w, self.link_count()))
    }

    /// Known-position pattern fixing the links of `links` to `values` (in link order).
    pub(crate) fn pattern(&self, links: &[usize], values: &[&SymbolSequence]) -> Vec<Option<u16>> {
        let c = self.link_count();
        let mut known = vec![None; self.params.n() * c];
        for (&l, v) in links.iter().zip(values) {
            for (t, &s) in v.as_slice().iter().enumerate() {
                known[t * c + l] = Some(s);
            }
        }
        known
    }
}

pub(crate) fn split_time_major(word: &[u16], comps: usize) -> Vec<SymbolSequence> {
    (0..comps).map(|l| SymbolSequence::from(word.iter().skip(l).step_by(comps).copied().collect::<Vec<_>>())).collect()
}

impl StealthCode for DirectCode {
    fn params(&self) -> &CodeParams {
        &self.params
    }

    fn options(&self) -> &CodeOptions {
        &self.options
    }

    fn link_sizes(&self) -> &[usize] {
        self.p_x.factor_sizes()
    }

    fn active_links(&self, m: u128, _tx_seed: u64) -> Result<Vec<SymbolSequence>, CodecError> {
        self.codeword(m)
    }

    fn restricted_laws(&self, m: u128, j: &JamSet) -> Result<Vec<Vec<f64>>, CodecError> {
        let w = self.book.codeword(m)?;
        let c = self.link_count();
        let sizes = self.link_sizes();
        let len: usize = j.links().iter().map(|&l| sizes[l]).product();
        Ok((0..self.params.n())
            .map(|t| {
                let mut law = vec![0.0; len];
                law[restrict_index(sizes, j.links(), |l| w[t * c + l] as usize)] = 1.0;
                law
            })
            .collect())
    }

    fn link_law(&self) -> &JointDistribution {
        &self.p_x
    }
}

/// Intermediate codewords over `U`, mapped to the links by a fresh draw from
/// `P_{X|U}` at every transmission.
#[derive(Clone, Debug)]
pub struct LayeredCode {
    params: CodeParams,
    options: CodeOptions,
    p_u: Distribution,
    kernel: ConditionalKernel,
    link_sizes: Vec<usize>,
    joint_ux: JointDistribution,
    p_x: JointDistribution,
    samplers: Vec<Sampler>,
    book: RandomCodebook,
}

pub fn build_layered_code(
    p_u: &Distribution,
    kernel: &ConditionalKernel,
    link_sizes: &[usize],
    params: CodeParams,
    options: CodeOptions,
) -> Result<LayeredCode, CodecError> {
    if kernel.input_size() != p_u.alphabet_size() || kernel.output_size() != link_sizes.iter().product::<usize>() {
        return Err(CodecError::AlphabetMismatch);
    }
    let law = JointDistribution::from_flat(p_u, vec![p_u.alphabet_size()])?;
    let book = RandomCodebook::new(&law, params.n(), params.messages(), params.seed(), options.storage, options.memory_budget)?;
    let mut sizes = vec![p_u.alphabet_size()];
    sizes.extend_from_slice(link_sizes);
    let joint_ux = JointDistribution::new(sizes, kernel.joint_with(p_u)?.mass().to_vec())?;
    let p_x = JointDistribution::new(link_sizes.to_vec(), kernel.output_law(p_u)?.into_mass())?;
    Ok(LayeredCode {
        params,
        options,
        p_u: p_u.clone(),
        kernel: kernel.clone(),
        link_sizes: link_sizes.to_vec(),
        joint_ux,
        p_x,
        samplers: kernel.rows().iter().map(Sampler::new).collect(),
        book,
    })
}

impl LayeredCode {
    pub fn p_u(&self) -> &Distribution {
        &self.p_u
    }

    pub fn kernel(&self) -> &ConditionalKernel {
        &self.kernel
    }

    pub fn book(&self) -> &RandomCodebook {
        &self.book
    }

    /// `P_{U X_1 .. X_C}`, computed exactly from `P_U` and the kernel.
    pub fn joint_ux(&self) -> &JointDistribution {
        &self.joint_ux
    }

    /// Intermediate codeword `u(m)`.
    pub fn u_codeword(&self, m: u128) -> Result<SymbolSequence, CodecError> {
        Ok(SymbolSequence::from(self.book.codeword(m)?))
    }

    /// `P_{X_J | U}` as rows over the flattened alphabet of `j`.
    pub fn restricted_kernel(&self, j: &JamSet) -> Vec<Vec<f64>> {
        self.kernel
            .rows()
            .iter()
            .map(|row| marginal_mass(&self.link_sizes, row.mass(), j.links()))
            .collect()
    }
}

impl StealthCode for LayeredCode {
    fn params(&self) -> &CodeParams {
        &self.params
    }

    fn options(&self) -> &CodeOptions {
        &self.options
    }

    fn link_sizes(&self) -> &[usize] {
        &self.link_sizes
    }

    fn active_links(&self, m: u128, tx_seed: u64) -> Result<Vec<SymbolSequence>, CodecError> {
        let u = self.book.codeword(m)?;
        let mut g = rng::stream(tx_seed, "stochastic-map", 0);
        let atoms: Vec<usize> = u.iter().map(|&s| self.samplers[s as usize].sample(&mut g) as usize).collect();
        Ok(atoms_to_links(atoms.into_iter(), &self.link_sizes, self.params.n()))
    }

    fn restricted_laws(&self, m: u128, j: &JamSet) -> Result<Vec<Vec<f64>>, CodecError> {
        let u = self.book.codeword(m)?;
        let rows = self.restricted_kernel(j);
        Ok(u.iter().map(|&s| rows[s as usize].clone()).collect())
    }

    fn link_law(&self) -> &JointDistribution {
        &self.p_x
    }
}

/// A borrowed code of either family, for operations that need more than the
/// shared [`StealthCode`] behaviour.
#[derive(Clone, Copy, Debug)]
pub enum CodeRef<'a> {
    Direct(&'a DirectCode),
    Layered(&'a LayeredCode),
}

impl<'a> CodeRef<'a> {
    pub fn code(self) -> &'a dyn StealthCode {
        match self {
            CodeRef::Direct(c) => c,
            CodeRef::Layered(c) => c,
        }
    }
}

impl<'a> From<&'a DirectCode> for CodeRef<'a> {
    fn from(c: &'a DirectCode) -> Self {
        CodeRef::Direct(c)
    }
}

impl<'a> From<&'a LayeredCode> for CodeRef<'a> {
    fn from(c: &'a LayeredCode) -> Self {
        CodeRef::Layered(c)
    }
}

/// Alice's encoder: innocent symbols when `t` is innocent, otherwise the
/// codeword of `m` (through the stochastic map for layered codes).
pub fn encode<C: StealthCode + ?Sized>(
    code: &C,
    model: &NetworkModel,
    t: Status,
    m: u128,
    tx_seed: u64,
) -> Result<Transmission, CodecError> {
    if code.link_sizes() != model.link_alphabet_sizes() {
        return Err(CodecError::AlphabetMismatch);
    }
    let n = code.params().n();
    let links = match t {
        Status::Innocent => {
            if m != 0 {
                return Err(CodecError::StatusMessageMismatch);
            }
            innocent_links(model, n, tx_seed)
        }
        Status::Active => {
            if m == 0 || m > code.params().messages() {
                return Err(CodecError::MessageOutOfRange { message: m, messages: code.params().messages() });
            }
            code.active_links(m, tx_seed)?
        }
    };
    Ok(Transmission { status: t, message: m, links })
}

/// `n` i.i.d. innocent time steps.
pub fn innocent_links(model: &NetworkModel, n: usize, seed: u64) -> Vec<SymbolSequence> {
    let s = Sampler::new(&model.innocent().to_distribution());
    let mut g = rng::stream(seed, "innocent", 0);
    let atoms: Vec<usize> = (0..n).map(|_| s.sample(&mut g) as usize).collect();
    atoms_to_links(atoms.into_iter(), model.link_alphabet_sizes(), n)
}
