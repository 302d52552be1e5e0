use std::fmt;

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{AdversaryError, JamContext};
use crate::codec::{CodeRef, DirectCode, StealthCode};
use crate::probkit::{block_at, counts_typical, step_indices, BlockDistribution, Sampler, SymbolSequence, TypicalityParams};
use crate::ratesolver::JamSet;
use crate::rng::{self, StreamRng};

/// Default number of candidates a randomized strategy tries before giving up.
pub const DEFAULT_MAX_TRIES: usize = 4096;

/// Books this small (and held in memory) are scanned in full.
const EXACT_SCAN_MESSAGES: u128 = 1 << 20;

/// One outcome of a strategy's output law.
#[derive(Clone, Debug, PartialEq)]
pub struct JamPoint {
    pub prob: f64,
    pub y_j: Vec<SymbolSequence>,
}

/// A rule for overwriting the jammed links, given the full observed block on
/// them and the codebook.
pub trait JammingStrategy: Send + Sync {
    fn id(&self) -> &str;

    /// What Bob sees on the jammed links (one sequence per link of `ctx.j`).
    fn jam(&self, ctx: &JamContext<'_>, x_j: &[SymbolSequence], seed: u64) -> Result<Vec<SymbolSequence>, AdversaryError>;

    /// The exact law of [`jam`](Self::jam) over its seed, as weighted points
    /// (possibly repeated). Fails if more than `max_points` would be needed.
    fn jam_law(&self, ctx: &JamContext<'_>, x_j: &[SymbolSequence], max_points: u128) -> Result<Vec<JamPoint>, AdversaryError>;
}

/// Bob sees exactly what Alice sent.
#[derive(Clone, Copy, Debug, Default)]
pub struct Passthrough;

impl JammingStrategy for Passthrough {
    fn id(&self) -> &str {
        "passthrough"
    }

    fn jam(&self, _: &JamContext<'_>, x_j: &[SymbolSequence], _: u64) -> Result<Vec<SymbolSequence>, AdversaryError> {
        Ok(x_j.to_vec())
    }

    fn jam_law(&self, _: &JamContext<'_>, x_j: &[SymbolSequence], _: u128) -> Result<Vec<JamPoint>, AdversaryError> {
        Ok(vec![JamPoint { prob: 1.0, y_j: x_j.to_vec() }])
    }
}

/// I.i.d. uniform symbols on every jammed link.
#[derive(Clone, Copy, Debug, Default)]
pub struct UniformRandom;

impl JammingStrategy for UniformRandom {
    fn id(&self) -> &str {
        "uniform-random"
    }

    fn jam(&self, ctx: &JamContext<'_>, _: &[SymbolSequence], seed: u64) -> Result<Vec<SymbolSequence>, AdversaryError> {
        let mut g = rng::stream(seed, "jam-uniform", 0);
        let n = ctx.blocklength();
        Ok(ctx
            .jammed_sizes()
            .into_iter()
            .map(|k| SymbolSequence::from((0..n).map(|_| g.random_range(0..k) as u16).collect::<Vec<_>>()))
            .collect())
    }

    fn jam_law(&self, ctx: &JamContext<'_>, _: &[SymbolSequence], max_points: u128) -> Result<Vec<JamPoint>, AdversaryError> {
        let sizes = ctx.jammed_sizes();
        let k: usize = sizes.iter().product();
        iid_points(&sizes, ctx.blocklength(), &vec![1.0 / k as f64; k], max_points)
    }
}

/// Fresh innocent symbols on the jammed links, independent of what was sent.
#[derive(Clone, Copy, Debug, Default)]
pub struct ResampleInnocent;

impl JammingStrategy for ResampleInnocent {
    fn id(&self) -> &str {
        "resample-innocent"
    }

    fn jam(&self, ctx: &JamContext<'_>, _: &[SymbolSequence], seed: u64) -> Result<Vec<SymbolSequence>, AdversaryError> {
        let sizes = ctx.jammed_sizes();
        let s = Sampler::from_mass(&ctx.model.innocent_marginal(ctx.j));
        let mut g = rng::stream(seed, "jam-innocent", 0);
        let steps: Vec<usize> = (0..ctx.blocklength()).map(|_| s.sample(&mut g) as usize).collect();
        Ok(steps_to_links(&sizes, &steps))
    }

    fn jam_law(&self, ctx: &JamContext<'_>, _: &[SymbolSequence], max_points: u128) -> Result<Vec<JamPoint>, AdversaryError> {
        iid_points(&ctx.jammed_sizes(), ctx.blocklength(), &ctx.model.innocent_marginal(ctx.j), max_points)
    }
}

/// Writes `x_J(m')` for a message `m'` drawn uniformly among those whose
/// restriction to `J` is typical for the code's law on `J`. Sampling is by
/// rejection; after `max_tries` misses the observed block is passed through.
#[derive(Clone, Copy, Debug)]
pub struct SpoofCodeword {
    pub typicality: TypicalityParams,
    pub max_tries: usize,
}

impl Default for SpoofCodeword {
    fn default() -> Self {
        SpoofCodeword { typicality: TypicalityParams::default(), max_tries: DEFAULT_MAX_TRIES }
    }
}

impl SpoofCodeword {
    fn is_typical(&self, ctx: &JamContext<'_>, law_j: &[f64], y: &[SymbolSequence]) -> Result<bool, AdversaryError> {
        let steps = step_indices(&ctx.jammed_sizes(), y)?;
        let mut counts = vec![0u64; law_j.len()];
        for s in steps {
            counts[s] += 1;
        }
        Ok(counts_typical(&counts, ctx.blocklength(), law_j, self.typicality.gamma()))
    }
}

impl JammingStrategy for SpoofCodeword {
    fn id(&self) -> &str {
        "spoof-codeword"
    }

    fn jam(&self, ctx: &JamContext<'_>, x_j: &[SymbolSequence], seed: u64) -> Result<Vec<SymbolSequence>, AdversaryError> {
        let code = ctx.code.code();
        let law_j = code_law_on(code, ctx.j);
        let mut g = rng::stream(seed, "jam-spoof", 0);
        for attempt in 0..self.max_tries {
            let m = g.random_range(1..=code.params().messages());
            let y = restrict(code.active_links(m, rng::derive_seed(seed, "jam-spoof-map", attempt as u64))?, ctx.j);
            if self.is_typical(ctx, &law_j, &y)? {
                return Ok(y);
            }
        }
        Ok(x_j.to_vec())
    }

    fn jam_law(&self, ctx: &JamContext<'_>, x_j: &[SymbolSequence], max_points: u128) -> Result<Vec<JamPoint>, AdversaryError> {
        let code = ctx.code.code();
        let law_j = code_law_on(code, ctx.j);
        let mut typical = Vec::new();
        for p in message_mixture(ctx, max_points)? {
            if self.is_typical(ctx, &law_j, &p.y_j)? {
                typical.push(p);
            }
        }
        // one try succeeds with probability q; all fail with (1 - q)^tries
        let q: f64 = typical.iter().map(|p| p.prob).sum();
        let fail = (1.0 - q).max(0.0).powi(self.max_tries.min(i32::MAX as usize) as i32);
        let mut out: Vec<JamPoint> = if q > 0.0 {
            typical.into_iter().map(|p| JamPoint { prob: p.prob / q * (1.0 - fail), y_j: p.y_j }).collect()
        } else {
            Vec::new()
        };
        if fail > 0.0 {
            out.push(JamPoint { prob: fail, y_j: x_j.to_vec() });
        }
        Ok(out)
    }
}

/// Writes the restriction of a codeword `x_J(m') != x_J` that agrees with the
/// observed block in as many positions as possible, a heuristic worst case.
///
/// Small in-memory direct books are scanned exactly (ties uniform). Larger
/// direct books search Hamming-distance-1 neighbours of `x_J` in random order
/// and take the lowest-numbered matching message. Layered codes keep the best
/// of `max_tries` sampled `(m', x_J(m'))`.
#[derive(Clone, Copy, Debug)]
pub struct SpoofConsistent {
    pub max_tries: usize,
}

impl Default for SpoofConsistent {
    fn default() -> Self {
        SpoofConsistent { max_tries: DEFAULT_MAX_TRIES }
    }
}

fn hamming(a: &[SymbolSequence], b: &[SymbolSequence]) -> usize {
    a.iter().zip(b).map(|(x, y)| x.as_slice().iter().zip(y.as_slice()).filter(|(p, q)| p != q).count()).sum()
}

impl SpoofConsistent {
    /// Closest differing restrictions in a fully scanned direct book.
    fn nearest(code: &DirectCode, j: &JamSet, x_j: &[SymbolSequence]) -> Result<Vec<Vec<SymbolSequence>>, AdversaryError> {
        let mut best = usize::MAX;
        let mut ties = Vec::new();
        let c = code.link_count();
        code.book().for_each(EXACT_SCAN_MESSAGES, |_, w| {
            let d: usize = j
                .links()
                .iter()
                .zip(x_j)
                .map(|(&l, x)| x.as_slice().iter().enumerate().filter(|&(t, &s)| w[t * c + l] != s).count())
                .sum();
            if d > 0 && d <= best {
                if d < best {
                    best = d;
                    ties.clear();
                }
                ties.push(j.links().iter().map(|&l| SymbolSequence::from(w.iter().skip(l).step_by(c).copied().collect::<Vec<_>>())).collect());
            }
        })?;
        Ok(ties)
    }

    fn neighbour_search(&self, ctx: &JamContext<'_>, code: &DirectCode, x_j: &[SymbolSequence], g: &mut StreamRng) -> Result<Option<Vec<SymbolSequence>>, AdversaryError> {
        let sizes = ctx.jammed_sizes();
        let n = ctx.blocklength();
        let mut moves: Vec<(usize, usize, u16)> = Vec::new();
        for (i, &k) in sizes.iter().enumerate() {
            for t in 0..n {
                let cur = x_j[i].as_slice()[t];
                moves.extend((0..k as u16).filter(|&s| s != cur).map(|s| (i, t, s)));
            }
        }
        moves.shuffle(g);
        let work = code.options().search_budget;
        for &(i, t, s) in moves.iter().take(self.max_tries) {
            let mut y = x_j.to_vec();
            let mut v = y[i].clone().into_vec();
            v[t] = s;
            y[i] = SymbolSequence::from(v);
            let refs: Vec<&SymbolSequence> = y.iter().collect();
            match code.book().find_matching(code.pattern(ctx.j.links(), &refs), 1, work) {
                Ok(found) if !found.is_empty() => return Ok(Some(y)),
                Ok(_) | Err(crate::codec::CodecError::SearchBudget) => {}
                Err(e) => return Err(e.into()),
            }
        }
        Ok(None)
    }
}

impl JammingStrategy for SpoofConsistent {
    fn id(&self) -> &str {
        "spoof-consistent"
    }

    fn jam(&self, ctx: &JamContext<'_>, x_j: &[SymbolSequence], seed: u64) -> Result<Vec<SymbolSequence>, AdversaryError> {
        let mut g = rng::stream(seed, "jam-consistent", 0);
        let code = ctx.code.code();
        if let CodeRef::Direct(d) = ctx.code {
            if d.book().is_cached() && d.params().messages() <= EXACT_SCAN_MESSAGES {
                let ties = Self::nearest(d, ctx.j, x_j)?;
                return Ok(if ties.is_empty() { x_j.to_vec() } else { ties[g.random_range(0..ties.len())].clone() });
            }
            if let Some(y) = self.neighbour_search(ctx, d, x_j, &mut g)? {
                return Ok(y);
            }
        }
        let mut best: Option<(usize, Vec<SymbolSequence>)> = None;
        for attempt in 0..self.max_tries {
            let m = g.random_range(1..=code.params().messages());
            let y = restrict(code.active_links(m, rng::derive_seed(seed, "jam-consistent-map", attempt as u64))?, ctx.j);
            let d = hamming(&y, x_j);
            if d > 0 && best.as_ref().is_none_or(|(b, _)| d < *b) {
                let done = d == 1;
                best = Some((d, y));
                if done {
                    break;
                }
            }
        }
        Ok(best.map_or_else(|| x_j.to_vec(), |(_, y)| y))
    }

    fn jam_law(&self, ctx: &JamContext<'_>, x_j: &[SymbolSequence], _: u128) -> Result<Vec<JamPoint>, AdversaryError> {
        match ctx.code {
            CodeRef::Direct(d) if d.book().is_cached() && d.params().messages() <= EXACT_SCAN_MESSAGES => {
                let ties = Self::nearest(d, ctx.j, x_j)?;
                if ties.is_empty() {
                    return Ok(vec![JamPoint { prob: 1.0, y_j: x_j.to_vec() }]);
                }
                let p = 1.0 / ties.len() as f64;
                Ok(ties.into_iter().map(|y_j| JamPoint { prob: p, y_j }).collect())
            }
            _ => Err(AdversaryError::NotEnumerable(self.id().to_string())),
        }
    }
}

/// Impersonates Alice: writes `x_J(m')` for a uniform fake message `m'`.
/// Only meaningful when `|J| >= C/2`, which needs a model that bypasses the
/// `2Z < C` check.
#[derive(Clone, Copy, Debug, Default)]
pub struct Symmetrize;

impl Symmetrize {
    fn check(ctx: &JamContext<'_>) -> Result<(), AdversaryError> {
        let links = ctx.model.link_count();
        if !ctx.model.bypasses_budget_check() || 2 * ctx.j.len() < links {
            return Err(AdversaryError::RequiresBypass { jammed: ctx.j.len(), links });
        }
        Ok(())
    }
}

impl JammingStrategy for Symmetrize {
    fn id(&self) -> &str {
        "symmetrize"
    }

    fn jam(&self, ctx: &JamContext<'_>, _: &[SymbolSequence], seed: u64) -> Result<Vec<SymbolSequence>, AdversaryError> {
        Self::check(ctx)?;
        let code = ctx.code.code();
        let mut g = rng::stream(seed, "jam-symmetrize", 0);
        let m = g.random_range(1..=code.params().messages());
        Ok(restrict(code.active_links(m, rng::derive_seed(seed, "jam-symmetrize-map", 0))?, ctx.j))
    }

    fn jam_law(&self, ctx: &JamContext<'_>, _: &[SymbolSequence], max_points: u128) -> Result<Vec<JamPoint>, AdversaryError> {
        Self::check(ctx)?;
        message_mixture(ctx, max_points)
    }
}

fn restrict(links: Vec<SymbolSequence>, j: &JamSet) -> Vec<SymbolSequence> {
    j.links().iter().map(|&l| links[l].clone()).collect()
}

fn code_law_on(code: &dyn StealthCode, j: &JamSet) -> Vec<f64> {
    code.link_law().marginal(j.links()).map(|m| m.mass().to_vec()).unwrap_or_else(|_| vec![1.0])
}

fn steps_to_links(sizes: &[usize], steps: &[usize]) -> Vec<SymbolSequence> {
    let mut links = vec![Vec::with_capacity(steps.len()); sizes.len()];
    for &s in steps {
        let mut s = s;
        for l in (0..sizes.len()).rev() {
            links[l].push((s % sizes[l]) as u16);
            s /= sizes[l];
        }
    }
    links.into_iter().map(SymbolSequence::from).collect()
}

fn check_points(points: u128, max_points: u128) -> Result<(), AdversaryError> {
    if points > max_points {
        return Err(AdversaryError::OracleBudget { states: points, budget: max_points });
    }
    Ok(())
}

fn iid_points(sizes: &[usize], n: usize, step: &[f64], max_points: u128) -> Result<Vec<JamPoint>, AdversaryError> {
    let blocks = BlockDistribution::block_count(sizes, n).unwrap_or(u128::MAX);
    check_points(blocks, max_points)?;
    let law = BlockDistribution::iid(sizes.to_vec(), n, step)?;
    Ok(law
        .mass()
        .iter()
        .enumerate()
        .filter(|(_, &p)| p > 0.0)
        .map(|(i, &p)| JamPoint { prob: p, y_j: law.block(i) })
        .collect())
}

/// Law of `x_J(m')` for a uniform message `m'`, including any encoder
/// randomness.
pub(crate) fn message_mixture(ctx: &JamContext<'_>, max_points: u128) -> Result<Vec<JamPoint>, AdversaryError> {
    let code = ctx.code.code();
    let messages = code.params().messages();
    let n = ctx.blocklength();
    let w = 1.0 / messages as f64;
    match ctx.code {
        CodeRef::Direct(d) => {
            check_points(messages, max_points)?;
            let mut out = Vec::with_capacity(messages as usize);
            for m in 1..=messages {
                out.push(JamPoint { prob: w, y_j: restrict(d.codeword(m)?, ctx.j) });
            }
            Ok(out)
        }
        CodeRef::Layered(l) => {
            let sizes = ctx.jammed_sizes();
            let blocks = BlockDistribution::block_count(&sizes, n).unwrap_or(u128::MAX);
            check_points(messages.saturating_mul(blocks), max_points)?;
            let mut out = Vec::new();
            for m in 1..=messages {
                let laws = l.restricted_laws(m, ctx.j)?;
                for b in 0..blocks as usize {
                    let steps = block_steps(&sizes, n, b);
                    let p: f64 = steps.iter().zip(&laws).map(|(&s, law)| law[s]).product();
                    if p > 0.0 {
                        out.push(JamPoint { prob: w * p, y_j: block_at(&sizes, n, b) });
                    }
                }
            }
            Ok(out)
        }
    }
}

fn block_steps(sizes: &[usize], n: usize, mut b: usize) -> Vec<usize> {
    let k: usize = sizes.iter().product();
    let mut steps = vec![0; n];
    for t in (0..n).rev() {
        steps[t] = b % k;
        b /= k;
    }
    steps
}

/// A strategy id with optional parameters. Deserializes from a bare id string
/// or from an object.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(from = "RawSpec")]
pub struct StrategySpec {
    pub id: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub gamma: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub max_tries: Option<usize>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct FullSpec {
    id: String,
    #[serde(default)]
    gamma: Option<f64>,
    #[serde(default)]
    max_tries: Option<usize>,
}

#[derive(Deserialize)]
#[serde(untagged)]
enum RawSpec {
    Id(String),
    Full(FullSpec),
}

impl From<RawSpec> for StrategySpec {
    fn from(r: RawSpec) -> Self {
        match r {
            RawSpec::Id(id) => StrategySpec::new(id),
            RawSpec::Full(f) => StrategySpec { id: f.id, gamma: f.gamma, max_tries: f.max_tries },
        }
    }
}

impl StrategySpec {
    pub fn new(id: impl Into<String>) -> Self {
        StrategySpec { id: id.into(), gamma: None, max_tries: None }
    }
}

impl fmt::Display for StrategySpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.id)?;
        let mut params = Vec::new();
        if let Some(g) = self.gamma {
            params.push(format!("gamma={g}"));
        }
        if let Some(t) = self.max_tries {
            params.push(format!("max_tries={t}"));
        }
        if !params.is_empty() {
            write!(f, "({})", params.join(";"))?;
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ParamInfo {
    pub name: &'static str,
    pub kind: &'static str,
    pub default: String,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct StrategyInfo {
    pub id: &'static str,
    pub description: &'static str,
    pub params: Vec<ParamInfo>,
}

/// Every registered strategy with its parameter schema.
pub fn list_strategies() -> Vec<StrategyInfo> {
    let tries = || ParamInfo { name: "max_tries", kind: "positive integer", default: DEFAULT_MAX_TRIES.to_string() };
    vec![
        StrategyInfo { id: "passthrough", description: "leave the jammed links untouched", params: vec![] },
        StrategyInfo { id: "uniform-random", description: "i.i.d. uniform symbols", params: vec![] },
        StrategyInfo { id: "resample-innocent", description: "fresh i.i.d. innocent symbols, independent of the observation", params: vec![] },
        StrategyInfo {
            id: "spoof-codeword",
            description: "restriction of a uniformly chosen codeword that is typical on J",
            params: vec![
                ParamInfo { name: "gamma", kind: "typicality slack in (0, 2]", default: TypicalityParams::default().gamma().to_string() },
                tries(),
            ],
        },
        StrategyInfo { id: "spoof-consistent", description: "differing codeword restriction closest to the observation", params: vec![tries()] },
        StrategyInfo { id: "symmetrize", description: "impersonate Alice with a fake message (needs |J| >= C/2 and a bypass model)", params: vec![] },
    ]
}

pub fn strategy_from_spec(spec: &StrategySpec) -> Result<Box<dyn JammingStrategy>, AdversaryError> {
    let bad = |reason: &str| AdversaryError::BadParameter { strategy: spec.id.clone(), reason: reason.to_string() };
    let tries = match spec.max_tries {
        Some(0) => return Err(bad("max_tries must be positive")),
        Some(t) => t,
        None => DEFAULT_MAX_TRIES,
    };
    let takes_gamma = spec.id == "spoof-codeword";
    let takes_tries = takes_gamma || spec.id == "spoof-consistent";
    if spec.gamma.is_some() && !takes_gamma {
        return Err(bad("takes no gamma"));
    }
    if spec.max_tries.is_some() && !takes_tries {
        return Err(bad("takes no max_tries"));
    }
    Ok(match spec.id.as_str() {
        "passthrough" => Box::new(Passthrough),
        "uniform-random" => Box::new(UniformRandom),
        "resample-innocent" => Box::new(ResampleInnocent),
        "spoof-codeword" => {
            let typicality = match spec.gamma {
                Some(g) => TypicalityParams::new(g).map_err(|e| bad(&e.to_string()))?,
                None => TypicalityParams::default(),
            };
            Box::new(SpoofCodeword { typicality, max_tries: tries })
        }
        "spoof-consistent" => Box::new(SpoofConsistent { max_tries: tries }),
        "symmetrize" => Box::new(Symmetrize),
        other => return Err(AdversaryError::UnknownStrategy(other.to_string())),
    })
}
