//! Lazily generated i.i.d. codebooks.
//!
//! `N` codewords of `n` time steps, each time step a tuple of `comps` symbols
//! drawn from a fixed joint law, are generated as a count-splitting tree: the
//! root holds all `N` codewords, and each level splits a node's count among the
//! symbol values of one `(time, component)` position by sequential binomial
//! draws from the conditional law given the earlier components of the same time
//! step. Nodes with at most [`LEAF_MAX`] codewords become leaves whose
//! codewords are generated one by one. Every draw is seeded by the node's key,
//! so any codeword, and any subtree, can be regenerated on demand.
//!
//! The multiset of codewords has exactly the law of `N` i.i.d. draws. Messages
//! are numbered in depth-first order of the tree.

use std::ops::ControlFlow;
use std::sync::Arc;

use rand::{Rng, RngCore, SeedableRng};
use rand_distr::{Binomial, Distribution as _, StandardNormal};

use super::CodecError;
use crate::probkit::{marginal_mass, JointDistribution};
use rand_xoshiro::SplitMix64;

use crate::rng;

/// Cheap to seed, which matters: every tree node and leaf codeword has its own stream.
type NodeRng = SplitMix64;

/// Nodes holding at most this many codewords are expanded codeword by codeword.
pub const LEAF_MAX: u128 = 4;

/// Symbols cached in memory when the codebook is small enough (`N * n * comps`).
pub const DEFAULT_MEMORY_BUDGET: u128 = 1 << 26;

/// Counts below this are split with precomputed binomial tables, memory permitting.
const TABLE_ROWS_MAX: usize = 1024;

/// Total bytes of binomial tables per codebook.
const TABLE_BYTES: usize = 32 << 20;

/// Inverse-CDF tables of `Binomial(n, q)` for `n < rows`, as thresholds on a
/// uniform `u64`.
#[derive(Debug)]
struct BinomialTable {
    rows: usize,
    /// Row `n` holds the thresholds for `k = 0..n` at offset `n (n - 1) / 2`.
    thresholds: Vec<u64>,
}

impl BinomialTable {
    fn new(q: f64, rows: usize) -> Self {
        let mut ln_fact = vec![0.0f64; rows + 1];
        for k in 1..=rows {
            ln_fact[k] = ln_fact[k - 1] + (k as f64).ln();
        }
        let (lq, lr) = (q.ln(), (-q).ln_1p());
        let mut thresholds = Vec::with_capacity(rows * rows.saturating_sub(1) / 2);
        for n in 0..rows {
            let mut cdf = 0.0;
            for k in 0..n {
                cdf += (ln_fact[n] - ln_fact[k] - ln_fact[n - k] + k as f64 * lq + (n - k) as f64 * lr).exp();
                thresholds.push(to_threshold(cdf));
            }
        }
        BinomialTable { rows, thresholds }
    }

    #[inline]
    fn sample(&self, n: usize, r: u64) -> usize {
        let row = &self.thresholds[n * (n - 1) / 2..n * (n + 1) / 2];
        row.partition_point(|&t| t <= r)
    }
}

/// `floor(p * 2^64)`, saturating.
fn to_threshold(p: f64) -> u64 {
    (p * 18_446_744_073_709_551_616.0) as u64
}

/// One sequential binomial draw of a split: symbol `s` takes `Binomial(left, q)`.
#[derive(Debug)]
struct SplitStep {
    symbol: usize,
    q: f64,
    table: Option<BinomialTable>,
}

/// Per-time-step law, factored into per-component conditionals.
#[derive(Debug)]
struct StepLaw {
    sizes: Vec<usize>,
    /// `steps[i][prefix]`: how to split a count at component `i` given the
    /// earlier components of the step (flattened).
    steps: Vec<Vec<Vec<SplitStep>>>,
    /// `last[i][prefix]`: the symbol that takes whatever count remains.
    last: Vec<Vec<usize>>,
    /// `thresholds[i][prefix][s]`: inverse-CDF thresholds for single draws.
    thresholds: Vec<Vec<Vec<u64>>>,
}

impl StepLaw {
    fn new(law: &JointDistribution) -> Self {
        let sizes = law.factor_sizes().to_vec();
        let mut cond = Vec::with_capacity(sizes.len());
        let mut prev = vec![1.0];
        for i in 0..sizes.len() {
            let upto: Vec<usize> = (0..=i).collect();
            let m = marginal_mass(&sizes, law.mass(), &upto);
            let rows: Vec<Vec<f64>> = prev
                .iter()
                .enumerate()
                .map(|(pre, &pm)| {
                    (0..sizes[i]).map(|s| if pm > 0.0 { m[pre * sizes[i] + s] / pm } else { 0.0 }).collect()
                })
                .collect();
            cond.push(rows);
            prev = m;
        }
        let draws: usize = cond
            .iter()
            .flatten()
            .map(|probs| probs.iter().filter(|&&p| p > 0.0).count().saturating_sub(1))
            .sum();
        // a table of r rows takes about 4 r^2 bytes
        let table_rows = ((TABLE_BYTES / 4 / draws.max(1)) as f64).sqrt() as usize;
        let table_rows = table_rows.min(TABLE_ROWS_MAX);
        let mut steps = Vec::with_capacity(sizes.len());
        let mut last = Vec::with_capacity(sizes.len());
        let mut thresholds = Vec::with_capacity(sizes.len());
        for rows in &cond {
            let mut st = Vec::with_capacity(rows.len());
            let mut ls = Vec::with_capacity(rows.len());
            let mut th = Vec::with_capacity(rows.len());
            for probs in rows {
                let l = probs.iter().rposition(|&p| p > 0.0).unwrap_or(0);
                let mut mass_left = 1.0f64;
                let mut row_steps = Vec::new();
                for (s, &p) in probs.iter().enumerate().take(l) {
                    if p <= 0.0 {
                        continue;
                    }
                    let q = (p / mass_left).clamp(0.0, 1.0);
                    mass_left -= p;
                    let table = (q > 0.0 && q < 1.0 && table_rows >= 16).then(|| BinomialTable::new(q, table_rows));
                    row_steps.push(SplitStep { symbol: s, q, table });
                }
                st.push(row_steps);
                ls.push(l);
                let mut acc = 0.0;
                let mut t: Vec<u64> = probs
                    .iter()
                    .map(|&p| {
                        acc += p;
                        to_threshold(acc)
                    })
                    .collect();
                // rounding must never leave a gap above the last live symbol
                for x in &mut t[l..] {
                    *x = u64::MAX;
                }
                th.push(t);
            }
            steps.push(st);
            last.push(ls);
            thresholds.push(th);
        }
        StepLaw { sizes, steps, last, thresholds }
    }

    /// One draw of component `i` given `pre`.
    #[inline]
    fn draw(&self, i: usize, pre: usize, r: u64) -> u16 {
        let t = &self.thresholds[i][pre];
        t.partition_point(|&x| x <= r) as u16
    }

    fn comps(&self) -> usize {
        self.sizes.len()
    }
}

/// Where codewords live.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Storage {
    /// Cache in memory when within the budget, otherwise regenerate on demand.
    #[default]
    Auto,
    /// Always cache; fails if over the budget.
    InMemory,
    /// Never cache.
    Streaming,
}

/// Restricts a tree search. Positions (`t * comps + i`) are visited in
/// codeword order.
pub(crate) trait Filter {
    type State: Clone;
    fn root(&self) -> Self::State;
    /// Extends `st` with symbol `s` at position `pos`; `None` prunes.
    fn step(&self, st: &Self::State, pos: usize, s: u16) -> Option<Self::State>;
    fn accept(&self, st: &Self::State) -> bool;
}

/// Matches codewords whose known positions carry given symbols.
pub(crate) struct Pattern {
    pub known: Vec<Option<u16>>,
}

impl Filter for Pattern {
    type State = ();
    fn root(&self) {}
    #[inline]
    fn step(&self, _: &(), pos: usize, s: u16) -> Option<()> {
        match self.known[pos] {
            Some(k) if k != s => None,
            _ => Some(()),
        }
    }
    fn accept(&self, _: &()) -> bool {
        true
    }
}

/// Work counter for searches that must stay within a node budget.
pub(crate) struct Budget {
    left: u64,
}

impl Budget {
    pub fn new(limit: u64) -> Self {
        Budget { left: limit }
    }

    #[inline]
    fn spend(&mut self, n: u64) -> Result<(), CodecError> {
        if self.left < n {
            return Err(CodecError::SearchBudget);
        }
        self.left -= n;
        Ok(())
    }
}

/// Mutable state of one tree search.
struct Walk<'a, F> {
    filter: &'a F,
    budget: &'a mut Budget,
    sink: &'a mut dyn FnMut(u128, &[u16]) -> ControlFlow<()>,
    word: Vec<u16>,
    /// Split counts, `width` slots per level.
    scratch: Vec<u128>,
    width: usize,
}

/// An i.i.d. random codebook, regenerable from its seed.
#[derive(Clone, Debug)]
pub struct RandomCodebook {
    law: Arc<StepLaw>,
    n: usize,
    messages: u128,
    root_key: u64,
    cache: Option<Arc<Vec<u16>>>,
}

impl RandomCodebook {
    pub fn new(
        law: &JointDistribution,
        n: usize,
        messages: u128,
        seed: u64,
        storage: Storage,
        memory_budget: u128,
    ) -> Result<Self, CodecError> {
        if n == 0 {
            return Err(CodecError::ZeroBlocklength);
        }
        if messages == 0 {
            return Err(CodecError::NoMessages);
        }
        let mut book = RandomCodebook {
            law: Arc::new(StepLaw::new(law)),
            n,
            messages,
            root_key: rng::derive_seed(seed, "codebook", 0),
            cache: None,
        };
        let symbols = messages.checked_mul((n * book.law.comps()) as u128);
        let fits = symbols.is_some_and(|s| s <= memory_budget);
        match storage {
            Storage::InMemory if !fits => {
                return Err(CodecError::MemoryBudget { requested: symbols, budget: memory_budget })
            }
            Storage::InMemory | Storage::Auto if fits => {
                let len = book.word_len();
                let mut flat = Vec::with_capacity(messages as usize * len);
                book.for_each_unbounded(|_, word| flat.extend_from_slice(word));
                book.cache = Some(Arc::new(flat));
            }
            _ => {}
        }
        Ok(book)
    }

    pub fn blocklength(&self) -> usize {
        self.n
    }

    pub fn messages(&self) -> u128 {
        self.messages
    }

    /// Components per time step.
    pub fn comps(&self) -> usize {
        self.law.comps()
    }

    pub fn component_sizes(&self) -> &[usize] {
        &self.law.sizes
    }

    pub fn is_cached(&self) -> bool {
        self.cache.is_some()
    }

    /// Symbols per codeword, `n * comps`, stored time-major.
    pub fn word_len(&self) -> usize {
        self.n * self.law.comps()
    }

    fn levels(&self) -> usize {
        self.word_len()
    }

    /// Splits `count` among the symbols of component `i` given the earlier
    /// components `pre` of the same time step.
    fn split(&self, key: u64, i: usize, pre: usize, count: u128, out: &mut [u128]) {
        out.fill(0);
        let mut g = NodeRng::seed_from_u64(key);
        let mut left = count;
        for step in &self.law.steps[i][pre] {
            if left == 0 {
                break;
            }
            let c = match &step.table {
                Some(t) if left < t.rows as u128 => t.sample(left as usize, g.next_u64()) as u128,
                _ => binomial(&mut g, left, step.q),
            };
            out[step.symbol] = c;
            left -= c;
        }
        out[self.law.last[i][pre]] += left;
    }

    fn next_pre(&self, level: usize, pre: usize, s: u16) -> usize {
        let i = level % self.law.comps();
        if i + 1 == self.law.comps() {
            0
        } else {
            pre * self.law.sizes[i] + s as usize
        }
    }

    /// Fills `word[level..]` with leaf codeword `j`, calling `keep` after each
    /// symbol; stops early when `keep` returns false. Returns whether it finished.
    fn leaf_word(&self, key: u64, j: u128, level: usize, pre: usize, word: &mut [u16], mut keep: impl FnMut(usize, u16) -> bool) -> bool {
        let mut g = NodeRng::seed_from_u64(rng::child_key(key, (j as u64) ^ 0xA5A5_0000_0000_0000));
        let comps = self.law.comps();
        let mut pre = pre;
        let mut i = level % comps;
        for l in level..self.levels() {
            let s = self.law.draw(i, pre, g.next_u64());
            word[l] = s;
            if !keep(l, s) {
                return false;
            }
            i += 1;
            if i == comps {
                i = 0;
                pre = 0;
            } else {
                pre = pre * self.law.sizes[i - 1] + s as usize;
            }
        }
        true
    }

    /// Codeword of message `m` (1-based), time-major.
    pub fn codeword(&self, m: u128) -> Result<Vec<u16>, CodecError> {
        if m == 0 || m > self.messages {
            return Err(CodecError::MessageOutOfRange { message: m, messages: self.messages });
        }
        let len = self.word_len();
        if let Some(c) = &self.cache {
            let i = (m - 1) as usize * len;
            return Ok(c[i..i + len].to_vec());
        }
        let mut word = vec![0u16; len];
        let mut target = m - 1;
        let (mut key, mut count, mut level, mut pre) = (self.root_key, self.messages, 0usize, 0usize);
        let mut counts = vec![0u128; self.law.sizes.iter().copied().max().unwrap_or(1)];
        while level < self.levels() && count > LEAF_MAX {
            let i = level % self.law.comps();
            let counts = &mut counts[..self.law.sizes[i]];
            self.split(key, i, pre, count, counts);
            let mut s = 0;
            while target >= counts[s] {
                target -= counts[s];
                s += 1;
            }
            word[level] = s as u16;
            key = rng::child_key(key, s as u64 + 1);
            count = counts[s];
            pre = self.next_pre(level, pre, s as u16);
            level += 1;
        }
        if level < self.levels() {
            self.leaf_word(key, target, level, pre, &mut word, |_, _| true);
        }
        Ok(word)
    }

    /// Depth-first search of the tree under `filter`. `sink` receives each
    /// accepted message (1-based) with its codeword and may stop the search.
    pub(crate) fn search<F: Filter>(
        &self,
        filter: &F,
        budget: &mut Budget,
        mut sink: impl FnMut(u128, &[u16]) -> ControlFlow<()>,
    ) -> Result<(), CodecError> {
        if let Some(c) = &self.cache {
            let len = self.word_len();
            'words: for (m, word) in c.chunks_exact(len).enumerate() {
                budget.spend(1)?;
                let mut st = filter.root();
                for (l, &s) in word.iter().enumerate() {
                    match filter.step(&st, l, s) {
                        Some(next) => st = next,
                        None => continue 'words,
                    }
                }
                if filter.accept(&st) && sink(m as u128 + 1, word).is_break() {
                    return Ok(());
                }
            }
            return Ok(());
        }
        let width = self.law.sizes.iter().copied().max().unwrap_or(1);
        let mut walk = Walk {
            filter,
            budget,
            sink: &mut sink,
            word: vec![0u16; self.word_len()],
            scratch: vec![0u128; self.levels() * width],
            width,
        };
        self.dfs(&mut walk, self.root_key, self.messages, 0, 0, 0, 0, filter.root()).map(|_| ())
    }

    #[allow(clippy::too_many_arguments)]
    fn dfs<F: Filter>(
        &self,
        walk: &mut Walk<'_, F>,
        key: u64,
        count: u128,
        offset: u128,
        level: usize,
        comp: usize,
        pre: usize,
        st: F::State,
    ) -> Result<ControlFlow<()>, CodecError> {
        if level == self.levels() {
            walk.budget.spend(1)?;
            if walk.filter.accept(&st) {
                for j in 0..count {
                    if (walk.sink)(offset + j + 1, &walk.word).is_break() {
                        return Ok(ControlFlow::Break(()));
                    }
                }
            }
            return Ok(ControlFlow::Continue(()));
        }
        if count <= LEAF_MAX {
            for j in 0..count {
                walk.budget.spend(1)?;
                let mut cur = st.clone();
                let mut steps = 0u64;
                let filter = walk.filter;
                let done = self.leaf_word(key, j, level, pre, &mut walk.word, |l, s| {
                    steps += 1;
                    match filter.step(&cur, l, s) {
                        Some(next) => {
                            cur = next;
                            true
                        }
                        None => false,
                    }
                });
                walk.budget.spend(steps / 8)?;
                if done && walk.filter.accept(&cur) && (walk.sink)(offset + j + 1, &walk.word).is_break() {
                    return Ok(ControlFlow::Break(()));
                }
            }
            return Ok(ControlFlow::Continue(()));
        }
        walk.budget.spend(1)?;
        let size = self.law.sizes[comp];
        let base = level * walk.width;
        self.split(key, comp, pre, count, &mut walk.scratch[base..base + size]);
        let (next_comp, last_comp) = if comp + 1 == self.law.comps() { (0, true) } else { (comp + 1, false) };
        let mut child_offset = offset;
        for s in 0..size {
            let c = walk.scratch[base + s];
            if c > 0 {
                if let Some(next) = walk.filter.step(&st, level, s as u16) {
                    walk.word[level] = s as u16;
                    let child_pre = if last_comp { 0 } else { pre * size + s };
                    let flow =
                        self.dfs(walk, rng::child_key(key, s as u64 + 1), c, child_offset, level + 1, next_comp, child_pre, next)?;
                    if flow.is_break() {
                        return Ok(flow);
                    }
                }
            }
            child_offset += c;
        }
        Ok(ControlFlow::Continue(()))
    }

    fn for_each_unbounded(&self, mut f: impl FnMut(u128, &[u16])) {
        struct All;
        impl Filter for All {
            type State = ();
            fn root(&self) {}
            fn step(&self, _: &(), _: usize, _: u16) -> Option<()> {
                Some(())
            }
            fn accept(&self, _: &()) -> bool {
                true
            }
        }
        let mut budget = Budget::new(u64::MAX);
        self.search(&All, &mut budget, |m, w| {
            f(m, w);
            ControlFlow::Continue(())
        })
        .expect("an unbounded search cannot run out of budget");
    }

    /// Visits every codeword in message order. Fails if there are more than
    /// `max_messages` of them.
    pub fn for_each(&self, max_messages: u128, f: impl FnMut(u128, &[u16])) -> Result<(), CodecError> {
        if self.messages > max_messages {
            return Err(CodecError::EnumerationBudget { messages: self.messages, budget: max_messages });
        }
        self.for_each_unbounded(f);
        Ok(())
    }

    /// Messages whose codewords carry the given symbols at the known positions,
    /// at most `limit` of them, in message order.
    pub fn find_matching(&self, known: Vec<Option<u16>>, limit: usize, work: u64) -> Result<Vec<u128>, CodecError> {
        let mut out = Vec::new();
        if limit == 0 {
            return Ok(out);
        }
        let pattern = Pattern { known };
        self.search(&pattern, &mut Budget::new(work), |m, _| {
            out.push(m);
            if out.len() >= limit {
                ControlFlow::Break(())
            } else {
                ControlFlow::Continue(())
            }
        })?;
        Ok(out)
    }

    /// Number of codewords matching the known positions.
    pub fn count_matching(&self, known: Vec<Option<u16>>, work: u64) -> Result<u128, CodecError> {
        let pattern = Pattern { known };
        let mut n = 0u128;
        self.search(&pattern, &mut Budget::new(work), |_, _| {
            n += 1;
            ControlFlow::Continue(())
        })?;
        Ok(n)
    }
}

/// `Binomial(n, p)`, with a normal approximation from `2^62` trials up
/// (`rand_distr` needs the mode to fit in an `i64`).
fn binomial<R: Rng>(g: &mut R, n: u128, p: f64) -> u128 {
    if p <= 0.0 || n == 0 {
        return 0;
    }
    if p >= 1.0 {
        return n;
    }
    if n < 1 << 62 {
        let n64 = n as u64;
        return Binomial::new(n64, p).expect("valid binomial parameters").sample(g) as u128;
    }
    let nf = n as f64;
    let z: f64 = StandardNormal.sample(g);
    let x = (nf * p + z * (nf * p * (1.0 - p)).sqrt()).round();
    (x.max(0.0) as u128).min(n)
}
