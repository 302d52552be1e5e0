use std::collections::BTreeSet;
use std::ops::ControlFlow;

use serde::{Deserialize, Serialize};

use super::{Budget, CodeRef, CodecError, DirectCode, Filter, LayeredCode, LinkObservation, ReceivedWord, StealthCode};
use crate::probkit::{counts_typical, marginal_mass, SymbolSequence, TypicalityParams};
use crate::ratesolver::{JamSet, NetworkModel};

/// Bob's decision.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "verdict", content = "message")]
pub enum Verdict {
    Innocent,
    Message(u128),
    Error,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct DecodeResult {
    pub verdict: Verdict,
    /// Candidate unjammed sets searched.
    pub examined_sets: usize,
    /// The search hit its work budget; the verdict is then `Error`.
    pub exhausted: bool,
}

impl DecodeResult {
    fn from_list(list: &BTreeSet<u128>, examined_sets: usize) -> Self {
        let verdict = match list.len() {
            0 => Verdict::Innocent,
            1 => Verdict::Message(*list.iter().next().expect("one element")),
            _ => Verdict::Error,
        };
        DecodeResult { verdict, examined_sets, exhausted: false }
    }

    fn error(examined_sets: usize, exhausted: bool) -> Self {
        DecodeResult { verdict: Verdict::Error, examined_sets, exhausted }
    }
}

fn check_shape(rx: &ReceivedWord, c: usize, n: usize) -> Result<(), CodecError> {
    let ok = rx.links.len() == c
        && rx.links.iter().all(|l| match l {
            LinkObservation::Erased => true,
            LinkObservation::Symbols(s) => s.len() == n,
        });
    if ok {
        Ok(())
    } else {
        Err(CodecError::ShapeMismatch { expected: c, n })
    }
}

/// Candidate unjammed-set passes: only the maximal sets of the family, since a
/// match on the complement of a smaller set is also a match for any superset.
fn maximal_sets(model: &NetworkModel) -> Vec<JamSet> {
    model.jam_family().maximal().cloned().collect()
}

/// Exact-match list decoding under overwrite jamming.
///
/// Every message whose codeword equals `y` outside some `Ĵ` of the family
/// joins the list; a unique index is decoded, an empty list means innocent.
pub fn decode_overwrite(code: &DirectCode, rx: &ReceivedWord, model: &NetworkModel) -> Result<DecodeResult, CodecError> {
    if code.link_sizes() != model.link_alphabet_sizes() {
        return Err(CodecError::AlphabetMismatch);
    }
    let c = code.link_count();
    check_shape(rx, c, code.params().n())?;
    let y: Vec<&SymbolSequence> = match (0..c).map(|l| rx.link(l)).collect::<Option<Vec<_>>>() {
        Some(y) => y,
        None => return Ok(DecodeResult::error(0, false)),
    };
    let mut list = BTreeSet::new();
    let mut examined = 0;
    for jh in maximal_sets(model) {
        examined += 1;
        let keep = jh.complement(c);
        let values: Vec<&SymbolSequence> = keep.iter().map(|&l| y[l]).collect();
        let known = code.pattern(&keep, &values);
        match code.book().find_matching(known, 2, code.options().search_budget) {
            Ok(found) => list.extend(found),
            Err(CodecError::SearchBudget) => return Ok(DecodeResult::error(examined, true)),
            Err(e) => return Err(e),
        }
        if list.len() >= 2 {
            break;
        }
    }
    Ok(DecodeResult::from_list(&list, examined))
}

/// Joint typicality of `(u, y)` tracked incrementally along the tree of a
/// single-component codebook, where positions are time steps.
///
/// With `y` fixed, every column of the joint type has a known final total, so
/// the positions still to come in column `y` can only be absorbed by the
/// column's remaining deficit; whatever does not fit is excess for sure.
struct JointTypical<'a> {
    /// `P(u, y)` flattened as `u * ky + y`.
    probs: &'a [f64],
    ky: usize,
    y: &'a [usize],
    /// Positions after `t` with the same `y` symbol as `t`.
    later: Vec<u32>,
    n: usize,
    /// Largest allowed `sum (c - nP)^+`, half the L1 slack in counts.
    slack: f64,
}

impl<'a> JointTypical<'a> {
    fn new(probs: &'a [f64], ky: usize, y: &'a [usize], slack: f64) -> Self {
        let mut seen = vec![0u32; ky];
        let mut later = vec![0u32; y.len()];
        for t in (0..y.len()).rev() {
            later[t] = seen[y[t]];
            seen[y[t]] += 1;
        }
        JointTypical { probs, ky, y, later, n: y.len(), slack }
    }

    fn column_bound(excess: f64, deficit: f64, remaining: u32) -> f64 {
        excess + (remaining as f64 - deficit).max(0.0)
    }
}

#[derive(Clone)]
struct TypState {
    counts: Vec<u32>,
    col_excess: Vec<f64>,
    col_deficit: Vec<f64>,
    /// Lower bound on the final `sum (c - nP)^+`.
    bound: f64,
}

impl Filter for JointTypical<'_> {
    type State = TypState;

    fn root(&self) -> TypState {
        let mut col_deficit = vec![0.0; self.ky];
        for (cell, &p) in self.probs.iter().enumerate() {
            col_deficit[cell % self.ky] += self.n as f64 * p;
        }
        let mut remaining = vec![0u32; self.ky];
        for &s in self.y {
            remaining[s] += 1;
        }
        let bound = (0..self.ky).map(|c| Self::column_bound(0.0, col_deficit[c], remaining[c])).sum();
        TypState { counts: vec![0; self.probs.len()], col_excess: vec![0.0; self.ky], col_deficit, bound }
    }

    #[inline]
    fn step(&self, st: &TypState, t: usize, u: u16) -> Option<TypState> {
        let col = self.y[t];
        let cell = u as usize * self.ky + col;
        let p = self.probs[cell];
        if p == 0.0 {
            return None;
        }
        let expect = self.n as f64 * p;
        let c = st.counts[cell] as f64;
        let (exc, def) = (st.col_excess[col], st.col_deficit[col]);
        let before = Self::column_bound(exc, def, self.later[t] + 1);
        let (exc, def) = (exc + (c + 1.0 - expect).max(0.0) - (c - expect).max(0.0), def - (expect - c).clamp(0.0, 1.0));
        let after = Self::column_bound(exc, def, self.later[t]);
        let bound = st.bound + after - before;
        if bound > self.slack + 1e-9 {
            return None;
        }
        let mut next = st.clone();
        next.counts[cell] += 1;
        next.col_excess[col] = exc;
        next.col_deficit[col] = def;
        next.bound = bound;
        Some(next)
    }

    fn accept(&self, st: &TypState) -> bool {
        let counts: Vec<u64> = st.counts.iter().map(|&c| c as u64).collect();
        counts_typical(&counts, self.n, self.probs, 2.0 * self.slack / self.n as f64)
    }
}

/// Messages jointly typical with `y` on `keep`, at most two.
fn typical_matches(
    code: &LayeredCode,
    rx: &ReceivedWord,
    keep: &[usize],
    tp: TypicalityParams,
) -> Result<Option<Vec<u128>>, CodecError> {
    let n = code.params().n();
    let sizes = code.link_sizes();
    let ky: usize = keep.iter().map(|&l| sizes[l]).product();
    let y: Vec<usize> = (0..n)
        .map(|t| keep.iter().fold(0, |acc, &l| acc * sizes[l] + rx.link(l).expect("unerased").as_slice()[t] as usize))
        .collect();
    let joint = code.joint_ux();
    let mut factors = vec![0];
    factors.extend(keep.iter().map(|&l| l + 1));
    let probs = marginal_mass(joint.factor_sizes(), joint.mass(), &factors);

    // no codeword can be jointly typical with a y that is not typical on its own
    let p_y = marginal_mass(&[probs.len() / ky, ky], &probs, &[1]);
    let mut y_counts = vec![0u64; ky];
    for &s in &y {
        y_counts[s] += 1;
    }
    if !counts_typical(&y_counts, n, &p_y, tp.gamma()) {
        return Ok(Some(Vec::new()));
    }

    let filter = JointTypical::new(&probs, ky, &y, tp.gamma() * n as f64 / 2.0);
    let mut found = Vec::new();
    let res = code.book().search(&filter, &mut Budget::new(code.options().search_budget), |m, _| {
        found.push(m);
        if found.len() >= 2 {
            ControlFlow::Break(())
        } else {
            ControlFlow::Continue(())
        }
    });
    match res {
        Ok(()) => Ok(Some(found)),
        Err(CodecError::SearchBudget) => Ok(None),
        Err(e) => Err(e),
    }
}

/// Typicality decoding under erasure jamming.
///
/// The erased links reveal `J`; the decoder looks for the messages whose
/// `u(m)` is jointly typical with `y_{J^c}` under the exact joint of
/// `(U, X_{J^c})`.
pub fn decode_erasure(
    code: &LayeredCode,
    rx: &ReceivedWord,
    model: &NetworkModel,
    tp: TypicalityParams,
) -> Result<DecodeResult, CodecError> {
    if code.link_sizes() != model.link_alphabet_sizes() {
        return Err(CodecError::AlphabetMismatch);
    }
    let c = code.link_count();
    check_shape(rx, c, code.params().n())?;
    let erased = rx.erased_links();
    if erased.len() > model.adversary_budget() || erased.len() == c {
        return Ok(DecodeResult::error(0, false));
    }
    let keep = JamSet::new(erased).complement(c);
    match typical_matches(code, rx, &keep, tp)? {
        Some(found) => Ok(DecodeResult::from_list(&found.into_iter().collect(), 1)),
        None => Ok(DecodeResult::error(1, true)),
    }
}

/// Layered code under overwrite jamming: typicality list decoding over every
/// candidate unjammed set. An experiment mode with no guarantee attached.
pub fn decode_layered_overwrite(
    code: &LayeredCode,
    rx: &ReceivedWord,
    model: &NetworkModel,
    tp: TypicalityParams,
) -> Result<DecodeResult, CodecError> {
    if code.link_sizes() != model.link_alphabet_sizes() {
        return Err(CodecError::AlphabetMismatch);
    }
    let c = code.link_count();
    check_shape(rx, c, code.params().n())?;
    if !rx.erased_links().is_empty() {
        return Ok(DecodeResult::error(0, false));
    }
    let mut list = BTreeSet::new();
    let mut examined = 0;
    for jh in maximal_sets(model) {
        examined += 1;
        match typical_matches(code, rx, &jh.complement(c), tp)? {
            Some(found) => list.extend(found),
            None => return Ok(DecodeResult::error(examined, true)),
        }
        if list.len() >= 2 {
            break;
        }
    }
    Ok(DecodeResult::from_list(&list, examined))
}

/// Bob's decoder, selected per scheme.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Decoder {
    /// Exact-match list decoding of a direct code.
    Overwrite,
    /// Typicality decoding of a layered code on the unerased links.
    Erasure(TypicalityParams),
    /// Typicality list decoding of a layered code over every candidate set.
    LayeredOverwrite(TypicalityParams),
}

impl Decoder {
    pub fn decode(self, code: CodeRef<'_>, rx: &ReceivedWord, model: &NetworkModel) -> Result<DecodeResult, CodecError> {
        match (self, code) {
            (Decoder::Overwrite, CodeRef::Direct(c)) => decode_overwrite(c, rx, model),
            (Decoder::Erasure(tp), CodeRef::Layered(c)) => decode_erasure(c, rx, model, tp),
            (Decoder::LayeredOverwrite(tp), CodeRef::Layered(c)) => decode_layered_overwrite(c, rx, model, tp),
            _ => Err(CodecError::WrongCodeFamily),
        }
    }
}
