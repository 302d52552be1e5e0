//! Measurable finite-n stand-ins for the concentration statements behind the
//! overwrite scheme.

use std::collections::HashSet;
use std::io::Write;
use std::ops::ControlFlow;

use serde::{Deserialize, Serialize};

use super::{Budget, CodecError, DirectCode, StealthCode};
use crate::codec::codebook::Pattern;
use crate::probkit::{marginal_mass, SymbolSequence};
use crate::ratesolver::{JamSet, NetworkModel};

/// Codewords agreeing with `x_J` on `J`, against the expectation `N P(x_J)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Claim1Count {
    pub count: u128,
    pub expected: f64,
}

impl Claim1Count {
    /// `count / expected`, infinite when nothing is expected.
    pub fn ratio(&self) -> f64 {
        self.count as f64 / self.expected
    }
}

fn check_restriction(code: &DirectCode, j: &JamSet, x_j: &[SymbolSequence]) -> Result<(), CodecError> {
    let c = code.link_count();
    if j.max_link().is_some_and(|l| l >= c) {
        return Err(CodecError::BadJamSet(j.clone()));
    }
    if x_j.len() != j.len() || x_j.iter().any(|s| s.len() != code.params().n()) {
        return Err(CodecError::ShapeMismatch { expected: j.len(), n: code.params().n() });
    }
    Ok(())
}

/// `|{m : x_J(m) = x_J}|` and `N P^n_{X_J}(x_J)`.
pub fn claim1_count(code: &DirectCode, j: &JamSet, x_j: &[SymbolSequence]) -> Result<Claim1Count, CodecError> {
    check_restriction(code, j, x_j)?;
    let known = code.pattern(j.links(), &x_j.iter().collect::<Vec<_>>());
    let count = code.book().count_matching(known, code.options().search_budget)?;
    let p_j = marginal_mass(code.link_sizes(), code.p_x().mass(), j.links());
    let sizes = code.link_sizes();
    let mut log_p = 0.0;
    for t in 0..code.params().n() {
        let idx = j.links().iter().zip(x_j).fold(0, |acc, (&l, s)| acc * sizes[l] + s.as_slice()[t] as usize);
        log_p += p_j[idx].log2();
    }
    Ok(Claim1Count { count, expected: code.params().messages() as f64 * log_p.exp2() })
}

/// The worst ratio over candidate sets `Ĵ` disjoint from `J`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Lemma2Ratio {
    pub ratio: f64,
    pub numerator: u128,
    pub denominator: u128,
    /// The `Ĵ` attaining the ratio; `None` when no codeword has `x_J`.
    pub worst_set: Option<JamSet>,
}

fn collect_matching(code: &DirectCode, j: &JamSet, v: &[SymbolSequence]) -> Result<Vec<Vec<u16>>, CodecError> {
    let pattern = Pattern { known: code.pattern(j.links(), &v.iter().collect::<Vec<_>>()) };
    let mut out = Vec::new();
    code.book().search(&pattern, &mut Budget::new(code.options().search_budget), |_, w| {
        out.push(w.to_vec());
        ControlFlow::Continue(())
    })?;
    Ok(out)
}

/// For a typical `x_J` and an overwrite `y_J != x_J`, the share of messages
/// with `x_J(m) = x_J` that a spoofed `y_J` could confuse: those whose symbols
/// on `G = (Ĵ ∪ J)^c` also appear, next to `y_J` on `J`, in another codeword.
/// Maximised over every `Ĵ` of the family disjoint from `J`.
pub fn lemma2_ratio(
    code: &DirectCode,
    model: &NetworkModel,
    j: &JamSet,
    x_j: &[SymbolSequence],
    y_j: &[SymbolSequence],
) -> Result<Lemma2Ratio, CodecError> {
    check_restriction(code, j, x_j)?;
    check_restriction(code, j, y_j)?;
    let c = code.link_count();
    let with_x = collect_matching(code, j, x_j)?;
    let with_y = collect_matching(code, j, y_j)?;
    let denominator = with_x.len() as u128;
    let mut best = Lemma2Ratio { ratio: 0.0, numerator: 0, denominator, worst_set: None };
    if denominator == 0 {
        return Ok(best);
    }
    let n = code.params().n();
    let restrict = |w: &[u16], links: &[usize]| -> Vec<u16> {
        (0..n).flat_map(|t| links.iter().map(move |&l| w[t * c + l])).collect()
    };
    for jh in model.jam_family().iter() {
        if jh == j || jh.links().iter().any(|&l| j.contains(l)) {
            continue;
        }
        let g: Vec<usize> = (0..c).filter(|&l| !jh.contains(l) && !j.contains(l)).collect();
        let spoofable: HashSet<Vec<u16>> = with_y.iter().map(|w| restrict(w, &g)).collect();
        let numerator = with_x.iter().filter(|w| spoofable.contains(&restrict(w, &g))).count() as u128;
        let ratio = numerator as f64 / denominator as f64;
        if best.worst_set.is_none() || ratio > best.ratio {
            best = Lemma2Ratio { ratio, numerator, denominator, worst_set: Some(jh.clone()) };
        }
    }
    Ok(best)
}

/// Writes every codeword as a CSV row: the message index, then the symbols of
/// each link in turn.
pub fn dump_codebook<W: Write>(code: &DirectCode, max_messages: u128, out: W) -> Result<(), CodecError> {
    let mut out = std::io::BufWriter::new(out);
    let c = code.link_count();
    let n = code.params().n();
    let mut io_err = None;
    code.book().for_each(max_messages, |m, w| {
        if io_err.is_some() {
            return;
        }
        let mut row = m.to_string();
        for l in 0..c {
            for t in 0..n {
                row.push(',');
                row.push_str(&w[t * c + l].to_string());
            }
        }
        if let Err(e) = writeln!(out, "{row}") {
            io_err = Some(e);
        }
    })?;
    match io_err.or_else(|| out.flush().err()) {
        Some(e) => Err(CodecError::Io(e.to_string())),
        None => Ok(()),
    }
}
