use serde::{Deserialize, Serialize};

use super::{check_budget, OracleError};
use crate::adversary::{erasure_jam, strategy_from_spec, JamContext, JammingStrategy, StrategySpec};
use crate::codec::{CodeRef, CodecError, Decoder, LinkObservation, ReceivedWord, Status, Transmission, Verdict};
use crate::exec::Exec;
use crate::probkit::{block_at, BlockDistribution, SymbolSequence};
use crate::ratesolver::{JamSet, NetworkModel};

/// What James does on `J`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "mode")]
pub enum Jamming {
    Erasure,
    Overwrite { strategy: StrategySpec },
}

/// `P(M^ != 0 | T=0) + (1/N) sum_m P(M^ != m | T=1, M=m)` and its parts.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ErrorProbability {
    pub total: f64,
    pub innocent: f64,
    pub active: f64,
    /// Decoder calls made.
    pub states: u128,
}

struct Setup<'a> {
    code: CodeRef<'a>,
    model: &'a NetworkModel,
    j: &'a JamSet,
    strategy: Option<Box<dyn JammingStrategy>>,
    decoder: Decoder,
    budget: u128,
}

impl Setup<'_> {
    /// Error mass of one transmission with probability `p`, and the decodes spent.
    fn score(&self, tx: &Transmission, p: f64, expect: Verdict) -> Result<(f64, u128), OracleError> {
        let Some(strategy) = &self.strategy else {
            let r = self.decoder.decode(self.code, &erasure_jam(tx, self.j), self.model)?;
            return Ok((if r.verdict == expect { 0.0 } else { p }, 1));
        };
        let ctx = JamContext { model: self.model, code: self.code, j: self.j };
        let x_j = tx.restrict(self.j);
        let points = strategy.jam_law(&ctx, &x_j, self.budget)?;
        let mut err = 0.0;
        for pt in &points {
            let rx = overwritten(tx, self.j, &pt.y_j);
            if self.decoder.decode(self.code, &rx, self.model)?.verdict != expect {
                err += p * pt.prob;
            }
        }
        Ok((err, points.len() as u128))
    }
}

fn overwritten(tx: &Transmission, j: &JamSet, y_j: &[SymbolSequence]) -> ReceivedWord {
    let mut links: Vec<LinkObservation> = tx.links.iter().cloned().map(LinkObservation::Symbols).collect();
    for (&l, y) in j.links().iter().zip(y_j) {
        links[l] = LinkObservation::Symbols(y.clone());
    }
    ReceivedWord { links }
}

/// Exact error probability, summed over both hypotheses, by enumerating every
/// innocent block, every message with every encoder outcome (kernel draws
/// included), and every jammer output.
pub fn exact_error_probability(
    code: CodeRef<'_>,
    model: &NetworkModel,
    j: &JamSet,
    jamming: &Jamming,
    decoder: Decoder,
    budget: u128,
    exec: Exec,
) -> Result<ErrorProbability, OracleError> {
    let c = code.code();
    if c.link_sizes() != model.link_alphabet_sizes() {
        return Err(CodecError::AlphabetMismatch.into());
    }
    model.check_jam_set(j)?;
    let strategy = match (jamming, decoder) {
        (Jamming::Erasure, Decoder::Erasure(_)) => None,
        (Jamming::Overwrite { strategy }, Decoder::Overwrite | Decoder::LayeredOverwrite(_)) => Some(strategy_from_spec(strategy)?),
        _ => return Err(OracleError::JammingMismatch),
    };
    let n = c.params().n();
    let sizes = model.link_alphabet_sizes().to_vec();
    let blocks = check_budget("innocent blocks", BlockDistribution::block_count(&sizes, n), budget)? as usize;
    let messages = c.params().messages();
    let per_message = if matches!(code, CodeRef::Direct(_)) { 1 } else { blocks as u128 };
    check_budget("transmissions", messages.checked_mul(per_message).and_then(|a| a.checked_add(blocks as u128)), budget)?;
    let setup = Setup { code, model, j, strategy, decoder, budget };

    let innocent = BlockDistribution::iid(sizes.clone(), n, model.innocent().mass())?;
    let inn_parts = exec.map(0..blocks as u64, |b| -> Result<(f64, u128), OracleError> {
        let p = innocent.mass()[b as usize];
        if p == 0.0 {
            return Ok((0.0, 0));
        }
        let tx = Transmission { status: Status::Innocent, message: 0, links: innocent.block(b as usize) };
        setup.score(&tx, p, Verdict::Innocent)
    });
    let all = JamSet::new((0..sizes.len()).collect());
    let act_parts = exec.map(0..messages as u64, |i| -> Result<(f64, u128), OracleError> {
        let m = i as u128 + 1;
        let expect = Verdict::Message(m);
        let mut err = 0.0;
        let mut states = 0;
        match code {
            CodeRef::Direct(d) => {
                let tx = Transmission { status: Status::Active, message: m, links: d.codeword(m)? };
                let (e, s) = setup.score(&tx, 1.0, expect)?;
                err += e;
                states += s;
            }
            CodeRef::Layered(l) => {
                use crate::codec::StealthCode;
                let laws = l.restricted_laws(m, &all)?;
                let k = laws.first().map_or(1, Vec::len);
                for b in 0..blocks {
                    let mut rest = b;
                    let mut p = 1.0;
                    for t in (0..n).rev() {
                        p *= laws[t][rest % k];
                        rest /= k;
                    }
                    if p > 0.0 {
                        let tx = Transmission { status: Status::Active, message: m, links: block_at(&sizes, n, b) };
                        let (e, s) = setup.score(&tx, p, expect)?;
                        err += e;
                        states += s;
                    }
                }
            }
        }
        Ok((err, states))
    });
    let mut out = ErrorProbability { total: 0.0, innocent: 0.0, active: 0.0, states: 0 };
    for r in inn_parts {
        let (e, s) = r?;
        out.innocent += e;
        out.states += s;
    }
    for r in act_parts {
        let (e, s) = r?;
        out.active += e;
        out.states += s;
    }
    out.active /= messages as f64;
    out.total = out.innocent + out.active;
    Ok(out)
}
