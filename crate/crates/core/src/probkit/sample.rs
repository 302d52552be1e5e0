use rand::Rng;

use super::{ConditionalKernel, Distribution, ProbError, SymbolSequence};
use crate::rng;

/// Inverse-CDF sampler for a fixed distribution.
#[derive(Clone, Debug)]
pub struct Sampler {
    cdf: Vec<f64>,
}

impl Sampler {
    pub fn new(d: &Distribution) -> Self {
        Sampler::from_mass(d.mass())
    }

    pub fn from_mass(mass: &[f64]) -> Self {
        let mut acc = 0.0;
        let mut cdf: Vec<f64> = mass
            .iter()
            .map(|p| {
                acc += p;
                acc
            })
            .collect();
        // never return a zero-mass trailing symbol because of rounding
        if let Some(last) = mass.iter().rposition(|&p| p > 0.0) {
            for c in &mut cdf[last..] {
                *c = f64::INFINITY;
            }
        }
        Sampler { cdf }
    }

    #[inline]
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> u16 {
        let u: f64 = rng.random();
        let mut i = 0;
        while u >= self.cdf[i] {
            i += 1;
        }
        i as u16
    }
}

/// `n` i.i.d. draws from `d`, determined by `(d, n, seed)`.
pub fn sample_iid(d: &Distribution, n: usize, seed: u64) -> SymbolSequence {
    let s = Sampler::new(d);
    let mut r = rng::stream(seed, "sample-iid", 0);
    SymbolSequence::from((0..n).map(|_| s.sample(&mut r)).collect::<Vec<_>>())
}

/// Draws `x_t ~ k(. | u_t)` independently for every position of `su`.
pub fn sample_conditional(k: &ConditionalKernel, su: &SymbolSequence, seed: u64) -> Result<SymbolSequence, ProbError> {
    let samplers: Vec<Sampler> = k.rows().iter().map(Sampler::new).collect();
    let mut r = rng::stream(seed, "sample-conditional", 0);
    let mut out = Vec::with_capacity(su.len());
    for &u in su.as_slice() {
        let s = samplers
            .get(u as usize)
            .ok_or(ProbError::SymbolOutOfRange { symbol: u as usize, alphabet_size: k.input_size() })?;
        out.push(s.sample(&mut r));
    }
    Ok(SymbolSequence::from(out))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::probkit::empirical_type;

    #[test]
    fn point_mass_is_constant() {
        let d = Distribution::point(3, 2).unwrap();
        assert!(sample_iid(&d, 50, 9).as_slice().iter().all(|&x| x == 2));
    }

    #[test]
    fn seeded_replay() {
        let d = Distribution::new(vec![0.2, 0.3, 0.5]).unwrap();
        assert_eq!(sample_iid(&d, 100, 4), sample_iid(&d, 100, 4));
        assert_ne!(sample_iid(&d, 100, 4), sample_iid(&d, 100, 5));
    }

    #[test]
    fn fair_coin_concentrates() {
        // Chernoff: P(|k/n - 1/2| > 0.02) <= 2 exp(-0.04^2 * 5e4 / 3) ~ 5e-12 at n = 1e5
        let d = Distribution::uniform(2).unwrap();
        let t = empirical_type(&sample_iid(&d, 100_000, 77), 2).unwrap();
        assert!((t.prob(1) - 0.5).abs() < 0.02);
    }

    #[test]
    fn kernels() {
        let su = SymbolSequence::from(vec![0, 2, 1, 1, 0]);
        let id = ConditionalKernel::identity(3).unwrap();
        assert_eq!(sample_conditional(&id, &su, 1).unwrap(), su);
        let perm = ConditionalKernel::new(vec![
            Distribution::point(3, 1).unwrap(),
            Distribution::point(3, 2).unwrap(),
            Distribution::point(3, 0).unwrap(),
        ])
        .unwrap();
        assert_eq!(sample_conditional(&perm, &su, 1).unwrap().as_slice(), &[1, 0, 2, 2, 1]);
        let konst = ConditionalKernel::constant(3, Distribution::point(4, 3).unwrap()).unwrap();
        assert!(sample_conditional(&konst, &su, 3).unwrap().as_slice().iter().all(|&x| x == 3));
        assert!(sample_conditional(&id, &SymbolSequence::from(vec![5]), 1).is_err());
    }
}
