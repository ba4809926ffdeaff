//! Gaussian disorder, exact energies and exhaustive maximization.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::spins::SpinConfig;
use crate::error::{Error, Result};
use crate::mixture::MixtureSpec;
use crate::rng;

/// Largest N searched exhaustively for a given top degree.
pub fn exhaustive_budget(p_max: u32) -> usize {
    match p_max {
        0..=2 => 24,
        3..=4 => 16,
        5..=6 => 12,
        _ => 8,
    }
}

/// Coupling tensors g_{i_1..i_p}, one flat row-major array of N^p standard
/// Gaussians per degree in the mixture.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DisorderSample {
    pub n: usize,
    pub seed: u64,
    pub spec: MixtureSpec,
    pub tensors: BTreeMap<u32, Vec<f64>>,
}

pub fn sample_disorder(spec: &MixtureSpec, n: usize, seed: u64) -> Result<DisorderSample> {
    let max = exhaustive_budget(spec.p_max());
    if n == 0 || n > max {
        return Err(Error::Budget { n, max, p_max: spec.p_max() });
    }
    let tensors = spec
        .terms()
        .map(|(p, _)| {
            let len = n.pow(p);
            (p, (0..len as u64).map(|i| rng::normal(seed, p as u64, i)).collect())
        })
        .collect();
    Ok(DisorderSample { n, seed, spec: spec.clone(), tensors })
}

impl DisorderSample {
    /// a X + b Y with the same mixture and size, used for the interpolated
    /// Hamiltonians sqrt(t) H + sqrt(1 - t) H'.
    pub fn combine(a: f64, x: &DisorderSample, b: f64, y: &DisorderSample) -> Result<DisorderSample> {
        if x.n != y.n || x.spec != y.spec {
            return Err(Error::Domain("combining samples of different size or mixture".into()));
        }
        let tensors = x
            .tensors
            .iter()
            .map(|(&p, gx)| (p, gx.iter().zip(&y.tensors[&p]).map(|(u, v)| a * u + b * v).collect()))
            .collect();
        Ok(DisorderSample { n: x.n, seed: x.seed, spec: x.spec.clone(), tensors })
    }

    /// Sets every coupling to zero; handy for checking the field term alone.
    pub fn zeroed(&self) -> DisorderSample {
        let tensors = self.tensors.iter().map(|(&p, g)| (p, vec![0.0; g.len()])).collect();
        DisorderSample { tensors, ..self.clone() }
    }
}

/// H_N^h(sigma) / N by full contraction of every tensor.
pub fn energy(sample: &DisorderSample, sigma: &SpinConfig, h: f64) -> f64 {
    let n = sample.n;
    assert_eq!(sigma.n(), n, "configuration size differs from the sample");
    let spins: Vec<f64> = (0..n).map(|i| sigma.spin(i)).collect();
    let mut total = 0.0;
    for (p, c) in sample.spec.terms() {
        let g = &sample.tensors[&p];
        let mut sum = 0.0;
        for (flat, &gv) in g.iter().enumerate() {
            let mut rest = flat;
            let mut prod = 1.0;
            for _ in 0..p {
                prod *= spins[rest % n];
                rest /= n;
            }
            sum += gv * prod;
        }
        total += c * (n as f64).powf(-(p as f64 - 1.0) / 2.0) * sum;
    }
    (total + h * sigma.spin_sum() as f64) / n as f64
}

/// H_N as a multilinear polynomial: products over index tuples reduce to the
/// set of indices appearing an odd number of times.
#[derive(Debug, Clone)]
pub struct Hamiltonian {
    n: usize,
    constant: f64,
    /// per site k: (mask of the other sites, weight) for every monomial containing k
    incident: Vec<Vec<(u32, f64)>>,
}

impl Hamiltonian {
    pub fn new(sample: &DisorderSample) -> Self {
        let n = sample.n;
        let mut weights: BTreeMap<u32, f64> = BTreeMap::new();
        for (p, c) in sample.spec.terms() {
            let scale = c * (n as f64).powf(-(p as f64 - 1.0) / 2.0);
            for (flat, &g) in sample.tensors[&p].iter().enumerate() {
                let mut rest = flat;
                let mut mask = 0u32;
                for _ in 0..p {
                    mask ^= 1 << (rest % n);
                    rest /= n;
                }
                *weights.entry(mask).or_insert(0.0) += scale * g;
            }
        }
        let mut constant = 0.0;
        let mut incident = vec![Vec::new(); n];
        for (mask, w) in weights {
            if mask == 0 {
                constant += w;
                continue;
            }
            for (k, list) in incident.iter_mut().enumerate() {
                if mask >> k & 1 == 1 {
                    list.push((mask ^ (1 << k), w));
                }
            }
        }
        Hamiltonian { n, constant, incident }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// sum over monomials containing k of w * prod of the other spins.
    #[inline]
    fn local_field(&self, k: usize, bits: u32) -> f64 {
        let mut sum = 0.0;
        for &(mask, w) in &self.incident[k] {
            let parity = ((mask & bits).count_ones() & 1) as u64;
            sum += f64::from_bits(w.to_bits() ^ (parity << 63));
        }
        sum
    }

    /// H_N(sigma) without the field, not divided by N.
    pub fn value(&self, sigma: &SpinConfig) -> f64 {
        // each monomial of degree d is counted once per member site
        let bits = sigma.bits();
        let mut total = 0.0;
        for k in 0..self.n {
            for &(mask, w) in &self.incident[k] {
                let parity = ((mask & bits).count_ones() + (bits >> k & 1)) & 1;
                let term = if parity == 1 { -w } else { w };
                total += term / (mask.count_ones() + 1) as f64;
            }
        }
        self.constant + total
    }

    /// Change of H^h when spin k flips, starting from `bits`.
    #[inline]
    pub fn flip_delta(&self, k: usize, bits: u32, h: f64) -> f64 {
        let sk = if bits >> k & 1 == 1 { -1.0 } else { 1.0 };
        -2.0 * sk * (self.local_field(k, bits) + h)
    }
}

/// Every configuration in Gray-code order with its incrementally updated
/// H^h / N, starting from all-plus.
pub fn gray_code_walk(sample: &DisorderSample, h: f64) -> Result<Vec<(SpinConfig, f64)>> {
    let ham = Hamiltonian::new(sample);
    let n = sample.n;
    let mut bits = 0u32;
    let mut value = ham.value(&SpinConfig::all_plus(n)?) + h * n as f64;
    let mut out = Vec::with_capacity(1 << n);
    out.push((SpinConfig::from_bits(n, bits)?, value / n as f64));
    for step in 1u64..(1u64 << n) {
        let k = step.trailing_zeros() as usize;
        value += ham.flip_delta(k, bits, h);
        bits ^= 1 << k;
        out.push((SpinConfig::from_bits(n, bits)?, value / n as f64));
    }
    Ok(out)
}

/// argmax of H^h over all 2^N configurations and L_N^h = max H^h / N.
///
/// Ties go to the lexicographically smallest pattern. At h = 0 the walk pins
/// sigma_0 = +1, which picks the smaller member of each flip pair directly.
pub fn ground_state(sample: &DisorderSample, h: f64) -> Result<(SpinConfig, f64)> {
    let n = sample.n;
    let max = exhaustive_budget(sample.spec.p_max());
    if n > max {
        return Err(Error::Budget { n, max, p_max: sample.spec.p_max() });
    }
    let ham = Hamiltonian::new(sample);
    Ok(maximize(&ham, h))
}

pub(crate) fn maximize(ham: &Hamiltonian, h: f64) -> (SpinConfig, f64) {
    let n = ham.n();
    let first = if h == 0.0 { 1 } else { 0 };
    let free = n - first;
    let start = SpinConfig::from_bits(n, 0).expect("n within the packed width");
    let mut value = ham.value(&start) + h * n as f64;
    let mut bits = 0u32;
    let mut best = (bits, value);
    let tol = 1e-11 * (1.0 + value.abs());
    for step in 1u64..(1u64 << free) {
        let k = first + step.trailing_zeros() as usize;
        value += ham.flip_delta(k, bits, h);
        bits ^= 1 << k;
        if value > best.1 + tol {
            best = (bits, value);
        } else if value >= best.1 - tol && lex(n, bits) < lex(n, best.0) {
            best = (bits, best.1.max(value));
        }
    }
    let sigma = SpinConfig::from_bits(n, best.0).expect("n within the packed width");
    // report the exact value, not the accumulated one
    let exact = ham.value(&sigma) + h * sigma.spin_sum() as f64;
    (sigma, exact / n as f64)
}

fn lex(n: usize, bits: u32) -> u32 {
    bits.reverse_bits() >> (32 - n)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sk() -> MixtureSpec {
        MixtureSpec::sk()
    }

    #[test]
    fn same_seed_same_tensors() {
        let a = sample_disorder(&sk(), 6, 9).unwrap();
        assert_eq!(a, sample_disorder(&sk(), 6, 9).unwrap());
        assert_ne!(a, sample_disorder(&sk(), 6, 10).unwrap());
        assert_eq!(a.tensors[&2].len(), 36);
    }

    #[test]
    fn budget_enforced() {
        assert!(sample_disorder(&sk(), 25, 0).is_err());
        let mixed = MixtureSpec::from_pairs(&[(2, 1.0), (4, 0.5)]).unwrap();
        assert!(sample_disorder(&mixed, 17, 0).is_err());
        assert!(sample_disorder(&mixed, 16, 0).is_ok());
    }

    #[test]
    fn field_only_energy() {
        let s = sample_disorder(&sk(), 5, 1).unwrap().zeroed();
        assert_eq!(energy(&s, &SpinConfig::all_plus(5).unwrap(), 1.0), 1.0);
    }

    #[test]
    fn two_spin_hand_contraction() {
        let mut s = sample_disorder(&sk(), 2, 0).unwrap().zeroed();
        // g_12 = 1 only (flat index i + 2 j with i = 0, j = 1)
        s.tensors.get_mut(&2).unwrap()[2] = 1.0;
        let c = 1.0 / 2f64.sqrt();
        for (text, sign) in [("++", 1.0), ("+-", -1.0), ("-+", -1.0), ("--", 1.0)] {
            let sigma: SpinConfig = text.parse().unwrap();
            let expect = c * 2f64.powf(-0.5) * sign / 2.0;
            assert!((energy(&s, &sigma, 0.0) - expect).abs() < 1e-15, "{text}");
        }
    }

    #[test]
    fn even_degrees_are_flip_symmetric() {
        let mixed = MixtureSpec::from_pairs(&[(2, 0.8), (4, 0.6)]).unwrap();
        let s = sample_disorder(&mixed, 7, 3).unwrap();
        let sigma: SpinConfig = "+--+-++".parse().unwrap();
        assert!((energy(&s, &sigma, 0.0) - energy(&s, &sigma.flipped(), 0.0)).abs() < 1e-12);
    }

    #[test]
    fn polynomial_matches_contraction() {
        let mixed = MixtureSpec::from_pairs(&[(2, 0.8), (4, 0.6), (6, 0.3)]).unwrap();
        let s = sample_disorder(&mixed, 6, 4).unwrap();
        let ham = Hamiltonian::new(&s);
        for bits in [0u32, 5, 17, 42, 63] {
            let sigma = SpinConfig::from_bits(6, bits).unwrap();
            assert!((ham.value(&sigma) / 6.0 - energy(&s, &sigma, 0.0)).abs() < 1e-12);
        }
    }

    #[test]
    fn gray_code_agrees_with_recomputation() {
        let mixed = MixtureSpec::from_pairs(&[(2, 0.8), (4, 0.6)]).unwrap();
        for (spec, n) in [(sk(), 12), (mixed, 9)] {
            let s = sample_disorder(&spec, n, 21).unwrap();
            let walk = gray_code_walk(&s, 0.3).unwrap();
            assert_eq!(walk.len(), 1 << n);
            for (sigma, value) in walk {
                assert!((value - energy(&s, &sigma, 0.3)).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn ground_state_matches_brute_force() {
        for seed in 0..5 {
            let s = sample_disorder(&sk(), 4, seed).unwrap();
            for h in [0.0, 0.4] {
                let (sigma, value) = ground_state(&s, h).unwrap();
                let best = (0..16u32)
                    .map(|b| energy(&s, &SpinConfig::from_bits(4, b).unwrap(), h))
                    .fold(f64::NEG_INFINITY, f64::max);
                assert!((value - best).abs() < 1e-12);
                assert!((energy(&s, &sigma, h) - best).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn zero_field_picks_the_plus_representative() {
        let s = sample_disorder(&sk(), 10, 5).unwrap();
        let (sigma, value) = ground_state(&s, 0.0).unwrap();
        assert_eq!(sigma.spin(0), 1.0);
        assert!((energy(&s, &sigma.flipped(), 0.0) - value).abs() < 1e-12);
    }

    #[test]
    fn strong_field_aligns_everything() {
        let s = sample_disorder(&sk(), 10, 8).unwrap();
        assert_eq!(ground_state(&s, 100.0).unwrap().0, SpinConfig::all_plus(10).unwrap());
    }
}
