//! Ising configurations packed into a word, plus the overlap floor from magnetizations.

use std::fmt;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};

/// Largest N a packed configuration can hold.
pub const MAX_SPINS: usize = 32;

/// sigma in {-1, +1}^N; bit i set means sigma_i = -1.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct SpinConfig {
    n: usize,
    bits: u32,
}

impl SpinConfig {
    pub fn from_bits(n: usize, bits: u32) -> Result<Self> {
        if n == 0 || n > MAX_SPINS {
            return Err(Error::Domain(format!("N = {n} outside 1..={MAX_SPINS}")));
        }
        let mask = if n == MAX_SPINS { u32::MAX } else { (1u32 << n) - 1 };
        if bits & !mask != 0 {
            return Err(Error::Domain(format!("bit pattern {bits:#x} has bits beyond N = {n}")));
        }
        Ok(SpinConfig { n, bits })
    }

    pub fn all_plus(n: usize) -> Result<Self> {
        Self::from_bits(n, 0)
    }

    pub fn from_spins(spins: &[i8]) -> Result<Self> {
        let mut bits = 0u32;
        for (i, &s) in spins.iter().enumerate() {
            match s {
                1 => {}
                -1 => bits |= 1 << i,
                other => return Err(Error::Domain(format!("spin {other} at site {i} is not +-1"))),
            }
        }
        Self::from_bits(spins.len(), bits)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn bits(&self) -> u32 {
        self.bits
    }

    pub fn spin(&self, i: usize) -> f64 {
        if self.bits >> i & 1 == 1 {
            -1.0
        } else {
            1.0
        }
    }

    pub fn spins(&self) -> Vec<i8> {
        (0..self.n).map(|i| if self.bits >> i & 1 == 1 { -1 } else { 1 }).collect()
    }

    /// k = sum of spins, so m_N = k / N.
    pub fn spin_sum(&self) -> i64 {
        self.n as i64 - 2 * self.bits.count_ones() as i64
    }

    pub fn magnetization(&self) -> f64 {
        self.spin_sum() as f64 / self.n as f64
    }

    pub fn flipped(&self) -> Self {
        let mask = if self.n == MAX_SPINS { u32::MAX } else { (1u32 << self.n) - 1 };
        SpinConfig { n: self.n, bits: !self.bits & mask }
    }

    pub fn overlap(&self, other: &SpinConfig) -> f64 {
        assert_eq!(self.n, other.n, "overlap of configurations with different N");
        let disagree = (self.bits ^ other.bits).count_ones() as f64;
        (self.n as f64 - 2.0 * disagree) / self.n as f64
    }

    /// Sort key for the order of (b_0, b_1, ...) with + before -.
    pub fn lex_key(&self) -> u32 {
        self.bits.reverse_bits() >> (MAX_SPINS - self.n)
    }
}

impl fmt::Display for SpinConfig {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for i in 0..self.n {
            f.write_str(if self.bits >> i & 1 == 1 { "-" } else { "+" })?;
        }
        Ok(())
    }
}

impl std::str::FromStr for SpinConfig {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        let spins = s
            .chars()
            .map(|c| match c {
                '+' => Ok(1),
                '-' => Ok(-1),
                other => Err(Error::Domain(format!("unexpected character {other:?} in spin string"))),
            })
            .collect::<Result<Vec<i8>>>()?;
        Self::from_spins(&spins)
    }
}

impl Serialize for SpinConfig {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for SpinConfig {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let raw = String::deserialize(d)?;
        raw.parse().map_err(serde::de::Error::custom)
    }
}

/// The floor 1/4 (3 k1/N + 3 k2/N - 2) taken literally; see `overlap_floor` for
/// the bound that actually holds.
pub fn overlap_floor_check(sigma1: &SpinConfig, sigma2: &SpinConfig) -> bool {
    let literal = 0.25 * (3.0 * sigma1.magnetization() + 3.0 * sigma2.magnetization() - 2.0);
    sigma1.overlap(sigma2) >= literal - 1e-12
}

/// Sharp lower bound on R given both magnetizations: |m1 + m2| - 1.
pub fn overlap_floor(m1: f64, m2: f64) -> f64 {
    (m1 + m2).abs() - 1.0
}

/// Magnetization pairs (k1, k2) at size N for which the literal floor holds for
/// every pair of configurations, found by enumerating all 4^N pairs.
pub fn literal_floor_validity(n: usize) -> Result<Vec<(i64, i64, bool)>> {
    if n > 12 {
        return Err(Error::Budget { n, max: 12, p_max: 0 });
    }
    let size = 1usize << n;
    let mut holds = std::collections::BTreeMap::new();
    for a in 0..size {
        let s1 = SpinConfig::from_bits(n, a as u32)?;
        for b in 0..size {
            let s2 = SpinConfig::from_bits(n, b as u32)?;
            let ok = overlap_floor_check(&s1, &s2);
            holds.entry((s1.spin_sum(), s2.spin_sum())).and_modify(|v: &mut bool| *v &= ok).or_insert(ok);
        }
    }
    Ok(holds.into_iter().map(|((k1, k2), ok)| (k1, k2, ok)).collect())
}
