//! Nondecreasing step functions on [0, 1): the atomic order parameters.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mixture::MixtureSpec;

/// Implementation cap on gamma; the true minimizer may blow up at s = 1.
pub const GAMMA_CAP: f64 = 200.0;
/// Atoms closer than this are merged.
pub const MERGE_TOL: f64 = 1e-10;
/// An atom belongs to the support when its increment exceeds this weight.
pub const SUPPORT_WEIGHT: f64 = 1e-6;

/// gamma(s) = a_i on [q_i, q_{i+1}) with q_0 = 0 and an implicit q_{m+1} = 1.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<[f64; 2]>", into = "Vec<[f64; 2]>")]
pub struct StepGamma {
    atoms: Vec<(f64, f64)>,
}

impl StepGamma {
    /// Validates and normalizes a list of (q_i, a_i): merges near-coincident
    /// atoms and coalesces equal neighbouring values.
    pub fn new(atoms: Vec<(f64, f64)>) -> Result<Self> {
        let Some(&(first_q, _)) = atoms.first() else {
            return Err(Error::InvalidGamma("no atoms".into()));
        };
        if first_q != 0.0 {
            return Err(Error::InvalidGamma(format!("first atom at {first_q}, expected 0")));
        }
        let mut out: Vec<(f64, f64)> = Vec::with_capacity(atoms.len());
        for &(q, a) in &atoms {
            if !(0.0..1.0).contains(&q) || !q.is_finite() {
                return Err(Error::InvalidGamma(format!("atom position {q} outside [0,1)")));
            }
            if !(a >= 0.0 && a.is_finite()) {
                return Err(Error::InvalidGamma(format!("value {a} is not a finite nonnegative number")));
            }
            if a > GAMMA_CAP * (1.0 + 1e-12) {
                return Err(Error::InvalidGamma(format!("value {a} above the cap {GAMMA_CAP}")));
            }
            match out.last_mut() {
                Some(last) if q < last.0 => {
                    return Err(Error::InvalidGamma(format!("atoms not sorted at q = {q}")));
                }
                // a zero-length interval: the later value wins
                Some(last) if q - last.0 < MERGE_TOL => last.1 = a,
                _ => out.push((q, a)),
            }
        }
        if out.windows(2).any(|w| w[1].1 < w[0].1) {
            return Err(Error::InvalidGamma("values must be nondecreasing".into()));
        }
        out.dedup_by(|next, prev| next.1 == prev.1);
        Ok(StepGamma { atoms: out })
    }

    pub fn zero() -> Self {
        StepGamma { atoms: vec![(0.0, 0.0)] }
    }

    pub fn constant(a: f64) -> Result<Self> {
        Self::new(vec![(0.0, a)])
    }

    pub fn atoms(&self) -> &[(f64, f64)] {
        &self.atoms
    }

    pub fn is_zero(&self) -> bool {
        self.atoms.iter().all(|&(_, a)| a == 0.0)
    }

    pub fn value_at(&self, s: f64) -> f64 {
        let idx = self.atoms.partition_point(|&(q, _)| q <= s);
        self.atoms[idx.saturating_sub(1)].1
    }

    /// Interior breakpoints q_1..q_m.
    pub fn breakpoints(&self) -> Vec<f64> {
        self.atoms.iter().skip(1).map(|&(q, _)| q).collect()
    }

    /// (lo, hi, a) for every constancy interval, the last one ending at 1.
    pub fn intervals(&self) -> Vec<(f64, f64, f64)> {
        (0..self.atoms.len())
            .map(|i| {
                let hi = self.atoms.get(i + 1).map_or(1.0, |&(q, _)| q);
                (self.atoms[i].0, hi, self.atoms[i].1)
            })
            .collect()
    }

    /// Integral of gamma(s) over [0, 1).
    pub fn mass(&self) -> f64 {
        self.intervals().iter().map(|&(lo, hi, a)| a * (hi - lo)).sum()
    }

    /// Integral of gamma(s) s xi''(s) over [lo, hi], exact per monomial.
    pub fn weighted_s_xi2(&self, spec: &MixtureSpec, lo: f64, hi: f64) -> f64 {
        self.intervals()
            .iter()
            .filter(|&&(l, h, a)| a != 0.0 && h > lo && l < hi)
            .map(|&(l, h, a)| a * spec.s_xi2_integral(l.max(lo), h.min(hi)))
            .sum()
    }

    /// The linear term (1/2) int gamma s xi'' subtracted in the Parisi functional.
    pub fn functional_correction(&self, spec: &MixtureSpec) -> f64 {
        0.5 * self.weighted_s_xi2(spec, 0.0, 1.0)
    }

    /// Atom positions whose increment exceeds the support weight.
    pub fn support(&self) -> Vec<f64> {
        let mut prev = 0.0;
        let mut out = Vec::new();
        for &(q, a) in &self.atoms {
            if a - prev > SUPPORT_WEIGHT {
                out.push(q);
            }
            prev = a;
        }
        out
    }

    /// Smallest support point; None for gamma = 0.
    pub fn min_support(&self) -> Option<f64> {
        self.support().first().copied()
    }

    /// Union of both partitions, with the values of each function on every piece.
    pub fn common_refinement(&self, other: &StepGamma) -> Vec<(f64, f64, f64, f64)> {
        let mut cuts: Vec<f64> = self
            .atoms
            .iter()
            .chain(&other.atoms)
            .map(|&(q, _)| q)
            .chain(std::iter::once(1.0))
            .collect();
        cuts.sort_by(f64::total_cmp);
        cuts.dedup();
        cuts.windows(2)
            .map(|w| (w[0], w[1], self.value_at(w[0]), other.value_at(w[0])))
            .collect()
    }

    /// (1 - theta) self + theta other.
    pub fn mix(&self, other: &StepGamma, theta: f64) -> Result<StepGamma> {
        let atoms = self
            .common_refinement(other)
            .into_iter()
            .map(|(lo, _, a, b)| (lo, ((1.0 - theta) * a + theta * b).min(GAMMA_CAP)))
            .collect();
        StepGamma::new(atoms)
    }

    /// Integral of xi''(s) |gamma - other| over [0, 1).
    pub fn xi2_distance(&self, other: &StepGamma, spec: &MixtureSpec) -> f64 {
        self.common_refinement(other)
            .into_iter()
            .map(|(lo, hi, a, b)| (a - b).abs() * (spec.xi_prime(hi) - spec.xi_prime(lo)))
            .sum()
    }

    /// Copy with an extra (redundant) breakpoint at `q`.
    pub fn with_breakpoint(&self, q: f64) -> Vec<(f64, f64, f64)> {
        let mut out = Vec::new();
        for (lo, hi, a) in self.intervals() {
            if q > lo && q < hi {
                out.push((lo, q, a));
                out.push((q, hi, a));
            } else {
                out.push((lo, hi, a));
            }
        }
        out
    }

    /// gamma / (1 + t) below `cut`, unchanged above it.
    pub fn scaled_below(&self, cut: f64, t: f64) -> Result<StepGamma> {
        let atoms = self
            .with_breakpoint(cut)
            .into_iter()
            .map(|(lo, _, a)| (lo, if lo < cut { a / (1.0 + t) } else { a }))
            .collect();
        StepGamma::new(atoms)
    }
}

impl TryFrom<Vec<[f64; 2]>> for StepGamma {
    type Error = Error;
    fn try_from(raw: Vec<[f64; 2]>) -> Result<Self> {
        StepGamma::new(raw.into_iter().map(|[q, a]| (q, a)).collect())
    }
}

impl From<StepGamma> for Vec<[f64; 2]> {
    fn from(g: StepGamma) -> Self {
        g.atoms.into_iter().map(|(q, a)| [q, a]).collect()
    }
}
