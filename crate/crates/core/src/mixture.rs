//! The covariance function xi(s) = sum_p c_p^2 s^p of a mixed even p-spin model.

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub enum MixtureIssue {
    OddDegree(u32),
    DegreeBelowTwo(u32),
    NonFinite(u32),
    AllZero,
}

impl fmt::Display for MixtureIssue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            MixtureIssue::OddDegree(p) => write!(f, "odd degree p = {p}"),
            MixtureIssue::DegreeBelowTwo(p) => write!(f, "degree p = {p} below 2"),
            MixtureIssue::NonFinite(p) => write!(f, "coefficient for p = {p} is not finite"),
            MixtureIssue::AllZero => write!(f, "all coefficients are zero"),
        }
    }
}

/// Returns every violated model assumption; an empty list means the mixture is usable.
pub fn validate_mixture(coefficients: &BTreeMap<u32, f64>) -> Vec<MixtureIssue> {
    let mut issues = Vec::new();
    for (&p, &c) in coefficients {
        if p < 2 {
            issues.push(MixtureIssue::DegreeBelowTwo(p));
        } else if p % 2 == 1 {
            issues.push(MixtureIssue::OddDegree(p));
        }
        if !c.is_finite() {
            issues.push(MixtureIssue::NonFinite(p));
        }
    }
    if coefficients.values().all(|&c| c == 0.0 || !c.is_finite()) {
        issues.push(MixtureIssue::AllZero);
    }
    // 2^p c_p^2 summability; finite maps only fail through overflow
    let weight: f64 = coefficients
        .iter()
        .map(|(&p, &c)| 2f64.powi(p as i32) * c * c)
        .sum();
    if !weight.is_finite() && issues.is_empty() {
        if let Some((&p, _)) = coefficients.iter().next_back() {
            issues.push(MixtureIssue::NonFinite(p));
        }
    }
    issues
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct XiValues {
    pub xi: f64,
    pub xi_prime: f64,
    pub xi_double_prime: f64,
}

/// A validated even mixture. Coefficients are stored as c_p, not c_p^2.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<(u32, f64)>", into = "Vec<(u32, f64)>")]
pub struct MixtureSpec {
    coefficients: BTreeMap<u32, f64>,
    // dense c_p^2 indexed by p, for Horner evaluation
    squares: Vec<f64>,
}

impl MixtureSpec {
    pub fn new(coefficients: BTreeMap<u32, f64>) -> Result<Self> {
        let issues = validate_mixture(&coefficients);
        if !issues.is_empty() {
            return Err(Error::InvalidMixture(issues));
        }
        let p_max = coefficients
            .iter()
            .filter(|(_, &c)| c != 0.0)
            .map(|(&p, _)| p)
            .max()
            .unwrap_or(2);
        let mut squares = vec![0.0; p_max as usize + 1];
        for (&p, &c) in &coefficients {
            if p <= p_max {
                squares[p as usize] = c * c;
            }
        }
        let spec = MixtureSpec { coefficients, squares };
        let at_one = spec.eval_unchecked(1.0);
        if !(at_one.xi > 0.0 && at_one.xi_prime > 0.0 && at_one.xi_double_prime > 0.0)
            || !at_one.xi_double_prime.is_finite()
        {
            return Err(Error::InvalidMixture(vec![MixtureIssue::AllZero]));
        }
        Ok(spec)
    }

    pub fn from_pairs(pairs: &[(u32, f64)]) -> Result<Self> {
        Self::new(pairs.iter().copied().collect())
    }

    /// Sherrington-Kirkpatrick: xi(s) = s^2 / 2.
    pub fn sk() -> Self {
        Self::from_pairs(&[(2, std::f64::consts::FRAC_1_SQRT_2)]).expect("SK mixture is valid")
    }

    pub fn coefficients(&self) -> &BTreeMap<u32, f64> {
        &self.coefficients
    }

    pub fn p_max(&self) -> u32 {
        (self.squares.len() - 1) as u32
    }

    /// Nonzero terms as (p, c_p).
    pub fn terms(&self) -> impl Iterator<Item = (u32, f64)> + '_ {
        self.coefficients
            .iter()
            .filter(|(_, &c)| c != 0.0)
            .map(|(&p, &c)| (p, c))
    }

    pub fn xi_eval(&self, s: f64) -> Result<XiValues> {
        if !(s.abs() <= 1.0) {
            return Err(Error::Domain(format!("xi evaluated at s = {s}, need |s| <= 1")));
        }
        Ok(self.eval_unchecked(s))
    }

    fn eval_unchecked(&self, s: f64) -> XiValues {
        let mut xi = 0.0;
        let mut d1 = 0.0;
        let mut d2 = 0.0;
        for p in (0..self.squares.len()).rev() {
            let c = self.squares[p];
            let pf = p as f64;
            xi = xi * s + c;
            // the derivative polynomials have coefficient p c_p^2 at s^{p-1}, etc.
            if p >= 1 {
                d1 = d1 * s + pf * c;
            }
            if p >= 2 {
                d2 = d2 * s + pf * (pf - 1.0) * c;
            }
        }
        XiValues { xi, xi_prime: d1, xi_double_prime: d2 }
    }

    pub fn xi(&self, s: f64) -> f64 {
        self.eval_unchecked(s).xi
    }

    pub fn xi_prime(&self, s: f64) -> f64 {
        self.eval_unchecked(s).xi_prime
    }

    pub fn xi_double_prime(&self, s: f64) -> f64 {
        self.eval_unchecked(s).xi_double_prime
    }

    /// Exact value of the integral of s xi''(s) over [lo, hi].
    pub fn s_xi2_integral(&self, lo: f64, hi: f64) -> f64 {
        // antiderivative of p(p-1) s^{p-1} is (p-1) s^p
        self.squares
            .iter()
            .enumerate()
            .skip(2)
            .map(|(p, &c)| c * (p as f64 - 1.0) * (hi.powi(p as i32) - lo.powi(p as i32)))
            .sum()
    }

    /// Inverse of xi' on [0, 1]; xi' is strictly increasing there.
    pub fn xi_prime_inverse(&self, target: f64) -> f64 {
        let top = self.xi_prime(1.0);
        if target <= 0.0 {
            return 0.0;
        }
        if target >= top {
            return 1.0;
        }
        let (mut lo, mut hi) = (0.0f64, 1.0f64);
        let mut s = target / top;
        for _ in 0..100 {
            let v = self.eval_unchecked(s);
            let f = v.xi_prime - target;
            if f.abs() <= 1e-16 * top {
                return s;
            }
            if f > 0.0 {
                hi = s;
            } else {
                lo = s;
            }
            if hi - lo < 1e-15 {
                break;
            }
            let newton = s - f / v.xi_double_prime;
            s = if newton >= lo && newton <= hi && v.xi_double_prime > 0.0 {
                newton
            } else {
                0.5 * (lo + hi)
            };
        }
        s
    }
}

impl TryFrom<Vec<(u32, f64)>> for MixtureSpec {
    type Error = Error;
    fn try_from(pairs: Vec<(u32, f64)>) -> Result<Self> {
        Self::from_pairs(&pairs)
    }
}

impl From<MixtureSpec> for Vec<(u32, f64)> {
    fn from(spec: MixtureSpec) -> Self {
        spec.coefficients.into_iter().collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol
    }

    #[test]
    fn sk_values() {
        let sk = MixtureSpec::sk();
        let v = sk.xi_eval(1.0).unwrap();
        assert!(close(v.xi, 0.5, 1e-15) && close(v.xi_prime, 1.0, 1e-15));
        assert!(close(v.xi_double_prime, 1.0, 1e-15));
        let v = sk.xi_eval(0.0).unwrap();
        assert_eq!((v.xi, v.xi_prime), (0.0, 0.0));
        assert!(close(v.xi_double_prime, 1.0, 1e-15));
    }

    #[test]
    fn pure_four_spin() {
        let spec = MixtureSpec::from_pairs(&[(4, 1.0)]).unwrap();
        let v = spec.xi_eval(0.5).unwrap();
        assert_eq!((v.xi, v.xi_prime, v.xi_double_prime), (0.0625, 0.5, 3.0));
    }

    #[test]
    fn domain_error() {
        assert!(matches!(MixtureSpec::sk().xi_eval(1.5), Err(Error::Domain(_))));
    }

    #[test]
    fn validation() {
        assert!(validate_mixture(&[(2, 0.7)].into_iter().collect()).is_empty());
        assert!(validate_mixture(&[(3, 1.0)].into_iter().collect())
            .contains(&MixtureIssue::OddDegree(3)));
        assert_eq!(validate_mixture(&BTreeMap::new()), vec![MixtureIssue::AllZero]);
        assert!(MixtureSpec::from_pairs(&[(2, f64::NAN)]).is_err());
    }

    #[test]
    fn monotone_and_derivative_consistent() {
        let spec = MixtureSpec::from_pairs(&[(2, 0.7), (4, 0.5), (6, 0.2)]).unwrap();
        let mut prev = spec.xi_eval(0.0).unwrap();
        for i in 1..=100 {
            let v = spec.xi_eval(i as f64 / 100.0).unwrap();
            assert!(v.xi >= prev.xi && v.xi_prime >= prev.xi_prime);
            assert!(v.xi_double_prime >= prev.xi_double_prime && v.xi >= 0.0);
            prev = v;
        }
        let h = 1e-5;
        for i in 1..=99 {
            let s = i as f64 / 100.0;
            let fd = (spec.xi(s + h) - spec.xi(s - h)) / (2.0 * h);
            assert!((fd - spec.xi_prime(s)).abs() <= 1e-8 * spec.xi_prime(s));
        }
    }

    #[test]
    fn integral_and_inverse() {
        let spec = MixtureSpec::from_pairs(&[(2, 0.7), (4, 0.5)]).unwrap();
        // Simpson with many panels as reference
        let n = 2000;
        let (a, b) = (0.2, 0.9);
        let f = |s: f64| s * spec.xi_double_prime(s);
        let hstep = (b - a) / n as f64;
        let mut acc = f(a) + f(b);
        for i in 1..n {
            acc += f(a + i as f64 * hstep) * if i % 2 == 1 { 4.0 } else { 2.0 };
        }
        assert!(close(acc * hstep / 3.0, spec.s_xi2_integral(a, b), 1e-12));
        for &s in &[0.0, 0.1, 0.5, 0.77, 1.0] {
            assert!(close(spec.xi_prime_inverse(spec.xi_prime(s)), s, 1e-12));
        }
        // exact initial guess for SK
        let sk = MixtureSpec::sk();
        for &s in &[0.005, 0.25, 0.9] {
            assert!(close(sk.xi_prime_inverse(s), s, 1e-15));
        }
    }
}
