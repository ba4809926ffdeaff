//! Normal-distribution helpers on top of libm's error function.

use std::f64::consts::{FRAC_1_SQRT_2, PI};

pub use libm::{erf, erfc};

pub const SQRT_2_OVER_PI: f64 = 0.797_884_560_802_865_4;

pub fn norm_pdf(x: f64) -> f64 {
    (-0.5 * x * x).exp() / (2.0 * PI).sqrt()
}

pub fn norm_cdf(x: f64) -> f64 {
    0.5 * erfc(-x * FRAC_1_SQRT_2)
}

/// log of the standard normal cdf, accurate far into the lower tail.
pub fn log_norm_cdf(x: f64) -> f64 {
    if x > -20.0 {
        return norm_cdf(x).ln();
    }
    // Mills-ratio asymptotic series
    let x2 = x * x;
    let mut term = 1.0;
    let mut series = 1.0;
    for k in 1..8 {
        term *= -((2 * k - 1) as f64) / x2;
        series += term;
    }
    -0.5 * x2 - (-x).ln() - 0.5 * (2.0 * PI).ln() + series.ln()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn constants() {
        assert!((SQRT_2_OVER_PI - (2.0 / PI).sqrt()).abs() < 1e-16);
        assert!((erf(FRAC_1_SQRT_2) - 0.682_689_492_137_085_9).abs() < 1e-15);
    }

    #[test]
    fn log_cdf_continuous_across_branch() {
        let a = log_norm_cdf(-20.0 + 1e-9);
        let b = log_norm_cdf(-20.0 - 1e-9);
        assert!((a - b).abs() < 1e-6);
        // reference from mpmath: log(ndtr(-30))
        assert!((log_norm_cdf(-30.0) - (-454.321_243_956_343_2)).abs() < 1e-9);
        assert!((log_norm_cdf(0.0) - 0.5f64.ln()).abs() < 1e-15);
    }
}
