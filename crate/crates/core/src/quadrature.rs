//! Gauss-Hermite rules for standard normal expectations and Gauss-Legendre rules.

use std::f64::consts::PI;

/// Nodes and weights with sum_j w_j f(z_j) ~ E f(Z), Z ~ N(0,1).
#[derive(Debug, Clone)]
pub struct GaussHermite {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

impl GaussHermite {
    pub fn new(order: usize) -> Self {
        assert!(order >= 1, "quadrature order must be positive");
        let n = order;
        let mut x = vec![0.0; n];
        let mut w = vec![0.0; n];
        let pim4 = PI.powf(-0.25);
        let m = n.div_ceil(2);
        let mut z = 0.0f64;
        let nf = n as f64;
        for i in 0..m {
            // initial guesses as in the classic Newton scheme on orthonormal Hermite functions
            z = match i {
                0 => (2.0 * nf + 1.0).sqrt() - 1.85575 * (2.0 * nf + 1.0).powf(-1.0 / 6.0),
                1 => z - 1.14 * nf.powf(0.426) / z,
                2 => 1.86 * z - 0.86 * x[0],
                3 => 1.91 * z - 0.91 * x[1],
                _ => 2.0 * z - x[i - 2],
            };
            let mut pp = 0.0;
            for _ in 0..100 {
                let mut p1 = pim4;
                let mut p2 = 0.0;
                for j in 0..n {
                    let p3 = p2;
                    p2 = p1;
                    let jf = j as f64;
                    p1 = z * (2.0 / (jf + 1.0)).sqrt() * p2 - (jf / (jf + 1.0)).sqrt() * p3;
                }
                pp = (2.0 * nf).sqrt() * p2;
                let z1 = z;
                z = z1 - p1 / pp;
                if (z - z1).abs() <= 1e-15 * z.abs().max(1.0) {
                    break;
                }
            }
            x[i] = z;
            x[n - 1 - i] = -z;
            w[i] = 2.0 / (pp * pp);
            w[n - 1 - i] = w[i];
        }
        if n % 2 == 1 {
            x[n / 2] = 0.0;
        }
        // physicists' rule -> standard normal
        let mut nodes: Vec<f64> = x.iter().rev().map(|&t| t * 2f64.sqrt()).collect();
        let mut weights: Vec<f64> = w.iter().rev().map(|&t| t / PI.sqrt()).collect();
        let total: f64 = weights.iter().sum();
        for v in &mut weights {
            *v /= total;
        }
        // enforce exact symmetry
        for i in 0..n / 2 {
            let z = 0.5 * (nodes[n - 1 - i] - nodes[i]);
            nodes[i] = -z;
            nodes[n - 1 - i] = z;
            let wt = 0.5 * (weights[i] + weights[n - 1 - i]);
            weights[i] = wt;
            weights[n - 1 - i] = wt;
        }
        GaussHermite { nodes, weights }
    }

    /// Memoized per thread; the Newton iteration is not free at high order.
    pub fn cached(order: usize) -> Self {
        thread_local! {
            static CACHE: std::cell::RefCell<std::collections::HashMap<usize, GaussHermite>> =
                Default::default();
        }
        CACHE.with(|c| c.borrow_mut().entry(order).or_insert_with(|| GaussHermite::new(order)).clone())
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn expect(&self, f: impl Fn(f64) -> f64) -> f64 {
        self.nodes.iter().zip(&self.weights).map(|(&z, &w)| w * f(z)).sum()
    }
}

#[derive(Debug, Clone)]
pub struct GaussLegendre {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

impl GaussLegendre {
    /// Rule on [-1, 1].
    pub fn new(order: usize) -> Self {
        assert!(order >= 1, "quadrature order must be positive");
        let n = order;
        let nf = n as f64;
        let mut nodes = vec![0.0; n];
        let mut weights = vec![0.0; n];
        for i in 0..n.div_ceil(2) {
            let mut z = (PI * (i as f64 + 0.75) / (nf + 0.5)).cos();
            let mut pp = 0.0;
            for _ in 0..100 {
                let mut p1 = 1.0;
                let mut p2 = 0.0;
                for j in 0..n {
                    let p3 = p2;
                    p2 = p1;
                    let jf = j as f64;
                    p1 = ((2.0 * jf + 1.0) * z * p2 - jf * p3) / (jf + 1.0);
                }
                pp = nf * (z * p1 - p2) / (z * z - 1.0);
                let z1 = z;
                z = z1 - p1 / pp;
                if (z - z1).abs() <= 1e-15 {
                    break;
                }
            }
            nodes[i] = -z;
            nodes[n - 1 - i] = z;
            weights[i] = 2.0 / ((1.0 - z * z) * pp * pp);
            weights[n - 1 - i] = weights[i];
        }
        if n % 2 == 1 {
            nodes[n / 2] = 0.0;
        }
        GaussLegendre { nodes, weights }
    }

    /// (node, weight) pairs mapped onto [lo, hi].
    pub fn on(&self, lo: f64, hi: f64) -> impl Iterator<Item = (f64, f64)> + '_ {
        let half = 0.5 * (hi - lo);
        let mid = 0.5 * (hi + lo);
        self.nodes
            .iter()
            .zip(&self.weights)
            .map(move |(&t, &w)| (mid + half * t, half * w))
    }

    pub fn integrate(&self, lo: f64, hi: f64, f: impl Fn(f64) -> f64) -> f64 {
        self.on(lo, hi).map(|(s, w)| w * f(s)).sum()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hermite_moments() {
        for &n in &[1usize, 2, 5, 24, 60, 100] {
            let gh = GaussHermite::new(n);
            assert!((gh.expect(|_| 1.0) - 1.0).abs() < 1e-14);
            if n >= 2 {
                assert!((gh.expect(|z| z * z) - 1.0).abs() < 1e-12, "order {n}");
            }
            if n >= 3 {
                assert!((gh.expect(|z| z.powi(4)) - 3.0).abs() < 1e-11);
            }
            assert!(gh.expect(|z| z).abs() < 1e-14);
        }
        // E cos(Z) = exp(-1/2)
        let gh = GaussHermite::new(40);
        assert!((gh.expect(f64::cos) - (-0.5f64).exp()).abs() < 1e-14);
        assert!(gh.nodes.windows(2).all(|p| p[0] < p[1]));
    }

    #[test]
    fn legendre_polynomials_exact() {
        let gl = GaussLegendre::new(8);
        assert!((gl.integrate(0.0, 2.0, |x| x.powi(15)) - 2f64.powi(16) / 16.0).abs() < 1e-9);
        assert!((gl.integrate(-1.0, 1.0, |_| 1.0) - 2.0).abs() < 1e-14);
        let gl = GaussLegendre::new(3);
        assert!((gl.integrate(0.0, 1.0, |x| x.powi(5)) - 1.0 / 6.0).abs() < 1e-15);
    }
}
