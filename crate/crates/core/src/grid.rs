//! Uniform symmetric grids and the layer sampling used by the PDE solvers.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mixture::MixtureSpec;

pub const DEFAULT_POINTS: usize = 4097;
pub const DEFAULT_WIDTH_SIGMAS: f64 = 10.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpatialGrid {
    half_width: f64,
    n_points: usize,
}

impl SpatialGrid {
    pub fn new(half_width: f64, n_points: usize) -> Result<Self> {
        if !(half_width > 0.0 && half_width.is_finite()) {
            return Err(Error::Grid(format!("half width {half_width} must be positive")));
        }
        if n_points < 5 || n_points % 2 == 0 {
            return Err(Error::Grid(format!("{n_points} points: need an odd count >= 5")));
        }
        Ok(SpatialGrid { half_width, n_points })
    }

    /// L = |h| + 10 sqrt(xi'(1)) with 4097 points.
    pub fn default_for(spec: &MixtureSpec, h: f64) -> Self {
        Self::with_points(spec, h, DEFAULT_POINTS)
    }

    pub fn with_points(spec: &MixtureSpec, h: f64, n_points: usize) -> Self {
        let width = h.abs() + DEFAULT_WIDTH_SIGMAS * spec.xi_prime(1.0).sqrt();
        Self::new(width, n_points).expect("default grid parameters are valid")
    }

    pub fn half_width(&self) -> f64 {
        self.half_width
    }

    pub fn n_points(&self) -> usize {
        self.n_points
    }

    pub fn dx(&self) -> f64 {
        2.0 * self.half_width / (self.n_points - 1) as f64
    }

    pub fn center(&self) -> usize {
        self.n_points / 2
    }

    /// Node i; the center node is exactly 0 and the grid is symmetric.
    pub fn x(&self, i: usize) -> f64 {
        let c = self.center() as f64;
        (i as f64 - c) * self.dx()
    }

    pub fn nodes(&self) -> Vec<f64> {
        (0..self.n_points).map(|i| self.x(i)).collect()
    }

    /// Fractional node index of x.
    pub fn position(&self, x: f64) -> f64 {
        x / self.dx() + self.center() as f64
    }
}

/// A function tabulated with its first two derivatives on a grid.
#[derive(Debug, Clone, PartialEq)]
pub struct Layer {
    pub time: f64,
    pub phi: Vec<f64>,
    pub dphi: Vec<f64>,
    pub d2phi: Vec<f64>,
    d3phi: Vec<f64>,
}

impl Layer {
    pub fn new(time: f64, phi: Vec<f64>, dphi: Vec<f64>, d2phi: Vec<f64>, dx: f64) -> Self {
        let n = d2phi.len();
        let mut d3phi = vec![0.0; n];
        for i in 1..n - 1 {
            d3phi[i] = (d2phi[i + 1] - d2phi[i - 1]) / (2.0 * dx);
        }
        d3phi[0] = (d2phi[1] - d2phi[0]) / dx;
        d3phi[n - 1] = (d2phi[n - 1] - d2phi[n - 2]) / dx;
        Layer { time, phi, dphi, d2phi, d3phi }
    }

    /// (f, f', f'') at an arbitrary point: cubic Hermite on each of the three
    /// tables using the next derivative as slope, linear extrapolation outside.
    #[inline]
    pub fn sample(&self, grid: &SpatialGrid, x: f64) -> [f64; 3] {
        let n = self.phi.len();
        let dx = grid.dx();
        let pos = grid.position(x);
        if pos <= 0.0 {
            let off = (pos) * dx;
            return [self.phi[0] + self.dphi[0] * off, self.dphi[0], self.d2phi[0]];
        }
        if pos >= (n - 1) as f64 {
            let off = (pos - (n - 1) as f64) * dx;
            return [self.phi[n - 1] + self.dphi[n - 1] * off, self.dphi[n - 1], self.d2phi[n - 1]];
        }
        let k = (pos as usize).min(n - 2);
        let t = pos - k as f64;
        let basis = HermiteBasis::at(t, dx);
        self.hermite(k, &basis)
    }

    #[inline]
    fn hermite(&self, k: usize, b: &HermiteBasis) -> [f64; 3] {
        let f = b.h00 * self.phi[k] + b.h10 * self.dphi[k] + b.h01 * self.phi[k + 1] + b.h11 * self.dphi[k + 1];
        let g = b.h00 * self.dphi[k] + b.h10 * self.d2phi[k] + b.h01 * self.dphi[k + 1] + b.h11 * self.d2phi[k + 1];
        let c = b.h00 * self.d2phi[k] + b.h10 * self.d3phi[k] + b.h01 * self.d2phi[k + 1] + b.h11 * self.d3phi[k + 1];
        [f, g, c]
    }

    /// Sample at node index `i` shifted by a precomputed offset.
    #[inline]
    pub(crate) fn sample_shifted(&self, i: usize, shift: &Shift, dx: f64) -> [f64; 3] {
        let n = self.phi.len() as isize;
        let k = i as isize + shift.whole;
        if k >= 0 && k < n - 1 {
            return self.hermite(k as usize, &shift.basis);
        }
        let (edge, off) = if k < 0 {
            (0usize, (k as f64 + shift.frac) * dx)
        } else {
            ((n - 1) as usize, (k as f64 + shift.frac - (n - 1) as f64) * dx)
        };
        [self.phi[edge] + self.dphi[edge] * off, self.dphi[edge], self.d2phi[edge]]
    }
}

#[derive(Debug, Clone, Copy)]
pub(crate) struct HermiteBasis {
    h00: f64,
    h10: f64,
    h01: f64,
    h11: f64,
}

impl HermiteBasis {
    #[inline]
    pub(crate) fn at(t: f64, dx: f64) -> Self {
        let t2 = t * t;
        let t3 = t2 * t;
        HermiteBasis {
            h00: 2.0 * t3 - 3.0 * t2 + 1.0,
            h10: (t3 - 2.0 * t2 + t) * dx,
            h01: -2.0 * t3 + 3.0 * t2,
            h11: (t3 - t2) * dx,
        }
    }
}

/// A displacement expressed in grid units, split into whole and fractional parts.
#[derive(Debug, Clone, Copy)]
pub(crate) struct Shift {
    whole: isize,
    frac: f64,
    basis: HermiteBasis,
}

impl Shift {
    pub(crate) fn new(displacement: f64, dx: f64) -> Self {
        let units = displacement / dx;
        let whole = units.floor();
        let frac = units - whole;
        Shift { whole: whole as isize, frac, basis: HermiteBasis::at(frac, dx) }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grid_symmetric_with_exact_zero() {
        let g = SpatialGrid::new(3.0, 101).unwrap();
        assert_eq!(g.x(50), 0.0);
        for i in 0..101 {
            assert_eq!(g.x(i), -g.x(100 - i));
        }
        assert!((g.x(100) - 3.0).abs() < 1e-14);
        assert!(SpatialGrid::new(1.0, 100).is_err());
        assert!(SpatialGrid::new(-1.0, 101).is_err());
    }

    #[test]
    fn hermite_sampling_is_fourth_order() {
        let g = SpatialGrid::new(4.0, 401).unwrap();
        let xs = g.nodes();
        let layer = Layer::new(
            0.0,
            xs.iter().map(|x| x.sin()).collect(),
            xs.iter().map(|x| x.cos()).collect(),
            xs.iter().map(|x| -x.sin()).collect(),
            g.dx(),
        );
        for &x in &[0.0123, -1.777, 3.14159] {
            let [f, d, c] = layer.sample(&g, x);
            assert!((f - x.sin()).abs() < 1e-9);
            assert!((d - x.cos()).abs() < 1e-9);
            assert!((c + x.sin()).abs() < 1e-5);
        }
        let shifted = layer.sample_shifted(200, &Shift::new(0.537, g.dx()), g.dx());
        assert!((shifted[0] - 0.537f64.sin()).abs() < 1e-9);
        // linear continuation past the edge
        let [f, _, _] = layer.sample(&g, 4.5);
        assert!((f - (4f64.sin() + 0.5 * 4f64.cos())).abs() < 1e-12);
    }
}
