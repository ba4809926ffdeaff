//! The two-replica Cole-Hopf recursion behind the coupled bound.
//!
//! In rotated coordinates u = (x1 + x2)/sqrt2, v = (x1 - x2)/sqrt2 the
//! covariance is diagonal: xi''(1 + iota t) and xi''(1 - iota t) below |q|,
//! xi'' on both axes above. A 2-D Cole-Hopf step is then exactly two 1-D
//! steps, one per axis, and the terminal condition becomes
//! max(sqrt2 |u| + lambda, sqrt2 |v| - lambda). The solution is even in u
//! and in v, so only the quadrant u, v >= 0 is stored.

use std::f64::consts::SQRT_2;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gamma::StepGamma;
use crate::mixture::MixtureSpec;
use crate::quadrature::{GaussHermite, GaussLegendre};
use crate::special::{log_norm_cdf, norm_cdf, norm_pdf};

pub const DEFAULT_POINTS_2D: usize = 513;
pub const DEFAULT_GH_ORDER_2D: usize = 24;
pub const DEFAULT_RATIO_2D: f64 = 3.0;
/// Below this gamma value the log-expectation is replaced by the plain one.
const LINEAR_GAMMA: f64 = 1e-9;
const GL_ORDER: usize = 16;
const TOP_WINDOW: f64 = 8.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Grid2d {
    pub half_u: f64,
    pub half_v: f64,
    /// nodes per full axis; odd
    pub points: usize,
}

impl Grid2d {
    pub fn new(half_u: f64, half_v: f64, points: usize) -> Result<Self> {
        if !(half_u > 0.0 && half_v > 0.0 && half_u.is_finite() && half_v.is_finite()) {
            return Err(Error::Grid(format!("half widths ({half_u}, {half_v}) must be positive")));
        }
        if points < 13 || points % 2 == 0 {
            return Err(Error::Grid(format!("{points} points per axis: need an odd count >= 13")));
        }
        Ok(Grid2d { half_u, half_v, points })
    }

    /// Ten standard deviations of the widest axis beyond (sqrt2 |h|, 0).
    pub fn default_for(spec: &MixtureSpec, h: f64) -> Self {
        Self::with_points(spec, h, DEFAULT_POINTS_2D)
    }

    pub fn with_points(spec: &MixtureSpec, h: f64, points: usize) -> Self {
        let width = 10.0 * (2.0 * spec.xi_prime(1.0)).sqrt();
        Grid2d::new(SQRT_2 * h.abs() + width, width, points).expect("default 2-D grid is valid")
    }

    /// Stored nodes per axis (the nonnegative half).
    pub fn half_points(&self) -> usize {
        self.points / 2 + 1
    }

    pub fn du(&self) -> f64 {
        self.half_u / (self.half_points() - 1) as f64
    }

    pub fn dv(&self) -> f64 {
        self.half_v / (self.half_points() - 1) as f64
    }
}

/// Psi on the stored quadrant at one time; row-major in u.
#[derive(Debug, Clone, PartialEq)]
pub struct Field2d {
    pub time: f64,
    n: usize,
    du: f64,
    dv: f64,
    values: Vec<f64>,
}

impl Field2d {
    fn from_fn(grid: &Grid2d, time: f64, f: impl Fn(f64, f64) -> f64) -> Self {
        let n = grid.half_points();
        let (du, dv) = (grid.du(), grid.dv());
        let mut values = Vec::with_capacity(n * n);
        for i in 0..n {
            for j in 0..n {
                values.push(f(i as f64 * du, j as f64 * dv));
            }
        }
        Field2d { time, n, du, dv, values }
    }

    /// Psi at (x1, x2), reflected into the quadrant and interpolated.
    pub fn at(&self, x1: f64, x2: f64) -> f64 {
        let u = (x1 + x2) / SQRT_2;
        let v = (x1 - x2) / SQRT_2;
        self.at_rotated(u, v)
    }

    pub fn at_rotated(&self, u: f64, v: f64) -> f64 {
        let n = self.n;
        let pu = u.abs() / self.du;
        let pv = v.abs() / self.dv;
        interpolate(n, pu, |i| interpolate(n, pv, |j| self.values[i * n + j]))
    }

    /// Largest discrete curvature along either axis.
    fn curvature(&self) -> f64 {
        let n = self.n;
        let mut peak = 0.0f64;
        for i in 0..n {
            for j in 0..n {
                let c = self.values[i * n + j];
                if j > 0 && j + 1 < n {
                    let d = self.values[i * n + j + 1] - 2.0 * c + self.values[i * n + j - 1];
                    peak = peak.max(d.abs() / (self.dv * self.dv));
                }
                if i > 0 && i + 1 < n {
                    let d = self.values[(i + 1) * n + j] - 2.0 * c + self.values[(i - 1) * n + j];
                    peak = peak.max(d.abs() / (self.du * self.du));
                }
            }
        }
        peak
    }

    /// Variance scale of the sharpest feature, as in the 1-D solver.
    fn smoothing(&self) -> f64 {
        let width = (2.0 * norm_pdf(0.0) / self.curvature()).max(self.du.max(self.dv));
        width * width
    }
}

/// Six-point Lagrange weights for nodes at offsets -2..=3 evaluated at `x`.
fn lagrange6(x: f64) -> [f64; 6] {
    let mut w = [1.0; 6];
    for (m, wm) in w.iter_mut().enumerate() {
        for k in 0..6 {
            if k != m {
                *wm *= (x - (k as f64 - 2.0)) / (m as f64 - k as f64);
            }
        }
    }
    w
}

/// Value at fractional index `pos` >= 0 of an even function tabulated at
/// 0..n; linear continuation beyond the last node.
fn interpolate(n: usize, pos: f64, get: impl Fn(usize) -> f64) -> f64 {
    let last = (n - 1) as f64;
    if pos >= last {
        let slope = get(n - 1) - get(n - 2);
        return get(n - 1) + slope * (pos - last);
    }
    let base = pos.floor() as isize;
    let start = (base - 2).min(n as isize - 6);
    let w = lagrange6(pos - (start + 2) as f64);
    w.iter()
        .enumerate()
        .map(|(m, wm)| wm * get((start + m as isize).unsigned_abs()))
        .sum()
}

/// Cole-Hopf average of samples with weights summing to one.
#[inline]
fn combine(weights: &[f64], values: &[f64], a: f64) -> f64 {
    if a < LINEAR_GAMMA {
        return weights.iter().zip(values).map(|(w, v)| w * v).sum();
    }
    let top = values.iter().fold(f64::NEG_INFINITY, |m, &v| m.max(a * v));
    let excess: f64 = weights.iter().zip(values).map(|(w, v)| w * (a * v - top).exp_m1()).sum();
    (top + excess.ln_1p()) / a
}

/// One Cole-Hopf step along an axis for every line of the field.
fn pass(field: &mut Field2d, along_v: bool, variance: f64, a: f64, gh: &GaussHermite) {
    if variance <= 0.0 {
        return;
    }
    let n = field.n;
    let d = if along_v { field.dv } else { field.du };
    let sigma = variance.sqrt();
    let taps: Vec<(isize, [f64; 6], f64)> = gh
        .nodes
        .iter()
        .map(|&z| {
            let shift = sigma * z / d;
            let floor = shift.floor();
            (floor as isize, lagrange6(shift - floor), shift)
        })
        .collect();
    let mut line = vec![0.0; n];
    let mut out = vec![0.0; n];
    let mut samples = vec![0.0; gh.len()];
    for l in 0..n {
        for (k, slot) in line.iter_mut().enumerate() {
            *slot = if along_v { field.values[l * n + k] } else { field.values[k * n + l] };
        }
        for (j, o) in out.iter_mut().enumerate() {
            for (s, &(floor, ref w, shift)) in samples.iter_mut().zip(&taps) {
                let start = j as isize + floor - 2;
                *s = if start >= 0 && start + 5 < n as isize {
                    let st = start as usize;
                    w[0] * line[st] + w[1] * line[st + 1] + w[2] * line[st + 2] + w[3] * line[st + 3] + w[4] * line[st + 4] + w[5] * line[st + 5]
                } else {
                    interpolate(n, (j as f64 + shift).abs(), |k| line[k])
                };
            }
            *o = combine(&gh.weights, &samples, a);
        }
        for (k, &o) in out.iter().enumerate() {
            if along_v {
                field.values[l * n + k] = o;
            } else {
                field.values[k * n + l] = o;
            }
        }
    }
}

/// log(Phi(hi) - Phi(lo)) for lo < hi without cancellation.
fn log_normal_mass(lo: f64, hi: f64) -> f64 {
    if hi <= 0.0 {
        let (lh, ll) = (log_norm_cdf(hi), log_norm_cdf(lo));
        lh + (-(ll - lh).exp_m1()).ln()
    } else if lo >= 0.0 {
        log_normal_mass(-hi, -lo)
    } else {
        (-(norm_cdf(lo) + norm_cdf(-hi))).ln_1p()
    }
}

fn log_sum_exp(xs: &[f64]) -> f64 {
    let top = xs.iter().fold(f64::NEG_INFINITY, |m, &x| m.max(x));
    if top == f64::NEG_INFINITY {
        return top;
    }
    top + xs.iter().map(|x| (x - top).exp()).sum::<f64>().ln()
}

/// First half of the terminal step, exact: the v-average of
/// exp(a max(alpha, sqrt2 |v'| - lambda)) with v' ~ N(v, sigma^2).
/// Returns the log-average for a > 0 and the plain average for a = 0.
fn top_along_v(a: f64, lambda: f64, alpha: f64, v: f64, sigma: f64) -> f64 {
    let c = (alpha + lambda) / SQRT_2;
    let cp = c.max(0.0);
    if a < LINEAR_GAMMA {
        let up = (v - cp) / sigma;
        let down = (-cp - v) / sigma;
        let tail = norm_cdf(up) + norm_cdf(down);
        let abs_tail = v * norm_cdf(up) + sigma * norm_pdf(up) - v * norm_cdf(down) + sigma * norm_pdf(down);
        return alpha * (1.0 - tail) + SQRT_2 * abs_tail - lambda * tail;
    }
    let b = a * SQRT_2;
    let var = sigma * sigma;
    let drift = 0.5 * b * b * var - a * lambda;
    let plus = drift + b * v + log_norm_cdf((v + b * var - cp) / sigma);
    let minus = drift - b * v + log_norm_cdf((-v + b * var - cp) / sigma);
    let inside = if c > 0.0 { a * alpha + log_normal_mass((-c - v) / sigma, (c - v) / sigma) } else { f64::NEG_INFINITY };
    log_sum_exp(&[inside, plus, minus])
}

/// Psi on [s, 1) for constant gamma = a and equal axis variances,
/// evaluated at time s. The v-step is closed form; the u-step integrates
/// over |u'| with Gauss-Legendre panels, since the v-result depends on u'
/// only through sqrt2 |u'| + lambda.
fn top_field(grid: &Grid2d, lambda: f64, a: f64, variance: f64, time: f64) -> Field2d {
    if variance <= 0.0 {
        return Field2d::from_fn(grid, time, |u, v| (SQRT_2 * u + lambda).max(SQRT_2 * v - lambda));
    }
    let gl = GaussLegendre::new(GL_ORDER);
    let sigma = variance.sqrt();
    let log_norm = -0.5 * (2.0 * std::f64::consts::PI).ln() - sigma.ln();
    Field2d::from_fn(grid, time, |u, v| {
        let lo = (u - TOP_WINDOW * sigma).max(0.0);
        let hi = u + TOP_WINDOW * sigma + a.max(0.0) * SQRT_2 * variance;
        let panels = ((hi - lo) / (8.0 * sigma)).ceil().max(1.0) as usize;
        let width = (hi - lo) / panels as f64;
        let mut logs = Vec::with_capacity(panels * GL_ORDER);
        let mut kernel_mass = 0.0;
        let mut linear = 0.0;
        for p in 0..panels {
            let a0 = lo + p as f64 * width;
            for (w, wt) in gl.on(a0, a0 + width) {
                let zm = (w - u) / sigma;
                let zp = (w + u) / sigma;
                // the two images of |u'| = w
                let log_kernel = log_norm + log_sum_exp(&[-0.5 * zm * zm, -0.5 * zp * zp]);
                let weight = wt * log_kernel.exp();
                kernel_mass += weight;
                let inner = top_along_v(a, lambda, SQRT_2 * w + lambda, v, sigma);
                if a < LINEAR_GAMMA {
                    linear += weight * inner;
                } else {
                    logs.push(wt.ln() + log_kernel + inner);
                }
            }
        }
        if a < LINEAR_GAMMA {
            linear / kernel_mass
        } else {
            (log_sum_exp(&logs) - kernel_mass.ln()) / a
        }
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CoupledOptions {
    pub gh_order: usize,
    pub substep_ratio: f64,
}

impl Default for CoupledOptions {
    fn default() -> Self {
        CoupledOptions { gh_order: DEFAULT_GH_ORDER_2D, substep_ratio: DEFAULT_RATIO_2D }
    }
}

/// Axis variance factors (u, v) per unit of xi' below |q|.
fn coupling_factors(t: f64, q: f64) -> (f64, f64) {
    let iota = if q >= 0.0 { 1.0 } else { -1.0 };
    (1.0 + iota * t, 1.0 - iota * t)
}

/// Shared machinery for solving at one (mixture, gamma, grid).
#[derive(Debug, Clone)]
pub struct CoupledSolver {
    spec: MixtureSpec,
    gamma: StepGamma,
    grid: Grid2d,
    gh: GaussHermite,
    opts: CoupledOptions,
}

/// Layers of the uncoupled dynamics from `top` down to `bottom`, reusable
/// for every q with bottom <= |q| <= top at a fixed lambda.
#[derive(Debug, Clone)]
pub struct UncoupledChain {
    pub lambda: f64,
    pub top: f64,
    pub bottom: f64,
    /// descending in time; the first is the closed-form layer at `top`
    layers: Vec<Field2d>,
}

impl UncoupledChain {
    pub fn layers(&self) -> &[Field2d] {
        &self.layers
    }
}

impl CoupledSolver {
    pub fn new(spec: &MixtureSpec, gamma: &StepGamma, grid: Grid2d, opts: CoupledOptions) -> Self {
        CoupledSolver { spec: spec.clone(), gamma: gamma.clone(), grid, gh: GaussHermite::cached(opts.gh_order), opts }
    }

    pub fn gamma(&self) -> &StepGamma {
        &self.gamma
    }

    pub fn grid(&self) -> &Grid2d {
        &self.grid
    }

    /// The closed form needs gamma constant above `top`.
    pub fn min_top(&self) -> f64 {
        self.gamma.atoms().last().map_or(0.0, |&(q, _)| q)
    }

    pub fn chain(&self, lambda: f64, top: f64, bottom: f64) -> Result<UncoupledChain> {
        let top = top.max(self.min_top());
        if top >= 1.0 {
            return Err(Error::Domain(format!("chain top {top} must be below 1")));
        }
        let a = self.gamma.value_at(top);
        let variance = self.spec.xi_prime(1.0) - self.spec.xi_prime(top);
        let first = top_field(&self.grid, lambda, a, variance, top);
        let mut layers = vec![first];
        self.descend(&mut layers, bottom.clamp(0.0, top), (1.0, 1.0), true)?;
        Ok(UncoupledChain { lambda, top, bottom, layers })
    }

    /// Steps down from the last layer to `stop`; the final piece is kept
    /// only if `to_stop` (otherwise the caller finishes with a point step).
    fn descend(&self, layers: &mut Vec<Field2d>, stop: f64, factors: (f64, f64), to_stop: bool) -> Result<()> {
        let fmax = factors.0.max(factors.1);
        loop {
            let current = layers.last().expect("a layer to start from");
            if current.time <= stop {
                return Ok(());
            }
            // the gamma piece containing the left limit at current.time
            let (lo, _, a) = self
                .gamma
                .intervals()
                .into_iter()
                .find(|&(lo, hi, _)| lo < current.time && current.time <= hi)
                .expect("gamma covers [0, 1)");
            let floor = lo.max(stop);
            let v_hi = self.spec.xi_prime(current.time);
            let allowance = self.opts.substep_ratio * current.smoothing() / fmax.max(1e-300);
            let mut time = floor;
            if allowance < v_hi - self.spec.xi_prime(floor) {
                let cut = self.spec.xi_prime_inverse(v_hi - allowance);
                if cut > floor && cut < current.time {
                    time = cut;
                }
            }
            if time == stop && !to_stop {
                return Ok(());
            }
            let dv = v_hi - self.spec.xi_prime(time);
            let mut next = current.clone();
            next.time = time;
            pass(&mut next, true, factors.1 * dv, a, &self.gh);
            pass(&mut next, false, factors.0 * dv, a, &self.gh);
            layers.push(next);
        }
    }

    /// Psi(lambda, 0, h, h) and the stored layers, starting from a chain.
    pub fn solve_from(&self, chain: &UncoupledChain, t: f64, q: f64, h: f64) -> Result<CoupledPDESolution> {
        if !(0.0..=1.0).contains(&t) {
            return Err(Error::Domain(format!("coupling t = {t} outside [0, 1]")));
        }
        if q.abs() >= 1.0 {
            return Err(Error::Domain(format!("|q| = {} must be below 1", q.abs())));
        }
        let cut = q.abs();
        if cut > chain.top || cut < chain.bottom {
            return Err(Error::Domain(format!("|q| = {cut} outside the chain range [{}, {}]", chain.bottom, chain.top)));
        }
        // last uncoupled layer at or above |q|, then down to |q| exactly
        let idx = chain.layers.iter().rposition(|l| l.time >= cut).expect("chain starts at its top");
        let mut layers: Vec<Field2d> = chain.layers[..=idx].to_vec();
        if layers.last().expect("nonempty").time > cut {
            self.descend(&mut layers, cut, (1.0, 1.0), true)?;
        }
        let factors = coupling_factors(t, q);
        self.descend(&mut layers, 0.0, factors, false)?;
        let origin = self.point_step(layers.last().expect("nonempty"), factors, h)?;
        Ok(CoupledPDESolution {
            mixture: self.spec.clone(),
            gamma: self.gamma.clone(),
            t,
            q,
            lambda: chain.lambda,
            grid: self.grid,
            layers,
            origin_value: origin,
            h,
        })
    }

    /// The final step from the lowest layer to s = 0 at (h, h) only.
    fn point_step(&self, layer: &Field2d, factors: (f64, f64), h: f64) -> Result<f64> {
        let (u0, v0) = (SQRT_2 * h, 0.0);
        if layer.time <= 0.0 {
            return Ok(layer.at_rotated(u0, v0));
        }
        let a = self.gamma.value_at(0.0);
        let dv = self.spec.xi_prime(layer.time);
        let (su, sv) = ((factors.0 * dv).sqrt(), (factors.1 * dv).sqrt());
        let mut inner = vec![0.0; self.gh.len()];
        let mut outer = vec![0.0; self.gh.len()];
        for (o, &zu) in outer.iter_mut().zip(&self.gh.nodes) {
            for (s, &zv) in inner.iter_mut().zip(&self.gh.nodes) {
                *s = layer.at_rotated(u0 + su * zu, v0 + sv * zv);
            }
            *o = combine(&self.gh.weights, &inner, a);
        }
        Ok(combine(&self.gh.weights, &outer, a))
    }
}

/// Gridded two-replica solution for one (t, q, lambda).
#[derive(Debug, Clone)]
pub struct CoupledPDESolution {
    pub mixture: MixtureSpec,
    pub gamma: StepGamma,
    pub t: f64,
    pub q: f64,
    pub lambda: f64,
    pub grid: Grid2d,
    /// descending in time, from the top closed-form layer to the lowest stored one
    pub layers: Vec<Field2d>,
    /// Psi(lambda, 0, h, h)
    pub origin_value: f64,
    pub h: f64,
}

impl CoupledPDESolution {
    pub fn layer_at_time(&self, s: f64) -> Option<&Field2d> {
        self.layers.iter().find(|l| l.time == s)
    }

    /// The terminal condition g(lambda, x) on the stored nodes.
    pub fn boundary(&self) -> Field2d {
        let lambda = self.lambda;
        Field2d::from_fn(&self.grid, 1.0, |u, v| (SQRT_2 * u + lambda).max(SQRT_2 * v - lambda))
    }
}

/// g(lambda, x) = max(x1 + x2 + lambda, -x1 - x2 + lambda, x1 - x2 - lambda, -x1 + x2 - lambda).
pub fn terminal_condition(lambda: f64, x1: f64, x2: f64) -> f64 {
    (x1 + x2 + lambda).max(-x1 - x2 + lambda).max(x1 - x2 - lambda).max(-x1 + x2 - lambda)
}

pub fn solve_coupled_pde(
    spec: &MixtureSpec,
    gamma: &StepGamma,
    t: f64,
    q: f64,
    lambda: f64,
    h: f64,
    grid: &Grid2d,
) -> Result<CoupledPDESolution> {
    let solver = CoupledSolver::new(spec, gamma, *grid, CoupledOptions::default());
    let chain = solver.chain(lambda, q.abs(), q.abs())?;
    solver.solve_from(&chain, t, q, h)
}

/// Lambda(lambda, gamma, q) = Psi(lambda, 0, h, h) - lambda q
///     - (int_0^1 gamma s xi'' + t int_0^|q| gamma s xi'').
pub fn assemble_lambda(spec: &MixtureSpec, gamma: &StepGamma, t: f64, q: f64, lambda: f64, psi: f64) -> f64 {
    psi - lambda * q - (gamma.weighted_s_xi2(spec, 0.0, 1.0) + t * gamma.weighted_s_xi2(spec, 0.0, q.abs()))
}

pub fn lambda_functional(spec: &MixtureSpec, gamma: &StepGamma, t: f64, q: f64, lambda: f64, h: f64) -> Result<f64> {
    let sol = solve_coupled_pde(spec, gamma, t, q, lambda, h, &Grid2d::default_for(spec, h))?;
    Ok(assemble_lambda(spec, gamma, t, q, lambda, sol.origin_value))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::SpatialGrid;
    use crate::pde::{phi_at_origin, solve_parisi_pde};

    fn fixture() -> (MixtureSpec, StepGamma) {
        (MixtureSpec::sk(), StepGamma::new(vec![(0.0, 0.0), (0.6, 1.5), (0.85, 4.0)]).unwrap())
    }

    fn solver(spec: &MixtureSpec, gamma: &StepGamma, h: f64) -> CoupledSolver {
        CoupledSolver::new(spec, gamma, Grid2d::with_points(spec, h, 257), CoupledOptions::default())
    }

    #[test]
    fn boundary_matches_terminal_condition() {
        let (spec, gamma) = fixture();
        let sol = solve_coupled_pde(&spec, &gamma, 0.5, 0.7, 0.4, 1.0, &Grid2d::with_points(&spec, 1.0, 129)).unwrap();
        let b = sol.boundary();
        for (i, j) in [(0, 0), (3, 7), (20, 1), (64, 64)] {
            let (u, v) = (i as f64 * b.du, j as f64 * b.dv);
            let (x1, x2) = ((u + v) / SQRT_2, (u - v) / SQRT_2);
            assert!((b.at_rotated(u, v) - terminal_condition(0.4, x1, x2)).abs() < 1e-12);
        }
    }

    #[test]
    fn top_layer_at_zero_lambda_is_a_sum_of_replicas() {
        let (spec, gamma) = fixture();
        let s = CoupledSolver::new(&spec, &gamma, Grid2d::default_for(&spec, 1.0), CoupledOptions::default());
        let chain = s.chain(0.0, 0.85, 0.85).unwrap();
        let one = solve_parisi_pde(&spec, &gamma, &SpatialGrid::default_for(&spec, 1.0)).unwrap();
        let top = &chain.layers()[0];
        for (x1, x2) in [(0.0, 0.0), (1.0, 0.3), (-0.7, 2.1), (1.9, -1.4)] {
            let expect = one.eval(0.85, x1, 0).unwrap() + one.eval(0.85, x2, 0).unwrap();
            assert!((top.at(x1, x2) - expect).abs() < 2e-6, "({x1}, {x2}): {} vs {expect}", top.at(x1, x2));
        }
    }

    #[test]
    fn replica_swap_symmetry() {
        let (spec, gamma) = fixture();
        let s = solver(&spec, &gamma, 1.0);
        let chain = s.chain(0.3, 0.85, 0.4).unwrap();
        let sol = s.solve_from(&chain, 0.6, 0.4, 1.0).unwrap();
        for layer in &sol.layers {
            for (x1, x2) in [(0.2, 1.1), (-1.3, 0.5)] {
                assert!((layer.at(x1, x2) - layer.at(x2, x1)).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn zero_lambda_splits_when_gamma_vanishes_below_q() {
        let (spec, gamma) = fixture();
        let phi = phi_at_origin(&spec, &gamma, 1.0).unwrap();
        let s = solver(&spec, &gamma, 1.0);
        for q in [0.3f64, -0.4] {
            let chain = s.chain(0.0, 0.85, q.abs()).unwrap();
            let psi = s.solve_from(&chain, 0.5, q, 1.0).unwrap().origin_value;
            assert!((psi - 2.0 * phi).abs() < 1e-5, "q = {q}: {psi} vs {}", 2.0 * phi);
        }
    }

    #[test]
    fn lambda_slope_is_the_overlap_map() {
        let (spec, gamma) = fixture();
        let (t, q, h, eps) = (0.5, 0.3, 1.0, 1e-3);
        let s = solver(&spec, &gamma, h);
        let at = |l: f64| s.solve_from(&s.chain(l, 0.85, q).unwrap(), t, q, h).unwrap().origin_value;
        let slope = (at(eps) - at(-eps)) / (2.0 * eps);
        let map = crate::chaos::OverlapMap::from_gamma(&spec, h, &gamma, 0.6).unwrap();
        let psi = map.psi(t, q).unwrap();
        assert!((slope - psi).abs() < 1e-5, "{slope} vs {psi}");
    }

    #[test]
    fn bound_is_convex_in_lambda() {
        let (spec, gamma) = fixture();
        let s = solver(&spec, &gamma, 0.5);
        let value = |l: f64| {
            let psi = s.solve_from(&s.chain(l, 0.85, 0.7).unwrap(), 0.5, 0.7, 0.5).unwrap().origin_value;
            assemble_lambda(&spec, &gamma, 0.5, 0.7, l, psi)
        };
        let (a, b, c) = (value(-0.5), value(0.0), value(0.5));
        assert!(a + c - 2.0 * b > 0.0);
    }

    #[test]
    fn rejects_bad_arguments() {
        let (spec, gamma) = fixture();
        let s = solver(&spec, &gamma, 0.0);
        let chain = s.chain(0.0, 0.85, 0.5).unwrap();
        assert!(s.solve_from(&chain, 1.5, 0.6, 0.0).is_err());
        assert!(s.solve_from(&chain, 0.5, 0.2, 0.0).is_err());
        assert!(s.chain(0.0, 1.0, 0.5).is_err());
    }
}
