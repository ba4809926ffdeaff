//! Zero-temperature Parisi PDE for step-function order parameters.
//!
//! On an interval where gamma = a the equation linearizes under
//! exp(a Phi), so each interval is one Gaussian expectation:
//! Phi(s_l, x) = (1/a) log E exp(a Phi(s_r, x + sqrt(v) Z)), v = xi'(s_r) - xi'(s_l).
//! The top interval starts from |x| and is done in closed form.

use std::io::Write;

use crate::error::{Error, Result};
use crate::gamma::StepGamma;
use crate::grid::{Layer, Shift, SpatialGrid};
use crate::mixture::MixtureSpec;
use crate::quadrature::GaussHermite;
use crate::special::{erf, log_norm_cdf, norm_pdf, SQRT_2_OVER_PI};

pub const DEFAULT_GH_ORDER: usize = 60;
/// Second derivatives are not served closer than this to s = 1.
pub const EPS_BOUNDARY: f64 = 1e-3;
pub const LAYER_DUMP_VERSION: u32 = 1;
/// Below this, a Cole-Hopf weight is treated as exactly zero in closed forms.
const LINEAR_THRESHOLD: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PdeOptions {
    pub gh_order: usize,
    /// Steps are split until each piece is at most this multiple of the
    /// curvature scale of its source layer.
    pub substep_ratio: f64,
}

pub const DEFAULT_SUBSTEP_RATIO: f64 = 4.0;
/// Bound on (a sigma)^2 per step; a 60-node rule loses ~1e-7 at 4, ~1e-10 at 1.
pub const MAX_TILT: f64 = 1.0;

impl Default for PdeOptions {
    fn default() -> Self {
        PdeOptions { gh_order: DEFAULT_GH_ORDER, substep_ratio: DEFAULT_SUBSTEP_RATIO }
    }
}

/// (Phi, Phi_x, Phi_xx) for one Cole-Hopf step started from |x|.
pub fn boundary_step(a: f64, variance: f64, x: f64) -> [f64; 3] {
    if variance <= 0.0 {
        let sign = if x > 0.0 { 1.0 } else if x < 0.0 { -1.0 } else { 0.0 };
        return [x.abs(), sign, 0.0];
    }
    let sigma = variance.sqrt();
    let density = 2.0 * norm_pdf(x / sigma) / sigma;
    if a < LINEAR_THRESHOLD {
        let e = erf(x / (sigma * std::f64::consts::SQRT_2));
        let phi = x * e + sigma * SQRT_2_OVER_PI * (-0.5 * x * x / variance).exp();
        return [phi, e, density];
    }
    let base = 0.5 * a * a * variance;
    let log_plus = a * x + base + log_norm_cdf((x + a * variance) / sigma);
    let log_minus = -a * x + base + log_norm_cdf((-x + a * variance) / sigma);
    let top = log_plus.max(log_minus);
    let log_sum = top + (-(log_plus - log_minus).abs()).exp().ln_1p();
    let phi = log_sum / a;
    let slope = (0.5 * (log_plus - log_minus)).tanh();
    let curvature = a * (1.0 - slope * slope) + (density.ln() - log_sum).exp();
    [phi, slope, curvature]
}

/// Closed-form Phi for gamma = 0: the heat equation started from |x|.
pub fn heat_closed_form(spec: &MixtureSpec, x: f64, s: f64) -> [f64; 3] {
    let s = s.min(1.0 - EPS_BOUNDARY);
    boundary_step(0.0, spec.xi_prime(1.0) - spec.xi_prime(s), x)
}

/// Combines quadrature samples (w_j, f_j, f'_j, f''_j) into the Cole-Hopf value and derivatives.
struct Combiner {
    values: Vec<[f64; 3]>,
}

impl Combiner {
    fn new(order: usize) -> Self {
        Combiner { values: Vec::with_capacity(order) }
    }

    #[inline]
    fn finish(&self, weights: &[f64], a: f64) -> [f64; 3] {
        if a == 0.0 {
            let mut acc = [0.0; 3];
            for (w, v) in weights.iter().zip(&self.values) {
                acc[0] += w * v[0];
                acc[1] += w * v[1];
                acc[2] += w * v[2];
            }
            return acc;
        }
        let top = self.values.iter().fold(f64::NEG_INFINITY, |m, v| m.max(a * v[0]));
        // expm1/ln_1p keep the result accurate as a -> 0
        let mut excess = 0.0;
        for (w, v) in weights.iter().zip(&self.values) {
            excess += w * (a * v[0] - top).exp_m1();
        }
        let total = 1.0 + excess;
        let phi = (top + excess.ln_1p()) / a;
        let mut d1 = 0.0;
        let mut d2 = 0.0;
        for (w, v) in weights.iter().zip(&self.values) {
            let tilt = w * (a * v[0] - top).exp() / total;
            d1 += tilt * v[1];
            d2 += tilt * (v[2] + a * v[1] * v[1]);
        }
        [phi, d1, d2 - a * d1 * d1]
    }
}

/// One Cole-Hopf step evaluated at every grid node.
pub(crate) fn step_layer(
    source: &Layer,
    grid: &SpatialGrid,
    gh: &GaussHermite,
    a: f64,
    variance: f64,
    time: f64,
) -> Result<Layer> {
    if variance < 0.0 {
        return Err(Error::NegativeVariance(variance));
    }
    let n = grid.n_points();
    let dx = grid.dx();
    if variance == 0.0 {
        return Ok(Layer::new(time, source.phi.clone(), source.dphi.clone(), source.d2phi.clone(), dx));
    }
    let sigma = variance.sqrt();
    let shifts: Vec<Shift> = gh.nodes.iter().map(|&z| Shift::new(sigma * z, dx)).collect();
    let mut phi = vec![0.0; n];
    let mut dphi = vec![0.0; n];
    let mut d2phi = vec![0.0; n];
    let mut comb = Combiner::new(gh.len());
    for i in 0..n {
        comb.values.clear();
        comb.values.extend(shifts.iter().map(|s| source.sample_shifted(i, s, dx)));
        let [f, g, c] = comb.finish(&gh.weights, a);
        phi[i] = f;
        dphi[i] = g;
        d2phi[i] = c;
    }
    Ok(Layer::new(time, phi, dphi, d2phi, dx))
}

/// Gauss-Hermite only resolves features of the source down to a fraction of
/// the step width. The variance scale of a layer is read off its curvature:
/// a kink smoothed by variance w has peak |Phi_xx| = 2 phi(0) / sqrt(w).
pub fn effective_smoothing(layer: &Layer, dx: f64) -> f64 {
    let peak = layer.d2phi.iter().fold(0.0f64, |m, &c| m.max(c.abs()));
    let width = (2.0 * crate::special::norm_pdf(0.0) / peak).max(dx);
    width * width
}

/// Largest variance one Gauss-Hermite step may take from `layer`: a fraction of
/// its curvature scale, and small enough that the Cole-Hopf tilt a sigma stays
/// within the bulk of the rule.
pub fn max_piece(layer: &Layer, dx: f64, a: f64, ratio: f64) -> f64 {
    let smooth = ratio * effective_smoothing(layer, dx);
    if a > 0.0 {
        smooth.min(MAX_TILT / (a * a))
    } else {
        smooth
    }
}


/// A Cole-Hopf step cut into pieces no wider than `ratio` times the
/// curvature scale of the layer each piece starts from. Equal-gamma steps
/// compose exactly, so the split only removes quadrature error.
pub fn step_layer_refined(
    source: &Layer,
    grid: &SpatialGrid,
    gh: &GaussHermite,
    a: f64,
    variance: f64,
    ratio: f64,
) -> Result<Layer> {
    if variance < 0.0 {
        return Err(Error::NegativeVariance(variance));
    }
    let mut done = 0.0;
    let mut layer = source.clone();
    while variance - done > 1e-15 * variance {
        let piece = (variance - done).min(max_piece(&layer, grid.dx(), a, ratio));
        layer = step_layer(&layer, grid, gh, a, piece, source.time)?;
        done += piece;
    }
    Ok(layer)
}

pub(crate) fn step_point(
    source: &Layer,
    grid: &SpatialGrid,
    gh: &GaussHermite,
    a: f64,
    variance: f64,
    x: f64,
) -> Result<[f64; 3]> {
    if variance < 0.0 {
        return Err(Error::NegativeVariance(variance));
    }
    if variance == 0.0 {
        return Ok(source.sample(grid, x));
    }
    let sigma = variance.sqrt();
    let mut comb = Combiner::new(gh.len());
    comb.values.extend(gh.nodes.iter().map(|&z| source.sample(grid, x + sigma * z)));
    Ok(comb.finish(&gh.weights, a))
}

fn boundary_layer(grid: &SpatialGrid, a: f64, variance: f64, time: f64) -> Layer {
    let n = grid.n_points();
    let mut phi = vec![0.0; n];
    let mut dphi = vec![0.0; n];
    let mut d2phi = vec![0.0; n];
    for i in 0..n {
        let [f, g, c] = boundary_step(a, variance, grid.x(i));
        phi[i] = f;
        dphi[i] = g;
        d2phi[i] = c;
    }
    Layer::new(time, phi, dphi, d2phi, grid.dx())
}

/// Gridded Phi_gamma at the atom times, queryable at any (s, x).
#[derive(Debug, Clone)]
pub struct PDESolution {
    mixture: MixtureSpec,
    gamma: StepGamma,
    grid: SpatialGrid,
    gh: GaussHermite,
    /// ascending in time; the last layer is the s = 1 boundary |x|
    layers: Vec<Layer>,
}

/// Full solve: layers at every atom time, s = 0 and s = 1.
pub fn solve_parisi_pde(spec: &MixtureSpec, gamma: &StepGamma, grid: &SpatialGrid) -> Result<PDESolution> {
    PDESolution::solve(spec, gamma, grid, PdeOptions::default(), true)
}

impl PDESolution {
    /// With `origin_layer = false` the s = 0 layer is skipped; values at s = 0
    /// are then served by a point evaluation from the lowest atom layer.
    pub fn solve(
        spec: &MixtureSpec,
        gamma: &StepGamma,
        grid: &SpatialGrid,
        opts: PdeOptions,
        origin_layer: bool,
    ) -> Result<Self> {
        Self::solve_with_times(spec, gamma, grid, opts, origin_layer, &[])
    }

    /// As `solve`, with additional layer times inside the atom intervals.
    pub fn solve_with_times(
        spec: &MixtureSpec,
        gamma: &StepGamma,
        grid: &SpatialGrid,
        opts: PdeOptions,
        origin_layer: bool,
        extra_times: &[f64],
    ) -> Result<Self> {
        let gh = GaussHermite::cached(opts.gh_order);
        let n = grid.n_points();
        let nodes = grid.nodes();
        let top = Layer::new(
            1.0,
            nodes.iter().map(|x| x.abs()).collect(),
            nodes.iter().map(|&x| if x > 0.0 { 1.0 } else if x < 0.0 { -1.0 } else { 0.0 }).collect(),
            vec![0.0; n],
            grid.dx(),
        );
        let intervals = split_intervals(gamma, extra_times);
        let mut layers = vec![top];
        for (idx, &(lo, hi, a)) in intervals.iter().enumerate().rev() {
            let skip_origin = idx == 0 && !origin_layer;
            if hi == 1.0 {
                if !skip_origin {
                    layers.push(boundary_layer(grid, a, spec.xi_prime(1.0) - spec.xi_prime(lo), lo));
                }
                continue;
            }
            let v_lo = spec.xi_prime(lo);
            loop {
                let source = layers.last().expect("a layer above exists");
                let v_hi = spec.xi_prime(source.time);
                let piece = max_piece(source, grid.dx(), a, opts.substep_ratio);
                let mut time = lo;
                if piece < v_hi - v_lo {
                    let cut = spec.xi_prime_inverse(v_hi - piece);
                    if cut > lo && cut < source.time {
                        time = cut;
                    }
                }
                if time == lo && skip_origin {
                    break;
                }
                let layer = step_layer(source, grid, &gh, a, v_hi - spec.xi_prime(time), time)?;
                layers.push(layer);
                if time == lo {
                    break;
                }
            }
        }
        layers.reverse();
        Ok(PDESolution { mixture: spec.clone(), gamma: gamma.clone(), grid: *grid, gh, layers })
    }

    pub fn mixture(&self) -> &MixtureSpec {
        &self.mixture
    }

    pub fn gamma(&self) -> &StepGamma {
        &self.gamma
    }

    pub fn grid(&self) -> &SpatialGrid {
        &self.grid
    }

    pub fn layers(&self) -> &[Layer] {
        &self.layers
    }

    pub fn layer_at_time(&self, s: f64) -> Option<&Layer> {
        self.layers.iter().find(|l| l.time == s)
    }

    /// Largest |x| at which queries are trusted.
    pub fn trusted_half_width(&self) -> f64 {
        self.grid.half_width() - 3.0 * self.mixture.xi_prime(1.0).sqrt()
    }

    /// The stored-layer interval [lo, hi) containing s, with its gamma value.
    fn interval_of(&self, s: f64) -> (f64, f64, f64) {
        let above = self.layers.partition_point(|l| l.time <= s);
        let hi = self.layers[above.min(self.layers.len() - 1)].time;
        (s, hi, self.gamma.value_at(s))
    }

    /// (Phi, Phi_x, Phi_xx) at (s, x) without domain checks.
    pub fn eval_all(&self, s: f64, x: f64) -> Result<[f64; 3]> {
        if s >= 1.0 {
            return Ok(boundary_step(0.0, 0.0, x));
        }
        if let Some(layer) = self.layer_at_time(s) {
            return Ok(layer.sample(&self.grid, x));
        }
        let (_, hi, a) = self.interval_of(s);
        let variance = self.mixture.xi_prime(hi) - self.mixture.xi_prime(s);
        if hi == 1.0 {
            return Ok(boundary_step(a, variance, x));
        }
        let source = self.layer_at_time(hi).expect("atom layers are stored");
        step_point(source, &self.grid, &self.gh, a, variance, x)
    }

    /// The value (order 0) or a spatial derivative (order 1, 2) at (s, x).
    pub fn eval(&self, s: f64, x: f64, order: u8) -> Result<f64> {
        if !(0.0..=1.0).contains(&s) {
            return Err(Error::Domain(format!("time {s} outside [0, 1]")));
        }
        if x.abs() > self.trusted_half_width() {
            return Err(Error::Domain(format!(
                "|x| = {} beyond the trusted half width {}",
                x.abs(),
                self.trusted_half_width()
            )));
        }
        if order > 2 {
            return Err(Error::Domain(format!("derivative order {order} not available")));
        }
        if order == 2 && s > 1.0 - EPS_BOUNDARY {
            return Err(Error::Domain(format!("second derivative requested at s = {s} too close to 1")));
        }
        Ok(self.eval_all(s, x)?[order as usize])
    }

    /// Phi(s, .) and its derivatives on the whole grid.
    pub fn layer_at(&self, s: f64) -> Result<Layer> {
        if let Some(layer) = self.layer_at_time(s) {
            return Ok(layer.clone());
        }
        let (_, hi, a) = self.interval_of(s);
        let variance = self.mixture.xi_prime(hi) - self.mixture.xi_prime(s);
        if hi == 1.0 {
            return Ok(boundary_layer(&self.grid, a, variance, s));
        }
        let source = self.layer_at_time(hi).expect("atom layers are stored");
        step_layer(source, &self.grid, &self.gh, a, variance, s)
    }

    /// Writes every layer as rows of (version, time, x, phi, dphi, d2phi).
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["version", "time", "x", "phi", "dphi", "d2phi"])?;
        for layer in &self.layers {
            for i in 0..self.grid.n_points() {
                w.write_record(&[
                    LAYER_DUMP_VERSION.to_string(),
                    format!("{:.16e}", layer.time),
                    format!("{:.16e}", self.grid.x(i)),
                    format!("{:.16e}", layer.phi[i]),
                    format!("{:.16e}", layer.dphi[i]),
                    format!("{:.16e}", layer.d2phi[i]),
                ])?;
            }
        }
        w.flush()?;
        Ok(())
    }
}

/// Gamma's constancy intervals, further cut at the given times.
pub(crate) fn split_intervals(gamma: &StepGamma, cuts: &[f64]) -> Vec<(f64, f64, f64)> {
    let mut out = gamma.intervals();
    for &c in cuts {
        if let Some(pos) = out.iter().position(|&(lo, hi, _)| c > lo && c < hi) {
            let (lo, hi, a) = out[pos];
            out[pos] = (lo, c, a);
            out.insert(pos + 1, (c, hi, a));
        }
    }
    out
}

/// Phi_gamma(0, h) with the default grid, skipping the s = 0 layer.
pub fn phi_at_origin(spec: &MixtureSpec, gamma: &StepGamma, h: f64) -> Result<f64> {
    let grid = SpatialGrid::default_for(spec, h);
    let sol = PDESolution::solve(spec, gamma, &grid, PdeOptions::default(), false)?;
    Ok(sol.eval_all(0.0, h)?[0])
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sk() -> MixtureSpec {
        MixtureSpec::sk()
    }

    #[test]
    fn heat_values() {
        let [f, g, c] = heat_closed_form(&sk(), 0.0, 0.0);
        assert!((f - SQRT_2_OVER_PI).abs() < 1e-15 && g == 0.0);
        assert!((c - SQRT_2_OVER_PI).abs() < 1e-15);
        // mpmath: sqrt(2/pi) e^{-2} + 2 erf(sqrt 2)
        let [f, _, _] = heat_closed_form(&sk(), 2.0, 0.0);
        assert!((f - 2.016_981_405_233_659_3).abs() < 1e-14);
    }

    #[test]
    fn boundary_step_limits() {
        // small a agrees with the heat formula
        let lin = boundary_step(0.0, 0.7, 0.4);
        let tiny = boundary_step(1e-7, 0.7, 0.4);
        for k in 0..3 {
            assert!((lin[k] - tiny[k]).abs() < 1e-6);
        }
        // large a: finite and derivative bounded
        let big = boundary_step(200.0, 1.0, 3.0);
        assert!(big.iter().all(|v| v.is_finite()) && big[1].abs() <= 1.0);
        assert!((big[0] - (3.0 + 100.0)).abs() < 1e-6);
    }

    #[test]
    fn boundary_step_matches_quadrature() {
        // Legendre panels split at the kink of |x + s z|
        let gl = crate::quadrature::GaussLegendre::new(64);
        for &(a, v, x) in &[(1.0f64, 0.5f64, 0.3f64), (3.0, 0.2, -1.0), (0.5, 1.0, 0.0)] {
            let s = v.sqrt();
            let kink = -x / s;
            let f = |z: f64| (a * (x + s * z).abs()).exp() * norm_pdf(z);
            let mass = gl.integrate(kink - 40.0, kink, f) + gl.integrate(kink, kink + 40.0, f);
            assert!((boundary_step(a, v, x)[0] - mass.ln() / a).abs() < 1e-12);
        }
    }

    #[test]
    fn zero_gamma_matches_heat() {
        let grid = SpatialGrid::default_for(&sk(), 0.0);
        let sol = solve_parisi_pde(&sk(), &StepGamma::zero(), &grid).unwrap();
        let v = sol.eval(0.0, 0.0, 0).unwrap();
        assert!((v - SQRT_2_OVER_PI).abs() < 1e-6);
        let d = sol.eval(0.0, 1.0, 1).unwrap();
        assert!((d - 0.682_689_492_137_085_9).abs() < 1e-6);
        assert!(sol.eval(0.0, 0.0, 1).unwrap().abs() < 1e-15);
        assert!((sol.eval(0.0, 0.0, 2).unwrap() - SQRT_2_OVER_PI).abs() < 1e-4);
        assert!(sol.eval(0.9995, 0.0, 2).is_err());
        assert!(sol.eval(0.5, 20.0, 0).is_err());
    }

    #[test]
    fn two_atom_oracle() {
        let gamma = StepGamma::new(vec![(0.0, 0.0), (0.5, 2.0)]).unwrap();
        let grid = SpatialGrid::default_for(&sk(), 0.0);
        let sol = solve_parisi_pde(&sk(), &gamma, &grid).unwrap();
        let v = sol.eval(0.0, 0.0, 0).unwrap();
        assert!((v - 1.145_156_077_045_647_2).abs() < 1e-5, "{v}");
        let fast = phi_at_origin(&sk(), &gamma, 0.0).unwrap();
        assert!((v - fast).abs() < 1e-9);
    }

    #[test]
    fn boundary_layer_is_abs() {
        let gamma = StepGamma::new(vec![(0.0, 0.5), (0.3, 2.0)]).unwrap();
        let grid = SpatialGrid::new(5.0, 201).unwrap();
        let sol = solve_parisi_pde(&sk(), &gamma, &grid).unwrap();
        let top = sol.layers().last().unwrap();
        assert_eq!(top.time, 1.0);
        for i in 0..grid.n_points() {
            assert_eq!(top.phi[i], grid.x(i).abs());
        }
        let times: Vec<f64> = sol.layers().iter().map(|l| l.time).collect();
        assert_eq!(times, vec![0.0, 0.3, 1.0]);
    }

    #[test]
    fn csv_dump_has_all_rows() {
        let grid = SpatialGrid::new(5.0, 21).unwrap();
        let sol = solve_parisi_pde(&sk(), &StepGamma::zero(), &grid).unwrap();
        let mut buf = Vec::new();
        sol.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text.lines().count(), 1 + 2 * 21);
    }
}
