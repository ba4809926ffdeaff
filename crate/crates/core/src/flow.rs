//! Forward law of the optimal diffusion dX = gamma xi'' Phi_x(s, X) ds + sqrt(xi'') dW, X(0) = h,
//! and the moment functionals built on it.
//!
//! The law is carried as masses on the PDE grid. Each substep is Strang split:
//! half a diffusion, transport along the drift field frozen at the substep midpoint
//! (midpoint rule on the characteristic), half a diffusion.
//! Substeps are uniform in the variance clock v = xi'(s).

use std::collections::HashMap;
use std::io::Write;

use crate::error::{Error, Result};
use crate::gamma::StepGamma;
use crate::grid::{Layer, SpatialGrid};
use crate::pde::{PDESolution, PdeOptions, EPS_BOUNDARY};
use crate::quadrature::GaussLegendre;
use crate::rng;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FlowOptions {
    pub min_substeps: usize,
    /// largest variance increment of a substep
    pub max_substep_variance: f64,
    /// extra refinement factor on the substep count
    pub refine: usize,
    /// fractional-offset resolution of the diffusion kernels
    pub kernel_bins: usize,
    pub leak_tolerance: f64,
    /// Gauss-Legendre nodes per segment in the directional derivative
    pub derivative_nodes: usize,
}

impl Default for FlowOptions {
    fn default() -> Self {
        FlowOptions {
            min_substeps: 32,
            max_substep_variance: 0.005,
            refine: 1,
            kernel_bins: 64,
            leak_tolerance: 1e-6,
            derivative_nodes: 6,
        }
    }
}

/// Probability masses of X(s) on the grid nodes.
#[derive(Debug, Clone, PartialEq)]
pub struct LawOnGrid {
    pub time: f64,
    pub grid: SpatialGrid,
    pub masses: Vec<f64>,
}

impl LawOnGrid {
    pub fn point_mass(grid: SpatialGrid, x: f64) -> Self {
        let mut masses = vec![0.0; grid.n_points()];
        let pos = grid.position(x);
        let k = (pos.floor() as usize).min(grid.n_points() - 2);
        let frac = pos - k as f64;
        masses[k] = 1.0 - frac;
        masses[k + 1] += frac;
        LawOnGrid { time: 0.0, grid, masses }
    }

    pub fn total(&self) -> f64 {
        self.masses.iter().sum()
    }

    pub fn expect(&self, f: impl Fn(usize, f64) -> f64) -> f64 {
        self.masses
            .iter()
            .enumerate()
            .filter(|(_, &m)| m != 0.0)
            .map(|(i, &m)| m * f(i, self.grid.x(i)))
            .sum()
    }

    pub fn mean(&self) -> f64 {
        self.expect(|_, x| x) / self.total()
    }

    pub fn variance(&self) -> f64 {
        let mean = self.mean();
        self.expect(|_, x| (x - mean).powi(2)) / self.total()
    }

    /// Rows of (x, mass).
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["x", "mass"])?;
        for (i, m) in self.masses.iter().enumerate() {
            w.write_record(&[format!("{:.17e}", self.grid.x(i)), format!("{:.17e}", m)])?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Discrete Gaussian kernels for a fixed variance, tabulated per fractional offset.
struct Diffuser {
    kernels: Vec<Vec<f64>>,
    radius: isize,
    bins: usize,
    /// variance in squared node units
    nodes_variance: f64,
}

impl Diffuser {
    fn new(variance: f64, dx: f64, bins: usize) -> Self {
        let sigma = variance.sqrt();
        let nodes_variance = variance / (dx * dx);
        if sigma < dx {
            return Diffuser { kernels: Vec::new(), radius: 0, bins, nodes_variance };
        }
        let radius = (9.0 * sigma / dx).ceil() as isize + 1;
        let kernels = (0..=bins)
            .map(|b| {
                let f = b as f64 / bins as f64;
                let mut k: Vec<f64> = (-radius..=radius + 1)
                    .map(|j| (-((j as f64 - f) * dx).powi(2) / (2.0 * variance)).exp())
                    .collect();
                let total: f64 = k.iter().sum();
                k.iter_mut().for_each(|v| *v /= total);
                k
            })
            .collect();
        Diffuser { kernels, radius, bins, nodes_variance }
    }

    /// Adds the diffused image of `mass` sitting at fractional node `pos`; returns leaked mass.
    #[inline]
    fn spread(&self, pos: f64, mass: f64, out: &mut [f64]) -> f64 {
        let n = out.len() as isize;
        let base = pos.floor();
        let frac = pos - base;
        let base = base as isize;
        let mut leaked = 0.0;
        if self.kernels.is_empty() {
            // below grid resolution: a linear split keeps the mean exact and
            // carries variance frac (1 - frac); any remaining variance goes to
            // a symmetric three-point spread around both nodes
            let p = 0.5 * (self.nodes_variance - frac * (1.0 - frac)).max(0.0);
            for (idx, m) in [(base, mass * (1.0 - frac)), (base + 1, mass * frac)] {
                for (j, share) in [(idx - 1, p), (idx, 1.0 - 2.0 * p), (idx + 1, p)] {
                    if j >= 0 && j < n {
                        out[j as usize] += m * share;
                    } else {
                        leaked += m * share;
                    }
                }
            }
            return leaked;
        }
        let t = frac * self.bins as f64;
        let b = (t as usize).min(self.bins - 1);
        let w = t - b as f64;
        let (lo_k, hi_k) = (&self.kernels[b], &self.kernels[b + 1]);
        let start = base - self.radius;
        let first = (-start).max(0) as usize;
        let last = ((n - start) as usize).min(lo_k.len());
        if first > 0 || last < lo_k.len() {
            for j in (0..first).chain(last..lo_k.len()) {
                leaked += mass * ((1.0 - w) * lo_k[j] + w * hi_k[j]);
            }
        }
        if first < last {
            let dst = &mut out[(start + first as isize) as usize..(start + last as isize) as usize];
            let (ml, mh) = (mass * (1.0 - w), mass * w);
            for ((d, &kl), &kh) in dst.iter_mut().zip(&lo_k[first..last]).zip(&hi_k[first..last]) {
                *d += ml * kl + mh * kh;
            }
        }
        leaked
    }
}

/// Substep boundaries on [0, end]: uniform in xi' inside each atom interval,
/// with every requested time inserted. Half-steps are kept at least one node
/// wide where the interval allows it, so the Gaussian kernels stay resolved.
pub fn schedule(sol: &PDESolution, end: f64, extra: &[f64], opts: &FlowOptions) -> Vec<f64> {
    let spec = sol.mixture();
    let mut cuts = vec![0.0];
    for (lo, hi, _) in sol.gamma().intervals() {
        if lo >= end {
            break;
        }
        let (v_lo, v_hi) = (spec.xi_prime(lo), spec.xi_prime(hi));
        let dx = sol.grid().dx();
        let resolved = ((v_hi - v_lo) / (2.0 * dx * dx)).floor().max(1.0) as usize;
        let wanted = opts.min_substeps.max(((v_hi - v_lo) / opts.max_substep_variance).ceil() as usize) * opts.refine;
        let count = wanted.min(resolved);
        for k in 1..=count {
            let s = if k == count { hi } else { spec.xi_prime_inverse(v_lo + (v_hi - v_lo) * k as f64 / count as f64) };
            if s >= end {
                break;
            }
            cuts.push(s);
        }
        cuts.push(lo);
    }
    cuts.push(end);
    cuts.extend(extra.iter().copied().filter(|&t| t <= end));
    cuts.sort_by(f64::total_cmp);
    cuts.dedup_by(|b, a| *b - *a < 1e-13);
    cuts
}

fn check_times(sol: &PDESolution, h: f64, times: &[f64]) -> Result<()> {
    if times.windows(2).any(|w| w[1] < w[0]) {
        return Err(Error::Domain("propagation times must be sorted".into()));
    }
    if let Some(&t) = times.iter().find(|&&t| !(0.0..=1.0 - EPS_BOUNDARY).contains(&t)) {
        return Err(Error::Domain(format!("propagation time {t} outside [0, 1 - eps]")));
    }
    if h.abs() > sol.trusted_half_width() {
        return Err(Error::Domain(format!("start point {h} outside the trusted region")));
    }
    Ok(())
}

pub fn propagate_law(sol: &PDESolution, h: f64, times: &[f64]) -> Result<Vec<LawOnGrid>> {
    propagate_law_with(sol, h, times, &FlowOptions::default())
}

pub fn propagate_law_with(sol: &PDESolution, h: f64, times: &[f64], opts: &FlowOptions) -> Result<Vec<LawOnGrid>> {
    check_times(sol, h, times)?;
    let grid = *sol.grid();
    let dx = grid.dx();
    let spec = sol.mixture();
    let end = times.last().copied().unwrap_or(0.0);
    let cuts = schedule(sol, end, times, opts);

    let mut law = LawOnGrid::point_mass(grid, h);
    let mut out = Vec::with_capacity(times.len());
    let mut pending = times.iter().peekable();
    while pending.next_if(|&&t| t <= 0.0).is_some() {
        out.push(law.clone());
    }
    let mut diffusers: HashMap<u64, Diffuser> = HashMap::new();
    let mut leaked = 0.0;
    let mut scratch = vec![0.0; grid.n_points()];
    for w in cuts.windows(2) {
        let (w0, w1) = (w[0], w[1]);
        let dv = spec.xi_prime(w1) - spec.xi_prime(w0);
        if dv > 0.0 {
            let a = sol.gamma().value_at(w0);
            let key = (0.5 * dv * 1e13).round() as u64;
            let half = diffusers.entry(key).or_insert_with(|| Diffuser::new(0.5 * dv, dx, opts.kernel_bins));
            scratch.iter_mut().for_each(|v| *v = 0.0);
            for (i, &m) in law.masses.iter().enumerate() {
                if m > 1e-300 {
                    leaked += half.spread(i as f64, m, &mut scratch);
                }
            }
            let drift = if a > 0.0 {
                let mid = spec.xi_prime_inverse(0.5 * (spec.xi_prime(w0) + spec.xi_prime(w1)));
                Some(sol.layer_at(mid)?)
            } else {
                None
            };
            law.masses.iter_mut().for_each(|v| *v = 0.0);
            for (i, &m) in scratch.iter().enumerate() {
                if m > 1e-300 {
                    // midpoint rule along the characteristic of the frozen drift field
                    let shift = drift.as_ref().map_or(0.0, |d| {
                        let halfway = grid.x(i) + 0.5 * a * dv * d.dphi[i];
                        a * dv * d.sample(&grid, halfway)[1] / dx
                    });
                    leaked += half.spread(i as f64 + shift, m, &mut law.masses);
                }
            }
            if leaked > opts.leak_tolerance {
                return Err(Error::MassLeak(leaked));
            }
        }
        law.time = w1;
        while pending.next_if(|&&t| t <= w1 + 1e-13).is_some() {
            out.push(law.clone());
        }
    }
    Ok(out)
}

/// E (Phi_x(s, X(s)))^2 for the law's time s.
pub fn moment_u_squared(sol: &PDESolution, law: &LawOnGrid) -> Result<f64> {
    let layer = sol.layer_at(law.time)?;
    Ok(law.expect(|i, _| layer.dphi[i].powi(2)))
}

/// xi''(s) E (Phi_xx(s, X(s)))^2.
pub fn moment_uxx_bound(sol: &PDESolution, law: &LawOnGrid) -> Result<f64> {
    if law.time > 1.0 - EPS_BOUNDARY {
        return Err(Error::Domain(format!("second derivative moment at s = {} too close to 1", law.time)));
    }
    let layer = sol.layer_at(law.time)?;
    Ok(sol.mixture().xi_double_prime(law.time) * law.expect(|i, _| layer.d2phi[i].powi(2)))
}

/// E u, E u^2 and xi'' E (Phi_xx)^2 at one time.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UMoments {
    pub time: f64,
    pub u_mean: f64,
    pub u_squared: f64,
    pub uxx_bound: f64,
}

pub fn u_moments(sol: &PDESolution, h: f64, times: &[f64], opts: &FlowOptions) -> Result<Vec<UMoments>> {
    let laws = propagate_law_with(sol, h, times, opts)?;
    laws.iter()
        .map(|law| {
            let layer = sol.layer_at(law.time)?;
            Ok(UMoments {
                time: law.time,
                u_mean: law.expect(|i, _| layer.dphi[i]),
                u_squared: law.expect(|i, _| layer.dphi[i].powi(2)),
                uxx_bound: sol.mixture().xi_double_prime(law.time) * law.expect(|i, _| layer.d2phi[i].powi(2)),
            })
        })
        .collect()
}

/// Derivatives of the Parisi functional at sol's gamma in the directions of each probe:
/// (1/2) int xi'' (probe - gamma) (E u^2 - s) ds.
pub fn directional_derivatives(sol: &PDESolution, h: f64, probes: &[StepGamma], opts: &FlowOptions) -> Result<Vec<f64>> {
    let base = sol.gamma();
    let spec = sol.mixture();
    let end = 1.0 - EPS_BOUNDARY;
    let mut cuts: Vec<f64> = vec![0.0, end];
    for g in probes.iter().chain(std::iter::once(base)) {
        cuts.extend(g.breakpoints().into_iter().filter(|&q| q < end));
    }
    cuts.sort_by(f64::total_cmp);
    cuts.dedup_by(|b, a| *b - *a < 1e-12);

    let gl = GaussLegendre::new(opts.derivative_nodes);
    let mut nodes: Vec<(f64, f64)> = Vec::new();
    for w in cuts.windows(2) {
        nodes.extend(gl.on(w[0], w[1]));
    }
    // the tail [end, 1) by a trapezoid whose right end vanishes (E u(1)^2 = 1)
    nodes.push((end, 0.5 * EPS_BOUNDARY));
    let mut times: Vec<f64> = nodes.iter().map(|&(s, _)| s).collect();
    times.sort_by(f64::total_cmp);
    times.dedup();
    let moments = u_moments(sol, h, &times, opts)?;
    let gap = |s: f64| {
        let idx = times.partition_point(|&t| t < s);
        moments[idx].u_squared - s
    };
    Ok(probes
        .iter()
        .map(|probe| {
            nodes
                .iter()
                .map(|&(s, w)| w * 0.5 * spec.xi_double_prime(s) * (probe.value_at(s) - base.value_at(s)) * gap(s))
                .sum()
        })
        .collect())
}

/// Single-direction convenience with the default grid.
pub fn directional_derivative(
    spec: &crate::mixture::MixtureSpec,
    h: f64,
    gamma0: &StepGamma,
    gamma1: &StepGamma,
) -> Result<f64> {
    let grid = SpatialGrid::default_for(spec, h);
    let sol = PDESolution::solve(spec, gamma0, &grid, PdeOptions::default(), false)?;
    Ok(directional_derivatives(&sol, h, std::slice::from_ref(gamma1), &FlowOptions::default())?[0])
}

/// Sample moments of an Euler-Maruyama (Heun) simulation, with standard errors.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct McMoments {
    pub time: f64,
    pub mean: f64,
    pub mean_se: f64,
    pub variance: f64,
    pub variance_se: f64,
    pub u_squared: f64,
    pub u_squared_se: f64,
}

fn slope_at(layer: &Layer, grid: &SpatialGrid, x: f64) -> f64 {
    layer.sample(grid, x)[1]
}

/// Monte Carlo cross-check of `propagate_law`, seeded and reproducible.
pub fn euler_maruyama_moments(
    sol: &PDESolution,
    h: f64,
    times: &[f64],
    paths: usize,
    seed: u64,
    opts: &FlowOptions,
) -> Result<Vec<McMoments>> {
    check_times(sol, h, times)?;
    let spec = sol.mixture();
    let grid = sol.grid();
    let end = times.last().copied().unwrap_or(0.0);
    let cuts = schedule(sol, end, times, opts);
    let mut xs = vec![h; paths];
    let mut out = Vec::new();
    let mut pending = times.iter().peekable();
    let summarize = |xs: &[f64], time: f64| -> Result<McMoments> {
        let layer = sol.layer_at(time)?;
        let n = xs.len() as f64;
        let mean = xs.iter().sum::<f64>() / n;
        let m2 = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n;
        let m4 = xs.iter().map(|x| (x - mean).powi(4)).sum::<f64>() / n;
        let us: Vec<f64> = xs.iter().map(|&x| slope_at(&layer, grid, x).powi(2)).collect();
        let u_mean = us.iter().sum::<f64>() / n;
        let u_var = us.iter().map(|u| (u - u_mean).powi(2)).sum::<f64>() / n;
        Ok(McMoments {
            time,
            mean,
            mean_se: (m2 / n).sqrt(),
            variance: m2,
            variance_se: ((m4 - m2 * m2) / n).sqrt(),
            u_squared: u_mean,
            u_squared_se: (u_var / n).sqrt(),
        })
    };
    while pending.next_if(|&&t| t <= 0.0).is_some() {
        out.push(summarize(&xs, 0.0)?);
    }
    let mut current = sol.layer_at(0.0)?;
    for (step, w) in cuts.windows(2).enumerate() {
        let (w0, w1) = (w[0], w[1]);
        let dv = spec.xi_prime(w1) - spec.xi_prime(w0);
        let next = sol.layer_at(w1)?;
        if dv > 0.0 {
            let a = sol.gamma().value_at(w0);
            let sd = dv.sqrt();
            for (p, x) in xs.iter_mut().enumerate() {
                let noise = sd * rng::normal(seed, step as u64, p as u64);
                let b0 = a * slope_at(&current, grid, *x);
                let guess = *x + b0 * dv + noise;
                let b1 = a * slope_at(&next, grid, guess);
                *x += 0.5 * (b0 + b1) * dv + noise;
            }
        }
        current = next;
        while pending.next_if(|&&t| t <= w1 + 1e-13).is_some() {
            out.push(summarize(&xs, w1)?);
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mixture::MixtureSpec;
    use crate::pde::heat_closed_form;

    fn zero_solution(h: f64) -> PDESolution {
        let sk = MixtureSpec::sk();
        let grid = SpatialGrid::default_for(&sk, h);
        PDESolution::solve(&sk, &StepGamma::zero(), &grid, PdeOptions::default(), true).unwrap()
    }

    #[test]
    fn zero_gamma_is_brownian() {
        let sol = zero_solution(0.3);
        let laws = propagate_law(&sol, 0.3, &[0.0, 0.2, 0.5, 0.9]).unwrap();
        assert_eq!(laws[0].masses.iter().filter(|&&m| m > 0.0).count(), 2);
        for law in &laws {
            assert!((law.total() - 1.0).abs() < 1e-9);
            assert!((law.mean() - 0.3).abs() < 1e-8);
            assert!((law.variance() - law.time).abs() < 1e-4, "{} {}", law.time, law.variance());
        }
    }

    #[test]
    fn zero_gamma_u_squared_matches_quadrature() {
        // E u(s)^2 = E erf(sqrt(s) Z / sqrt(2 (1 - s)))^2 at h = 0
        let sol = zero_solution(0.0);
        let gl = GaussLegendre::new(200);
        let moments = u_moments(&sol, 0.0, &[0.0, 0.3, 0.6], &FlowOptions::default()).unwrap();
        assert!(moments[0].u_squared.abs() < 1e-20);
        assert!((moments[0].uxx_bound - 2.0 / std::f64::consts::PI).abs() < 1e-6);
        for m in &moments[1..] {
            let s = m.time;
            let oracle = gl.integrate(-12.0, 12.0, |z| {
                crate::special::norm_pdf(z) * heat_closed_form(sol.mixture(), s.sqrt() * z, s)[1].powi(2)
            });
            assert!((m.u_squared - oracle).abs() < 1e-5, "{s}: {} vs {oracle}", m.u_squared);
            // derivative identity d/ds E u^2 = (2/pi)/sqrt(1 - s^2) at h = 0, integrated from 0
            let integrated = gl.integrate(0.0, s, |r| 2.0 / std::f64::consts::PI / (1.0 - r * r).sqrt());
            assert!((m.u_squared - integrated).abs() < 1e-5);
        }
    }

    #[test]
    fn leak_is_reported() {
        let sk = MixtureSpec::sk();
        let grid = SpatialGrid::new(4.0, 401).unwrap();
        let sol = PDESolution::solve(&sk, &StepGamma::zero(), &grid, PdeOptions::default(), true).unwrap();
        assert!(matches!(propagate_law(&sol, 0.0, &[0.9]), Err(Error::MassLeak(_))));
        assert!(propagate_law(&sol, 0.0, &[0.995]).is_err());
    }

    #[test]
    fn diffuser_exact_mean_and_variance() {
        let dx = 0.01;
        let d = Diffuser::new(0.0025, dx, 64);
        let mut out = vec![0.0; 401];
        let leak = d.spread(200.37, 1.0, &mut out);
        assert!(leak < 1e-15);
        let mean: f64 = out.iter().enumerate().map(|(i, m)| i as f64 * m).sum();
        let var: f64 = out.iter().enumerate().map(|(i, m)| (i as f64 - mean).powi(2) * m).sum::<f64>() * dx * dx;
        assert!((mean - 200.37).abs() < 1e-9);
        assert!((var - 0.0025).abs() < 1e-6);
    }
}
