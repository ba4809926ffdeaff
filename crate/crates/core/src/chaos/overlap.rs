//! The overlap map psi_t and its fixed point q_{t,h}.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gamma::StepGamma;
use crate::grid::{Layer, SpatialGrid};
use crate::mixture::MixtureSpec;
use crate::parisi_opt::{FunctionalEvaluator, ParisiResult};
use crate::pde::{effective_smoothing, step_layer_refined, PdeOptions};
use crate::quadrature::GaussHermite;
use crate::special::norm_pdf;

pub const FIXED_POINT_TOL: f64 = 1e-8;
pub const FIXED_POINT_MAX_ITER: usize = 10_000;

/// psi_t(s) = E[u(h + chi_1) u(h + chi_2)] where u = Phi_x(q_h, .) and the
/// pair is centred Gaussian with variances xi'(q_h) and covariance t xi'(s).
///
/// Below q_h gamma vanishes, so splitting chi_j = +-sqrt|c| Y + independent
/// noise reduces the double integral to a heat smoothing of u followed by a
/// single Gaussian average.
#[derive(Debug, Clone)]
pub struct OverlapMap {
    spec: MixtureSpec,
    h: f64,
    q_h: f64,
    grid: SpatialGrid,
    base: Layer,
    gh: GaussHermite,
    pde: PdeOptions,
}

impl OverlapMap {
    pub fn new(spec: &MixtureSpec, h: f64, result: &ParisiResult) -> Result<Self> {
        Self::from_gamma(spec, h, &result.gamma_h, result.q_h)
    }

    /// Built from any gamma that vanishes below `q_h`.
    pub fn from_gamma(spec: &MixtureSpec, h: f64, gamma: &StepGamma, q_h: f64) -> Result<Self> {
        if q_h > 0.0 && gamma.value_at(0.5 * q_h) > 0.0 {
            return Err(Error::InvalidGamma(format!("gamma must vanish below q_h = {q_h}")));
        }
        let eval = FunctionalEvaluator::with_defaults(spec, h);
        let sol = eval.solution(gamma)?;
        let base = sol.layer_at(q_h)?;
        let pde = PdeOptions::default();
        Ok(OverlapMap {
            spec: spec.clone(),
            h,
            q_h,
            grid: *eval.grid(),
            base,
            gh: GaussHermite::cached(pde.gh_order),
            pde,
        })
    }

    pub fn q_h(&self) -> f64 {
        self.q_h
    }

    pub fn h(&self) -> f64 {
        self.h
    }

    pub fn psi(&self, t: f64, s: f64) -> Result<f64> {
        if !(0.0..=1.0).contains(&t) {
            return Err(Error::Domain(format!("coupling t = {t} outside [0, 1]")));
        }
        if s.abs() > self.q_h + 1e-12 {
            return Err(Error::Domain(format!("|s| = {} exceeds q_h = {}", s.abs(), self.q_h)));
        }
        self.at_covariance(t * self.spec.xi_prime(s.clamp(-self.q_h, self.q_h)))
    }

    /// The map as a function of the cross covariance c = t xi'(s).
    pub fn at_covariance(&self, c: f64) -> Result<f64> {
        let total = self.spec.xi_prime(self.q_h);
        let spread = c.abs().min(total);
        let smooth = if total - spread > 0.0 {
            step_layer_refined(&self.base, &self.grid, &self.gh, 0.0, total - spread, self.pde.substep_ratio)?
        } else {
            self.base.clone()
        };
        let u = |x: f64| smooth.sample(&self.grid, x)[1];
        let h = self.h;
        let mirror = c < 0.0;
        let product = |y: f64| if mirror { u(h + y) * u(h - y) } else { u(h + y).powi(2) };
        if spread == 0.0 {
            return Ok(product(0.0));
        }
        let sigma = spread.sqrt();
        if spread <= self.pde.substep_ratio * effective_smoothing(&smooth, self.grid.dx()) {
            return Ok(self.gh.expect(|z| product(sigma * z)));
        }
        // too wide for Gauss-Hermite against the sharp profile: grid trapezoid
        let mut num = 0.0;
        let mut den = 0.0;
        for i in 0..self.grid.n_points() {
            let y = self.grid.x(i) - h;
            let w = norm_pdf(y / sigma);
            if w == 0.0 {
                continue;
            }
            num += w * if mirror { smooth.dphi[i] * u(h - y) } else { smooth.dphi[i].powi(2) };
            den += w;
        }
        Ok(num / den)
    }
}

pub fn psi_t_eval(spec: &MixtureSpec, h: f64, result: &ParisiResult, t: f64, s: f64) -> Result<f64> {
    OverlapMap::new(spec, h, result)?.psi(t, s)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FixedPoint {
    pub t: f64,
    pub q_th: f64,
    pub iterations: usize,
    /// independent root of psi_t(s) - s by bisection
    pub bisection: f64,
}

/// Fixed point of psi_t by Aitken-accelerated iteration from q_h / 2,
/// cross-checked by bisection on psi_t(s) - s over [0, q_h].
pub fn solve_fixed_point(map: &OverlapMap, t: f64) -> Result<FixedPoint> {
    let q_h = map.q_h();
    if q_h == 0.0 {
        return Ok(FixedPoint { t, q_th: 0.0, iterations: 0, bisection: 0.0 });
    }
    let psi = |s: f64| map.psi(t, s.clamp(0.0, q_h));
    let mut s = 0.5 * q_h;
    let mut iterations = 0;
    let mut trace = Vec::new();
    let q_th = loop {
        if iterations >= FIXED_POINT_MAX_ITER {
            return Err(Error::NonConvergence {
                iterations,
                detail: format!("fixed point at t = {t}: last iterates {:?}", &trace[trace.len().saturating_sub(5)..]),
            });
        }
        let s1 = psi(s)?.clamp(0.0, q_h);
        iterations += 1;
        trace.push(s1);
        if (s1 - s).abs() < FIXED_POINT_TOL {
            break s1;
        }
        let s2 = psi(s1)?.clamp(0.0, q_h);
        iterations += 1;
        trace.push(s2);
        if (s2 - s1).abs() < FIXED_POINT_TOL {
            break s2;
        }
        let curvature = s2 - 2.0 * s1 + s;
        let jump = if curvature.abs() > 1e-300 { s - (s1 - s).powi(2) / curvature } else { s2 };
        s = if jump.is_finite() && (0.0..=q_h).contains(&jump) { jump } else { s2 };
    };
    let bisection = bisect(|s| Ok(psi(s)? - s), 0.0, q_h)?;
    Ok(FixedPoint { t, q_th, iterations, bisection })
}

fn bisect(f: impl Fn(f64) -> Result<f64>, mut lo: f64, mut hi: f64) -> Result<f64> {
    let f_lo = f(lo)?;
    let f_hi = f(hi)?;
    if f_lo <= 0.0 {
        return Ok(lo);
    }
    if f_hi >= 0.0 {
        return Ok(hi);
    }
    for _ in 0..200 {
        if hi - lo <= FIXED_POINT_TOL * 0.1 {
            break;
        }
        let mid = 0.5 * (lo + hi);
        if f(mid)? > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

pub fn solve_q_th(spec: &MixtureSpec, h: f64, result: &ParisiResult, t: f64) -> Result<f64> {
    Ok(solve_fixed_point(&OverlapMap::new(spec, h, result)?, t)?.q_th)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChaosCurve {
    pub h: f64,
    pub q_h: f64,
    pub points: Vec<FixedPoint>,
}

impl ChaosCurve {
    pub fn compute(map: &OverlapMap, ts: &[f64]) -> Result<Self> {
        let points = ts.iter().map(|&t| solve_fixed_point(map, t)).collect::<Result<Vec<_>>>()?;
        Ok(ChaosCurve { h: map.h(), q_h: map.q_h(), points })
    }

    pub fn max_jump(&self) -> f64 {
        self.points.windows(2).map(|w| (w[1].q_th - w[0].q_th).abs()).fold(0.0, f64::max)
    }

    /// Trapezoid rule for the integral of xi(q_{t,h}) over the sampled t's.
    pub fn integrate_xi(&self, spec: &MixtureSpec) -> f64 {
        self.points
            .windows(2)
            .map(|w| 0.5 * (w[1].t - w[0].t) * (spec.xi(w[0].q_th) + spec.xi(w[1].q_th)))
            .sum()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    // two-step minimizer for SK at h = 1
    fn map(h: f64) -> OverlapMap {
        let gamma = StepGamma::new(vec![(0.0, 0.0), (0.866241, 2.440026), (0.976744, 7.089003)]).unwrap();
        OverlapMap::from_gamma(&MixtureSpec::sk(), h, &gamma, 0.866241).unwrap()
    }

    #[test]
    fn no_field_gives_zero_overlap() {
        let gamma = StepGamma::new(vec![(0.0, 0.4), (0.5, 1.2)]).unwrap();
        let map = OverlapMap::from_gamma(&MixtureSpec::sk(), 0.0, &gamma, 0.0).unwrap();
        assert!(map.psi(0.7, 0.0).unwrap().abs() < 1e-14);
        assert_eq!(solve_fixed_point(&map, 0.7).unwrap().q_th, 0.0);
    }

    #[test]
    fn monotone_and_bounded() {
        let m = map(1.0);
        let top = m.psi(1.0, m.q_h()).unwrap();
        let mut last = f64::NEG_INFINITY;
        for i in 0..=12 {
            let s = -0.84 + 0.14 * i as f64;
            let v = m.psi(0.5, s).unwrap();
            assert!(v > last && v <= top, "s = {s}");
            let (lo, hi) = (m.psi(0.5, s.abs()).unwrap(), m.psi(0.8, s.abs()).unwrap());
            assert!(hi >= lo - 1e-12, "s = {s}: {hi} < {lo}");
            last = v;
        }
        assert!(m.psi(0.5, 0.9).is_err());
        assert!(m.psi(1.2, 0.1).is_err());
    }

    #[test]
    fn fixed_point_agrees_with_bisection() {
        let m = map(1.0);
        for t in [0.2, 0.6, 0.9] {
            let fp = solve_fixed_point(&m, t).unwrap();
            assert!((fp.q_th - fp.bisection).abs() < 1e-7, "t = {t}: {fp:?}");
            let gap = m.psi(t, fp.q_th).unwrap() - fp.q_th;
            assert!(gap.abs() < 1e-7, "t = {t}: {fp:?} gap {gap}");
        }
    }

    #[test]
    fn curve_summaries() {
        let spec = MixtureSpec::sk();
        let curve = ChaosCurve::compute(&map(1.0), &[0.0, 0.5, 1.0]).unwrap();
        assert_eq!(curve.points.len(), 3);
        assert!(curve.points.windows(2).all(|w| w[1].q_th >= w[0].q_th));
        let flat = ChaosCurve { h: 0.0, q_h: 0.0, points: vec![] };
        assert_eq!(flat.integrate_xi(&spec), 0.0);
        assert!(curve.integrate_xi(&spec) > 0.0);
    }
}
