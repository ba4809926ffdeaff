//! The Parisi functional P_h(gamma) = Phi_gamma(0, h) - (1/2) int xi'' s gamma ds and its
//! minimization over k-atom order parameters.

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::flow::{directional_derivatives, FlowOptions};
use crate::gamma::{StepGamma, GAMMA_CAP};
use crate::grid::SpatialGrid;
use crate::mixture::MixtureSpec;
use crate::optim::{halton, lex, nelder_mead, NelderMeadOptions};
use crate::pde::{PDESolution, PdeOptions, EPS_BOUNDARY};

/// Evaluates P_h on a fixed grid; reused across optimizer iterations.
#[derive(Debug, Clone)]
pub struct FunctionalEvaluator {
    spec: MixtureSpec,
    h: f64,
    grid: SpatialGrid,
    pde: PdeOptions,
}

impl FunctionalEvaluator {
    pub fn new(spec: &MixtureSpec, h: f64, grid: SpatialGrid, pde: PdeOptions) -> Self {
        FunctionalEvaluator { spec: spec.clone(), h, grid, pde }
    }

    pub fn with_defaults(spec: &MixtureSpec, h: f64) -> Self {
        Self::new(spec, h, SpatialGrid::default_for(spec, h), PdeOptions::default())
    }

    pub fn solution(&self, gamma: &StepGamma) -> Result<PDESolution> {
        PDESolution::solve(&self.spec, gamma, &self.grid, self.pde, false)
    }

    pub fn value(&self, gamma: &StepGamma) -> Result<f64> {
        let sol = self.solution(gamma)?;
        Ok(sol.eval_all(0.0, self.h)?[0] - gamma.functional_correction(&self.spec))
    }

    pub fn grid(&self) -> &SpatialGrid {
        &self.grid
    }
}

pub fn parisi_functional(spec: &MixtureSpec, h: f64, gamma: &StepGamma) -> Result<f64> {
    FunctionalEvaluator::with_defaults(spec, h).value(gamma)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ParisiOptions {
    pub k_atoms: usize,
    pub seed: u64,
    pub starts: usize,
    /// how many of the best starts get a Nelder-Mead polish
    pub polish: usize,
    pub nelder_mead: NelderMeadOptions,
    /// grid used during the multi-start search and the first polish
    pub search_points: usize,
    /// evaluation budget of the final polish on the full grid
    pub final_evals: usize,
    pub grid_points: usize,
    pub gh_order: usize,
    pub threads: usize,
}

impl Default for ParisiOptions {
    fn default() -> Self {
        ParisiOptions {
            k_atoms: 2,
            seed: 0,
            starts: 32,
            polish: 2,
            nelder_mead: NelderMeadOptions { max_evals: 1500, ..NelderMeadOptions::default() },
            search_points: 1025,
            final_evals: 600,
            grid_points: crate::grid::DEFAULT_POINTS,
            gh_order: crate::pde::DEFAULT_GH_ORDER,
            threads: 1,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TracePoint {
    pub evaluations: usize,
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParisiResult {
    pub h: f64,
    pub k_atoms: usize,
    pub gamma_h: StepGamma,
    #[serde(rename = "M")]
    pub m: f64,
    #[serde(rename = "M_prime")]
    pub m_prime: f64,
    #[serde(rename = "E")]
    pub e: f64,
    pub q_h: f64,
    pub functional_trace: Vec<TracePoint>,
    pub evaluations: usize,
    pub converged: bool,
    /// the top value sits at the implementation cap
    pub cap_reached: bool,
}

fn softplus(x: f64) -> f64 {
    if x > 30.0 {
        x
    } else {
        x.exp().ln_1p()
    }
}

fn logistic(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

/// Positions from sorted logistic transforms, values from cumulative softplus increments.
pub fn decode_parameters(params: &[f64], k: usize) -> Result<StepGamma> {
    let mut qs: Vec<f64> = params[..k].iter().map(|&t| (1.0 - EPS_BOUNDARY) * logistic(t)).collect();
    qs.sort_by(f64::total_cmp);
    let mut level = 0.0;
    let mut values = Vec::with_capacity(k + 1);
    for &p in &params[k..] {
        level += softplus(p);
        values.push(level.min(GAMMA_CAP));
    }
    let atoms = std::iter::once(0.0).chain(qs).zip(values).collect();
    StepGamma::new(atoms)
}

/// Lowest functional value, then lexicographic parameters.
fn better(a: &(Vec<f64>, f64), b: &(Vec<f64>, f64)) -> bool {
    a.1 < b.1 || (a.1 == b.1 && lex(&a.0, &b.0).is_lt())
}

pub fn minimize_parisi(spec: &MixtureSpec, h: f64, opts: &ParisiOptions) -> Result<ParisiResult> {
    let k = opts.k_atoms.max(1);
    let dim = 2 * k + 1;
    let pde = PdeOptions { gh_order: opts.gh_order, ..PdeOptions::default() };
    let coarse = FunctionalEvaluator::new(spec, h, SpatialGrid::with_points(spec, h, opts.search_points), pde);
    let eval = FunctionalEvaluator::new(spec, h, SpatialGrid::with_points(spec, h, opts.grid_points), pde);
    let objective_on = |ev: &FunctionalEvaluator, x: &[f64]| -> f64 {
        decode_parameters(x, k).and_then(|g| ev.value(&g)).unwrap_or(f64::INFINITY)
    };
    let search = |x: &[f64]| objective_on(&coarse, x);
    let objective = |x: &[f64]| objective_on(&eval, x);

    let starts: Vec<Vec<f64>> = (0..opts.starts.max(1) as u64)
        .map(|i| {
            let u = halton(i, dim, opts.seed);
            (0..dim)
                .map(|j| match j {
                    j if j < k => -4.0 + 8.0 * u[j],
                    j if j == k => -6.0 + 7.0 * u[j],
                    _ => -3.0 + 5.0 * u[j],
                })
                .collect()
        })
        .collect();
    let values = evaluate_all(&starts, opts.threads, &search);
    let mut ranked: Vec<(Vec<f64>, f64)> = starts.into_iter().zip(values).collect();
    ranked.sort_by(|a, b| a.1.total_cmp(&b.1).then_with(|| lex(&a.0, &b.0)));
    let mut evaluations = ranked.len();
    let mut trace = vec![TracePoint { evaluations, value: ranked[0].1 }];

    let mut best: Option<((Vec<f64>, f64), bool)> = None;
    for (x0, _) in ranked.iter().take(opts.polish.max(1)) {
        let mut x = x0.clone();
        let mut converged_here = false;
        // one restart from the polished point guards against a collapsed simplex
        for _ in 0..2 {
            let r = nelder_mead(search, &x, &opts.nelder_mead);
            trace.extend(r.trace.iter().map(|&(n, v)| TracePoint { evaluations: evaluations + n, value: v }));
            evaluations += r.evals;
            converged_here = r.converged;
            x = r.x;
        }
        let candidate = (x.clone(), search(&x));
        evaluations += 1;
        if best.as_ref().is_none_or(|b| better(&candidate, &b.0)) {
            best = Some((candidate, converged_here));
        }
    }
    let ((x, coarse_value), search_converged) = best.expect("at least one polish run");
    let fine = NelderMeadOptions { max_evals: opts.final_evals, initial_step: 0.05, f_tol: 1e-10, ..opts.nelder_mead };
    let r = nelder_mead(objective, &x, &fine);
    trace.extend(r.trace.iter().map(|&(n, v)| TracePoint { evaluations: evaluations + n, value: v }));
    evaluations += r.evals;
    // the fine grid only moves the value by the discretisation error
    let converged = r.converged || (search_converged && (coarse_value - r.value).abs() < 1e-6);
    let mut value = r.value;
    let mut gamma = decode_parameters(&r.x, k)?;

    // drop increments that do not pay for themselves
    loop {
        let mut improved = false;
        for i in 0..gamma.atoms().len() {
            let atoms = gamma.atoms();
            let below = if i == 0 { 0.0 } else { atoms[i - 1].1 };
            let mut trial: Vec<(f64, f64)> = atoms.to_vec();
            let drop = trial[i].1 - below;
            if drop <= 0.0 {
                continue;
            }
            for atom in trial.iter_mut().skip(i) {
                atom.1 -= drop;
            }
            let Ok(candidate) = StepGamma::new(trial) else { continue };
            let v = eval.value(&candidate)?;
            evaluations += 1;
            if v <= value + 1e-10 {
                gamma = candidate;
                value = v;
                improved = true;
                break;
            }
        }
        if !improved {
            break;
        }
    }
    // the trivial bound is always available
    let trivial = eval.value(&StepGamma::zero())?;
    evaluations += 1;
    if trivial < value {
        gamma = StepGamma::zero();
        value = trivial;
    }
    trace.push(TracePoint { evaluations, value });

    let sol = eval.solution(&gamma)?;
    let m_prime = sol.eval_all(0.0, h)?[1];
    // with no resolvable support the overlap sits at the top of the searched range
    let q_h = if h == 0.0 { 0.0 } else { gamma.min_support().unwrap_or(1.0 - EPS_BOUNDARY) };
    let cap_reached = gamma.atoms().last().is_some_and(|&(_, a)| a >= GAMMA_CAP);
    Ok(ParisiResult {
        h,
        k_atoms: k,
        m: value,
        m_prime,
        e: value - h * m_prime,
        q_h,
        gamma_h: gamma,
        functional_trace: trace,
        evaluations,
        converged,
        cap_reached,
    })
}

fn evaluate_all(points: &[Vec<f64>], threads: usize, f: &(impl Fn(&[f64]) -> f64 + Sync)) -> Vec<f64> {
    if threads <= 1 || points.len() < 2 {
        return points.iter().map(|p| f(p)).collect();
    }
    let chunk = points.len().div_ceil(threads);
    std::thread::scope(|scope| {
        let handles: Vec<_> = points
            .chunks(chunk)
            .map(|part| scope.spawn(move || part.iter().map(|p| f(p)).collect::<Vec<f64>>()))
            .collect();
        handles.into_iter().flat_map(|h| h.join().expect("worker panicked")).collect()
    })
}

/// (M, M', E, q_h) of a minimization result.
pub fn landscape_quantities(result: &ParisiResult) -> (f64, f64, f64, f64) {
    (result.m, result.m_prime, result.e, result.q_h)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OptimalityReport {
    pub derivatives: Vec<f64>,
    /// (probe index, derivative) for every derivative below -tolerance
    pub violations: Vec<(usize, f64)>,
    pub tolerance: f64,
    /// max(0, -min derivative)
    pub residual: f64,
}

impl OptimalityReport {
    pub fn passed(&self) -> bool {
        self.violations.is_empty()
    }
}

pub const OPTIMALITY_TOL: f64 = 5e-3;

/// Directional derivatives of P_h at `gamma` towards each probe.
pub fn optimality_check_gamma(
    spec: &MixtureSpec,
    h: f64,
    gamma: &StepGamma,
    probes: &[StepGamma],
    tolerance: f64,
) -> Result<OptimalityReport> {
    let sol = FunctionalEvaluator::with_defaults(spec, h).solution(gamma)?;
    let derivatives = directional_derivatives(&sol, h, probes, &FlowOptions::default())?;
    let violations: Vec<(usize, f64)> = derivatives
        .iter()
        .copied()
        .enumerate()
        .filter(|&(_, d)| d < -tolerance)
        .collect();
    let residual = derivatives.iter().fold(0.0f64, |r, &d| r.max(-d));
    Ok(OptimalityReport { derivatives, violations, tolerance, residual })
}

pub fn optimality_check(
    spec: &MixtureSpec,
    h: f64,
    result: &ParisiResult,
    probes: &[StepGamma],
    tolerance: f64,
) -> Result<OptimalityReport> {
    optimality_check_gamma(spec, h, &result.gamma_h, probes, tolerance)
}

/// Twenty test directions around `gamma`: shifted atoms, inserted atoms, rescaled values.
pub fn standard_probes(gamma: &StepGamma) -> Vec<StepGamma> {
    let atoms = gamma.atoms().to_vec();
    let mut candidates: Vec<Result<StepGamma>> = vec![
        Ok(gamma.clone()),
        Ok(StepGamma::zero()),
        StepGamma::constant(1.0),
        StepGamma::new(atoms.iter().map(|&(q, a)| (q, 0.5 * a)).collect()),
        StepGamma::new(atoms.iter().map(|&(q, a)| (q, (1.5 * a).min(GAMMA_CAP))).collect()),
        StepGamma::new(atoms.iter().map(|&(q, a)| (q, (a + 1.0).min(GAMMA_CAP))).collect()),
    ];
    for i in 1..atoms.len() {
        for shift in [-0.1, -0.05, 0.05, 0.1] {
            let mut moved = atoms.clone();
            moved[i].0 += shift;
            candidates.push(StepGamma::new(moved));
        }
    }
    for s in [0.1, 0.3, 0.5, 0.7, 0.9, 0.97] {
        let here = gamma.value_at(s);
        let next = atoms.iter().map(|&(_, a)| a).find(|&a| a > here).unwrap_or((here + 2.0).min(GAMMA_CAP));
        let mut extra = gamma.with_breakpoint(s);
        for piece in extra.iter_mut() {
            if piece.0 >= s {
                piece.2 = piece.2.max(0.5 * (here + next));
            }
        }
        candidates.push(StepGamma::new(extra.into_iter().map(|(lo, _, a)| (lo, a)).collect()));
    }
    candidates.push(StepGamma::new(vec![(0.0, 0.0), (0.5, 5.0)]));
    candidates.push(StepGamma::new(vec![(0.0, 0.0), (0.9, 20.0)]));
    let mut probes: Vec<StepGamma> = Vec::new();
    for g in candidates.into_iter().flatten() {
        if !probes.contains(&g) {
            probes.push(g);
        }
    }
    let mut level = 2.0;
    while probes.len() < 20 {
        let g = StepGamma::constant(level).expect("valid constant");
        if !probes.contains(&g) {
            probes.push(g);
        }
        level += 1.0;
    }
    probes.truncate(20);
    probes
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::special::SQRT_2_OVER_PI;

    #[test]
    fn trivial_values() {
        let sk = MixtureSpec::sk();
        let p0 = parisi_functional(&sk, 0.0, &StepGamma::zero()).unwrap();
        assert!((p0 - SQRT_2_OVER_PI).abs() < 1e-6);
        let p = parisi_functional(&sk, 1.3, &StepGamma::zero()).unwrap();
        let closed = crate::pde::heat_closed_form(&sk, 1.3, 0.0)[0];
        assert!((p - closed).abs() < 1e-9);
    }

    #[test]
    fn one_atom_oracle() {
        let sk = MixtureSpec::sk();
        let p = parisi_functional(&sk, 0.0, &StepGamma::constant(1.0).unwrap()).unwrap();
        assert!((p - 0.770_393_401_536_495_4).abs() < 1e-5);
    }

    #[test]
    fn decoding_is_valid() {
        let g = decode_parameters(&[0.3, -1.0, -2.0, 0.0, 1.0], 2).unwrap();
        let atoms = g.atoms();
        assert_eq!(atoms.len(), 3);
        assert!(atoms.windows(2).all(|w| w[0].0 < w[1].0 && w[0].1 <= w[1].1));
        let capped = decode_parameters(&[0.0, 500.0, 500.0], 1).unwrap();
        assert_eq!(capped.atoms().last().unwrap().1, GAMMA_CAP);
    }

    #[test]
    fn probes_are_twenty_and_distinct() {
        let g = StepGamma::new(vec![(0.0, 0.3), (0.4, 2.0), (0.8, 6.0)]).unwrap();
        let probes = standard_probes(&g);
        assert_eq!(probes.len(), 20);
        assert_eq!(probes[0], g);
        for i in 0..20 {
            for j in 0..i {
                assert_ne!(probes[i], probes[j]);
            }
        }
    }
}
