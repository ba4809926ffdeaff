//! The `verify` command: a quick pass over every module's invariants.

use parisi_core::chaos::{solve_coupled_pde, solve_fixed_point, Grid2d, OverlapMap};
use parisi_core::flow::{u_moments, FlowOptions};
use parisi_core::parisi_opt::{optimality_check, standard_probes, FunctionalEvaluator};
use parisi_core::pde::{heat_closed_form, phi_at_origin};
use parisi_core::simulator::{
    chaos_experiment, energy, gray_code_walk, ground_state, overlap_floor, sample_disorder, SpinConfig,
};
use parisi_core::{minimize_parisi, rng, solve_parisi_pde, MixtureSpec, SpatialGrid, StepGamma};

use crate::commands::{parisi_options, CheckRow};
use crate::config::RunConfig;
use crate::error::CliError;

/// Phi(0, 0) for SK with gamma = 2 on [0.5, 1), from 30-digit quadrature.
const TWO_STEP_ORACLE: f64 = 1.1451560770456472;

fn check(name: &str, value: f64, tolerance: f64) -> CheckRow {
    CheckRow { check: name.to_string(), passed: value.is_finite() && value <= tolerance, value: Some(value), tolerance }
}

pub fn run_checks(config: &RunConfig, seed: u64) -> Result<Vec<CheckRow>, CliError> {
    let sk = MixtureSpec::sk();
    let mut rows = Vec::new();

    let xi_err = [(sk.xi(0.5), 0.125), (sk.xi_prime(0.5), 0.5), (sk.xi_double_prime(0.3), 1.0)]
        .iter()
        .fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
    rows.push(check("mixture_sk_closed_form", xi_err, 1e-15));

    let grid = SpatialGrid::default_for(&sk, 0.0);
    let sol = solve_parisi_pde(&sk, &StepGamma::zero(), &grid)?;
    let (mut e0, mut e1, mut e2) = (0.0f64, 0.0f64, 0.0f64);
    for i in 0..200u64 {
        let s = 0.99 * rng::uniform(seed, 1, i);
        let x = 6.0 * rng::uniform(seed, 2, i) - 3.0;
        let got = sol.eval_all(s, x)?;
        let want = heat_closed_form(&sk, x, s);
        e0 = e0.max((got[0] - want[0]).abs());
        e1 = e1.max((got[1] - want[1]).abs());
        e2 = e2.max((got[2] - want[2]).abs());
    }
    rows.push(check("pde_heat_oracle_phi", e0.max(e1), 1e-6));
    rows.push(check("pde_heat_oracle_phi_xx", e2, 1e-4));

    let two_step = StepGamma::new(vec![(0.0, 0.0), (0.5, 2.0)])?;
    rows.push(check("pde_two_step_oracle", (phi_at_origin(&sk, &two_step, 0.0)? - TWO_STEP_ORACLE).abs(), 1e-5));

    let spec = &config.mixture;
    let h = config.h;
    let result = minimize_parisi(spec, h, &parisi_options(config, seed))?;
    let zero_value = FunctionalEvaluator::with_defaults(spec, h).value(&StepGamma::zero())?;
    rows.push(check("parisi_below_zero_gamma", result.m - zero_value, 0.0));
    let report = optimality_check(spec, h, &result, &standard_probes(&result.gamma_h), config.optimality_tol)?;
    rows.push(check("parisi_directional_derivatives", report.residual, config.optimality_tol));
    let support = result.gamma_h.support();
    if !support.is_empty() {
        let sol = FunctionalEvaluator::with_defaults(spec, h).solution(&result.gamma_h)?;
        let moments = u_moments(&sol, h, &support, &FlowOptions::default())?;
        let worst = moments.iter().map(|m| (m.u_squared - m.time).abs()).fold(0.0, f64::max);
        rows.push(check("flow_u_squared_at_atoms", worst, 5e-3));
    }

    let zero_field = OverlapMap::from_gamma(spec, 0.0, &result.gamma_h, 0.0)?;
    rows.push(check("overlap_zero_field", solve_fixed_point(&zero_field, 0.5)?.q_th.abs(), 0.0));
    if h > 0.0 && result.q_h > 0.0 {
        let map = OverlapMap::new(spec, h, &result)?;
        let fp = solve_fixed_point(&map, config.t)?;
        rows.push(check("overlap_fixed_point_vs_bisection", (fp.q_th - fp.bisection).abs(), 1e-6));
        let q = 0.5 * fp.q_th;
        let grid2 = Grid2d::with_points(spec, h, 257);
        let at = |l: f64| -> Result<f64, CliError> {
            Ok(solve_coupled_pde(spec, &result.gamma_h, config.t, q, l, h, &grid2)?.origin_value)
        };
        let split = (at(0.0)? - 2.0 * phi_at_origin(spec, &result.gamma_h, h)?).abs();
        rows.push(check("coupled_zero_lambda_split", split, 2e-4));
        let slope = (at(1e-3)? - at(-1e-3)?) / 2e-3;
        rows.push(check("coupled_lambda_slope", (slope - map.psi(config.t, q)?).abs(), 1e-3));
    }

    let sample = sample_disorder(&sk, 10, seed)?;
    let walk_err = gray_code_walk(&sample, 0.3)?
        .iter()
        .map(|(sigma, v)| (v - energy(&sample, sigma, 0.3)).abs())
        .fold(0.0, f64::max);
    rows.push(check("simulator_gray_code", walk_err, 1e-10));

    let (sigma, value) = ground_state(&sample, 0.0)?;
    rows.push(check("simulator_flip_symmetry", (energy(&sample, &sigma.flipped(), 0.0) - value).abs(), 1e-12));

    let n = 8;
    let pairs: Vec<(SpinConfig, SpinConfig)> = (0..10u64)
        .map(|i| {
            let a = (rng::hash3(seed, 3, i) & 0xff) as u32;
            let b = (rng::hash3(seed, 4, i) & 0xff) as u32;
            (SpinConfig::from_bits(n, a).expect("8 bits"), SpinConfig::from_bits(n, b).expect("8 bits"))
        })
        .collect();
    let samples = 2000;
    let mut worst_z = 0.0f64;
    let draws: Vec<_> = (0..samples).map(|s| sample_disorder(&sk, n, rng::hash3(seed, 5, s))).collect::<Result<_, _>>()?;
    for (a, b) in &pairs {
        let prods: Vec<f64> = draws.iter().map(|d| energy(d, a, 0.0) * energy(d, b, 0.0) * n as f64).collect();
        let mean = prods.iter().sum::<f64>() / samples as f64;
        let var = prods.iter().map(|p| (p - mean).powi(2)).sum::<f64>() / (samples - 1) as f64;
        let z = (mean - sk.xi(a.overlap(b))).abs() / (var / samples as f64).sqrt();
        worst_z = worst_z.max(z);
    }
    rows.push(check("simulator_covariance_z", worst_z, 4.0));

    let mut floor_gap = f64::NEG_INFINITY;
    for i in 0..2000u64 {
        let a = SpinConfig::from_bits(12, (rng::hash3(seed, 6, i) & 0xfff) as u32)?;
        let b = SpinConfig::from_bits(12, (rng::hash3(seed, 7, i) & 0xfff) as u32)?;
        floor_gap = floor_gap.max(overlap_floor(a.magnetization(), b.magnetization()) - a.overlap(&b));
    }
    rows.push(check("simulator_overlap_floor", floor_gap, 1e-12));

    let first = chaos_experiment(&sk, 8, 0.5, 0.0, 8, seed, 1)?;
    let again = chaos_experiment(&sk, 8, 0.5, 0.0, 8, seed, config.threads)?;
    rows.push(check("simulator_reproducible", if first == again { 0.0 } else { 1.0 }, 0.0));

    Ok(rows)
}
