//! One function per subcommand: compute, then hand rows and summaries to the emitter.

use std::collections::BTreeMap;

use parisi_core::chaos::{
    chaos_certificate, solve_fixed_point, Candidate, CertificateOptions, CertificateRow, ChaosCurve, CoupledOptions,
    OverlapMap,
};
use parisi_core::parisi_opt::{optimality_check, standard_probes};
use parisi_core::simulator::{chaos_experiment, peaks_experiment, variance_scan, LandscapeEstimates, Observation};
use parisi_core::{minimize_parisi, solve_parisi_pde, ParisiOptions, ParisiResult, SpatialGrid, StepGamma};
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::config::RunConfig;
use crate::error::CliError;
use crate::report::{fmt_f64, fmt_opt, CsvRow, Emitter};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PdeRow {
    pub time: f64,
    pub x: f64,
    pub phi: f64,
    pub dphi: f64,
    pub d2phi: f64,
}

impl CsvRow for PdeRow {
    const HEADER: &'static [&'static str] = &["time", "x", "phi", "dphi", "d2phi"];
    fn fields(&self) -> Vec<String> {
        [self.time, self.x, self.phi, self.dphi, self.d2phi].map(fmt_f64).to_vec()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AtomRow {
    pub q: f64,
    pub gamma: f64,
}

impl CsvRow for AtomRow {
    const HEADER: &'static [&'static str] = &["q", "gamma"];
    fn fields(&self) -> Vec<String> {
        vec![fmt_f64(self.q), fmt_f64(self.gamma)]
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScanRow {
    pub h: f64,
    #[serde(rename = "M")]
    pub m: f64,
    #[serde(rename = "M_prime")]
    pub m_prime: f64,
    #[serde(rename = "E")]
    pub e: f64,
    pub q_h: f64,
    pub converged: bool,
    pub cap_reached: bool,
}

impl CsvRow for ScanRow {
    const HEADER: &'static [&'static str] = &["h", "M", "M_prime", "E", "q_h", "converged", "cap_reached"];
    fn fields(&self) -> Vec<String> {
        let mut f: Vec<String> = [self.h, self.m, self.m_prime, self.e, self.q_h].map(fmt_f64).to_vec();
        f.push(self.converged.to_string());
        f.push(self.cap_reached.to_string());
        f
    }
}

impl From<&ParisiResult> for ScanRow {
    fn from(r: &ParisiResult) -> Self {
        ScanRow { h: r.h, m: r.m, m_prime: r.m_prime, e: r.e, q_h: r.q_h, converged: r.converged, cap_reached: r.cap_reached }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FixedPointRow {
    pub t: f64,
    pub q_th: f64,
    pub iterations: usize,
    pub bisection: f64,
}

impl CsvRow for FixedPointRow {
    const HEADER: &'static [&'static str] = &["t", "q_th", "iterations", "bisection"];
    fn fields(&self) -> Vec<String> {
        vec![fmt_f64(self.t), fmt_f64(self.q_th), self.iterations.to_string(), fmt_f64(self.bisection)]
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundRow {
    pub q: f64,
    pub lambda_best: f64,
    #[serde(rename = "Lambda")]
    pub lambda_value: f64,
    pub margin: f64,
    pub candidate_used: Candidate,
}

impl CsvRow for BoundRow {
    const HEADER: &'static [&'static str] = &["q", "lambda_best", "Lambda", "margin", "candidate_used"];
    fn fields(&self) -> Vec<String> {
        let mut f: Vec<String> = [self.q, self.lambda_best, self.lambda_value, self.margin].map(fmt_f64).to_vec();
        f.push(self.candidate_used.as_str().to_string());
        f
    }
}

impl From<&CertificateRow> for BoundRow {
    fn from(r: &CertificateRow) -> Self {
        BoundRow { q: r.q, lambda_best: r.lambda_best, lambda_value: r.lambda_value, margin: r.margin, candidate_used: r.candidate_used }
    }
}

impl CsvRow for Observation {
    const HEADER: &'static [&'static str] = &["seed", "quantity", "value"];
    fn fields(&self) -> Vec<String> {
        vec![self.seed.to_string(), self.quantity.clone(), fmt_f64(self.value)]
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckRow {
    pub check: String,
    pub passed: bool,
    pub value: Option<f64>,
    pub tolerance: f64,
}

impl CsvRow for CheckRow {
    const HEADER: &'static [&'static str] = &["check", "passed", "value", "tolerance"];
    fn fields(&self) -> Vec<String> {
        vec![self.check.clone(), self.passed.to_string(), fmt_opt(self.value), fmt_f64(self.tolerance)]
    }
}

pub fn parisi_options(config: &RunConfig, seed: u64) -> ParisiOptions {
    ParisiOptions {
        k_atoms: config.k_atoms,
        seed,
        starts: config.starts,
        search_points: config.search_points,
        grid_points: config.grid_points,
        gh_order: config.gh_order,
        threads: config.threads,
        ..ParisiOptions::default()
    }
}

fn minimize(config: &RunConfig, h: f64, seed: u64) -> Result<ParisiResult, CliError> {
    Ok(minimize_parisi(&config.mixture, h, &parisi_options(config, seed))?)
}

/// Outcome of one seed: its summary plus the names of the files it produced.
pub type SeedSummary = Value;

pub fn solve_pde(config: &RunConfig, seed: u64, emit: &mut Emitter) -> Result<SeedSummary, CliError> {
    let gamma = match &config.gamma {
        Some(atoms) => StepGamma::try_from(atoms.clone()).map_err(|e| CliError::Config(e.to_string()))?,
        None => StepGamma::zero(),
    };
    let grid = SpatialGrid::with_points(&config.mixture, config.h, config.grid_points);
    let sol = solve_parisi_pde(&config.mixture, &gamma, &grid)?;
    let mut rows = Vec::new();
    for layer in sol.layers() {
        for i in 0..grid.n_points() {
            rows.push(PdeRow { time: layer.time, x: grid.x(i), phi: layer.phi[i], dphi: layer.dphi[i], d2phi: layer.d2phi[i] });
        }
    }
    let origin = sol.eval_all(0.0, config.h)?;
    let summary = json!({
        "h": config.h,
        "gamma": gamma,
        "phi_at_origin": origin[0],
        "dphi_at_origin": origin[1],
        "d2phi_at_origin": origin[2],
        "layers": sol.layers().len(),
    });
    emit.csv(seed, &rows);
    emit.json(seed, &summary);
    Ok(summary)
}

pub fn minimize_cmd(config: &RunConfig, seed: u64, emit: &mut Emitter) -> Result<SeedSummary, CliError> {
    let result = minimize(config, config.h, seed)?;
    let report = optimality_check(&config.mixture, config.h, &result, &standard_probes(&result.gamma_h), config.optimality_tol)?;
    let rows: Vec<AtomRow> = result.gamma_h.atoms().iter().map(|&(q, gamma)| AtomRow { q, gamma }).collect();
    let summary = json!({ "result": result, "optimality": report });
    emit.csv(seed, &rows);
    emit.json(seed, &summary);
    Ok(json!({
        "M": result.m, "M_prime": result.m_prime, "E": result.e, "q_h": result.q_h,
        "converged": result.converged, "optimality_residual": report.residual,
    }))
}

pub fn scan_h(config: &RunConfig, seed: u64, emit: &mut Emitter) -> Result<SeedSummary, CliError> {
    let results = config.h_grid.iter().map(|&h| minimize(config, h, seed)).collect::<Result<Vec<_>, _>>()?;
    let rows: Vec<ScanRow> = results.iter().map(ScanRow::from).collect();
    let e_steps: Vec<f64> = rows.windows(2).map(|w| w[1].e - w[0].e).collect();
    let summary = json!({
        "rows": rows.len(),
        "max_E_increase": e_steps.iter().copied().fold(f64::NEG_INFINITY, f64::max),
        "results": results,
    });
    emit.csv(seed, &rows);
    emit.json(seed, &summary);
    Ok(json!({ "rows": rows.len(), "E": rows.iter().map(|r| r.e).collect::<Vec<_>>() }))
}

fn overlap_curve(config: &RunConfig, result: &ParisiResult) -> Result<ChaosCurve, CliError> {
    let map = OverlapMap::new(&config.mixture, result.h, result)?;
    Ok(ChaosCurve::compute(&map, &config.t_grid)?)
}

pub fn fixed_point(config: &RunConfig, seed: u64, emit: &mut Emitter) -> Result<SeedSummary, CliError> {
    let result = minimize(config, config.h, seed)?;
    let curve = overlap_curve(config, &result)?;
    let rows: Vec<FixedPointRow> = curve
        .points
        .iter()
        .map(|p| FixedPointRow { t: p.t, q_th: p.q_th, iterations: p.iterations, bisection: p.bisection })
        .collect();
    let summary = json!({
        "h": config.h,
        "q_h": curve.q_h,
        "max_adjacent_jump": curve.max_jump(),
        "xi_integral": curve.integrate_xi(&config.mixture),
        "gamma_h": result.gamma_h,
    });
    emit.csv(seed, &rows);
    emit.json(seed, &summary);
    Ok(summary)
}

pub fn gt_bound(config: &RunConfig, seed: u64, emit: &mut Emitter) -> Result<SeedSummary, CliError> {
    let result = minimize(config, config.h, seed)?;
    let map = OverlapMap::new(&config.mixture, config.h, &result)?;
    let fp = solve_fixed_point(&map, config.t)?;
    let opts = CertificateOptions {
        lambda_points: config.lambda_points,
        grid_points: config.grid_points_2d,
        coupled: CoupledOptions::default(),
        threads: config.threads,
        ..CertificateOptions::default()
    };
    let report = chaos_certificate(&config.mixture, config.h, &result, config.t, fp.q_th, &config.q_grid(), config.eps_exclude, &opts)?;
    let at_fixed_point = chaos_certificate(&config.mixture, config.h, &result, config.t, fp.q_th, &[fp.q_th], 0.0, &opts)?;
    let rows: Vec<BoundRow> = report.rows.iter().map(BoundRow::from).collect();
    let non_positive = report.non_positive().len();
    let summary = json!({
        "h": config.h,
        "t": config.t,
        "q_th": fp.q_th,
        "two_M": report.two_m,
        "eps_exclude": config.eps_exclude,
        "excluded": report.excluded,
        "non_positive_margins": non_positive,
        "min_margin": report.rows.iter().map(|r| r.margin).fold(f64::INFINITY, f64::min),
        "at_fixed_point": at_fixed_point.rows.first(),
        "rows": report.rows,
    });
    emit.csv(seed, &rows);
    emit.json(seed, &summary);
    Ok(json!({
        "q_th": fp.q_th, "non_positive_margins": non_positive,
        "margin_at_fixed_point": at_fixed_point.rows.first().map(|r| r.margin),
    }))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SimKind {
    Chaos,
    Peaks,
    Variance,
}

pub fn simulate(config: &RunConfig, kind: SimKind, seed: u64, emit: &mut Emitter) -> Result<SeedSummary, CliError> {
    let spec = &config.mixture;
    let record = match kind {
        SimKind::Chaos => chaos_experiment(spec, config.n_spins, config.t, config.h, config.samples, seed, config.threads)?,
        SimKind::Peaks => {
            let result = minimize(config, config.h, seed)?;
            let estimates = LandscapeEstimates { energy: result.e, magnetization: result.m_prime, overlap: result.q_h };
            peaks_experiment(spec, config.n_spins, config.t, config.h, config.copies, seed, Some(estimates))?
        }
        SimKind::Variance => {
            let prediction = if config.h > 0.0 {
                let result = minimize(config, config.h, seed)?;
                Some(overlap_curve(config, &result)?.integrate_xi(spec))
            } else {
                None
            };
            variance_scan(spec, config.h, &config.n_list, config.samples, seed, prediction, config.threads)?
        }
    };
    let summary = json!({
        "kind": record.kind,
        "params": record.params,
        "summary": record.summary,
        "bands": {
            "peaks_band": config.peaks_band,
            "variance_factor": config.variance_factor,
            "chaos_gap": config.chaos_gap,
        },
    });
    emit.csv(seed, &record.rows);
    emit.json(seed, &summary);
    Ok(json!(record.summary))
}

/// Merged view across seeds, keyed by seed.
pub fn merge(summaries: &[(u64, SeedSummary)]) -> Value {
    let map: BTreeMap<String, &Value> = summaries.iter().map(|(s, v)| (s.to_string(), v)).collect();
    json!({ "seeds": summaries.iter().map(|(s, _)| s).collect::<Vec<_>>(), "per_seed": map })
}
