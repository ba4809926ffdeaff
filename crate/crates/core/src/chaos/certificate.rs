//! Numerical certificates Lambda(q) < 2 M(h) away from the fixed point.

use serde::{Deserialize, Serialize};

use super::coupled::{assemble_lambda, CoupledOptions, CoupledSolver, Grid2d, UncoupledChain};
use crate::error::{Error, Result};
use crate::mixture::MixtureSpec;
use crate::parallel::par_map;
use crate::parisi_opt::ParisiResult;

/// Margins below this are reported as inconclusive, never as failures.
pub const INCONCLUSIVE_MARGIN: f64 = 1e-3;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CertificateOptions {
    pub lambda_min: f64,
    pub lambda_max: f64,
    pub lambda_points: usize,
    /// golden-section iterations on the best grid cell
    pub polish_iterations: usize,
    pub grid_points: usize,
    pub coupled: CoupledOptions,
    pub threads: usize,
}

impl Default for CertificateOptions {
    fn default() -> Self {
        CertificateOptions {
            lambda_min: -3.0,
            lambda_max: 3.0,
            lambda_points: 41,
            polish_iterations: 10,
            grid_points: super::coupled::DEFAULT_POINTS_2D,
            coupled: CoupledOptions::default(),
            threads: 1,
        }
    }
}

impl CertificateOptions {
    pub fn lambda_grid(&self) -> Vec<f64> {
        let n = self.lambda_points.max(2);
        (0..n).map(|i| self.lambda_min + (self.lambda_max - self.lambda_min) * i as f64 / (n - 1) as f64).collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Candidate {
    /// gamma_h with the best lambda
    LambdaSearch,
    /// gamma_h / (1 + t) below |q| with lambda = 0
    ScaledGamma,
}

impl Candidate {
    pub fn as_str(&self) -> &'static str {
        match self {
            Candidate::LambdaSearch => "lambda_search",
            Candidate::ScaledGamma => "scaled_gamma",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Certified,
    Inconclusive,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CertificateRow {
    pub q: f64,
    pub lambda_best: f64,
    /// the smallest bound found, Lambda-hat(q)
    pub lambda_value: f64,
    pub margin: f64,
    pub candidate_used: Candidate,
    pub verdict: Verdict,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CertificateReport {
    pub h: f64,
    pub t: f64,
    pub q_th: f64,
    pub two_m: f64,
    pub eps_exclude: f64,
    pub rows: Vec<CertificateRow>,
    pub excluded: Vec<f64>,
}

impl CertificateReport {
    /// Rows whose margin is not strictly positive.
    pub fn non_positive(&self) -> Vec<&CertificateRow> {
        self.rows.iter().filter(|r| r.margin <= 0.0).collect()
    }
}

/// Psi at the origin for one lambda and every q, sharing the uncoupled part.
fn psi_over_q(solver: &CoupledSolver, chain: &UncoupledChain, t: f64, qs: &[f64], h: f64) -> Result<Vec<f64>> {
    qs.iter().map(|&q| Ok(solver.solve_from(chain, t, q, h)?.origin_value)).collect()
}

pub fn chaos_certificate(
    spec: &MixtureSpec,
    h: f64,
    result: &ParisiResult,
    t: f64,
    q_th: f64,
    q_grid: &[f64],
    eps_exclude: f64,
    opts: &CertificateOptions,
) -> Result<CertificateReport> {
    if let Some(&bad) = q_grid.iter().find(|q| q.abs() >= 1.0) {
        return Err(Error::Domain(format!("q = {bad} outside (-1, 1)")));
    }
    let (qs, excluded): (Vec<f64>, Vec<f64>) =
        q_grid.iter().partition(|&&q| eps_exclude <= 0.0 || (q - q_th).abs() >= eps_exclude);
    let gamma = &result.gamma_h;
    let grid = Grid2d::with_points(spec, h, opts.grid_points);
    let solver = CoupledSolver::new(spec, gamma, grid, opts.coupled);
    let two_m = 2.0 * result.m;
    let mut rows = Vec::with_capacity(qs.len());
    if qs.is_empty() {
        return Ok(CertificateReport { h, t, q_th, two_m, eps_exclude, rows, excluded });
    }
    let top = qs.iter().fold(solver.min_top(), |m, q| m.max(q.abs()));
    let bottom = qs.iter().fold(top, |m, q| m.min(q.abs()));
    let lambdas = opts.lambda_grid();

    // table[l][k]: Lambda at lambda l for q k
    let table: Vec<Vec<f64>> = par_map(&lambdas, opts.threads, |&lambda| {
        let chain = solver.chain(lambda, top, bottom)?;
        let psi = psi_over_q(&solver, &chain, t, &qs, h)?;
        Ok(qs.iter().zip(psi).map(|(&q, p)| assemble_lambda(spec, gamma, t, q, lambda, p)).collect())
    })?;

    let indices: Vec<usize> = (0..qs.len()).collect();
    let per_q = par_map(&indices, opts.threads, |&k| {
        let q = qs[k];
        let value_at = |lambda: f64| -> Result<f64> {
            let chain = solver.chain(lambda, q.abs(), q.abs())?;
            Ok(assemble_lambda(spec, gamma, t, q, lambda, solver.solve_from(&chain, t, q, h)?.origin_value))
        };
        let (best_idx, best_val) = table
            .iter()
            .enumerate()
            .map(|(l, row)| (l, row[k]))
            .fold((0, f64::INFINITY), |b, c| if c.1 < b.1 { c } else { b });
        let lo = lambdas[best_idx.saturating_sub(1)];
        let hi = lambdas[(best_idx + 1).min(lambdas.len() - 1)];
        let (mut lambda_best, mut value) = golden(value_at, lo, hi, opts.polish_iterations)?;
        if best_val <= value {
            lambda_best = lambdas[best_idx];
            value = best_val;
        }
        let mut candidate = Candidate::LambdaSearch;
        let scaled = gamma.scaled_below(q.abs(), t)?;
        if gamma.intervals().iter().any(|&(lo, _, a)| lo < q.abs() && a > 0.0) {
            let alt = CoupledSolver::new(spec, &scaled, grid, opts.coupled);
            let chain = alt.chain(0.0, q.abs(), q.abs())?;
            let psi = alt.solve_from(&chain, t, q, h)?.origin_value;
            let v = assemble_lambda(spec, &scaled, t, q, 0.0, psi);
            if v < value {
                value = v;
                lambda_best = 0.0;
                candidate = Candidate::ScaledGamma;
            }
        }
        let margin = two_m - value;
        let verdict = if margin >= INCONCLUSIVE_MARGIN { Verdict::Certified } else { Verdict::Inconclusive };
        Ok(CertificateRow { q, lambda_best, lambda_value: value, margin, candidate_used: candidate, verdict })
    })?;
    rows.extend(per_q);
    Ok(CertificateReport { h, t, q_th, two_m, eps_exclude, rows, excluded })
}

/// Golden-section minimisation of a convex function on [lo, hi].
fn golden(f: impl Fn(f64) -> Result<f64>, mut lo: f64, mut hi: f64, iterations: usize) -> Result<(f64, f64)> {
    let ratio = (5f64.sqrt() - 1.0) / 2.0;
    let mut x1 = hi - ratio * (hi - lo);
    let mut x2 = lo + ratio * (hi - lo);
    let mut f1 = f(x1)?;
    let mut f2 = f(x2)?;
    for _ in 0..iterations {
        if f1 <= f2 {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - ratio * (hi - lo);
            f1 = f(x1)?;
        } else {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + ratio * (hi - lo);
            f2 = f(x2)?;
        }
    }
    Ok(if f1 <= f2 { (x1, f1) } else { (x2, f2) })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn golden_finds_parabola_minimum() {
        let (x, v) = golden(|x| Ok((x - 0.3).powi(2) + 1.0), -1.0, 1.0, 40).unwrap();
        assert!((x - 0.3).abs() < 1e-6 && (v - 1.0).abs() < 1e-12);
    }

    #[test]
    fn lambda_grid_spans_the_range() {
        let g = CertificateOptions::default().lambda_grid();
        assert_eq!(g.len(), 41);
        assert_eq!(g[0], -3.0);
        assert_eq!(g[40], 3.0);
        assert!((g[20]).abs() < 1e-15);
    }
}
