//! Desk-scale experiments on coupled and copied Hamiltonians.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::disorder::{ground_state, sample_disorder, DisorderSample};
use super::spins::SpinConfig;
use crate::error::{Error, Result};
use crate::mixture::MixtureSpec;
use crate::parallel::par_map;
use crate::rng::hash3;

// stream tags for derived seeds
const BASE_STREAM: u64 = 0xB45E;
const COPY_STREAM: u64 = 0xC0B1;
const SAMPLE_STREAM: u64 = 0x5A3B;

/// Seed of the `index`-th independent unit of an experiment.
pub fn derived_seed(seed: u64, stream: u64, index: u64) -> u64 {
    hash3(seed, stream, index)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExperimentKind {
    Chaos,
    Peaks,
    Variance,
}

impl ExperimentKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            ExperimentKind::Chaos => "chaos",
            ExperimentKind::Peaks => "peaks",
            ExperimentKind::Variance => "variance",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentParams {
    pub n_list: Vec<usize>,
    pub t: Option<f64>,
    pub h: f64,
    pub copies: Option<usize>,
    pub samples: usize,
    pub seed: u64,
}

/// One long-format observation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Observation {
    pub seed: u64,
    pub quantity: String,
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentRecord {
    pub kind: ExperimentKind,
    pub params: ExperimentParams,
    pub rows: Vec<Observation>,
    /// None marks a statistic that is undefined for this run (e.g. a variance of one sample)
    pub summary: BTreeMap<String, Option<f64>>,
}

impl ExperimentRecord {
    pub fn stat(&self, key: &str) -> Option<f64> {
        self.summary.get(key).copied().flatten()
    }

    pub fn values(&self, quantity: &str) -> Vec<f64> {
        self.rows.iter().filter(|r| r.quantity == quantity).map(|r| r.value).collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CoupledOutcome {
    pub sigma1: SpinConfig,
    pub sigma2: SpinConfig,
    pub r12: f64,
}

fn interpolated(t: f64, base: &DisorderSample, own: &DisorderSample) -> Result<DisorderSample> {
    DisorderSample::combine(t.sqrt(), base, (1.0 - t).sqrt(), own)
}

fn check_t(t: f64) -> Result<()> {
    if (0.0..=1.0).contains(&t) {
        Ok(())
    } else {
        Err(Error::Domain(format!("coupling t = {t} outside [0, 1]")))
    }
}

/// Maximizers of sqrt(t) H + sqrt(1 - t) H^j + field for j = 1, 2 with a shared H.
pub fn coupled_ground_states(spec: &MixtureSpec, n: usize, t: f64, h: f64, seed: u64) -> Result<CoupledOutcome> {
    check_t(t)?;
    let base = sample_disorder(spec, n, derived_seed(seed, BASE_STREAM, 0))?;
    let mut sigmas = [SpinConfig::all_plus(n)?; 2];
    for (j, sigma) in sigmas.iter_mut().enumerate() {
        let own = sample_disorder(spec, n, derived_seed(seed, COPY_STREAM, j as u64))?;
        *sigma = ground_state(&interpolated(t, &base, &own)?, h)?.0;
    }
    Ok(CoupledOutcome { sigma1: sigmas[0], sigma2: sigmas[1], r12: sigmas[0].overlap(&sigmas[1]) })
}

fn mean(xs: &[f64]) -> Option<f64> {
    (!xs.is_empty()).then(|| xs.iter().sum::<f64>() / xs.len() as f64)
}

fn median(xs: &[f64]) -> Option<f64> {
    if xs.is_empty() {
        return None;
    }
    let mut v = xs.to_vec();
    v.sort_by(f64::total_cmp);
    let m = v.len() / 2;
    Some(if v.len() % 2 == 1 { v[m] } else { 0.5 * (v[m - 1] + v[m]) })
}

/// Unbiased sample variance and its standard error from the fourth moment.
pub fn variance_with_se(xs: &[f64]) -> Option<(f64, f64)> {
    let n = xs.len();
    if n < 2 {
        return None;
    }
    let m = mean(xs)?;
    let var = xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (n - 1) as f64;
    let m4 = xs.iter().map(|x| (x - m).powi(4)).sum::<f64>() / n as f64;
    let nf = n as f64;
    let spread = (m4 - var * var * (nf - 3.0) / (nf - 1.0)).max(0.0);
    Some((var, (spread / nf).sqrt()))
}

fn standard_error(xs: &[f64]) -> Option<f64> {
    variance_with_se(xs).map(|(v, _)| (v / xs.len() as f64).sqrt())
}

/// Coupled-system overlaps over `samples` independent disorder draws.
pub fn chaos_experiment(
    spec: &MixtureSpec,
    n: usize,
    t: f64,
    h: f64,
    samples: usize,
    seed: u64,
    threads: usize,
) -> Result<ExperimentRecord> {
    check_t(t)?;
    let seeds: Vec<u64> = (0..samples as u64).map(|s| derived_seed(seed, SAMPLE_STREAM, s)).collect();
    let outcomes = par_map(&seeds, threads, |&s| coupled_ground_states(spec, n, t, h, s))?;
    let mut rows = Vec::with_capacity(2 * samples);
    for (&s, o) in seeds.iter().zip(&outcomes) {
        rows.push(Observation { seed: s, quantity: "r12".into(), value: o.r12 });
        rows.push(Observation { seed: s, quantity: "m1".into(), value: o.sigma1.magnetization() });
        rows.push(Observation { seed: s, quantity: "m2".into(), value: o.sigma2.magnetization() });
    }
    let abs: Vec<f64> = outcomes.iter().map(|o| o.r12.abs()).collect();
    let raw: Vec<f64> = outcomes.iter().map(|o| o.r12).collect();
    let mut summary = BTreeMap::new();
    summary.insert("mean_abs_r12".into(), mean(&abs));
    summary.insert("se_abs_r12".into(), standard_error(&abs));
    summary.insert("min_abs_r12".into(), abs.iter().copied().reduce(f64::min));
    summary.insert("mean_r12".into(), mean(&raw));
    Ok(ExperimentRecord {
        kind: ExperimentKind::Chaos,
        params: ExperimentParams { n_list: vec![n], t: Some(t), h, copies: None, samples, seed },
        rows,
        summary,
    })
}

/// Limiting landscape values the peaks are compared against.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LandscapeEstimates {
    pub energy: f64,
    pub magnetization: f64,
    pub overlap: f64,
}

/// Maximizers of n copies sqrt(t) H + sqrt(1 - t) H^l + field with one shared H.
pub fn peaks_experiment(
    spec: &MixtureSpec,
    n: usize,
    t: f64,
    h: f64,
    copies: usize,
    seed: u64,
    estimates: Option<LandscapeEstimates>,
) -> Result<ExperimentRecord> {
    check_t(t)?;
    if copies == 0 {
        return Err(Error::Domain("peaks experiment needs at least one copy".into()));
    }
    let base = sample_disorder(spec, n, derived_seed(seed, BASE_STREAM, 0))?;
    let mut maximizers = Vec::with_capacity(copies);
    let mut energies = Vec::with_capacity(copies);
    let mut rows = Vec::new();
    for l in 0..copies {
        let copy_seed = derived_seed(seed, COPY_STREAM, l as u64);
        let mixed = interpolated(t, &base, &sample_disorder(spec, n, copy_seed)?)?;
        let (sigma, _) = ground_state(&mixed, h)?;
        let e = super::disorder::energy(&mixed, &sigma, 0.0);
        rows.push(Observation { seed: copy_seed, quantity: "energy".into(), value: e });
        rows.push(Observation { seed: copy_seed, quantity: "magnetization".into(), value: sigma.magnetization() });
        energies.push(e);
        maximizers.push(sigma);
    }
    let mut overlaps = Vec::new();
    for a in 0..copies {
        for b in a + 1..copies {
            let r = maximizers[a].overlap(&maximizers[b]);
            // pair index a * copies + b stands in for the seed column
            rows.push(Observation { seed: (a * copies + b) as u64, quantity: "overlap".into(), value: r });
            overlaps.push(r);
        }
    }
    let mags: Vec<f64> = maximizers.iter().map(|s| s.magnetization()).collect();
    let abs = |xs: &[f64]| xs.iter().map(|x| x.abs()).collect::<Vec<_>>();
    let med_e = median(&energies);
    let max_dev = |xs: &[f64], centre: Option<f64>| {
        centre.map(|c| xs.iter().map(|x| (x - c).abs()).fold(0.0, f64::max))
    };
    let mut summary = BTreeMap::new();
    summary.insert("median_abs_overlap".into(), median(&abs(&overlaps)));
    summary.insert("median_abs_magnetization".into(), median(&abs(&mags)));
    summary.insert("median_energy".into(), med_e);
    summary.insert("max_energy_dev_from_median".into(), max_dev(&energies, med_e));
    if let Some(est) = estimates {
        summary.insert("max_energy_dev_from_estimate".into(), max_dev(&energies, Some(est.energy)));
        summary.insert("max_magnetization_dev".into(), max_dev(&mags, Some(est.magnetization)));
        summary.insert("max_overlap_dev".into(), if overlaps.is_empty() { None } else { max_dev(&overlaps, Some(est.overlap)) });
    }
    Ok(ExperimentRecord {
        kind: ExperimentKind::Peaks,
        params: ExperimentParams { n_list: vec![n], t: Some(t), h, copies: Some(copies), samples: 1, seed },
        rows,
        summary,
    })
}

/// Per-N samples of L_N^h; summary keys carry the size, e.g. `n_var_N14`.
pub fn variance_scan(
    spec: &MixtureSpec,
    h: f64,
    n_list: &[usize],
    samples: usize,
    seed: u64,
    prediction: Option<f64>,
    threads: usize,
) -> Result<ExperimentRecord> {
    let mut rows = Vec::new();
    let mut summary = BTreeMap::new();
    for &n in n_list {
        let seeds: Vec<u64> = (0..samples as u64).map(|s| derived_seed(seed, n as u64, s)).collect();
        let values = par_map(&seeds, threads, |&s| Ok(ground_state(&sample_disorder(spec, n, s)?, h)?.1))?;
        let quantity = format!("L_N{n}");
        rows.extend(seeds.iter().zip(&values).map(|(&s, &v)| Observation { seed: s, quantity: quantity.clone(), value: v }));
        let stats = variance_with_se(&values);
        summary.insert(format!("mean_L_N{n}"), mean(&values));
        summary.insert(format!("se_mean_L_N{n}"), standard_error(&values));
        summary.insert(format!("n_var_N{n}"), stats.map(|(v, _)| n as f64 * v));
        summary.insert(format!("n_var_se_N{n}"), stats.map(|(_, se)| n as f64 * se));
    }
    if h > 0.0 {
        summary.insert("prediction".into(), prediction);
    }
    Ok(ExperimentRecord {
        kind: ExperimentKind::Variance,
        params: ExperimentParams { n_list: n_list.to_vec(), t: None, h, copies: None, samples, seed },
        rows,
        summary,
    })
}
