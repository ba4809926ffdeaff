//! Run configuration: a flat TOML file, overridden by flags and `KEY=VAL` pairs.

use std::path::{Path, PathBuf};

use parisi_core::simulator::exhaustive_budget;
use parisi_core::MixtureSpec;
use serde::{Deserialize, Serialize};

use crate::error::CliError;

fn sk() -> MixtureSpec {
    MixtureSpec::sk()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    /// pairs [p, c_p]
    pub mixture: MixtureSpec,
    pub h: f64,
    pub h_grid: Vec<f64>,
    pub t: f64,
    pub t_grid: Vec<f64>,
    pub k_atoms: usize,
    /// pairs [q, value] for solve-pde; gamma = 0 when absent
    pub gamma: Option<Vec<[f64; 2]>>,
    pub n_spins: usize,
    pub copies: usize,
    pub samples: usize,
    pub n_list: Vec<usize>,
    pub seeds: Vec<u64>,
    pub threads: usize,
    pub out: PathBuf,
    pub grid_points: usize,
    pub search_points: usize,
    pub gh_order: usize,
    pub starts: usize,
    pub grid_points_2d: usize,
    pub lambda_points: usize,
    pub q_points: usize,
    /// the q grid spans [-1 + q_margin, 1 - q_margin]
    pub q_margin: f64,
    pub eps_exclude: f64,
    pub optimality_tol: f64,
    /// finite-N acceptance bands
    pub peaks_band: f64,
    pub variance_factor: f64,
    pub chaos_gap: f64,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            mixture: sk(),
            h: 1.0,
            h_grid: vec![0.0, 0.5, 1.0, 2.0],
            t: 0.5,
            t_grid: (0..=20).map(|i| i as f64 * 0.05).collect(),
            k_atoms: 2,
            gamma: None,
            n_spins: 16,
            copies: 32,
            samples: 500,
            n_list: vec![10, 14, 18],
            seeds: vec![0],
            threads: 1,
            out: PathBuf::from("out"),
            grid_points: 4097,
            search_points: 1025,
            gh_order: 60,
            starts: 32,
            grid_points_2d: 513,
            lambda_points: 41,
            q_points: 41,
            q_margin: 0.025,
            eps_exclude: 0.05,
            optimality_tol: 5e-3,
            peaks_band: 0.25,
            variance_factor: 2.0,
            chaos_gap: 0.1,
        }
    }
}

/// Flag values that take precedence over the file.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub config: Option<PathBuf>,
    pub out: Option<PathBuf>,
    pub seed: Option<u64>,
    pub threads: Option<usize>,
    pub pairs: Vec<String>,
}

fn parse_value(raw: &str) -> toml::Value {
    match toml::from_str::<toml::Table>(&format!("v = {raw}")) {
        Ok(mut t) => t.remove("v").expect("key just written"),
        Err(_) => toml::Value::String(raw.to_string()),
    }
}

impl RunConfig {
    pub fn load(flags: &Overrides) -> Result<Self, CliError> {
        let mut table = match &flags.config {
            Some(path) => read_table(path)?,
            None => toml::Table::new(),
        };
        for pair in &flags.pairs {
            let (key, value) = pair
                .split_once('=')
                .ok_or_else(|| CliError::Config(format!("override {pair:?} is not KEY=VAL")))?;
            table.insert(key.trim().to_string(), parse_value(value.trim()));
        }
        if let Some(out) = &flags.out {
            table.insert("out".into(), toml::Value::String(out.display().to_string()));
        }
        if let Some(seed) = flags.seed {
            let seed = i64::try_from(seed).map_err(|_| CliError::Config(format!("seed {seed} above i64::MAX")))?;
            table.insert("seeds".into(), toml::Value::Array(vec![toml::Value::Integer(seed)]));
        }
        if let Some(threads) = flags.threads {
            table.insert("threads".into(), toml::Value::Integer(threads as i64));
        }
        let config: RunConfig = toml::Value::Table(table)
            .try_into()
            .map_err(|e: toml::de::Error| CliError::Config(e.message().to_string()))?;
        config.validate()?;
        Ok(config)
    }

    pub fn validate(&self) -> Result<(), CliError> {
        let bad = |msg: String| Err(CliError::Config(msg));
        let positive = [
            ("optimality_tol", self.optimality_tol),
            ("eps_exclude", self.eps_exclude),
            ("q_margin", self.q_margin),
            ("peaks_band", self.peaks_band),
            ("variance_factor", self.variance_factor),
            ("chaos_gap", self.chaos_gap),
        ];
        for (name, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return bad(format!("{name} must be positive, got {v}"));
            }
        }
        if self.h_grid.windows(2).any(|w| w[1] < w[0]) {
            return bad("h_grid must be sorted ascending".into());
        }
        if self.h_grid.iter().chain([&self.h]).any(|h| !h.is_finite() || *h < 0.0) {
            return bad("field strengths must be finite and nonnegative".into());
        }
        if self.t_grid.iter().chain([&self.t]).any(|t| !(0.0..=1.0).contains(t)) {
            return bad("coupling values must lie in [0, 1]".into());
        }
        if self.q_margin >= 1.0 {
            return bad(format!("q_margin {} leaves an empty q grid", self.q_margin));
        }
        if self.seeds.is_empty() {
            return bad("at least one seed is required".into());
        }
        if self.k_atoms == 0 || self.threads == 0 || self.samples == 0 || self.copies == 0 {
            return bad("k_atoms, threads, samples and copies must be at least 1".into());
        }
        if self.grid_points < 17 || self.search_points < 17 || self.grid_points_2d < 17 {
            return bad("grids need at least 17 points".into());
        }
        let max = exhaustive_budget(self.mixture.p_max());
        if let Some(&n) = self.n_list.iter().chain([&self.n_spins]).find(|&&n| n == 0 || n > max) {
            return Err(CliError::Budget { n, max, p_max: self.mixture.p_max() });
        }
        Ok(())
    }

    /// Evenly spaced q's for the certificate.
    pub fn q_grid(&self) -> Vec<f64> {
        let lo = -1.0 + self.q_margin;
        let n = self.q_points.max(2);
        (0..n).map(|i| lo + 2.0 * (1.0 - self.q_margin) * i as f64 / (n - 1) as f64).collect()
    }
}

fn read_table(path: &Path) -> Result<toml::Table, CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Config(format!("cannot read config {}: {e}", path.display())))?;
    text.parse::<toml::Table>()
        .map_err(|e| CliError::Config(format!("{}: {}", path.display(), e.message())))
}
