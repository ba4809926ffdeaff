use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("argument out of domain: {0}")]
    Domain(String),
    #[error("invalid mixture: {}", .0.iter().map(|i| i.to_string()).collect::<Vec<_>>().join("; "))]
    InvalidMixture(Vec<crate::mixture::MixtureIssue>),
    #[error("invalid order parameter: {0}")]
    InvalidGamma(String),
    #[error("invalid grid: {0}")]
    Grid(String),
    #[error("negative Gaussian variance {0} in Cole-Hopf step")]
    NegativeVariance(f64),
    #[error("probability mass {0:e} left the grid")]
    MassLeak(f64),
    #[error("no convergence after {iterations} iterations: {detail}")]
    NonConvergence { iterations: usize, detail: String },
    #[error("N = {n} exceeds the exhaustive budget {max} for p_max = {p_max}")]
    Budget { n: usize, max: usize, p_max: u32 },
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
