use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(String),
    #[error("budget error: N = {n} exceeds the exhaustive limit {max} for p_max = {p_max}")]
    Budget { n: usize, max: usize, p_max: u32 },
    #[error("computation failed: {0}")]
    Compute(#[from] parisi_core::Error),
    #[error("verification failed: {0}")]
    Verify(String),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
}

impl CliError {
    /// 2 for anything the user can fix in the configuration, 1 otherwise.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) | CliError::Budget { .. } => 2,
            CliError::Compute(parisi_core::Error::Budget { .. })
            | CliError::Compute(parisi_core::Error::InvalidMixture(_)) => 2,
            _ => 1,
        }
    }
}
