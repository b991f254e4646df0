use optomech_core::sim::SimError;
use optomech_core::spectral::SpectralError;
use optomech_core::ModelError;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(String),
    #[error("model error: {0}")]
    Model(#[from] ModelError),
    #[error("simulation unstable: {0} (rerun with --allow-instability to keep the partial trace)")]
    Instability(String),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("{0}")]
    Failed(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Model(_) => 3,
            CliError::Instability(_) => 4,
            CliError::Io(_) | CliError::Failed(_) => 1,
        }
    }
}

impl From<SimError> for CliError {
    fn from(e: SimError) -> Self {
        match e {
            SimError::InvalidConfig(msg) => CliError::Config(msg),
            SimError::Model(m) => CliError::Model(m),
            SimError::InstabilityTerminated { .. } => CliError::Instability(e.to_string()),
            SimError::NonFiniteSample { .. } => CliError::Failed(e.to_string()),
        }
    }
}

impl From<SpectralError> for CliError {
    fn from(e: SpectralError) -> Self {
        match e {
            SpectralError::Sim(s) => s.into(),
            SpectralError::TooShort { .. } => CliError::Config(format!("{e}; lengthen the run or shorten the segment")),
            SpectralError::OverlapError(_) => CliError::Model(ModelError::InvalidArgument(e.to_string())),
            _ => CliError::Failed(e.to_string()),
        }
    }
}
