use crg::CrgError;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("invalid configuration: {0}")]
    ConfigInvalid(String),
    #[error("unknown preset '{0}' (see `fermi-crg check --help`)")]
    PresetUnknown(String),
    #[error(transparent)]
    Crg(#[from] CrgError),
    #[error("i/o: {0}")]
    Io(#[from] std::io::Error),
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}

impl CliError {
    /// Usage-level problems exit with 2, runtime failures with 1.
    pub fn exit_code(&self) -> i32 {
        match self {
            Self::ConfigInvalid(_) | Self::PresetUnknown(_) => 2,
            _ => 1,
        }
    }
}
