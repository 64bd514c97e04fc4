//! CLI error type with stable process exit codes per error class.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("usage: {0}")]
    Usage(String),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Format(#[from] tnvault_core::io::IoError),
    #[error(transparent)]
    Tensor(#[from] tnvault_core::TensorError),
    #[error(transparent)]
    Decomp(#[from] tnvault_core::decomp::DecompError),
    #[error(transparent)]
    Metric(#[from] tnvault_core::metrics::MetricError),
    #[error(transparent)]
    Share(#[from] tnvault_share::ShareError),
    #[error(transparent)]
    Sim(#[from] tnvault_sim::SimError),
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}

impl CliError {
    /// 0 success; 2 usage; 3 io/format; 4 missing fragment; 5 hash
    /// mismatch; 6 numerical failure; 7 shape/argument; 1 everything else.
    pub fn exit_code(&self) -> i32 {
        use tnvault_core::decomp::DecompError;
        use tnvault_core::linalg::LinalgError;
        use tnvault_share::ShareError;
        match self {
            CliError::Usage(_) => 2,
            CliError::Io(_) | CliError::Format(_) | CliError::Json(_) => 3,
            CliError::Share(ShareError::MissingFragment(_)) => 4,
            CliError::Sim(tnvault_sim::SimError::MissingFragment(_)) => 4,
            CliError::Share(ShareError::HashMismatch(_)) => 5,
            CliError::Sim(tnvault_sim::SimError::HashMismatch(_)) => 5,
            CliError::Decomp(DecompError::Linalg(LinalgError::NumericalFailure(_))) => 6,
            CliError::Share(ShareError::Decomp(DecompError::Linalg(
                LinalgError::NumericalFailure(_),
            ))) => 6,
            CliError::Tensor(_) | CliError::Decomp(_) | CliError::Metric(_) => 7,
            _ => 1,
        }
    }
}
