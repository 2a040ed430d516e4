use dpms_core::DpError;
use serde::Serialize;
use thiserror::Error;

/// Failures surfaced by the CLI, grouped by exit code.
#[derive(Debug, Error)]
pub enum CliError {
    #[error("configuration error: {0}")]
    Config(String),

    #[error("data error: {0}")]
    Data(String),

    #[error("numeric failure: {0}")]
    Numeric(String),

    #[error("i/o error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

pub type CliResult<T> = Result<T, CliError>;

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Data(_) | CliError::Io { .. } => 3,
            CliError::Numeric(_) => 4,
        }
    }

    pub fn kind(&self) -> &'static str {
        match self {
            CliError::Config(_) => "config",
            CliError::Data(_) => "data",
            CliError::Numeric(_) => "numeric",
            CliError::Io { .. } => "io",
        }
    }

    pub fn io(path: impl AsRef<std::path::Path>, source: std::io::Error) -> Self {
        CliError::Io { path: path.as_ref().display().to_string(), source }
    }

    /// Machine-readable error record.
    pub fn record(&self) -> ErrorRecord {
        ErrorRecord { error: self.kind(), message: self.to_string(), exit_code: self.exit_code() }
    }
}

#[derive(Debug, Serialize)]
pub struct ErrorRecord {
    pub error: &'static str,
    pub message: String,
    pub exit_code: i32,
}

impl From<DpError> for CliError {
    fn from(e: DpError) -> Self {
        let msg = e.to_string();
        match e {
            DpError::InvalidArgument(_)
            | DpError::InvalidBounds { .. }
            | DpError::WrongMechanism(_)
            | DpError::Config(_)
            | DpError::InsufficientSimulations { .. }
            | DpError::ModelSpaceTooLarge { .. } => CliError::Config(msg),
            DpError::RankDeficient { .. }
            | DpError::DegenerateResponse
            | DpError::Domain(_)
            | DpError::DimensionMismatch(_)
            | DpError::SplitInfeasible { .. }
            | DpError::Subset { .. } => CliError::Data(msg),
            DpError::Numeric(_) | DpError::RepairFailed { .. } | DpError::EmptyRegion { .. } => CliError::Numeric(msg),
        }
    }
}
