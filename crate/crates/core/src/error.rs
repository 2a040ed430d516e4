use thiserror::Error;

/// Errors raised by the statistical and privacy routines.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum DpError {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("invalid censoring bounds: L = {lower} must be finite and below U = {upper}")]
    InvalidBounds { lower: f64, upper: f64 },

    #[error("wrong mechanism: {0}")]
    WrongMechanism(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("design is rank deficient at column {column} ({context})")]
    RankDeficient { column: usize, context: String },

    #[error("degenerate response: Z'Z = 0 after removing the common predictors")]
    DegenerateResponse,

    #[error("domain error: {0}")]
    Domain(String),

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("cannot split {n} rows into {m} subsets of at least {min_subset} rows")]
    SplitInfeasible { n: usize, m: usize, min_subset: usize },

    #[error("subset {subset}: {source}")]
    Subset {
        subset: usize,
        #[source]
        source: Box<DpError>,
    },

    #[error("{nsim} simulations are too few for alpha = {alpha} (need at least {needed})")]
    InsufficientSimulations { nsim: usize, alpha: f64, needed: usize },

    #[error("numeric failure: {0}")]
    Numeric(String),

    #[error("positive-definite repair failed: minimum eigenvalue {lambda_min} after r = {r}")]
    RepairFailed { lambda_min: f64, r: f64 },

    #[error("confidence region is empty: all {rejected} candidates were not positive definite")]
    EmptyRegion { rejected: usize },

    #[error("model space with p = {p} exceeds the enumeration limit of {max}; drop predictors or screen first")]
    ModelSpaceTooLarge { p: usize, max: usize },
}

pub type Result<T> = std::result::Result<T, DpError>;

impl DpError {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        DpError::InvalidArgument(msg.into())
    }

    pub(crate) fn numeric(msg: impl Into<String>) -> Self {
        DpError::Numeric(msg.into())
    }

    pub(crate) fn in_subset(self, subset: usize) -> Self {
        DpError::Subset { subset, source: Box::new(self) }
    }
}
