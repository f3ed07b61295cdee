use thiserror::Error;

/// Errors raised while validating parameters or configurations.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum ConfigError {
    #[error("invalid `{field}`: {reason}")]
    InvalidField { field: &'static str, reason: String },
    #[error("invalid initial distribution: {0}")]
    InitialDistribution(String),
}

impl ConfigError {
    pub fn field(field: &'static str, reason: impl Into<String>) -> Self {
        ConfigError::InvalidField {
            field,
            reason: reason.into(),
        }
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum StatsError {
    #[error("histogram is empty")]
    EmptyHistogram,
    #[error("histogram has {found} populated bins, need at least {required}")]
    TooFewBins { found: usize, required: usize },
    #[error("series has {found} points, need at least {required}")]
    SeriesTooShort { found: usize, required: usize },
    #[error("equilibrium not reached within {sweeps} sweeps")]
    EquilibriumNotReached { sweeps: u64 },
    #[error("cannot merge histograms with lattice spacings {0} and {1}")]
    LatticeMismatch(f64, f64),
    #[error("malformed CSV at line {line}: {reason}")]
    Csv { line: usize, reason: String },
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum AnalyticsError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("grid is empty")]
    EmptyGrid,
    #[error("grid must be sorted in increasing order")]
    UnsortedGrid,
    #[error("diffusion coefficient non-positive ({value}) at x = {x}")]
    NonPositiveDiffusion { x: f64, value: f64 },
    #[error("rate {name} = {value} exceeds 1 at x = {x}")]
    RateOutOfRange {
        name: &'static str,
        value: f64,
        x: f64,
    },
}
