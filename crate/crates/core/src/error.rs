use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("non-finite coordinate in {0:?}")]
    NonFinite(Vec<f64>),

    #[error("unsupported torus dimension {0} (expected 1, 2 or 3)")]
    Dimension(usize),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error(
        "grid sampling needs a perfect {dim}-th power, got n = {n}; nearest valid counts are {below} and {above}"
    )]
    GridCount {
        n: usize,
        dim: usize,
        below: usize,
        above: usize,
    },

    #[error("sample count must be at least 1")]
    EmptySample,

    #[error("integrator step underflow starting from x = {x:?} at t0 = {t0} over h = {h}")]
    StepUnderflow { x: Vec<f64>, t0: f64, h: f64 },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("mode {k:?} is fixed by the transpose of the map matrix; the closed form needs A^T k != k")]
    FixedMode { k: Vec<i64> },

    #[error("family of {size} modes exceeds the brute-force limit of {limit}")]
    CostGuard { size: usize, limit: usize },

    #[error("bound violation beyond tolerance: {0}")]
    Consistency(String),

    #[error("unknown experiment `{name}`; known experiments: {known}")]
    UnknownExperiment { name: String, known: String },

    #[error("configuration error: {0}")]
    Config(String),

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    #[error("serialization error: {0}")]
    Serialization(String),
}

impl Error {
    /// Errors caused by user input rather than by the numerics.
    pub fn is_usage(&self) -> bool {
        matches!(
            self,
            Error::Dimension(_)
                | Error::DimensionMismatch { .. }
                | Error::GridCount { .. }
                | Error::EmptySample
                | Error::InvalidParameter(_)
                | Error::FixedMode { .. }
                | Error::CostGuard { .. }
                | Error::UnknownExperiment { .. }
                | Error::Config(_)
        )
    }

    pub fn kind(&self) -> &'static str {
        match self {
            Error::NonFinite(_) => "non_finite",
            Error::Dimension(_) | Error::DimensionMismatch { .. } => "dimension",
            Error::GridCount { .. } => "grid_count",
            Error::EmptySample => "empty_sample",
            Error::StepUnderflow { .. } => "step_underflow",
            Error::InvalidParameter(_) => "invalid_parameter",
            Error::FixedMode { .. } => "fixed_mode",
            Error::CostGuard { .. } => "cost_guard",
            Error::Consistency(_) => "consistency",
            Error::UnknownExperiment { .. } => "unknown_experiment",
            Error::Config(_) => "config",
            Error::Io(_) => "io",
            Error::Serialization(_) => "serialization",
        }
    }
}

impl From<serde_json::Error> for Error {
    fn from(e: serde_json::Error) -> Self {
        Error::Serialization(e.to_string())
    }
}
