use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid configuration: {0}")]
    Config(String),

    /// The local eigenproblem did not converge in the representation size.
    #[error("local basis truncation not converged: {0}")]
    Truncation(String),

    #[error("eigenvector gauge mismatch: {0}")]
    Gauge(String),

    #[error("numerical consistency violated: {0}")]
    NumericalConsistency(String),

    #[error("invalid quench schedule: {0}")]
    Schedule(String),

    #[error("hamiltonian assembly failed: {0}")]
    Assembly(String),

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("index {index} out of range (limit {limit})")]
    OutOfRange { index: usize, limit: usize },

    #[error("degenerate input: {0}")]
    Degenerate(String),

    #[error("fit failed: {0}")]
    Fit(String),

    #[error("run invalid: {0}")]
    InvalidRun(String),

    #[error("oracle cap exceeded: dimension {dim} > {cap}")]
    OracleCap { dim: usize, cap: usize },

    #[error("linear algebra failure: {0}")]
    Linalg(String),

    #[error("checkpoint format: {0}")]
    Format(String),

    #[error("io: {0}")]
    Io(#[from] std::io::Error),

    #[error("serialization: {0}")]
    Serde(String),
}

impl Error {
    /// Short machine-readable tag, used by the CLI error output.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::Config(_) => "config",
            Error::Truncation(_) => "truncation",
            Error::Gauge(_) => "gauge",
            Error::NumericalConsistency(_) => "numerical_consistency",
            Error::Schedule(_) => "schedule",
            Error::Assembly(_) => "assembly",
            Error::DimensionMismatch { .. } => "dimension_mismatch",
            Error::OutOfRange { .. } => "out_of_range",
            Error::Degenerate(_) => "degenerate",
            Error::Fit(_) => "fit",
            Error::InvalidRun(_) => "invalid_run",
            Error::OracleCap { .. } => "oracle_cap",
            Error::Linalg(_) => "linalg",
            Error::Format(_) => "format",
            Error::Io(_) => "io",
            Error::Serde(_) => "serde",
        }
    }
}

impl From<serde_json::Error> for Error {
    fn from(e: serde_json::Error) -> Self {
        Error::Serde(e.to_string())
    }
}

impl From<toml::de::Error> for Error {
    fn from(e: toml::de::Error) -> Self {
        Error::Serde(e.to_string())
    }
}
