use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, found {found}")]
    Dimension { expected: usize, found: usize },

    #[error("invalid distribution: {0}")]
    InvalidDistribution(String),

    #[error("invalid stochastic matrix: {0}")]
    InvalidMatrix(String),

    /// Reducible or periodic chain.
    #[error("chain structure: {0}")]
    Structure(String),

    #[error("singular scaling: stationary entry {index} is {value}")]
    SingularScaling { index: usize, value: f64 },

    #[error("unsupported mode: {0}")]
    Mode(String),

    #[error("no convergence within {iterations} iterations")]
    Divergence { iterations: usize },

    #[error("invalid argument: {0}")]
    Argument(String),

    #[error("distribution increases at index {index} ({prev} -> {next})")]
    Monotonicity { index: usize, prev: f64, next: f64 },

    #[error("domain error: {0}")]
    Domain(String),

    #[error("degenerate spectrum: {0}")]
    DegenerateSpectrum(String),

    #[error("spectral decomposition failed: {0}")]
    Spectral(String),

    #[error("initial state is orthogonal to the target (overlap {0:e})")]
    Orthogonality(f64),

    #[error("resource budget exceeded: dimension {dimension} > limit {limit}")]
    Resource { dimension: usize, limit: usize },

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("empty report: no records")]
    EmptyReport,

    #[error("malformed array file: {0}")]
    Format(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
