use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("non-finite value at row {row}, column {col}")]
    NonFinite { row: usize, col: usize },

    #[error("empty sample")]
    EmptySample,

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("point with norm {norm} lies outside the declared domain radius {radius}")]
    OutsideDomain { norm: f64, radius: f64 },

    #[error("matrix is not positive definite: non-positive pivot {value:e} at index {pivot}")]
    NotPositiveDefinite { pivot: usize, value: f64 },

    #[error("matrix is singular within pivot tolerance at column {pivot}")]
    Singular { pivot: usize },

    #[error("symmetric eigensolver did not converge within {iterations} iterations")]
    EigenNoConvergence { iterations: usize },

    #[error("matrix of order {n} exceeds the configured cap {cap}")]
    TooLarge { n: usize, cap: usize },

    #[error("root is not bracketed: {0}")]
    NotBracketed(String),

    #[error("invalid subsample plan: {0}")]
    InvalidPlan(String),

    #[error("models use different kernels")]
    KernelMismatch,

    #[error("unsupported model format version {0}")]
    UnsupportedVersion(u32),

    #[error("malformed model: {0}")]
    MalformedModel(String),

    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
