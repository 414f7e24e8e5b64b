use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("matrix is not Hermitian (max asymmetry {0:e})")]
    NotHermitian(f64),
    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },
    #[error("qubit index {index} out of range for a {width}-qubit register")]
    IndexOutOfRange { index: usize, width: usize },
    #[error("matrix function undefined at eigenvalue {0}")]
    Domain(f64),
    #[error("dimension {0} is not a power of two")]
    NotPowerOfTwo(usize),
    #[error("invalid quantum state: {0}")]
    InvalidState(String),
    #[error("ansatz expects {expected} parameters, got {actual}")]
    ParameterCountMismatch { expected: usize, actual: usize },
    #[error("length mismatch: expected {expected}, got {actual}")]
    LengthMismatch { expected: usize, actual: usize },
    #[error("operator order mismatch at position {index}: `{left}` vs `{right}`")]
    OrderMismatch {
        index: usize,
        left: String,
        right: String,
    },
    #[error("operator set is not informationally complete (Gram rank {rank}, need {required})")]
    SingularFrame { rank: usize, required: usize },
    #[error("line {line}, column {column}: {message}")]
    Parse {
        line: usize,
        column: usize,
        message: String,
    },
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
}
