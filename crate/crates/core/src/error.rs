use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("matrix is not Hermitian (max deviation {deviation:.3e})")]
    NotHermitian { deviation: f64 },

    #[error("dimension mismatch: expected {expected}, got {found}")]
    DimensionMismatch { expected: String, found: String },

    #[error("invalid density matrix: {0}")]
    InvalidState(String),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("parse error at line {line}: {message}")]
    Parse { line: u64, message: String },

    #[error("insufficient data: {found} points, need at least {required}")]
    InsufficientData { found: usize, required: usize },

    #[error("invalid sample: {0}")]
    Validation(String),

    #[error("unknown preset {requested:?}; valid presets: {valid}")]
    UnknownPreset { requested: String, valid: String },

    #[error("fit failed: {0}")]
    Fit(String),

    #[error("non-physical channel: reconstructed Choi has eigenvalue {min_eigenvalue:.3e}")]
    NonPhysicalChannel { min_eigenvalue: f64 },

    #[error("cone problem is malformed: {0}")]
    MalformedProblem(String),

    #[error(
        "solver did not converge after {iterations} iterations \
         (primal residual {primal_residual:.3e}, dual residual {dual_residual:.3e}, gap {gap:.3e})"
    )]
    SolverNotConverged {
        iterations: usize,
        primal_residual: f64,
        dual_residual: f64,
        gap: f64,
    },

    #[error("cone problem is infeasible: {0}")]
    Infeasible(String),

    #[error("certificate check failed: {0}")]
    Certificate(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}
