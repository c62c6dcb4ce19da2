use thiserror::Error;

/// Errors produced by the sensing library.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("unsupported comb size {comb} for {pattern}")]
    InvalidComb { pattern: &'static str, comb: usize },

    #[error("comb size {comb} does not divide {active} active subcarriers")]
    NonDivisible { comb: usize, active: usize },

    #[error("domain error: {0}")]
    Domain(String),

    #[error(
        "residual delay {residual_s:.3e} s is outside the cyclic prefix window [0, {cp_s:.3e}] s"
    )]
    CpViolation { residual_s: f64, cp_s: f64 },

    #[error("degenerate pattern: {0}")]
    DegeneratePattern(String),

    #[error("singular Fisher information matrix (det = {0:e})")]
    SingularMatrix(f64),

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("degenerate input: {0}")]
    DegenerateInput(String),

    #[error("insufficient data: {0}")]
    InsufficientData(String),

    #[error("{path}: {message}")]
    Io { path: String, message: String },
}

impl Error {
    pub(crate) fn io(path: &std::path::Path, err: impl std::fmt::Display) -> Self {
        Error::Io {
            path: path.display().to_string(),
            message: err.to_string(),
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
