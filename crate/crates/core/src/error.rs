use num_complex::Complex64;
use thiserror::Error;

/// Errors raised across the crate. Each variant maps onto one CLI exit code.
#[derive(Debug, Error)]
pub enum Error {
    #[error("inadmissible alpha {alpha}: alpha must lie in (-1, 1) or off the real axis")]
    Admissibility { alpha: Complex64 },

    #[error("degenerate weight: arg w1 = arg w2, so no sector splitting exists")]
    DegenerateWeight,

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("usage: {0}")]
    Usage(String),

    #[error("integration failed near x = {x}: {reason}")]
    Integration { x: f64, reason: String },

    #[error("lambda is within tolerance of an eigenvalue (|det V(S)| relative = {rel:e})")]
    NearEigenvalue { rel: f64 },

    #[error("contour passes too close to a zero; retry with inflation {suggested_inflation}: {detail}")]
    Region { suggested_inflation: f64, detail: String },

    #[error("numerical consistency check failed: {0}")]
    Consistency(String),

    #[error("no convergence: {0}")]
    Convergence(String),

    #[error("no admissible anchor found: {0}")]
    Anchor(String),

    #[error("residual check failed: {0}")]
    Residual(String),

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// Process exit code: 1 usage/parse, 2 admissibility, 3 numerical consistency,
    /// 4 non-convergence.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::InvalidInput(_) | Error::Usage(_) | Error::Io(_) | Error::Json(_) => 1,
            Error::Admissibility { .. } | Error::DegenerateWeight => 2,
            Error::Integration { .. }
            | Error::NearEigenvalue { .. }
            | Error::Region { .. }
            | Error::Consistency(_)
            | Error::Residual(_) => 3,
            Error::Convergence(_) | Error::Anchor(_) => 4,
        }
    }

    /// Short machine-readable kind tag.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::Admissibility { .. } => "AdmissibilityError",
            Error::DegenerateWeight => "DegenerateWeightError",
            Error::InvalidInput(_) => "InvalidInput",
            Error::Usage(_) => "UsageError",
            Error::Integration { .. } => "IntegrationError",
            Error::NearEigenvalue { .. } => "NearEigenvalueError",
            Error::Region { .. } => "RegionError",
            Error::Consistency(_) => "ConsistencyError",
            Error::Convergence(_) => "ConvergenceError",
            Error::Anchor(_) => "AnchorError",
            Error::Residual(_) => "ResidualError",
            Error::Io(_) => "IoError",
            Error::Json(_) => "ParseError",
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
