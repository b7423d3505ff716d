use thiserror::Error;

/// Errors raised anywhere in the synthesis chain.
///
/// Every variant maps onto a stable machine-readable code (see [`Error::code`])
/// and a process exit status used by the command-line tool.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("variable sets differ: {left} vs {right}")]
    VariableMismatch { left: usize, right: usize },

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("invalid problem: {0}")]
    InvalidProblem(String),

    #[error("target cannot be produced: {0}")]
    InfeasibleBound(String),

    #[error("empty intersection: the polynomial system has no solution")]
    EmptyIntersection,

    #[error("solution set not finite: no pure power of variable `{variable}` leads a basis element")]
    NotZeroDimensional { variable: String },

    #[error("resource budget exceeded: {0}")]
    ResourceCap(String),

    #[error("not a contraction: operator norm {norm} exceeds 1 + {tol}")]
    NotAContraction { norm: f64, tol: f64 },

    #[error("matrix is not unitary (max deviation {deviation})")]
    NotUnitary { deviation: f64 },

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("zero-norm state")]
    ZeroNorm,

    #[error("verification failed: {0}")]
    VerificationFailed(String),

    #[error("{0}")]
    Io(String),
}

impl Error {
    /// Machine-readable error code.
    pub fn code(&self) -> &'static str {
        match self {
            Error::VariableMismatch { .. } => "VARIABLE_MISMATCH",
            Error::DimensionMismatch { .. } => "DIMENSION_MISMATCH",
            Error::InvalidProblem(_) => "INVALID_PROBLEM",
            Error::InfeasibleBound(_) => "INFEASIBLE_BOUND",
            Error::EmptyIntersection => "EMPTY_INTERSECTION",
            Error::NotZeroDimensional { .. } => "NOT_ZERO_DIMENSIONAL",
            Error::ResourceCap(_) => "RESOURCE_CAP",
            Error::NotAContraction { .. } => "NOT_A_CONTRACTION",
            Error::NotUnitary { .. } => "NOT_UNITARY",
            Error::Numerical(_) => "NUMERICAL",
            Error::ZeroNorm => "ZERO_NORM",
            Error::VerificationFailed(_) => "VERIFICATION_FAILED",
            Error::Io(_) => "IO",
        }
    }

    /// Process exit status: 2 infeasible, 3 resource cap, 4 verification failure, 1 otherwise.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::InfeasibleBound(_) | Error::EmptyIntersection | Error::NotZeroDimensional { .. } => 2,
            Error::ResourceCap(_) => 3,
            Error::VerificationFailed(_) => 4,
            _ => 1,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
