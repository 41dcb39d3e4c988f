use thiserror::Error;

/// Errors raised across the library. The CLI maps each variant onto a
/// stable exit code via [`PrismError::exit_code`].
#[derive(Debug, Error, Clone, PartialEq)]
pub enum PrismError {
    #[error("malformed line {line_no}: {reason}")]
    MalformedLine { line_no: usize, reason: String },
    #[error("dataset contains no samples")]
    EmptyDataset,
    #[error("dataset contains a single class (label {0})")]
    SingleClass(f64),
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("degenerate split: {0}")]
    DegenerateSplit(String),
    #[error("invalid fold count k={k} for {n} samples")]
    BadK { k: usize, n: usize },
    #[error("nu={nu} is infeasible (nu_max={nu_max})")]
    InfeasibleNu { nu: f64, nu_max: f64 },
    #[error("feasible set is empty: nu={nu} exceeds nu_max={nu_max}")]
    InfeasibleSet { nu: f64, nu_max: f64 },
    #[error("problem too large for brute force: N={0} (max 8)")]
    TooLarge(usize),
    #[error("solver did not converge after {iterations} iterations")]
    SolverFailure { iterations: usize },
    #[error("no opposite-class samples to bound the prior")]
    NoOppositeClass,
    #[error("need at least two features to mine a prior, found {0}")]
    TooFewFeatures(usize),
    #[error("test set is empty")]
    EmptyTestSet,
    #[error("length mismatch: {0} vs {1}")]
    LengthMismatch(usize, usize),
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("model schema error: {0}")]
    Schema(String),
    #[error("io error: {0}")]
    Io(String),
}

impl PrismError {
    /// 2 = input error, 3 = domain error, 4 = numerical failure.
    pub fn exit_code(&self) -> i32 {
        use PrismError::*;
        match self {
            MalformedLine { .. } | EmptyDataset | SingleClass(_) | DimensionMismatch { .. }
            | Schema(_) | Io(_) | LengthMismatch(..) => 2,
            SolverFailure { .. } => 4,
            _ => 3,
        }
    }
}

impl From<std::io::Error> for PrismError {
    fn from(e: std::io::Error) -> Self {
        PrismError::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, PrismError>;
