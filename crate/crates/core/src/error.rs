use ndarray::Array1;

/// Errors raised by solvers, estimators and file I/O.
#[derive(thiserror::Error, Debug)]
pub enum Error {
    #[error("dimension mismatch in {what}: expected {expected}, found {found}")]
    DimensionMismatch {
        what: &'static str,
        expected: usize,
        found: usize,
    },
    #[error("index out of range in {what}: {index} >= {bound}")]
    IndexOutOfRange {
        what: &'static str,
        index: usize,
        bound: usize,
    },
    /// Fixed-point iteration stopped before reaching its tolerance.
    #[error("no convergence after {sweeps} sweeps (residual {residual:e})")]
    MaxSweepsExceeded {
        sweeps: usize,
        residual: f64,
        last: Array1<f64>,
    },
    #[error("matrix is singular to working precision")]
    SingularMatrix,
    #[error("no demonstration data")]
    EmptyData,
    #[error("non-positive choice probability {value} at state {state}, action {action}")]
    NonPositiveProbability {
        state: usize,
        action: usize,
        value: f64,
    },
    #[error("non-finite gradient at iteration {iteration}: {detail}")]
    NonFiniteGradient { iteration: usize, detail: String },
    #[error("non-finite input: {0}")]
    NonFinite(&'static str),
    #[error("invalid model: {}", .0.join("; "))]
    InvalidModel(Vec<String>),
    #[error("invalid specification: {0}")]
    InvalidSpec(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    /// Input and configuration problems, as opposed to numerical failures.
    pub fn is_input_error(&self) -> bool {
        matches!(
            self,
            Error::DimensionMismatch { .. }
                | Error::IndexOutOfRange { .. }
                | Error::EmptyData
                | Error::NonFinite(_)
                | Error::InvalidModel(_)
                | Error::InvalidSpec(_)
                | Error::Io(_)
                | Error::Json(_)
                | Error::Csv(_)
        )
    }
}

pub type Result<T> = std::result::Result<T, Error>;
