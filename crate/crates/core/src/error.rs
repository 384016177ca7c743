use thiserror::Error;

use crate::expr::ParseError;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("point {point:?} is closer than {margin} to the chart boundary")]
    OutOfDomain { point: Vec<f64>, margin: f64 },

    #[error("field produced a non-finite value at {point:?}")]
    NonFinite { point: Vec<f64> },

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("matrix is not symmetric (residual {residual:e} > {tol:e})")]
    Asymmetric { residual: f64, tol: f64 },

    #[error("operation requires the cotangent bundle")]
    WrongFlavor,

    #[error("curve is not closed (endpoint mismatch {mismatch:e})")]
    NotClosed { mismatch: f64 },

    #[error("integration blew up at t = {t}")]
    BlowUp { t: f64 },

    #[error("invalid argument: {0}")]
    Invalid(String),

    #[error(transparent)]
    Parse(#[from] ParseError),

    #[error("config line {line}: {message}")]
    Config { line: usize, message: String },

    #[error("io: {0}")]
    Io(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}
