use thiserror::Error;

use crate::bits::BitString;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("neighborhood size {k} is not admissible in {dimension}D; allowed sizes are (2l+1)^{dimension} - 1: {admissible:?}")]
    InvalidNeighborhoodSize {
        k: usize,
        dimension: usize,
        admissible: Vec<usize>,
    },
    #[error("qubit index {index} out of range for a {n}-qubit register")]
    UnknownQubit { index: usize, n: usize },
    #[error("unsupported geometry: {0}")]
    UnsupportedGeometry(String),
    #[error("invalid geometry: {0}")]
    InvalidGeometry(String),
    #[error("invalid bitstring {0:?}")]
    InvalidBitString(String),
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("matrix is not column-stochastic: {0}")]
    NotStochastic(String),
    #[error("qubit indices must be distinct: {0}")]
    IndexCollision(String),
    #[error("invalid noise model: {0}")]
    InvalidModel(String),
    #[error("noise model yields p({outcome}|{prepared}) = {value:e}, outside [0, 1]")]
    NegativeProbability {
        prepared: BitString,
        outcome: BitString,
        value: f64,
    },
    #[error("exhaustive calibration of {n} qubits exceeds the oracle limit of {limit} (cost grows as O(4^n))")]
    OracleLimit { n: usize, limit: usize },
    #[error("dataset has no record for prepared state(s): {}", format_missing(.0))]
    MissingPreparations(Vec<BitString>),
    #[error("dataset schema error{}: {message}", .record.map(|r| format!(" in record {r}")).unwrap_or_default())]
    Schema {
        record: Option<usize>,
        message: String,
    },
    #[error("calibration table has no entry for {0}")]
    MissingTableEntry(String),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("matrix is singular or ill-conditioned (reciprocal condition estimate {rcond:e})")]
    IllConditioned { rcond: f64 },
    #[error("constrained solver did not converge after {iterations} iterations (KKT residual {residual:e})")]
    NotConverged {
        best: Vec<f64>,
        residual: f64,
        iterations: usize,
    },
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

fn format_missing(states: &[BitString]) -> String {
    states
        .iter()
        .map(|s| s.to_string())
        .collect::<Vec<_>>()
        .join(", ")
}

/// Coarse classification used by front ends to pick exit codes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorKind {
    Validation,
    MissingData,
    Numerical,
    Io,
}

impl Error {
    pub fn kind(&self) -> ErrorKind {
        match self {
            Error::MissingPreparations(_) => ErrorKind::MissingData,
            Error::IllConditioned { .. } | Error::NotConverged { .. } => ErrorKind::Numerical,
            Error::Io(_) => ErrorKind::Io,
            _ => ErrorKind::Validation,
        }
    }
}
