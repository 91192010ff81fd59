//! Matrix error measures.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::TransitionMatrix;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MatrixNorm {
    /// `‖A‖_F / sqrt(dim A)`.
    ScaledFrobenius,
    /// Largest absolute entry.
    Max,
}

impl MatrixNorm {
    pub const ALL: [MatrixNorm; 2] = [MatrixNorm::ScaledFrobenius, MatrixNorm::Max];

    pub fn label(&self) -> &'static str {
        match self {
            MatrixNorm::ScaledFrobenius => "scaled Frobenius",
            MatrixNorm::Max => "max norm",
        }
    }
}

pub fn frobenius_distance(a: &TransitionMatrix, b: &TransitionMatrix) -> Result<f64> {
    Ok(a.try_sub(b)?.as_dmatrix().norm())
}

pub fn norm_distance(a: &TransitionMatrix, b: &TransitionMatrix, norm: MatrixNorm) -> Result<f64> {
    let diff = a.try_sub(b)?;
    let m = diff.as_dmatrix();
    Ok(match norm {
        MatrixNorm::ScaledFrobenius => m.norm() / (diff.dim() as f64).sqrt(),
        MatrixNorm::Max => m.iter().fold(0.0f64, |acc, v| acc.max(v.abs())),
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FrobeniusAsymptote {
    /// `sqrt(n(n+1)) 2^{n/2} eps`
    pub frobenius: f64,
    /// `sqrt(n(n+1)) eps`
    pub scaled: f64,
}

/// Small-`eps` limit of `‖τ(eps)^{⊗n} - I‖` for a symmetric flip probability.
pub fn asymptotic_frobenius_error(n: usize, eps: f64) -> Result<FrobeniusAsymptote> {
    if n <= 1 {
        return Err(Error::InvalidArgument(format!(
            "asymptotic Frobenius error is defined for n > 1, got n = {n}"
        )));
    }
    if eps.is_nan() || eps < 0.0 {
        return Err(Error::InvalidArgument(format!("eps must be >= 0, got {eps}")));
    }
    let scaled = ((n * (n + 1)) as f64).sqrt() * eps;
    Ok(FrobeniusAsymptote {
        frobenius: scaled * 2f64.powf(n as f64 / 2.0),
        scaled,
    })
}

/// `(T(0|1) + T(1|0)) / 2`.
pub fn single_qubit_spam_error(t: &TransitionMatrix) -> Result<f64> {
    if t.n() != 1 {
        return Err(Error::DimensionMismatch {
            expected: 2,
            found: t.dim(),
        });
    }
    t.check_column_stochastic(1e-9)?;
    Ok((t.get(0, 1) + t.get(1, 0)) / 2.0)
}
