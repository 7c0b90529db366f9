use nalgebra::DMatrix;

use super::FrequencyMatrix;
use crate::error::{Error, Result};

/// Trigonometric design matrix `Φ(X)` of shape `2R × N`.
///
/// Column `c` is `R^{-1/2} [cos(ω_1ᵀx_c), sin(ω_1ᵀx_c), …, cos(ω_Rᵀx_c), sin(ω_Rᵀx_c)]`,
/// so every column has unit norm.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMatrix {
    entries: DMatrix<f64>,
    frequencies: usize,
}

impl FeatureMatrix {
    pub fn as_matrix(&self) -> &DMatrix<f64> {
        &self.entries
    }

    pub fn into_inner(self) -> DMatrix<f64> {
        self.entries
    }

    /// Number of frequencies `R` (half the row count).
    pub fn frequencies(&self) -> usize {
        self.frequencies
    }

    pub fn inputs(&self) -> usize {
        self.entries.ncols()
    }
}

/// Random Fourier features of the columns of `x` (`d × N`).
pub fn rff_features(x: &DMatrix<f64>, omega: &FrequencyMatrix) -> Result<FeatureMatrix> {
    if x.nrows() != omega.dims() {
        return Err(Error::shape(format!(
            "inputs have dimension {} but frequencies have {}",
            x.nrows(),
            omega.dims()
        )));
    }
    let r = omega.rows();
    let n = x.ncols();
    let phases = omega.as_matrix() * x;
    let scale = 1.0 / (r as f64).sqrt();
    let mut entries = DMatrix::zeros(2 * r, n);
    for c in 0..n {
        for k in 0..r {
            let (s, co) = phases[(k, c)].sin_cos();
            entries[(2 * k, c)] = co * scale;
            entries[(2 * k + 1, c)] = s * scale;
        }
    }
    Ok(FeatureMatrix {
        entries,
        frequencies: r,
    })
}

/// Approximate Gram matrix `Φ(X)ᵀΦ(X)`.
pub fn rff_gram(x: &DMatrix<f64>, omega: &FrequencyMatrix) -> Result<DMatrix<f64>> {
    let phi = rff_features(x, omega)?;
    let gram = phi.entries.transpose() * &phi.entries;
    Ok(symmetrize(gram))
}

fn symmetrize(mut m: DMatrix<f64>) -> DMatrix<f64> {
    let n = m.nrows();
    for i in 0..n {
        for j in (i + 1)..n {
            let v = 0.5 * (m[(i, j)] + m[(j, i)]);
            m[(i, j)] = v;
            m[(j, i)] = v;
        }
    }
    m
}
