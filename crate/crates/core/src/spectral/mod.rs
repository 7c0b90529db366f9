//! Spectral densities, frequency samplers and the random Fourier feature map.
//!
//! The RBF kernel convention used throughout the crate is
//! `k(Δ) = exp(-Σ_j Δ_j² / (2ℓ_j²))`, whose spectral measure is
//! `N(0, diag(ℓ)^-2)`. With this convention no `2π` factors appear in the
//! feature map.

mod density;
mod features;
mod qmc;
mod samplers;

use nalgebra::DMatrix;

use crate::error::{Error, Result};

pub use density::{spectral_score, DensityKind, SpectralDensity};
pub use features::{rff_features, rff_gram, FeatureMatrix};
pub use qmc::{halton, inverse_normal_cdf, HALTON_MAX_DIMS};
pub use samplers::{density_scores, sample_mc, sample_mc_with, sample_orf, sample_qmc, sample_svgd, Sampler};

/// An `R × d` matrix of spectral frequencies; row `r` is the frequency `ω_r`.
///
/// This is both the empirical spectral measure of a sparse-spectrum GP and the
/// matrix-valued particle that mixture training moves around.
#[derive(Debug, Clone, PartialEq)]
pub struct FrequencyMatrix(DMatrix<f64>);

impl FrequencyMatrix {
    pub fn new(entries: DMatrix<f64>) -> Result<Self> {
        if entries.nrows() == 0 || entries.ncols() == 0 {
            return Err(Error::config(format!(
                "frequency matrix must be at least 1x1, got {}x{}",
                entries.nrows(),
                entries.ncols()
            )));
        }
        if !entries.iter().all(|v| v.is_finite()) {
            return Err(Error::Numerical("frequency matrix has non-finite entries".into()));
        }
        Ok(Self(entries))
    }

    /// Builds from row-major values.
    pub fn from_row_slice(rows: usize, dims: usize, values: &[f64]) -> Result<Self> {
        if values.len() != rows * dims {
            return Err(Error::shape(format!(
                "expected {} values for a {rows}x{dims} frequency matrix, got {}",
                rows * dims,
                values.len()
            )));
        }
        Self::new(DMatrix::from_row_slice(rows, dims, values))
    }

    /// Number of frequencies `R`.
    pub fn rows(&self) -> usize {
        self.0.nrows()
    }

    /// Input dimension `d`.
    pub fn dims(&self) -> usize {
        self.0.ncols()
    }

    pub fn as_matrix(&self) -> &DMatrix<f64> {
        &self.0
    }

    pub fn into_inner(self) -> DMatrix<f64> {
        self.0
    }

    pub fn to_row_major(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.0.len());
        for r in 0..self.rows() {
            out.extend(self.0.row(r).iter());
        }
        out
    }
}

impl AsRef<DMatrix<f64>> for FrequencyMatrix {
    fn as_ref(&self) -> &DMatrix<f64> {
        &self.0
    }
}
