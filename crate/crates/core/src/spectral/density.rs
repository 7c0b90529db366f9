use std::f64::consts::PI;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DensityKind {
    /// Fourier dual of the RBF kernel: `N(0, ℓ_j^-2)` independently per dimension.
    GaussianRbf,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SpectralDensity {
    kind: DensityKind,
    lengthscales: Vec<f64>,
}

impl SpectralDensity {
    pub fn gaussian_rbf(lengthscales: Vec<f64>) -> Result<Self> {
        if lengthscales.is_empty() {
            return Err(Error::config("spectral density needs at least one lengthscale"));
        }
        if let Some(bad) = lengthscales.iter().find(|l| !(l.is_finite() && **l > 0.0)) {
            return Err(Error::config(format!(
                "lengthscales must be strictly positive, got {bad}"
            )));
        }
        Ok(Self {
            kind: DensityKind::GaussianRbf,
            lengthscales,
        })
    }

    /// Isotropic RBF density in `dims` dimensions.
    pub fn isotropic_rbf(lengthscale: f64, dims: usize) -> Result<Self> {
        Self::gaussian_rbf(vec![lengthscale; dims])
    }

    pub fn kind(&self) -> DensityKind {
        self.kind
    }

    pub fn dims(&self) -> usize {
        self.lengthscales.len()
    }

    pub fn lengthscales(&self) -> &[f64] {
        &self.lengthscales
    }

    /// Per-dimension standard deviation of the frequency distribution.
    pub fn frequency_scale(&self, dim: usize) -> f64 {
        1.0 / self.lengthscales[dim]
    }

    fn check_point(&self, omega: &[f64]) -> Result<()> {
        if omega.len() != self.dims() {
            return Err(Error::shape(format!(
                "frequency has {} components, density has {}",
                omega.len(),
                self.dims()
            )));
        }
        if !omega.iter().all(|v| v.is_finite()) {
            return Err(Error::Numerical("frequency has non-finite components".into()));
        }
        Ok(())
    }

    /// `∇_ω log π(ω)`.
    pub fn score(&self, omega: &[f64]) -> Result<Vec<f64>> {
        self.check_point(omega)?;
        Ok(match self.kind {
            DensityKind::GaussianRbf => omega
                .iter()
                .zip(&self.lengthscales)
                .map(|(w, l)| -w * l * l)
                .collect(),
        })
    }

    /// Normalized `log π(ω)`.
    pub fn log_density(&self, omega: &[f64]) -> Result<f64> {
        self.check_point(omega)?;
        Ok(match self.kind {
            DensityKind::GaussianRbf => omega
                .iter()
                .zip(&self.lengthscales)
                .map(|(w, l)| {
                    let precision = l * l;
                    0.5 * (precision / (2.0 * PI)).ln() - 0.5 * w * w * precision
                })
                .sum(),
        })
    }

    /// Exact kernel value `k(Δ)` this density is the spectral measure of.
    pub fn kernel(&self, delta: &[f64]) -> f64 {
        match self.kind {
            DensityKind::GaussianRbf => {
                let q: f64 = delta
                    .iter()
                    .zip(&self.lengthscales)
                    .map(|(d, l)| (d / l) * (d / l))
                    .sum();
                (-0.5 * q).exp()
            }
        }
    }
}

/// Score function `∇_ω log π(ω)` of a spectral density.
pub fn spectral_score(density: &SpectralDensity, omega: &[f64]) -> Result<Vec<f64>> {
    density.score(omega)
}
