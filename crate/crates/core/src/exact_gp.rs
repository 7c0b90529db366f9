//! Dense GP regression: exact Gram matrices, predictions and marginal
//! likelihood, plus the Nyström baseline and the Gram approximation metric.
//!
//! Everything here is `O(N³)` and serves as the reference the low-rank
//! models are checked against.

use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector};
use rand::seq::index;

use crate::error::{Error, Result};
use crate::linalg::{cholesky_with_jitter, log_det};
use crate::rng::seeded;
use crate::spectral::{rff_features, FrequencyMatrix};

/// Predictive mean and covariance at a set of test inputs.
#[derive(Debug, Clone, PartialEq)]
pub struct Prediction {
    pub mean: DVector<f64>,
    pub covariance: DMatrix<f64>,
}

impl Prediction {
    pub fn variances(&self) -> DVector<f64> {
        self.covariance.diagonal()
    }
}

fn check_lengthscales(x: &DMatrix<f64>, lengthscales: &[f64]) -> Result<()> {
    if lengthscales.len() != x.nrows() {
        return Err(Error::shape(format!(
            "{} lengthscales for {}-dimensional inputs",
            lengthscales.len(),
            x.nrows()
        )));
    }
    if lengthscales.iter().any(|l| !(l.is_finite() && *l > 0.0)) {
        return Err(Error::config("lengthscales must be strictly positive"));
    }
    Ok(())
}

/// RBF cross-covariance between the columns of `a` and `b`.
pub fn rbf_cross_gram(a: &DMatrix<f64>, b: &DMatrix<f64>, lengthscales: &[f64]) -> Result<DMatrix<f64>> {
    check_lengthscales(a, lengthscales)?;
    if a.nrows() != b.nrows() {
        return Err(Error::shape(format!(
            "inputs of dimension {} and {}",
            a.nrows(),
            b.nrows()
        )));
    }
    Ok(DMatrix::from_fn(a.ncols(), b.ncols(), |i, j| {
        let mut q = 0.0;
        for (k, l) in lengthscales.iter().enumerate() {
            let diff = (a[(k, i)] - b[(k, j)]) / l;
            q += diff * diff;
        }
        (-0.5 * q).exp()
    }))
}

/// Exact RBF Gram matrix of the columns of `x` (`d × N`).
pub fn exact_gram(x: &DMatrix<f64>, lengthscales: &[f64]) -> Result<DMatrix<f64>> {
    rbf_cross_gram(x, x, lengthscales)
}

/// Covariance function of a dense GP.
#[derive(Debug, Clone, PartialEq)]
pub enum GpKernel {
    /// `exp(-Σ_j Δ_j² / 2ℓ_j²)`.
    Rbf { lengthscales: Vec<f64> },
    /// `Φ(x)ᵀΦ(x')` for a fixed set of frequencies.
    Features(FrequencyMatrix),
}

impl GpKernel {
    pub fn cross(&self, a: &DMatrix<f64>, b: &DMatrix<f64>) -> Result<DMatrix<f64>> {
        match self {
            GpKernel::Rbf { lengthscales } => rbf_cross_gram(a, b, lengthscales),
            GpKernel::Features(omega) => {
                let pa = rff_features(a, omega)?;
                let pb = rff_features(b, omega)?;
                Ok(pa.as_matrix().transpose() * pb.as_matrix())
            }
        }
    }

    fn dims(&self) -> usize {
        match self {
            GpKernel::Rbf { lengthscales } => lengthscales.len(),
            GpKernel::Features(omega) => omega.dims(),
        }
    }
}

#[derive(Debug, Clone)]
pub struct DenseGp {
    kernel: GpKernel,
    noise_variance: f64,
    inputs: DMatrix<f64>,
    targets: DVector<f64>,
}

impl DenseGp {
    pub fn new(
        kernel: GpKernel,
        noise_variance: f64,
        inputs: DMatrix<f64>,
        targets: DVector<f64>,
    ) -> Result<Self> {
        if !(noise_variance.is_finite() && noise_variance > 0.0) {
            return Err(Error::config(format!(
                "noise variance must be positive, got {noise_variance}"
            )));
        }
        if inputs.ncols() == 0 {
            return Err(Error::config("dense GP needs at least one training point"));
        }
        if inputs.ncols() != targets.len() {
            return Err(Error::shape(format!(
                "{} inputs but {} targets",
                inputs.ncols(),
                targets.len()
            )));
        }
        if inputs.nrows() != kernel.dims() {
            return Err(Error::shape(format!(
                "inputs have dimension {}, kernel expects {}",
                inputs.nrows(),
                kernel.dims()
            )));
        }
        Ok(Self {
            kernel,
            noise_variance,
            inputs,
            targets,
        })
    }

    pub fn kernel(&self) -> &GpKernel {
        &self.kernel
    }

    pub fn noise_variance(&self) -> f64 {
        self.noise_variance
    }

    fn noisy_gram(&self) -> Result<DMatrix<f64>> {
        let mut k = self.kernel.cross(&self.inputs, &self.inputs)?;
        for i in 0..k.nrows() {
            k[(i, i)] += self.noise_variance;
        }
        Ok(k)
    }
}

/// Posterior predictive mean and covariance of a dense GP.
pub fn gp_predict(model: &DenseGp, test_inputs: &DMatrix<f64>) -> Result<Prediction> {
    let chol = cholesky_with_jitter(&model.noisy_gram()?)?;
    let k_xs = model.kernel.cross(&model.inputs, test_inputs)?;
    let k_ss = model.kernel.cross(test_inputs, test_inputs)?;
    let alpha = chol.solve(&model.targets);
    let mean = k_xs.transpose() * alpha;
    let v = chol.l().solve_lower_triangular(&k_xs).ok_or_else(|| {
        Error::Numerical("triangular solve failed in dense prediction".into())
    })?;
    let mut covariance = k_ss - v.transpose() * v;
    covariance = (&covariance + covariance.transpose()) * 0.5;
    Ok(Prediction { mean, covariance })
}

/// Negative log marginal likelihood
/// `½ log|K + σ²I| + ½ yᵀ(K + σ²I)⁻¹y + (N/2) log 2π`.
pub fn gp_nll(model: &DenseGp) -> Result<f64> {
    let chol = cholesky_with_jitter(&model.noisy_gram()?)?;
    let alpha = chol.solve(&model.targets);
    let n = model.targets.len() as f64;
    Ok(0.5 * log_det(&chol) + 0.5 * model.targets.dot(&alpha) + 0.5 * n * (2.0 * PI).ln())
}

const NYSTROM_EIGEN_FLOOR: f64 = 1e-10;

/// Nyström approximation `K_nm K_mm⁺ K_mn` with `landmarks` columns drawn
/// uniformly without replacement.
pub fn nystrom_gram(
    x: &DMatrix<f64>,
    lengthscales: &[f64],
    landmarks: usize,
    seed: u64,
) -> Result<DMatrix<f64>> {
    let n = x.ncols();
    if landmarks == 0 || landmarks > n {
        return Err(Error::config(format!(
            "landmark count must be in 1..={n}, got {landmarks}"
        )));
    }
    let mut rng = seeded(seed);
    let mut picked = index::sample(&mut rng, n, landmarks).into_vec();
    picked.sort_unstable();
    let xm = x.select_columns(&picked);
    let k_nm = rbf_cross_gram(x, &xm, lengthscales)?;
    let k_mm = rbf_cross_gram(&xm, &xm, lengthscales)?;
    let eig = k_mm.symmetric_eigen();
    // K̂ = B Bᵀ with B = K_nm U Λ^{-1/2} over the retained eigenpairs.
    let keep: Vec<usize> = (0..landmarks)
        .filter(|&i| eig.eigenvalues[i] > NYSTROM_EIGEN_FLOOR)
        .collect();
    let mut u = eig.eigenvectors.select_columns(&keep);
    for (c, &i) in keep.iter().enumerate() {
        let s = 1.0 / eig.eigenvalues[i].sqrt();
        u.column_mut(c).scale_mut(s);
    }
    let b = k_nm * u;
    Ok(&b * b.transpose())
}

/// Relative Frobenius error `‖K - K̂‖_F / ‖K‖_F`.
pub fn gram_error(exact: &DMatrix<f64>, approx: &DMatrix<f64>) -> Result<f64> {
    if exact.shape() != approx.shape() {
        return Err(Error::shape(format!(
            "Gram matrices are {:?} and {:?}",
            exact.shape(),
            approx.shape()
        )));
    }
    let norm = exact.norm();
    if norm == 0.0 {
        return Err(Error::Numerical("reference Gram matrix has zero norm".into()));
    }
    Ok((exact - approx).norm() / norm)
}
