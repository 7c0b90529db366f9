//! Sparse spectrum GP regression.
//!
//! With `Φ = Φ(X)` (`2R × N`) and `A = ΦΦᵀ + σ²I` (`2R × 2R`), the model is the
//! dense GP with kernel `ΦᵀΦ`, evaluated through a single Cholesky of `A`:
//!
//! * mean `Φ(X*)ᵀ A⁻¹ Φ y`, covariance `σ² Φ(X*)ᵀ A⁻¹ Φ(X*)`;
//! * NLL `(yᵀy - yᵀΦᵀA⁻¹Φy)/2σ² + ½log|A| + ((N - 2R)/2) log σ² + (N/2) log 2π`,
//!   which is the dense NLL rewritten with the determinant lemma.

use std::f64::consts::PI;

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exact_gp::Prediction;
use crate::linalg::{all_finite, cholesky_with_jitter, log_det};
use crate::optim::{Optimizer, StepRule};
use crate::spectral::{rff_features, sample_mc, FrequencyMatrix, SpectralDensity};
use crate::svgd::{matrix_kernel_grad_from, matrix_kernel_with_bandwidth, SteinKernelConfig};

#[derive(Debug, Clone, PartialEq)]
pub struct SsgpModel {
    frequencies: FrequencyMatrix,
    noise_variance: f64,
}

impl SsgpModel {
    pub fn new(frequencies: FrequencyMatrix, noise_variance: f64) -> Result<Self> {
        if !(noise_variance.is_finite() && noise_variance > 0.0) {
            return Err(Error::config(format!(
                "noise variance must be positive, got {noise_variance}"
            )));
        }
        Ok(Self {
            frequencies,
            noise_variance,
        })
    }

    /// MC frequencies from an isotropic RBF density whose lengthscale is
    /// `lengthscale_scale` times the median pairwise input distance, with noise
    /// variance `0.1 · var(y)`.
    pub fn initial(
        x: &DMatrix<f64>,
        y: &DVector<f64>,
        frequencies: usize,
        lengthscale_scale: f64,
        seed: u64,
    ) -> Result<Self> {
        let density = SpectralDensity::isotropic_rbf(
            median_lengthscale(x) * lengthscale_scale,
            x.nrows(),
        )?;
        let omega = sample_mc(&density, frequencies, seed)?;
        Self::new(omega, initial_noise_variance(y))
    }

    pub fn frequencies(&self) -> &FrequencyMatrix {
        &self.frequencies
    }

    pub fn noise_variance(&self) -> f64 {
        self.noise_variance
    }

    pub fn with_frequencies(&self, frequencies: FrequencyMatrix) -> Result<Self> {
        Self::new(frequencies, self.noise_variance)
    }

    pub fn with_noise_variance(&self, noise_variance: f64) -> Result<Self> {
        Self::new(self.frequencies.clone(), noise_variance)
    }

    /// Factorizes `A` against training data for repeated prediction.
    pub fn condition(&self, x: &DMatrix<f64>, y: &DVector<f64>) -> Result<ConditionedSsgp> {
        check_data(x, y, &self.frequencies)?;
        let phi = rff_features(x, &self.frequencies)?.into_inner();
        let a = gram_plus_noise(&phi, self.noise_variance);
        let chol = cholesky_with_jitter(&a)?;
        let weights = chol.solve(&(&phi * y));
        Ok(ConditionedSsgp {
            frequencies: self.frequencies.clone(),
            noise_variance: self.noise_variance,
            chol,
            weights,
        })
    }
}

/// An SSGP with the Cholesky factor of `A` and the posterior weight mean
/// `A⁻¹Φy` cached.
#[derive(Debug, Clone)]
pub struct ConditionedSsgp {
    frequencies: FrequencyMatrix,
    noise_variance: f64,
    chol: Cholesky<f64, Dyn>,
    weights: DVector<f64>,
}

impl ConditionedSsgp {
    pub fn predict(&self, test_inputs: &DMatrix<f64>) -> Result<Prediction> {
        let phi_s = rff_features(test_inputs, &self.frequencies)?.into_inner();
        let mean = phi_s.transpose() * &self.weights;
        let v = self
            .chol
            .l()
            .solve_lower_triangular(&phi_s)
            .ok_or_else(|| Error::Numerical("triangular solve failed".into()))?;
        let mut covariance = v.transpose() * v * self.noise_variance;
        covariance = (&covariance + covariance.transpose()) * 0.5;
        Ok(Prediction { mean, covariance })
    }

    /// Predictive mean and marginal variances only.
    pub fn predict_marginals(&self, test_inputs: &DMatrix<f64>) -> Result<(DVector<f64>, DVector<f64>)> {
        let phi_s = rff_features(test_inputs, &self.frequencies)?.into_inner();
        let mean = phi_s.transpose() * &self.weights;
        let v = self
            .chol
            .l()
            .solve_lower_triangular(&phi_s)
            .ok_or_else(|| Error::Numerical("triangular solve failed".into()))?;
        let var = DVector::from_iterator(
            v.ncols(),
            v.column_iter().map(|c| c.norm_squared() * self.noise_variance),
        );
        Ok((mean, var))
    }

    pub fn weights(&self) -> &DVector<f64> {
        &self.weights
    }
}

fn check_data(x: &DMatrix<f64>, y: &DVector<f64>, omega: &FrequencyMatrix) -> Result<()> {
    if x.ncols() != y.len() {
        return Err(Error::shape(format!("{} inputs but {} targets", x.ncols(), y.len())));
    }
    if x.nrows() != omega.dims() {
        return Err(Error::shape(format!(
            "inputs have dimension {}, frequencies {}",
            x.nrows(),
            omega.dims()
        )));
    }
    if !all_finite(x) || !y.iter().all(|v| v.is_finite()) {
        return Err(Error::Numerical("training data has non-finite values".into()));
    }
    Ok(())
}

fn gram_plus_noise(phi: &DMatrix<f64>, noise_variance: f64) -> DMatrix<f64> {
    let mut a = phi * phi.transpose();
    for i in 0..a.nrows() {
        a[(i, i)] += noise_variance;
    }
    a
}

/// Median pairwise Euclidean distance between input columns (at most the
/// first 1000 columns are used). Falls back to 1.0 for degenerate inputs.
pub fn median_lengthscale(x: &DMatrix<f64>) -> f64 {
    let n = x.ncols().min(1000);
    let mut dists = Vec::with_capacity(n * n.saturating_sub(1) / 2);
    for i in 0..n {
        for j in (i + 1)..n {
            dists.push((x.column(i) - x.column(j)).norm());
        }
    }
    if dists.is_empty() {
        return 1.0;
    }
    dists.sort_by(f64::total_cmp);
    let m = dists.len();
    let med = if m % 2 == 1 {
        dists[m / 2]
    } else {
        0.5 * (dists[m / 2 - 1] + dists[m / 2])
    };
    if med.is_finite() && med > 0.0 {
        med
    } else {
        1.0
    }
}

/// `0.1 · var(y)`, floored to stay positive.
pub fn initial_noise_variance(y: &DVector<f64>) -> f64 {
    let n = y.len() as f64;
    if y.len() < 2 {
        return 0.1;
    }
    let mean = y.mean();
    let var = y.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (0.1 * var).max(1e-6)
}

/// SSGP posterior predictive at `test_inputs`.
pub fn ssgp_predict(
    model: &SsgpModel,
    x: &DMatrix<f64>,
    y: &DVector<f64>,
    test_inputs: &DMatrix<f64>,
) -> Result<Prediction> {
    model.condition(x, y)?.predict(test_inputs)
}

/// SSGP negative log marginal likelihood.
pub fn ssgp_nll(model: &SsgpModel, x: &DMatrix<f64>, y: &DVector<f64>) -> Result<f64> {
    check_data(x, y, &model.frequencies)?;
    let phi = rff_features(x, &model.frequencies)?.into_inner();
    let (nll, _) = nll_parts(&phi, y, model.noise_variance)?;
    Ok(nll)
}

struct NllParts {
    chol: Cholesky<f64, Dyn>,
    alpha: DVector<f64>,
}

fn nll_parts(phi: &DMatrix<f64>, y: &DVector<f64>, noise: f64) -> Result<(f64, NllParts)> {
    let two_r = phi.nrows() as f64;
    let n = y.len() as f64;
    let a = gram_plus_noise(phi, noise);
    let chol = cholesky_with_jitter(&a)?;
    let b = phi * y;
    let alpha = chol.solve(&b);
    let nll = (y.dot(y) - b.dot(&alpha)) / (2.0 * noise)
        + 0.5 * log_det(&chol)
        + 0.5 * (n - two_r) * noise.ln()
        + 0.5 * n * (2.0 * PI).ln();
    if !nll.is_finite() {
        return Err(Error::Numerical("non-finite SSGP NLL".into()));
    }
    Ok((nll, NllParts { chol, alpha }))
}

/// Gradient of [`ssgp_nll`] in the frequencies and in `log σ²`.
#[derive(Debug, Clone, PartialEq)]
pub struct SsgpGradient {
    pub nll: f64,
    pub frequencies: DMatrix<f64>,
    pub log_noise: f64,
}

/// Analytic NLL gradient.
///
/// `∂NLL/∂Φ = G = α(Φᵀα - y)ᵀ/σ² + A⁻¹Φ` with `α = A⁻¹Φy`; each `ω_r` only
/// touches rows `2r` and `2r + 1` of `Φ`, whose derivatives in `ω_{r,k}` are
/// `-x_k sin(·)/√R = -x_k Φ_{2r+1}` and `x_k cos(·)/√R = x_k Φ_{2r}`.
pub fn ssgp_nll_grad(model: &SsgpModel, x: &DMatrix<f64>, y: &DVector<f64>) -> Result<SsgpGradient> {
    check_data(x, y, &model.frequencies)?;
    let noise = model.noise_variance;
    let phi = rff_features(x, &model.frequencies)?.into_inner();
    let (nll, NllParts { chol, alpha }) = nll_parts(&phi, y, noise)?;

    let r = model.frequencies.rows();
    let n = y.len();
    let residual = phi.transpose() * &alpha - y;
    let mut g = chol.solve(&phi);
    g.ger(1.0 / noise, &alpha, &residual, 1.0);

    let mut h = DMatrix::zeros(r, n);
    for c in 0..n {
        for k in 0..r {
            h[(k, c)] = g[(2 * k + 1, c)] * phi[(2 * k, c)] - g[(2 * k, c)] * phi[(2 * k + 1, c)];
        }
    }
    let frequencies = h * x.transpose();

    // d/dσ² = -½‖C⁻¹y‖² + ½tr(C⁻¹) with C = ΦᵀΦ + σ²I, via the push-through identity.
    let v = -residual / noise;
    let trace_a_inv = chol.inverse().trace();
    let trace_c_inv = (n as f64 - 2.0 * r as f64 + noise * trace_a_inv) / noise;
    let log_noise = noise * (-0.5 * v.norm_squared() + 0.5 * trace_c_inv);

    if !all_finite(&frequencies) || !log_noise.is_finite() {
        return Err(Error::Numerical("non-finite SSGP gradient".into()));
    }
    Ok(SsgpGradient {
        nll,
        frequencies,
        log_noise,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub step_size: f64,
    pub iterations: usize,
    /// Weight of the entropy (repulsion) term for the SVGD trainer.
    pub entropy_weight: f64,
    pub optimizer: Optimizer,
    /// Learn `log σ²` jointly with the frequencies.
    pub learn_noise: bool,
    /// Keep the frequencies fixed (only the noise moves).
    pub freeze_frequencies: bool,
    pub kernel: SteinKernelConfig,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            step_size: 0.01,
            iterations: 100,
            entropy_weight: 1.0,
            optimizer: Optimizer::Plain,
            learn_noise: true,
            freeze_frequencies: false,
            kernel: SteinKernelConfig::median_heuristic(),
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.step_size.is_finite() && self.step_size > 0.0) {
            return Err(Error::config(format!("step size must be positive, got {}", self.step_size)));
        }
        if self.iterations == 0 {
            return Err(Error::config("iterations must be at least 1"));
        }
        if !(self.entropy_weight.is_finite() && self.entropy_weight >= 0.0) {
            return Err(Error::config("entropy weight must be non-negative"));
        }
        self.kernel.validate()
    }
}

const MAX_BACKTRACKS: usize = 20;

/// Gradient descent on the NLL with backtracking, returning the per-iteration
/// NLL trace alongside the model.
///
/// Each proposed step is halved up to 20 times until the NLL does not
/// increase. When no halving gives a finite, non-increasing NLL but some trial
/// was finite, the model is at a numerical stationary point and training stops
/// early; when every trial is non-finite the run fails.
pub fn train_ssgp_mle_with_trace(
    x: &DMatrix<f64>,
    y: &DVector<f64>,
    init: &SsgpModel,
    config: &TrainConfig,
) -> Result<(SsgpModel, Vec<f64>)> {
    config.validate()?;
    let mut model = init.clone();
    let mut freq_rule = StepRule::new(config.optimizer, config.step_size);
    let mut noise_rule = StepRule::new(config.optimizer, config.step_size);
    let mut trace = Vec::with_capacity(config.iterations + 1);
    let mut grad = ssgp_nll_grad(&model, x, y)?;
    trace.push(grad.nll);

    for iteration in 0..config.iterations {
        let freq_inc = if config.freeze_frequencies {
            DMatrix::zeros(grad.frequencies.nrows(), grad.frequencies.ncols())
        } else {
            freq_rule.increment(&(-&grad.frequencies))
        };
        let noise_inc = if config.learn_noise {
            noise_rule.increment_scalar(-grad.log_noise)
        } else {
            0.0
        };

        let mut scale = 1.0;
        let mut any_finite = false;
        let mut accepted = None;
        for _ in 0..=MAX_BACKTRACKS {
            let omega = model.frequencies.as_matrix() + &freq_inc * scale;
            let noise = (model.noise_variance.ln() + noise_inc * scale).exp();
            let candidate = FrequencyMatrix::new(omega)
                .and_then(|f| SsgpModel::new(f, noise));
            if let Ok(candidate) = candidate {
                if let Ok(g) = ssgp_nll_grad(&candidate, x, y) {
                    any_finite = true;
                    if g.nll <= grad.nll {
                        accepted = Some((candidate, g));
                        break;
                    }
                }
            }
            scale *= 0.5;
        }
        match accepted {
            Some((m, g)) => {
                model = m;
                grad = g;
                trace.push(grad.nll);
            }
            None if any_finite => {
                log::debug!("MLE stopped at iteration {iteration}: no descent after backtracking");
                break;
            }
            None => {
                return Err(Error::OptimizationFailed {
                    iteration,
                    detail: "every backtracked step gave a non-finite objective".into(),
                    trace,
                })
            }
        }
    }
    Ok((model, trace))
}

/// Maximum-likelihood training of the frequencies (and optionally the noise).
pub fn train_ssgp_mle(
    x: &DMatrix<f64>,
    y: &DVector<f64>,
    init: &SsgpModel,
    config: &TrainConfig,
) -> Result<SsgpModel> {
    train_ssgp_mle_with_trace(x, y, init, config).map(|(m, _)| m)
}

/// Entropy-regularized functional training: the `R` frequencies are SVGD
/// particles driven by the likelihood score,
/// `ω_i ← ω_i + ε Σ_r [κ(ω_i, ω_r) ∇_{ω_r} log p(y|Ω) + (η/R) ∇_{ω_r} κ(ω_i, ω_r)]`.
pub fn train_ssgp_svgd(
    x: &DMatrix<f64>,
    y: &DVector<f64>,
    init: &SsgpModel,
    config: &TrainConfig,
) -> Result<SsgpModel> {
    config.validate()?;
    let mut model = init.clone();
    let r = model.frequencies.rows() as f64;
    let mut freq_rule = StepRule::new(config.optimizer, config.step_size);
    let mut noise_rule = StepRule::new(config.optimizer, config.step_size);
    for iteration in 0..config.iterations {
        let grad = ssgp_nll_grad(&model, x, y).map_err(|e| Error::Divergence {
            iteration,
            detail: e.to_string(),
        })?;
        let omega = &model.frequencies;
        let h = config.kernel.resolve(omega.as_matrix())?;
        let kernel = matrix_kernel_with_bandwidth(omega, omega, h);
        let mut direction = &kernel * (-&grad.frequencies);
        if config.entropy_weight > 0.0 {
            let repulsion = matrix_kernel_grad_from(omega, omega, &kernel, h);
            direction += repulsion * (config.entropy_weight / r);
        }
        let next = if config.freeze_frequencies {
            omega.as_matrix().clone()
        } else {
            omega.as_matrix() + freq_rule.increment(&direction)
        };
        let noise = if config.learn_noise {
            (model.noise_variance.ln() + noise_rule.increment_scalar(-grad.log_noise)).exp()
        } else {
            model.noise_variance
        };
        if !all_finite(&next) || !(noise.is_finite() && noise > 0.0) {
            return Err(Error::Divergence {
                iteration,
                detail: "non-finite frequencies or noise".into(),
            });
        }
        model = SsgpModel::new(FrequencyMatrix::new(next)?, noise)?;
    }
    Ok(model)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::exact_gp::{gp_nll, gp_predict, DenseGp, GpKernel};
    use crate::linalg::min_eigenvalue;
    use crate::rng::seeded;
    use rand_distr::{Distribution, StandardNormal};

    fn randn(rows: usize, cols: usize, seed: u64) -> DMatrix<f64> {
        let mut rng = seeded(seed);
        DMatrix::from_fn(rows, cols, |_, _| StandardNormal.sample(&mut rng))
    }

    fn problem(n: usize, r: usize, d: usize, seed: u64) -> (SsgpModel, DMatrix<f64>, DVector<f64>) {
        let x = randn(d, n, seed);
        let y = DVector::from_iterator(n, randn(n, 1, seed + 1000).iter().copied());
        let omega = FrequencyMatrix::new(randn(r, d, seed + 2000)).unwrap();
        (SsgpModel::new(omega, 0.3).unwrap(), x, y)
    }

    fn dense(model: &SsgpModel, x: &DMatrix<f64>, y: &DVector<f64>) -> DenseGp {
        DenseGp::new(
            GpKernel::Features(model.frequencies().clone()),
            model.noise_variance(),
            x.clone(),
            y.clone(),
        )
        .unwrap()
    }

    #[test]
    fn woodbury_prediction_and_nll() {
        for seed in 0..5 {
            let (model, x, y) = problem(12, 3, 2, seed);
            let xs = randn(2, 4, seed + 50);
            let a = ssgp_predict(&model, &x, &y, &xs).unwrap();
            let b = gp_predict(&dense(&model, &x, &y), &xs).unwrap();
            assert!((a.mean - b.mean).abs().max() < 1e-8);
            assert!((a.covariance - b.covariance).abs().max() < 1e-8);
            let nll = ssgp_nll(&model, &x, &y).unwrap();
            assert!((nll - gp_nll(&dense(&model, &x, &y)).unwrap()).abs() < 1e-8);
        }
    }

    #[test]
    fn zero_targets_give_zero_mean() {
        let (model, x, _) = problem(8, 2, 1, 3);
        let pred = ssgp_predict(&model, &x, &DVector::zeros(8), &randn(1, 5, 9)).unwrap();
        assert!(pred.mean.iter().all(|m| *m == 0.0));
        assert!(pred.variances().iter().all(|v| *v >= -1e-12));
        assert!(min_eigenvalue(&pred.covariance) > -1e-10);
    }

    #[test]
    fn mean_shrinks_with_noise() {
        let (model, x, y) = problem(10, 3, 2, 4);
        let norms: Vec<f64> = [0.1, 1.0, 10.0]
            .iter()
            .map(|&s| {
                let m = model.with_noise_variance(s).unwrap();
                ssgp_predict(&m, &x, &y, &x).unwrap().mean.norm()
            })
            .collect();
        assert!(norms[0] > norms[1] && norms[1] > norms[2], "{norms:?}");
    }

    #[test]
    fn nll_single_point() {
        let model = SsgpModel::new(FrequencyMatrix::from_row_slice(1, 1, &[0.7]).unwrap(), 1.0).unwrap();
        let nll = ssgp_nll(&model, &DMatrix::zeros(1, 1), &DVector::zeros(1)).unwrap();
        assert!((nll - (0.5 * 2f64.ln() + 0.5 * (2.0 * PI).ln())).abs() < 1e-14);
    }

    #[test]
    fn duplicate_point_changes_nll_like_dense() {
        let (model, x, y) = problem(6, 2, 2, 7);
        let mut cols: Vec<usize> = (0..6).collect();
        cols.push(2);
        let x2 = x.select_columns(&cols);
        let y2 = DVector::from_iterator(7, cols.iter().map(|&i| y[i]));
        let ds = ssgp_nll(&model, &x2, &y2).unwrap() - ssgp_nll(&model, &x, &y).unwrap();
        let dd = gp_nll(&dense(&model, &x2, &y2)).unwrap() - gp_nll(&dense(&model, &x, &y)).unwrap();
        assert!((ds - dd).abs() < 1e-8);
    }

    fn fd_check(model: &SsgpModel, x: &DMatrix<f64>, y: &DVector<f64>) {
        let g = ssgp_nll_grad(model, x, y).unwrap();
        let h = 1e-5;
        let base = model.frequencies().as_matrix();
        for i in 0..base.nrows() {
            for k in 0..base.ncols() {
                let mut p = base.clone();
                p[(i, k)] += h;
                let mut m = base.clone();
                m[(i, k)] -= h;
                let fp = ssgp_nll(&model.with_frequencies(FrequencyMatrix::new(p).unwrap()).unwrap(), x, y).unwrap();
                let fm = ssgp_nll(&model.with_frequencies(FrequencyMatrix::new(m).unwrap()).unwrap(), x, y).unwrap();
                let fd = (fp - fm) / (2.0 * h);
                let an = g.frequencies[(i, k)];
                assert!((fd - an).abs() <= 1e-5 * an.abs().max(1.0), "({i},{k}): fd {fd} vs {an}");
            }
        }
        let s = model.noise_variance().ln();
        let fp = ssgp_nll(&model.with_noise_variance((s + h).exp()).unwrap(), x, y).unwrap();
        let fm = ssgp_nll(&model.with_noise_variance((s - h).exp()).unwrap(), x, y).unwrap();
        let fd = (fp - fm) / (2.0 * h);
        assert!((fd - g.log_noise).abs() <= 1e-5 * g.log_noise.abs().max(1.0));
    }

    #[test]
    fn gradient_matches_finite_differences() {
        for seed in 0..6 {
            let (model, x, y) = problem(4 + seed as usize * 2, 1 + seed as usize % 4, 1 + seed as usize % 3, seed);
            fd_check(&model, &x, &y);
        }
    }

    #[test]
    fn gradient_with_zero_targets() {
        let (model, x, _) = problem(9, 3, 2, 31);
        fd_check(&model, &x, &DVector::zeros(9));
    }

    #[test]
    fn gradient_is_row_equivariant() {
        let (model, x, y) = problem(10, 3, 2, 41);
        let perm = [2, 0, 1];
        let permuted = FrequencyMatrix::new(model.frequencies().as_matrix().select_rows(&perm)).unwrap();
        let g = ssgp_nll_grad(&model, &x, &y).unwrap();
        let gp = ssgp_nll_grad(&model.with_frequencies(permuted).unwrap(), &x, &y).unwrap();
        assert!((g.frequencies.select_rows(&perm) - gp.frequencies).abs().max() < 1e-12);
    }

    #[test]
    fn mle_tiny_step_is_continuous_and_deterministic() {
        let (model, x, y) = problem(10, 2, 2, 5);
        let cfg = TrainConfig {
            step_size: 1e-14,
            iterations: 1,
            ..TrainConfig::default()
        };
        let out = train_ssgp_mle(&x, &y, &model, &cfg).unwrap();
        assert!((out.frequencies().as_matrix() - model.frequencies().as_matrix()).abs().max() < 1e-10);
        assert!((out.noise_variance() - model.noise_variance()).abs() < 1e-10);
        let cfg = TrainConfig { iterations: 0, ..cfg };
        assert!(train_ssgp_mle(&x, &y, &model, &cfg).is_err());
    }

    #[test]
    fn mle_trace_is_monotone() {
        let (model, x, y) = problem(20, 3, 2, 6);
        let cfg = TrainConfig {
            step_size: 0.05,
            iterations: 30,
            ..TrainConfig::default()
        };
        let (_, trace) = train_ssgp_mle_with_trace(&x, &y, &model, &cfg).unwrap();
        assert!(trace.windows(2).all(|w| w[1] <= w[0]));
        assert!(trace.last().unwrap() < &trace[0]);
        let again = train_ssgp_mle_with_trace(&x, &y, &model, &cfg).unwrap().1;
        assert_eq!(trace, again);
    }

    #[test]
    fn svgd_trainer_with_localized_kernel_matches_mle_step() {
        let (model, x, y) = problem(15, 3, 2, 8);
        let cfg = TrainConfig {
            step_size: 1e-3,
            iterations: 1,
            entropy_weight: 0.0,
            learn_noise: false,
            kernel: SteinKernelConfig::fixed(1e-8).unwrap(),
            ..TrainConfig::default()
        };
        let a = train_ssgp_svgd(&x, &y, &model, &cfg).unwrap();
        let b = train_ssgp_mle(&x, &y, &model, &cfg).unwrap();
        let diff = (a.frequencies().as_matrix() - b.frequencies().as_matrix()).abs().max();
        assert!(diff < 1e-4, "{diff}");
    }

    fn min_pairwise(m: &DMatrix<f64>) -> f64 {
        let mut best = f64::INFINITY;
        for i in 0..m.nrows() {
            for j in (i + 1)..m.nrows() {
                best = best.min((m.row(i) - m.row(j)).norm());
            }
        }
        best
    }

    #[test]
    fn strong_entropy_spreads_frequencies() {
        let (model, x, _) = problem(10, 4, 1, 9);
        let close = FrequencyMatrix::from_row_slice(4, 1, &[0.0, 0.1, 0.25, 0.3]).unwrap();
        let model = model.with_frequencies(close).unwrap();
        let y = DVector::zeros(10);
        let cfg = TrainConfig {
            step_size: 1e-4,
            iterations: 1,
            entropy_weight: 1e3,
            learn_noise: false,
            ..TrainConfig::default()
        };
        let mut current = model;
        let mut dist = min_pairwise(current.frequencies().as_matrix());
        for _ in 0..10 {
            current = train_ssgp_svgd(&x, &y, &current, &cfg).unwrap();
            let d = min_pairwise(current.frequencies().as_matrix());
            assert!(d > dist);
            dist = d;
        }
    }

    #[test]
    fn svgd_trainer_is_deterministic() {
        let x = randn(2, 30, 3);
        let y = DVector::from_iterator(30, x.row(0).iter().map(|v| v.sin()));
        let init = SsgpModel::initial(&x, &y, 5, 1.0, 42).unwrap();
        let cfg = TrainConfig {
            step_size: 0.01,
            iterations: 20,
            optimizer: Optimizer::Adagrad,
            ..TrainConfig::default()
        };
        let a = train_ssgp_svgd(&x, &y, &init, &cfg).unwrap();
        let b = train_ssgp_svgd(&x, &y, &init, &cfg).unwrap();
        assert_eq!(a, b);
    }
}
