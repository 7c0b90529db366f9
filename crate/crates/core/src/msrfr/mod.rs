//! Mixture Stein random feature regression.
//!
//! `M` frequency matrices are SVGD particles over spectral measures. Each
//! step moves every component along
//! `(1/M) Σ_j [κ(Ω_m, Ω_j) S_j + α ∇_{Ω_j} κ(Ω_m, Ω_j)]`, where `S_j` is the
//! joint log-likelihood + log-prior score of component `j`, `κ(Ω, Ω')` is the
//! `R × R` row kernel and the second term is the summed row-Jacobian
//! repulsion. All terms are evaluated on the pre-step state.
//!
//! Predictions average the `M` SSGP predictives by Gaussian-mixture moments.

mod metrics;
mod model;

use nalgebra::{DMatrix, DVector};
use rand::seq::SliceRandom;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exact_gp::Prediction;
use crate::linalg::all_finite;
use crate::optim::{Optimizer, StepRule};
use crate::rng::seeded;
use crate::spectral::FrequencyMatrix;
use crate::ssgp::ssgp_nll_grad;
use crate::svgd::{matrix_kernel_grad_from, matrix_kernel_with_bandwidth, stack_rows, SteinKernelConfig};

pub use metrics::{nlpd, rmse};
pub use model::{FrequencyPrior, MixtureModel};

/// Temperatures tried when `α` is selected on held-out data.
pub const ALPHA_GRID: [f64; 5] = [0.1, 0.5, 1.0, 2.0, 5.0];

/// `∇_{Ω_m} [log p(D | Ω_m) + log p(Ω_m)]`.
pub fn component_score(
    model: &MixtureModel,
    m: usize,
    x: &DMatrix<f64>,
    y: &DVector<f64>,
) -> Result<DMatrix<f64>> {
    let ssgp = model.component(m)?;
    let grad = ssgp_nll_grad(&ssgp, x, y)?;
    Ok(model.prior().score(ssgp.frequencies().as_matrix()) - grad.frequencies)
}

struct ComponentTerms {
    score: DMatrix<f64>,
    log_noise_grad: f64,
}

fn component_terms(model: &MixtureModel, x: &DMatrix<f64>, y: &DVector<f64>) -> Result<Vec<ComponentTerms>> {
    // Collected in index order, so the later reductions do not depend on scheduling.
    (0..model.len())
        .into_par_iter()
        .map(|m| {
            let ssgp = model.component(m)?;
            let grad = ssgp_nll_grad(&ssgp, x, y)?;
            Ok(ComponentTerms {
                score: model.prior().score(ssgp.frequencies().as_matrix()) - grad.frequencies,
                log_noise_grad: grad.log_noise,
            })
        })
        .collect()
}

/// Update direction for every component given their scores.
pub fn msrfr_direction(
    model: &MixtureModel,
    scores: &[DMatrix<f64>],
    kernel: &SteinKernelConfig,
) -> Result<Vec<DMatrix<f64>>> {
    let comps = model.components();
    if scores.len() != comps.len() {
        return Err(Error::shape(format!(
            "{} scores for {} components",
            scores.len(),
            comps.len()
        )));
    }
    let h = kernel.resolve(&stack_rows(comps))?;
    let inv_m = 1.0 / comps.len() as f64;
    let alpha = model.alpha();
    let directions = comps
        .par_iter()
        .map(|om| {
            let mut acc = DMatrix::zeros(om.rows(), om.dims());
            for (oj, sj) in comps.iter().zip(scores) {
                let k = matrix_kernel_with_bandwidth(om, oj, h);
                acc += &k * sj;
                if alpha != 0.0 {
                    acc += matrix_kernel_grad_from(om, oj, &k, h) * alpha;
                }
            }
            acc * inv_m
        })
        .collect();
    Ok(directions)
}

/// One synchronous mixture update with constant step size (noise held fixed).
pub fn msrfr_step(
    model: &MixtureModel,
    x: &DMatrix<f64>,
    y: &DVector<f64>,
    step_size: f64,
    kernel: &SteinKernelConfig,
) -> Result<MixtureModel> {
    if !(step_size.is_finite() && step_size > 0.0) {
        return Err(Error::config(format!("step size must be positive, got {step_size}")));
    }
    let terms = component_terms(model, x, y)?;
    let scores: Vec<_> = terms.into_iter().map(|t| t.score).collect();
    let directions = msrfr_direction(model, &scores, kernel)?;
    let next = apply(model.components(), directions.iter().map(|d| d * step_size), 0)?;
    model.with_components(next)
}

fn apply<I>(comps: &[FrequencyMatrix], increments: I, iteration: usize) -> Result<Vec<FrequencyMatrix>>
where
    I: IntoIterator<Item = DMatrix<f64>>,
{
    comps
        .iter()
        .zip(increments)
        .enumerate()
        .map(|(m, (c, inc))| {
            let next = c.as_matrix() + inc;
            if !all_finite(&next) {
                return Err(Error::Divergence {
                    iteration,
                    detail: format!("component {m} has non-finite frequencies"),
                });
            }
            FrequencyMatrix::new(next)
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MsrfrConfig {
    pub step_size: f64,
    pub iterations: usize,
    pub optimizer: Optimizer,
    /// Learn the shared `log σ²` by descending the mean component NLL.
    pub learn_noise: bool,
    /// Select `α` from [`ALPHA_GRID`] on a held-out split instead of keeping
    /// the model's value.
    pub learn_alpha: bool,
    pub validation_fraction: f64,
    pub kernel: SteinKernelConfig,
    /// Seed for the validation split used by `learn_alpha`.
    pub seed: u64,
}

impl Default for MsrfrConfig {
    fn default() -> Self {
        Self {
            step_size: 0.01,
            iterations: 100,
            optimizer: Optimizer::Plain,
            learn_noise: true,
            learn_alpha: false,
            validation_fraction: 0.1,
            kernel: SteinKernelConfig::median_heuristic(),
            seed: 0,
        }
    }
}

impl MsrfrConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.step_size.is_finite() && self.step_size > 0.0) {
            return Err(Error::config(format!("step size must be positive, got {}", self.step_size)));
        }
        if self.iterations == 0 {
            return Err(Error::config("iterations must be at least 1"));
        }
        if !(self.validation_fraction > 0.0 && self.validation_fraction < 1.0) {
            return Err(Error::config("validation fraction must lie in (0, 1)"));
        }
        self.kernel.validate()
    }
}

/// Runs `iterations` synchronous mixture updates.
pub fn train_msrfr(
    x: &DMatrix<f64>,
    y: &DVector<f64>,
    init: &MixtureModel,
    config: &MsrfrConfig,
) -> Result<MixtureModel> {
    config.validate()?;
    if !config.learn_alpha {
        return run_msrfr(x, y, init, config);
    }
    let (fit_idx, val_idx) = holdout_split(y.len(), config.validation_fraction, config.seed)?;
    let (xf, yf) = (x.select_columns(&fit_idx), select(y, &fit_idx));
    let (xv, yv) = (x.select_columns(&val_idx), select(y, &val_idx));
    let mut best: Option<(f64, f64)> = None;
    for &alpha in ALPHA_GRID.iter() {
        let trained = match run_msrfr(&xf, &yf, &init.with_alpha(alpha)?, config) {
            Ok(m) => m,
            Err(e) => {
                log::warn!("alpha {alpha} failed during selection: {e}");
                continue;
            }
        };
        let (mean, _) = msrfr_predict_marginals(&trained, &xf, &yf, &xv)?;
        let score = rmse(mean.as_slice(), yv.as_slice())?;
        if best.is_none_or(|(_, s)| score < s) {
            best = Some((alpha, score));
        }
    }
    let (alpha, _) = best.ok_or_else(|| Error::OptimizationFailed {
        iteration: 0,
        detail: "every temperature in the selection grid diverged".into(),
        trace: Vec::new(),
    })?;
    run_msrfr(x, y, &init.with_alpha(alpha)?, config)
}

fn run_msrfr(
    x: &DMatrix<f64>,
    y: &DVector<f64>,
    init: &MixtureModel,
    config: &MsrfrConfig,
) -> Result<MixtureModel> {
    let mut model = init.clone();
    let mut rules: Vec<StepRule> = (0..model.len())
        .map(|_| StepRule::new(config.optimizer, config.step_size))
        .collect();
    let mut noise_rule = StepRule::new(config.optimizer, config.step_size);
    for iteration in 0..config.iterations {
        let terms = component_terms(&model, x, y).map_err(|e| Error::Divergence {
            iteration,
            detail: e.to_string(),
        })?;
        let mean_noise_grad =
            terms.iter().map(|t| t.log_noise_grad).sum::<f64>() / terms.len() as f64;
        let scores: Vec<_> = terms.into_iter().map(|t| t.score).collect();
        let directions = msrfr_direction(&model, &scores, &config.kernel)?;
        let increments: Vec<_> = rules
            .iter_mut()
            .zip(&directions)
            .map(|(rule, d)| rule.increment(d))
            .collect();
        let next = apply(model.components(), increments, iteration)?;
        model = model.with_components(next)?;
        if config.learn_noise {
            let log_noise = model.noise_variance().ln() + noise_rule.increment_scalar(-mean_noise_grad);
            let noise = log_noise.exp();
            if !(noise.is_finite() && noise > 0.0) {
                return Err(Error::Divergence {
                    iteration,
                    detail: "noise variance left the positive reals".into(),
                });
            }
            model = model.with_noise_variance(noise)?;
        }
    }
    Ok(model)
}

fn select(y: &DVector<f64>, idx: &[usize]) -> DVector<f64> {
    DVector::from_iterator(idx.len(), idx.iter().map(|&i| y[i]))
}

/// Seeded shuffle split into (fit, validation) index sets.
pub fn holdout_split(n: usize, fraction: f64, seed: u64) -> Result<(Vec<usize>, Vec<usize>)> {
    if n < 2 {
        return Err(Error::config("need at least two points for a validation split"));
    }
    let mut idx: Vec<usize> = (0..n).collect();
    idx.shuffle(&mut seeded(seed));
    let n_val = ((n as f64 * fraction).round() as usize).clamp(1, n - 1);
    let val = idx.split_off(n - n_val);
    Ok((idx, val))
}

/// Gaussian-mixture moments of equally weighted component predictions:
/// `μ = (1/M) Σ μ_m`, `Σ = (1/M) Σ [Σ_m + (μ_m - μ)(μ_m - μ)ᵀ]`.
pub fn mixture_moments(components: &[Prediction]) -> Result<Prediction> {
    let first = components
        .first()
        .ok_or_else(|| Error::config("mixture of zero predictions"))?;
    let n = first.mean.len();
    if components.iter().any(|p| p.mean.len() != n || p.covariance.shape() != (n, n)) {
        return Err(Error::shape("component predictions differ in size"));
    }
    let inv_m = 1.0 / components.len() as f64;
    let mut mean = DVector::zeros(n);
    for p in components {
        mean += &p.mean;
    }
    mean *= inv_m;
    let mut covariance = DMatrix::zeros(n, n);
    for p in components {
        let dev = &p.mean - &mean;
        covariance += &p.covariance;
        covariance.ger(1.0, &dev, &dev, 1.0);
    }
    covariance *= inv_m;
    Ok(Prediction { mean, covariance })
}

/// Mixture predictive distribution at `test_inputs`.
pub fn msrfr_predict(
    model: &MixtureModel,
    x: &DMatrix<f64>,
    y: &DVector<f64>,
    test_inputs: &DMatrix<f64>,
) -> Result<Prediction> {
    let preds = (0..model.len())
        .into_par_iter()
        .map(|m| model.component(m)?.condition(x, y)?.predict(test_inputs))
        .collect::<Result<Vec<_>>>()?;
    mixture_moments(&preds)
}

/// Mixture predictive mean and marginal variances only.
pub fn msrfr_predict_marginals(
    model: &MixtureModel,
    x: &DMatrix<f64>,
    y: &DVector<f64>,
    test_inputs: &DMatrix<f64>,
) -> Result<(DVector<f64>, DVector<f64>)> {
    let parts = (0..model.len())
        .into_par_iter()
        .map(|m| model.component(m)?.condition(x, y)?.predict_marginals(test_inputs))
        .collect::<Result<Vec<_>>>()?;
    let n = test_inputs.ncols();
    let inv_m = 1.0 / parts.len() as f64;
    let mut mean = DVector::zeros(n);
    for (mu, _) in &parts {
        mean += mu;
    }
    mean *= inv_m;
    let mut var = DVector::zeros(n);
    for (mu, v) in &parts {
        var += v;
        var += (mu - &mean).map(|d| d * d);
    }
    var *= inv_m;
    Ok((mean, var))
}
