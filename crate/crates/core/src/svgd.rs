//! Stein variational gradient descent.
//!
//! Vector particles are the rows of a matrix (`M × d`). Matrix particles are
//! [`FrequencyMatrix`] values; their kernel is the `R × R` matrix of row-wise
//! kernel values, and the repulsion term sums the row Jacobians.
//!
//! The Stein kernel is `κ(a, b) = exp(-‖a - b‖² / h)`. Rows of two matrix
//! particles are compared index by index with no alignment step, so the
//! kernel between two frequency matrices depends on their row order even
//! though the spectral measures they represent do not.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{all_finite, pairwise_sq_dists_rows};
use crate::optim::{Optimizer, StepRule};
use crate::spectral::FrequencyMatrix;

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Bandwidth {
    /// `h = med² / log(M + 1)` over pairwise distances of the current particles.
    #[default]
    MedianHeuristic,
    Fixed(f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct SteinKernelConfig {
    pub bandwidth: Bandwidth,
}

impl SteinKernelConfig {
    pub fn median_heuristic() -> Self {
        Self {
            bandwidth: Bandwidth::MedianHeuristic,
        }
    }

    pub fn fixed(h: f64) -> Result<Self> {
        if !(h.is_finite() && h > 0.0) {
            return Err(Error::config(format!("fixed bandwidth must be positive, got {h}")));
        }
        Ok(Self {
            bandwidth: Bandwidth::Fixed(h),
        })
    }

    pub fn validate(&self) -> Result<()> {
        match self.bandwidth {
            Bandwidth::Fixed(h) if !(h.is_finite() && h > 0.0) => Err(Error::config(format!(
                "fixed bandwidth must be positive, got {h}"
            ))),
            _ => Ok(()),
        }
    }

    /// Concrete bandwidth for a point set given as matrix rows.
    ///
    /// With fewer than two points the median heuristic is undefined; any
    /// bandwidth gives the same update there, so 1.0 is returned.
    pub fn resolve(&self, points: &DMatrix<f64>) -> Result<f64> {
        self.validate()?;
        match self.bandwidth {
            Bandwidth::Fixed(h) => Ok(h),
            Bandwidth::MedianHeuristic if points.nrows() < 2 => Ok(1.0),
            Bandwidth::MedianHeuristic => median_bandwidth(points),
        }
    }
}

/// Median-heuristic bandwidth `med² / log(M + 1)` over the rows of `points`.
///
/// Returns 1.0 when the median pairwise distance is zero.
pub fn median_bandwidth(points: &DMatrix<f64>) -> Result<f64> {
    let m = points.nrows();
    if m < 2 {
        return Err(Error::config(format!(
            "median bandwidth needs at least 2 points, got {m}"
        )));
    }
    let mut dists = Vec::with_capacity(m * (m - 1) / 2);
    for i in 0..m {
        for j in (i + 1)..m {
            let mut acc = 0.0;
            for k in 0..points.ncols() {
                let diff = points[(i, k)] - points[(j, k)];
                acc += diff * diff;
            }
            dists.push(acc.sqrt());
        }
    }
    let med = median_in_place(&mut dists);
    if !med.is_finite() {
        return Err(Error::Numerical("non-finite particle distances".into()));
    }
    if med == 0.0 {
        return Ok(1.0);
    }
    Ok(med * med / ((m as f64) + 1.0).ln())
}

fn median_in_place(values: &mut [f64]) -> f64 {
    let n = values.len();
    let mid = n / 2;
    let (_, upper, _) = values.select_nth_unstable_by(mid, f64::total_cmp);
    let upper = *upper;
    if n % 2 == 1 {
        upper
    } else {
        let lower = values[..mid]
            .iter()
            .copied()
            .fold(f64::NEG_INFINITY, f64::max);
        0.5 * (lower + upper)
    }
}

/// Kernel-weighted score plus repulsion for every particle:
/// `φ(ω_i) = (1/M) Σ_j [κ(ω_i, ω_j) s_j + (2/h)(ω_i - ω_j) κ(ω_i, ω_j)]`.
pub fn svgd_direction(particles: &DMatrix<f64>, scores: &DMatrix<f64>, h: f64) -> DMatrix<f64> {
    let m = particles.nrows();
    let d = particles.ncols();
    let kernel = pairwise_sq_dists_rows(particles, particles).map(|s| (-s / h).exp());
    let mut out = DMatrix::zeros(m, d);
    let inv_m = 1.0 / m as f64;
    for i in 0..m {
        for j in 0..m {
            let k = kernel[(i, j)];
            for c in 0..d {
                out[(i, c)] += k * scores[(j, c)]
                    + (2.0 / h) * (particles[(i, c)] - particles[(j, c)]) * k;
            }
        }
        for c in 0..d {
            out[(i, c)] *= inv_m;
        }
    }
    out
}

/// One SVGD update of vector particles (matrix rows) with constant step size.
pub fn svgd_step(
    particles: &DMatrix<f64>,
    scores: &DMatrix<f64>,
    config: &SteinKernelConfig,
    step_size: f64,
) -> Result<DMatrix<f64>> {
    if particles.shape() != scores.shape() {
        return Err(Error::shape(format!(
            "particles are {:?} but scores are {:?}",
            particles.shape(),
            scores.shape()
        )));
    }
    if !all_finite(scores) {
        return Err(Error::Divergence {
            iteration: 0,
            detail: "non-finite score".into(),
        });
    }
    let h = config.resolve(particles)?;
    let next = particles + svgd_direction(particles, scores, h) * step_size;
    if !all_finite(&next) {
        return Err(Error::Divergence {
            iteration: 0,
            detail: "non-finite particle after update".into(),
        });
    }
    Ok(next)
}

/// Runs `steps` SVGD iterations from `init`, calling `score` on the current
/// particles each iteration.
pub fn run_svgd<F>(
    init: DMatrix<f64>,
    mut score: F,
    steps: usize,
    step_size: f64,
    config: &SteinKernelConfig,
    optimizer: Optimizer,
) -> Result<DMatrix<f64>>
where
    F: FnMut(&DMatrix<f64>) -> Result<DMatrix<f64>>,
{
    if !(step_size.is_finite() && step_size > 0.0) {
        return Err(Error::config(format!("step size must be positive, got {step_size}")));
    }
    let mut rule = StepRule::new(optimizer, step_size);
    let mut particles = init;
    for iteration in 0..steps {
        let scores = score(&particles)?;
        if !all_finite(&scores) {
            return Err(Error::Divergence {
                iteration,
                detail: "non-finite score".into(),
            });
        }
        let h = config.resolve(&particles)?;
        let direction = svgd_direction(&particles, &scores, h);
        particles += rule.increment(&direction);
        if !all_finite(&particles) {
            return Err(Error::Divergence {
                iteration,
                detail: "non-finite particle".into(),
            });
        }
    }
    Ok(particles)
}

fn check_same_shape(a: &FrequencyMatrix, b: &FrequencyMatrix) -> Result<()> {
    if a.rows() != b.rows() || a.dims() != b.dims() {
        return Err(Error::shape(format!(
            "matrix particles differ in shape: {}x{} vs {}x{}",
            a.rows(),
            a.dims(),
            b.rows(),
            b.dims()
        )));
    }
    Ok(())
}

fn pooled_bandwidth(config: &SteinKernelConfig, a: &FrequencyMatrix, b: &FrequencyMatrix) -> Result<f64> {
    match config.bandwidth {
        Bandwidth::Fixed(_) => config.resolve(a.as_matrix()),
        Bandwidth::MedianHeuristic => {
            let pooled = stack_rows([a, b]);
            config.resolve(&pooled)
        }
    }
}

/// Rows of every particle stacked into one `(Σ R) × d` point set.
pub fn stack_rows<'a, I>(particles: I) -> DMatrix<f64>
where
    I: IntoIterator<Item = &'a FrequencyMatrix>,
{
    let parts: Vec<&FrequencyMatrix> = particles.into_iter().collect();
    let d = parts.first().map_or(0, |p| p.dims());
    let total: usize = parts.iter().map(|p| p.rows()).sum();
    let mut out = DMatrix::zeros(total, d);
    let mut offset = 0;
    for p in parts {
        out.rows_mut(offset, p.rows()).copy_from(p.as_matrix());
        offset += p.rows();
    }
    out
}

/// `R × R` matrix `[κ(ω_i, ω'_j)]` between the rows of two matrix particles.
pub fn matrix_kernel(
    omega: &FrequencyMatrix,
    other: &FrequencyMatrix,
    config: &SteinKernelConfig,
) -> Result<DMatrix<f64>> {
    check_same_shape(omega, other)?;
    let h = pooled_bandwidth(config, omega, other)?;
    Ok(matrix_kernel_with_bandwidth(omega, other, h))
}

pub fn matrix_kernel_with_bandwidth(
    omega: &FrequencyMatrix,
    other: &FrequencyMatrix,
    h: f64,
) -> DMatrix<f64> {
    pairwise_sq_dists_rows(omega.as_matrix(), other.as_matrix()).map(|s| (-s / h).exp())
}

/// `Σ_j ∇_{ω'_j} κ(Ω, ω'_j)` as an `R × d` matrix: row `i` is
/// `Σ_j (2/h)(ω_i - ω'_j) κ(ω_i, ω'_j)`.
pub fn matrix_kernel_grad(
    omega: &FrequencyMatrix,
    other: &FrequencyMatrix,
    config: &SteinKernelConfig,
) -> Result<DMatrix<f64>> {
    check_same_shape(omega, other)?;
    let h = pooled_bandwidth(config, omega, other)?;
    let kernel = matrix_kernel_with_bandwidth(omega, other, h);
    Ok(matrix_kernel_grad_from(omega, other, &kernel, h))
}

/// Repulsion term given an already evaluated [`matrix_kernel`].
pub fn matrix_kernel_grad_from(
    omega: &FrequencyMatrix,
    other: &FrequencyMatrix,
    kernel: &DMatrix<f64>,
    h: f64,
) -> DMatrix<f64> {
    let a = omega.as_matrix();
    let b = other.as_matrix();
    let (r, d) = a.shape();
    let scale = 2.0 / h;
    // Σ_j k_ij (a_i - b_j) = a_i Σ_j k_ij - (K b)_i
    let row_sums: Vec<f64> = (0..r).map(|i| kernel.row(i).sum()).collect();
    let kb = kernel * b;
    DMatrix::from_fn(r, d, |i, c| scale * (a[(i, c)] * row_sums[i] - kb[(i, c)]))
}
