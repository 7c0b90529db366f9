use nalgebra::DMatrix;
use rand_distr::{ChiSquared, Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use super::qmc::{halton, inverse_normal_cdf, HALTON_MAX_DIMS};
use super::{FrequencyMatrix, SpectralDensity};
use crate::error::{Error, Result};
use crate::optim::Optimizer;
use crate::rng::{seeded, Rng};
use crate::svgd::{run_svgd, SteinKernelConfig};

fn check_count(rows: usize) -> Result<()> {
    if rows == 0 {
        return Err(Error::config("number of frequencies must be at least 1"));
    }
    Ok(())
}

/// `rows` iid draws from the density.
pub fn sample_mc(density: &SpectralDensity, rows: usize, seed: u64) -> Result<FrequencyMatrix> {
    sample_mc_with(density, rows, &mut seeded(seed))
}

/// [`sample_mc`] drawing from a caller-owned generator.
pub fn sample_mc_with(density: &SpectralDensity, rows: usize, rng: &mut Rng) -> Result<FrequencyMatrix> {
    check_count(rows)?;
    let d = density.dims();
    let mut out = DMatrix::zeros(rows, d);
    for r in 0..rows {
        for j in 0..d {
            let z: f64 = StandardNormal.sample(rng);
            out[(r, j)] = z * density.frequency_scale(j);
        }
    }
    FrequencyMatrix::new(out)
}

/// Halton points (index from 1, first `d` primes as bases) pushed through the
/// inverse normal CDF.
pub fn sample_qmc(density: &SpectralDensity, rows: usize) -> Result<FrequencyMatrix> {
    check_count(rows)?;
    let d = density.dims();
    if d > HALTON_MAX_DIMS {
        return Err(Error::UnsupportedDimension {
            dims: d,
            max: HALTON_MAX_DIMS,
        });
    }
    let out = DMatrix::from_fn(rows, d, |r, j| {
        inverse_normal_cdf(halton(r as u64 + 1, j)) * density.frequency_scale(j)
    });
    FrequencyMatrix::new(out)
}

/// Orthogonal random features: blocks of `d` orthonormal directions with
/// chi-distributed lengths, stacked and truncated to `rows`.
pub fn sample_orf(density: &SpectralDensity, rows: usize, seed: u64) -> Result<FrequencyMatrix> {
    check_count(rows)?;
    let d = density.dims();
    let mut rng = seeded(seed);
    let chi2 = ChiSquared::new(d as f64).map_err(|e| Error::config(e.to_string()))?;
    let mut out = DMatrix::zeros(rows, d);
    let mut filled = 0;
    while filled < rows {
        let gaussian: DMatrix<f64> = DMatrix::from_fn(d, d, |_, _| StandardNormal.sample(&mut rng));
        let q = gaussian.qr().q();
        for i in 0..d {
            if filled == rows {
                break;
            }
            let length = chi2.sample(&mut rng).sqrt();
            for j in 0..d {
                out[(filled, j)] = q[(i, j)] * length * density.frequency_scale(j);
            }
            filled += 1;
        }
    }
    FrequencyMatrix::new(out)
}

/// SVGD particles targeting the density, started from an MC draw.
pub fn sample_svgd(
    density: &SpectralDensity,
    rows: usize,
    seed: u64,
    steps: usize,
    step_size: f64,
) -> Result<FrequencyMatrix> {
    if steps == 0 {
        return Err(Error::config("SVGD sampler needs at least one step"));
    }
    let init = sample_mc(density, rows, seed)?.into_inner();
    let particles = run_svgd(
        init,
        |p| density_scores(density, p),
        steps,
        step_size,
        &SteinKernelConfig::median_heuristic(),
        Optimizer::Plain,
    )?;
    FrequencyMatrix::new(particles)
}

/// Row-wise score of a density over a particle matrix.
pub fn density_scores(density: &SpectralDensity, particles: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let mut out = DMatrix::zeros(particles.nrows(), particles.ncols());
    for r in 0..particles.nrows() {
        let row: Vec<f64> = particles.row(r).iter().copied().collect();
        let s = density.score(&row)?;
        for (j, v) in s.into_iter().enumerate() {
            out[(r, j)] = v;
        }
    }
    Ok(out)
}

/// Frequency sampler selection for experiment drivers.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Sampler {
    Mc,
    Qmc,
    Orf,
    Svgd { steps: usize, step_size: f64 },
}

impl Sampler {
    pub fn name(&self) -> &'static str {
        match self {
            Sampler::Mc => "mc",
            Sampler::Qmc => "qmc",
            Sampler::Orf => "orf",
            Sampler::Svgd { .. } => "svgd",
        }
    }

    pub fn sample(&self, density: &SpectralDensity, rows: usize, seed: u64) -> Result<FrequencyMatrix> {
        match *self {
            Sampler::Mc => sample_mc(density, rows, seed),
            Sampler::Qmc => sample_qmc(density, rows),
            Sampler::Orf => sample_orf(density, rows, seed),
            Sampler::Svgd { steps, step_size } => sample_svgd(density, rows, seed, steps, step_size),
        }
    }
}
