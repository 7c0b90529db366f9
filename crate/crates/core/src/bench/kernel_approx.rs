use nalgebra::DMatrix;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;

use super::config::{Experiment, ExperimentConfig};
use super::report::{Cell, ReportRow};
use crate::error::{Error, Result};
use crate::exact_gp::{exact_gram, gram_error, nystrom_gram};
use crate::rng::seeded_stream;
use crate::spectral::{rff_gram, Sampler, SpectralDensity};

/// Approximation methods accepted in a kernel-approx config.
pub const SAMPLERS: [&str; 5] = ["mc", "qmc", "orf", "svgd", "nystrom"];

#[derive(Debug, Clone, PartialEq)]
pub struct KernelApproxRow {
    pub sampler: String,
    pub frequencies: usize,
    pub dims: usize,
    pub seed: u64,
    pub error: f64,
}

impl ReportRow for KernelApproxRow {
    fn header() -> &'static [&'static str] {
        &["sampler", "R", "d", "seed", "error"]
    }

    fn cells(&self) -> Vec<Cell> {
        vec![
            Cell::Str(self.sampler.clone()),
            Cell::Int(self.frequencies as u64),
            Cell::Int(self.dims as u64),
            Cell::Int(self.seed),
            Cell::Float(self.error),
        ]
    }
}

/// Standard-normal inputs shared by every sampler for one `(d, seed)` cell.
pub fn approx_inputs(points: usize, dims: usize, seed: u64) -> DMatrix<f64> {
    let mut rng = seeded_stream(seed, 1);
    DMatrix::from_fn(dims, points, |_, _| StandardNormal.sample(&mut rng))
}

/// Relative Frobenius error of one approximation against the exact Gram.
pub fn approx_error(
    sampler: &str,
    x: &DMatrix<f64>,
    exact: &DMatrix<f64>,
    lengthscale: f64,
    frequencies: usize,
    seed: u64,
    svgd: (usize, f64),
) -> Result<f64> {
    let d = x.nrows();
    let density = SpectralDensity::isotropic_rbf(lengthscale, d)?;
    let approx = match sampler {
        "nystrom" => nystrom_gram(x, &vec![lengthscale; d], frequencies.min(x.ncols()), seed)?,
        name => {
            let s = match name {
                "mc" => Sampler::Mc,
                "qmc" => Sampler::Qmc,
                "orf" => Sampler::Orf,
                "svgd" => Sampler::Svgd {
                    steps: svgd.0,
                    step_size: svgd.1,
                },
                other => return Err(Error::config(format!("unknown sampler {other:?}"))),
            };
            rff_gram(x, &s.sample(&density, frequencies, seed)?)?
        }
    };
    gram_error(exact, &approx)
}

/// Every `(sampler, R, d, seed)` cell, sorted by that key.
pub fn run_kernel_approx(config: &ExperimentConfig) -> Result<Vec<KernelApproxRow>> {
    if config.experiment != Experiment::KernelApprox {
        return Err(Error::config("config is not a kernel-approx experiment"));
    }
    config.validate()?;
    let mut cells = Vec::new();
    for &d in &config.dims {
        for &seed in &config.seeds {
            cells.push((d, seed));
        }
    }
    let mut rows: Vec<KernelApproxRow> = cells
        .par_iter()
        .map(|&(d, seed)| {
            let x = approx_inputs(config.points, d, seed);
            let exact = exact_gram(&x, &vec![config.lengthscale; d])?;
            let mut out = Vec::new();
            for sampler in &config.samplers {
                for &r in &config.frequency_counts {
                    let error = approx_error(
                        sampler,
                        &x,
                        &exact,
                        config.lengthscale,
                        r,
                        seed,
                        (config.svgd_steps, config.svgd_step_size),
                    )?;
                    out.push(KernelApproxRow {
                        sampler: sampler.clone(),
                        frequencies: r,
                        dims: d,
                        seed,
                        error,
                    });
                }
            }
            Ok(out)
        })
        .collect::<Result<Vec<_>>>()?
        .into_iter()
        .flatten()
        .collect();
    rows.sort_by(|a, b| {
        (&a.sampler, a.frequencies, a.dims, a.seed).cmp(&(&b.sampler, b.frequencies, b.dims, b.seed))
    });
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn config(samplers: &[&str], counts: &[usize], seeds: &[u64]) -> ExperimentConfig {
        let text = format!(
            "experiment = \"kernel-approx\"\nseeds = {seeds:?}\nfrequency_counts = {counts:?}\nsamplers = {:?}\npoints = 200\nsvgd_steps = 20",
            samplers
        );
        ExperimentConfig::from_toml(&text).unwrap()
    }

    #[test]
    fn nystrom_exact_at_full_rank() {
        let rows = run_kernel_approx(&config(&["nystrom"], &[200], &[0])).unwrap();
        assert!(rows[0].error < 1e-8, "{}", rows[0].error);
    }

    #[test]
    fn rows_sorted_and_complete() {
        let rows = run_kernel_approx(&config(&["qmc", "mc"], &[8, 4], &[1, 0])).unwrap();
        assert_eq!(rows.len(), 8);
        assert_eq!(rows[0].sampler, "mc");
        assert_eq!((rows[0].frequencies, rows[0].seed), (4, 0));
        assert!(rows.iter().all(|r| r.error > 0.0 && r.error.is_finite()));
    }
}
