use std::str::FromStr;
use std::time::Instant;

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;

use super::config::{DatasetSource, DatasetSpec, Experiment, ExperimentConfig, TrainingSettings};
use super::dataset::{load_csv, split_standardize, Dataset, Split};
use super::report::{Cell, ReportRow};
use super::synthetic::{synthetic_dataset, SyntheticSpec};
use crate::error::{Error, Result};
use crate::msrfr::{
    holdout_split, msrfr_predict_marginals, nlpd, rmse, train_msrfr, FrequencyPrior, MixtureModel, MsrfrConfig,
};
use crate::ssgp::{train_ssgp_mle, train_ssgp_svgd, SsgpModel, TrainConfig};
use crate::svgd::SteinKernelConfig;

/// Regression methods accepted in a config, in report order.
pub const METHODS: [&str; 5] = ["ssgp-rbf", "ssgp", "ssgp-Rstar", "ssgp-svgd", "msrfr"];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Method {
    /// Fixed MC frequencies from a tuned RBF density; only the noise is fit.
    SsgpRbf,
    /// Maximum-likelihood frequencies.
    Ssgp,
    /// Maximum likelihood with the cost-matched frequency count `R*`.
    SsgpRstar,
    /// Single frequency matrix trained as SVGD particles.
    SsgpSvgd,
    /// Mixture of `M` frequency matrices.
    Msrfr,
}

impl Method {
    pub fn name(self) -> &'static str {
        match self {
            Method::SsgpRbf => METHODS[0],
            Method::Ssgp => METHODS[1],
            Method::SsgpRstar => METHODS[2],
            Method::SsgpSvgd => METHODS[3],
            Method::Msrfr => METHODS[4],
        }
    }

    /// Frequencies per model and number of models.
    pub fn shape(self, frequencies: usize, components: usize) -> (usize, usize) {
        match self {
            Method::SsgpRstar => (rstar(frequencies, components), 1),
            Method::Msrfr => (frequencies, components),
            _ => (frequencies, 1),
        }
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "ssgp-rbf" => Method::SsgpRbf,
            "ssgp" => Method::Ssgp,
            "ssgp-Rstar" | "ssgp-rstar" => Method::SsgpRstar,
            "ssgp-svgd" => Method::SsgpSvgd,
            "msrfr" => Method::Msrfr,
            other => return Err(Error::config(format!("unknown method {other:?}"))),
        })
    }
}

/// `⌈∛(M R³)⌉`, the frequency count whose `O(R³)` cost matches `M` models
/// of `R` frequencies.
pub fn rstar(frequencies: usize, components: usize) -> usize {
    let target = components as u128 * (frequencies as u128).pow(3);
    let mut c = (target as f64).cbrt().ceil() as u128;
    while c > 0 && (c - 1).pow(3) >= target {
        c -= 1;
    }
    while c.pow(3) < target {
        c += 1;
    }
    c as usize
}

/// Everything a method needs besides data.
#[derive(Debug, Clone, PartialEq)]
pub struct MethodSettings {
    pub frequencies: usize,
    pub components: usize,
    pub training: TrainingSettings,
}

/// Trains `method` with frequencies initialized at `lengthscale_scale` times
/// the median input distance. Single models come back as one-component
/// mixtures so every method shares one prediction path.
pub fn fit_method(
    method: Method,
    x: &DMatrix<f64>,
    y: &DVector<f64>,
    settings: &MethodSettings,
    lengthscale_scale: f64,
    seed: u64,
) -> Result<MixtureModel> {
    let t = &settings.training;
    let (r, m) = method.shape(settings.frequencies, settings.components);
    let prior = FrequencyPrior::gaussian(t.prior_scale)?;
    let single = TrainConfig {
        step_size: t.step_size,
        iterations: t.iterations,
        entropy_weight: t.alpha,
        optimizer: t.optimizer,
        learn_noise: true,
        freeze_frequencies: method == Method::SsgpRbf,
        kernel: SteinKernelConfig::median_heuristic(),
    };
    let wrap = |model: SsgpModel| {
        MixtureModel::new(vec![model.frequencies().clone()], model.noise_variance(), 0.0, prior)
    };
    match method {
        Method::SsgpRbf | Method::Ssgp | Method::SsgpRstar => {
            let init = SsgpModel::initial(x, y, r, lengthscale_scale, seed)?;
            wrap(train_ssgp_mle(x, y, &init, &single)?)
        }
        Method::SsgpSvgd => {
            let init = SsgpModel::initial(x, y, r, lengthscale_scale, seed)?;
            wrap(train_ssgp_svgd(x, y, &init, &single)?)
        }
        Method::Msrfr => {
            let init = MixtureModel::initial(x, y, r, m, lengthscale_scale, t.alpha, prior, seed)?;
            let config = MsrfrConfig {
                step_size: t.step_size,
                iterations: t.iterations,
                optimizer: t.optimizer,
                learn_noise: true,
                learn_alpha: false,
                validation_fraction: t.validation_fraction,
                kernel: SteinKernelConfig::median_heuristic(),
                seed,
            };
            train_msrfr(x, y, &init, &config)
        }
    }
}

/// Picks the initial-lengthscale multiplier with the lowest validation RMSE
/// on a seeded holdout of the training data.
pub fn tune_lengthscale(
    method: Method,
    x: &DMatrix<f64>,
    y: &DVector<f64>,
    settings: &MethodSettings,
    seed: u64,
) -> Result<f64> {
    let grid = &settings.training.lengthscale_grid;
    if grid.len() == 1 {
        return Ok(grid[0]);
    }
    let (fit_idx, val_idx) = holdout_split(y.len(), settings.training.validation_fraction, seed)?;
    let (xf, yf) = (x.select_columns(&fit_idx), select(y, &fit_idx));
    let (xv, yv) = (x.select_columns(&val_idx), select(y, &val_idx));
    let mut best: Option<(f64, f64)> = None;
    for &scale in grid {
        let score = fit_method(method, &xf, &yf, settings, scale, seed)
            .and_then(|model| msrfr_predict_marginals(&model, &xf, &yf, &xv))
            .and_then(|(mean, _)| rmse(mean.as_slice(), yv.as_slice()));
        match score {
            Ok(s) if best.is_none_or(|(_, b)| s < b) => best = Some((scale, s)),
            Ok(_) => {}
            Err(e) => log::warn!("{} with lengthscale x{scale} failed during tuning: {e}", method.name()),
        }
    }
    best.map(|(scale, _)| scale).ok_or_else(|| Error::OptimizationFailed {
        iteration: 0,
        detail: format!("every tuning setting failed for {}", method.name()),
        trace: Vec::new(),
    })
}

fn select(y: &DVector<f64>, idx: &[usize]) -> DVector<f64> {
    DVector::from_iterator(idx.len(), idx.iter().map(|&i| y[i]))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RowStatus {
    Ok,
    Failed,
}

/// One `(method, dataset, seed)` result. Metrics are in original target
/// units; NLPD is averaged over test points.
#[derive(Debug, Clone, PartialEq)]
pub struct RegressionRow {
    pub method: String,
    pub dataset: String,
    pub seed: u64,
    pub status: RowStatus,
    pub frequencies: usize,
    pub components: usize,
    pub dims: usize,
    pub train_size: usize,
    pub test_size: usize,
    pub rmse: f64,
    pub nlpd: f64,
    /// Not part of the report so that reports stay byte-identical.
    pub wall_seconds: f64,
}

impl ReportRow for RegressionRow {
    fn header() -> &'static [&'static str] {
        &[
            "method", "dataset", "seed", "status", "R", "M", "d", "n_train", "n_test", "rmse", "nlpd",
        ]
    }

    fn cells(&self) -> Vec<Cell> {
        vec![
            Cell::Str(self.method.clone()),
            Cell::Str(self.dataset.clone()),
            Cell::Int(self.seed),
            Cell::Str(match self.status {
                RowStatus::Ok => "ok".into(),
                RowStatus::Failed => "failed".into(),
            }),
            Cell::Int(self.frequencies as u64),
            Cell::Int(self.components as u64),
            Cell::Int(self.dims as u64),
            Cell::Int(self.train_size as u64),
            Cell::Int(self.test_size as u64),
            Cell::Float(self.rmse),
            Cell::Float(self.nlpd),
        ]
    }
}

/// Wall-clock sidecar row.
#[derive(Debug, Clone, PartialEq)]
pub struct TimingRow {
    pub method: String,
    pub dataset: String,
    pub seed: u64,
    pub seconds: f64,
}

impl ReportRow for TimingRow {
    fn header() -> &'static [&'static str] {
        &["method", "dataset", "seed", "seconds"]
    }

    fn cells(&self) -> Vec<Cell> {
        vec![
            Cell::Str(self.method.clone()),
            Cell::Str(self.dataset.clone()),
            Cell::Int(self.seed),
            Cell::Float(self.seconds),
        ]
    }
}

pub fn timing_rows(rows: &[RegressionRow]) -> Vec<TimingRow> {
    rows.iter()
        .map(|r| TimingRow {
            method: r.method.clone(),
            dataset: r.dataset.clone(),
            seed: r.seed,
            seconds: r.wall_seconds,
        })
        .collect()
}

/// Materializes a configured dataset.
pub fn resolve_dataset(spec: &DatasetSpec) -> Result<Dataset> {
    match &spec.source {
        DatasetSource::Csv { path, target } => {
            let mut ds = load_csv(path, target)?;
            ds.name = spec.name.clone();
            Ok(ds)
        }
        DatasetSource::Synthetic {
            points,
            dims,
            seed,
            generator_frequencies,
            relative_lengthscale,
            noise_std,
        } => {
            let mut gen = SyntheticSpec::new(*points, *dims);
            if let Some(r) = generator_frequencies {
                gen.frequencies = *r;
            }
            if let Some(l) = relative_lengthscale {
                gen.relative_lengthscale = *l;
            }
            if let Some(s) = noise_std {
                gen.noise_std = *s;
            }
            synthetic_dataset(&spec.name, gen, *seed)
        }
    }
}

/// Test RMSE and mean NLPD of a fitted model, in original target units.
pub fn evaluate(model: &MixtureModel, split: &Split) -> Result<(f64, f64)> {
    let (mean, var) = msrfr_predict_marginals(model, &split.train.x, &split.train.y, &split.test.x)?;
    let s = &split.scaler;
    let mean = s.inverse_targets(&mean);
    let var = var.map(|v| s.inverse_variance(v));
    let targets = s.inverse_targets(&split.test.y);
    let noise = s.inverse_variance(model.noise_variance());
    let r = rmse(mean.as_slice(), targets.as_slice())?;
    let n = nlpd(mean.as_slice(), var.as_slice(), noise, targets.as_slice())?;
    Ok((r, n / targets.len() as f64))
}

fn run_cell(
    method: Method,
    split: &Split,
    settings: &MethodSettings,
    scale: Result<f64, String>,
    seed: u64,
) -> Result<(f64, f64)> {
    let scale = scale.map_err(|detail| Error::OptimizationFailed {
        iteration: 0,
        detail,
        trace: Vec::new(),
    })?;
    let model = fit_method(method, &split.train.x, &split.train.y, settings, scale, seed)?;
    evaluate(&model, split)
}

/// Runs every `(method, dataset, seed)` cell. Hyperparameters are tuned once
/// per `(method, dataset)` on the first seed's training split. Failures are
/// recorded as failed rows. Rows are sorted by `(dataset, method, seed)`.
pub fn run_regression(config: &ExperimentConfig) -> Result<Vec<RegressionRow>> {
    if config.experiment != Experiment::Regression {
        return Err(Error::config("config is not a regression experiment"));
    }
    config.validate()?;
    let methods = config
        .methods
        .iter()
        .map(|m| m.parse())
        .collect::<Result<Vec<Method>>>()?;
    let settings = MethodSettings {
        frequencies: config.frequencies,
        components: config.components,
        training: config.training.clone(),
    };

    let mut rows = Vec::new();
    for spec in &config.datasets {
        let data = resolve_dataset(spec)?;
        let fraction = spec.train_fraction.unwrap_or(config.train_fraction);
        let splits = config
            .seeds
            .iter()
            .map(|&seed| split_standardize(&data, fraction, seed))
            .collect::<Result<Vec<_>>>()?;
        let tune_seed = config.seeds[0];
        let scales: Vec<Result<f64, String>> = methods
            .par_iter()
            .map(|&m| {
                tune_lengthscale(m, &splits[0].train.x, &splits[0].train.y, &settings, tune_seed)
                    .map_err(|e| e.to_string())
            })
            .collect();
        let cells: Vec<(usize, usize)> = (0..methods.len())
            .flat_map(|mi| (0..splits.len()).map(move |si| (mi, si)))
            .collect();
        let mut part: Vec<RegressionRow> = cells
            .par_iter()
            .map(|&(mi, si)| {
                let method = methods[mi];
                let split = &splits[si];
                let seed = config.seeds[si];
                let start = Instant::now();
                let outcome = run_cell(method, split, &settings, scales[mi].clone(), seed);
                let wall_seconds = start.elapsed().as_secs_f64();
                let (status, rmse, nlpd) = match outcome {
                    Ok((r, n)) => (RowStatus::Ok, r, n),
                    Err(e) => {
                        log::warn!("{} on {} seed {seed} failed: {e}", method.name(), spec.name);
                        (RowStatus::Failed, f64::NAN, f64::NAN)
                    }
                };
                let (r, m) = method.shape(settings.frequencies, settings.components);
                RegressionRow {
                    method: method.name().into(),
                    dataset: spec.name.clone(),
                    seed,
                    status,
                    frequencies: r,
                    components: m,
                    dims: split.train.dims(),
                    train_size: split.train.len(),
                    test_size: split.test.len(),
                    rmse,
                    nlpd,
                    wall_seconds,
                }
            })
            .collect();
        rows.append(&mut part);
    }
    rows.sort_by(|a, b| (&a.dataset, &a.method, a.seed).cmp(&(&b.dataset, &b.method, b.seed)));
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rstar_values() {
        assert_eq!(rstar(100, 6), 182);
        assert_eq!(rstar(50, 10), 108);
        assert_eq!(rstar(10, 1), 10);
        assert_eq!(rstar(2, 8), 4);
    }

    #[test]
    fn method_names_round_trip() {
        for name in METHODS {
            assert_eq!(name.parse::<Method>().unwrap().name(), name);
        }
        assert!("svgp".parse::<Method>().is_err());
        assert_eq!(Method::SsgpRstar.shape(100, 6), (182, 1));
        assert_eq!(Method::Msrfr.shape(100, 6), (100, 6));
    }

    fn small_settings() -> MethodSettings {
        MethodSettings {
            frequencies: 5,
            components: 2,
            training: TrainingSettings {
                iterations: 5,
                ..TrainingSettings::default()
            },
        }
    }

    #[test]
    fn every_method_fits() {
        let ds = synthetic_dataset("s", SyntheticSpec::new(60, 2), 0).unwrap();
        let split = split_standardize(&ds, 0.8, 0).unwrap();
        for name in METHODS {
            let m: Method = name.parse().unwrap();
            let model = fit_method(m, &split.train.x, &split.train.y, &small_settings(), 1.0, 0).unwrap();
            let (r, m_) = m.shape(5, 2);
            assert_eq!((model.frequencies(), model.len()), (r, m_));
            let (rm, nl) = evaluate(&model, &split).unwrap();
            assert!(rm.is_finite() && nl.is_finite());
        }
    }

    #[test]
    fn rbf_baseline_keeps_frequencies() {
        let ds = synthetic_dataset("s", SyntheticSpec::new(40, 2), 1).unwrap();
        let split = split_standardize(&ds, 0.8, 0).unwrap();
        let s = small_settings();
        let model = fit_method(Method::SsgpRbf, &split.train.x, &split.train.y, &s, 1.0, 3).unwrap();
        let init = SsgpModel::initial(&split.train.x, &split.train.y, 5, 1.0, 3).unwrap();
        assert_eq!(&model.components()[0], init.frequencies());
    }
}
