use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::optim::Optimizer;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Experiment {
    KernelApprox,
    Regression,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ReportFormat {
    #[default]
    Csv,
    Json,
}

/// Where a regression dataset comes from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum DatasetSource {
    Csv { path: PathBuf, target: String },
    /// Data drawn from a random SSGP prior (see [`super::synthetic_dataset`]).
    Synthetic {
        points: usize,
        dims: usize,
        #[serde(default)]
        seed: u64,
        /// Frequencies of the generating model.
        generator_frequencies: Option<usize>,
        /// Generating lengthscale per `√d`.
        relative_lengthscale: Option<f64>,
        noise_std: Option<f64>,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetSpec {
    pub name: String,
    #[serde(flatten)]
    pub source: DatasetSource,
    /// Overrides the experiment-wide train fraction.
    pub train_fraction: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainingSettings {
    pub optimizer: Optimizer,
    pub step_size: f64,
    pub iterations: usize,
    /// Repulsion temperature for the mixture and entropy weight for the
    /// single-model SVGD trainer.
    pub alpha: f64,
    /// Prior scale `s` on mixture frequencies.
    pub prior_scale: f64,
    /// Candidate multipliers of the median-distance lengthscale used to
    /// initialize frequencies; the best is picked on held-out data.
    pub lengthscale_grid: Vec<f64>,
    pub validation_fraction: f64,
}

impl Default for TrainingSettings {
    fn default() -> Self {
        Self {
            optimizer: Optimizer::Adagrad,
            step_size: 0.05,
            iterations: 100,
            alpha: 1.0,
            prior_scale: 10.0,
            lengthscale_grid: vec![0.5, 1.0, 2.0],
            validation_fraction: 0.1,
        }
    }
}

/// Declarative description of one benchmark run, read from TOML.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub experiment: Experiment,
    pub seeds: Vec<u64>,
    #[serde(default)]
    pub output: Option<PathBuf>,
    #[serde(default)]
    pub format: ReportFormat,

    // kernel-approx
    #[serde(default = "default_samplers")]
    pub samplers: Vec<String>,
    #[serde(default)]
    pub frequency_counts: Vec<usize>,
    #[serde(default = "default_dims")]
    pub dims: Vec<usize>,
    #[serde(default = "default_points")]
    pub points: usize,
    #[serde(default = "default_lengthscale")]
    pub lengthscale: f64,
    #[serde(default = "default_svgd_steps")]
    pub svgd_steps: usize,
    #[serde(default = "default_svgd_step_size")]
    pub svgd_step_size: f64,

    // regression
    #[serde(default = "default_methods")]
    pub methods: Vec<String>,
    #[serde(default = "default_frequencies")]
    pub frequencies: usize,
    #[serde(default = "default_components")]
    pub components: usize,
    #[serde(default = "default_train_fraction")]
    pub train_fraction: f64,
    #[serde(default)]
    pub datasets: Vec<DatasetSpec>,
    #[serde(default)]
    pub training: TrainingSettings,
}

fn default_samplers() -> Vec<String> {
    ["mc", "qmc", "orf", "svgd", "nystrom"].map(String::from).to_vec()
}
fn default_dims() -> Vec<usize> {
    vec![2]
}
fn default_points() -> usize {
    200
}
fn default_lengthscale() -> f64 {
    1.0
}
fn default_svgd_steps() -> usize {
    200
}
fn default_svgd_step_size() -> f64 {
    0.05
}
fn default_methods() -> Vec<String> {
    super::METHODS.map(String::from).to_vec()
}
fn default_frequencies() -> usize {
    50
}
fn default_components() -> usize {
    6
}
fn default_train_fraction() -> f64 {
    0.9
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let config: Self = toml::from_str(text).map_err(|e| Error::config(e.to_string()))?;
        config.validate()?;
        Ok(config)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut config = Self::from_toml(&text)?;
        // Relative dataset paths are relative to the config file.
        let base = path.parent().unwrap_or(Path::new("."));
        for ds in &mut config.datasets {
            if let DatasetSource::Csv { path, .. } = &mut ds.source {
                if path.is_relative() {
                    *path = base.join(&*path);
                }
            }
        }
        Ok(config)
    }

    pub fn validate(&self) -> Result<()> {
        if self.seeds.is_empty() {
            return Err(Error::config("seeds must be non-empty"));
        }
        let in_unit = |f: f64| f > 0.0 && f < 1.0;
        match self.experiment {
            Experiment::KernelApprox => {
                if self.frequency_counts.is_empty() || self.frequency_counts.contains(&0) {
                    return Err(Error::config("frequency_counts must be non-empty and positive"));
                }
                if self.dims.is_empty() || self.dims.contains(&0) {
                    return Err(Error::config("dims must be non-empty and positive"));
                }
                if self.points < 2 {
                    return Err(Error::config("points must be at least 2"));
                }
                if !(self.lengthscale.is_finite() && self.lengthscale > 0.0) {
                    return Err(Error::config("lengthscale must be positive"));
                }
                for s in &self.samplers {
                    if !super::SAMPLERS.contains(&s.as_str()) {
                        return Err(Error::config(format!("unknown sampler {s:?}")));
                    }
                }
            }
            Experiment::Regression => {
                if self.frequencies == 0 || self.components == 0 {
                    return Err(Error::config("frequencies and components must be positive"));
                }
                if !in_unit(self.train_fraction) {
                    return Err(Error::config("train_fraction must lie in (0, 1)"));
                }
                if self.datasets.is_empty() {
                    return Err(Error::config("regression needs at least one dataset"));
                }
                for ds in &self.datasets {
                    if ds.train_fraction.is_some_and(|f| !in_unit(f)) {
                        return Err(Error::config(format!("{}: train_fraction must lie in (0, 1)", ds.name)));
                    }
                }
                for m in &self.methods {
                    if !super::METHODS.contains(&m.as_str()) {
                        return Err(Error::config(format!("unknown method {m:?}")));
                    }
                }
                let t = &self.training;
                if !in_unit(t.validation_fraction) {
                    return Err(Error::config("validation_fraction must lie in (0, 1)"));
                }
                if t.lengthscale_grid.is_empty() || t.lengthscale_grid.iter().any(|v| !(*v > 0.0)) {
                    return Err(Error::config("lengthscale_grid must hold positive values"));
                }
                if !(t.step_size > 0.0) || t.iterations == 0 {
                    return Err(Error::config("step_size and iterations must be positive"));
                }
                if !(t.alpha >= 0.0) || !(t.prior_scale > 0.0) {
                    return Err(Error::config("alpha must be non-negative and prior_scale positive"));
                }
            }
        }
        Ok(())
    }
}
