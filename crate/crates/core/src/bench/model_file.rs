use std::path::Path;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::dataset::{Dataset, Scaler};
use super::regression::{fit_method, tune_lengthscale, Method, MethodSettings};
use crate::error::{Error, Result};
use crate::msrfr::{msrfr_predict_marginals, FrequencyPrior, MixtureModel};

const MAGIC: &str = "stein-features-model";
const VERSION: u32 = 1;

/// A fitted model with everything needed to predict from raw CSV columns:
/// the scaler, the standardized training data and the `M × R × d`
/// frequency tensor.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelBundle {
    format: String,
    version: u32,
    pub method: String,
    pub target: String,
    /// Raw input columns read at prediction time, in order.
    pub feature_names: Vec<String>,
    pub scaler: Scaler,
    pub components: usize,
    pub frequencies: usize,
    pub dims: usize,
    pub noise_variance: f64,
    pub alpha: f64,
    pub prior_scale: f64,
    pub tensor: Vec<f64>,
    /// Standardized training inputs, point-major (`N × d`).
    pub train_x: Vec<f64>,
    pub train_y: Vec<f64>,
}

impl ModelBundle {
    /// Standardizes all of `data`, tunes the initial lengthscale on a holdout
    /// and trains `method` on the full set.
    pub fn fit(data: &Dataset, target: &str, method: Method, settings: &MethodSettings, seed: u64) -> Result<Self> {
        let scaler = Scaler::fit(&data.x, &data.y, &data.feature_names)?;
        let x = scaler.transform_inputs(&data.x)?;
        let y = scaler.transform_targets(&data.y);
        let scale = tune_lengthscale(method, &x, &y, settings, seed)?;
        let model = fit_method(method, &x, &y, settings, scale, seed)?;
        Ok(Self {
            format: MAGIC.into(),
            version: VERSION,
            method: method.name().into(),
            target: target.into(),
            feature_names: data.feature_names.clone(),
            scaler,
            components: model.len(),
            frequencies: model.frequencies(),
            dims: model.dims(),
            noise_variance: model.noise_variance(),
            alpha: model.alpha(),
            prior_scale: model.prior().scale(),
            tensor: model.tensor(),
            train_x: x.as_slice().to_vec(),
            train_y: y.as_slice().to_vec(),
        })
    }

    pub fn model(&self) -> Result<MixtureModel> {
        MixtureModel::from_tensor(
            self.components,
            self.frequencies,
            self.dims,
            &self.tensor,
            self.noise_variance,
            self.alpha,
            FrequencyPrior::gaussian(self.prior_scale)?,
        )
    }

    fn training_data(&self) -> Result<(DMatrix<f64>, DVector<f64>)> {
        let n = self.train_y.len();
        if self.train_x.len() != n * self.dims {
            return Err(Error::Format("training inputs do not match the stored dimensions".into()));
        }
        Ok((
            DMatrix::from_column_slice(self.dims, n, &self.train_x),
            DVector::from_column_slice(&self.train_y),
        ))
    }

    /// Predictive mean and variance of `y` (observation noise included) in
    /// original target units, for raw inputs laid out as `feature_names × N`.
    pub fn predict(&self, raw_inputs: &DMatrix<f64>) -> Result<(DVector<f64>, DVector<f64>)> {
        if raw_inputs.nrows() != self.feature_names.len() {
            return Err(Error::shape(format!(
                "model expects {} input columns, got {}",
                self.feature_names.len(),
                raw_inputs.nrows()
            )));
        }
        let model = self.model()?;
        let (x, y) = self.training_data()?;
        let xs = self.scaler.transform_inputs(raw_inputs)?;
        let (mean, var) = msrfr_predict_marginals(&model, &x, &y, &xs)?;
        let noise = model.noise_variance();
        Ok((
            self.scaler.inverse_targets(&mean),
            var.map(|v| self.scaler.inverse_variance(v + noise)),
        ))
    }

    pub fn to_json(&self) -> Result<String> {
        serde_json::to_string(self).map_err(|e| Error::Format(e.to_string()))
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let bundle: Self = serde_json::from_str(text).map_err(|e| Error::Format(e.to_string()))?;
        if bundle.format != MAGIC || bundle.version != VERSION {
            return Err(Error::Format(format!(
                "not a version {VERSION} model file (found {:?} v{})",
                bundle.format, bundle.version
            )));
        }
        bundle.model()?;
        bundle.training_data()?;
        Ok(bundle)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_json()? + "\n").map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bench::config::TrainingSettings;
    use crate::bench::synthetic::{synthetic_dataset, SyntheticSpec};

    #[test]
    fn json_round_trip_predicts_identically() {
        let ds = synthetic_dataset("s", SyntheticSpec::new(50, 2), 0).unwrap();
        let settings = MethodSettings {
            frequencies: 4,
            components: 2,
            training: TrainingSettings {
                iterations: 3,
                ..TrainingSettings::default()
            },
        };
        let bundle = ModelBundle::fit(&ds, "y", Method::Msrfr, &settings, 1).unwrap();
        let back = ModelBundle::from_json(&bundle.to_json().unwrap()).unwrap();
        assert_eq!(bundle, back);
        let (m1, v1) = bundle.predict(&ds.x).unwrap();
        let (m2, v2) = back.predict(&ds.x).unwrap();
        assert_eq!(m1, m2);
        assert_eq!(v1, v2);
        assert!(v1.iter().all(|v| *v > 0.0));
    }

    #[test]
    fn rejects_foreign_json() {
        assert!(ModelBundle::from_json("{}").is_err());
        assert!(ModelBundle::from_json("not json").is_err());
    }
}
