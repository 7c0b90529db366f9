//! Step-size schedules shared by the particle and gradient trainers.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Optimizer {
    /// Constant step size.
    #[default]
    Plain,
    /// Per-coordinate scaling by a decaying average of squared directions.
    Adagrad,
}

const ADAGRAD_DECAY: f64 = 0.9;
const ADAGRAD_FUDGE: f64 = 1e-6;

/// Turns an ascent/descent direction into a parameter increment.
#[derive(Debug, Clone)]
pub struct StepRule {
    optimizer: Optimizer,
    step_size: f64,
    history: Option<DMatrix<f64>>,
}

impl StepRule {
    pub fn new(optimizer: Optimizer, step_size: f64) -> Self {
        Self {
            optimizer,
            step_size,
            history: None,
        }
    }

    pub fn step_size(&self) -> f64 {
        self.step_size
    }

    /// Increment for `direction`; updates the accumulated history for adagrad.
    pub fn increment(&mut self, direction: &DMatrix<f64>) -> DMatrix<f64> {
        match self.optimizer {
            Optimizer::Plain => direction * self.step_size,
            Optimizer::Adagrad => {
                let sq = direction.map(|g| g * g);
                let hist = match self.history.take() {
                    None => sq,
                    Some(h) => h * ADAGRAD_DECAY + sq * (1.0 - ADAGRAD_DECAY),
                };
                let out = direction.zip_map(&hist, |g, h| {
                    self.step_size * g / (ADAGRAD_FUDGE + h.sqrt())
                });
                self.history = Some(hist);
                out
            }
        }
    }

    /// Scalar convenience wrapper around [`StepRule::increment`].
    pub fn increment_scalar(&mut self, direction: f64) -> f64 {
        self.increment(&DMatrix::from_element(1, 1, direction))[(0, 0)]
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn plain_is_scaled_direction() {
        let mut rule = StepRule::new(Optimizer::Plain, 0.5);
        let d = DMatrix::from_row_slice(1, 2, &[2.0, -4.0]);
        assert_eq!(rule.increment(&d), DMatrix::from_row_slice(1, 2, &[1.0, -2.0]));
    }

    #[test]
    fn adagrad_first_step_is_sign_times_step() {
        let mut rule = StepRule::new(Optimizer::Adagrad, 0.1);
        let d = DMatrix::from_row_slice(1, 2, &[300.0, -0.02]);
        let inc = rule.increment(&d);
        assert!((inc[(0, 0)] - 0.1).abs() < 1e-8);
        assert!((inc[(0, 1)] + 0.1).abs() < 1e-2);
    }
}
