use std::f64::consts::PI;

use crate::error::{Error, Result};

/// Root mean squared error.
pub fn rmse(mean: &[f64], targets: &[f64]) -> Result<f64> {
    if mean.len() != targets.len() || mean.is_empty() {
        return Err(Error::shape(format!(
            "{} predictions for {} targets",
            mean.len(),
            targets.len()
        )));
    }
    let sse: f64 = mean.iter().zip(targets).map(|(m, y)| (m - y).powi(2)).sum();
    Ok((sse / mean.len() as f64).sqrt())
}

/// Negative log predictive density summed over points, with the observation
/// noise added to each latent variance: `v_i = var_i + σ²`.
pub fn nlpd(mean: &[f64], variances: &[f64], noise_variance: f64, targets: &[f64]) -> Result<f64> {
    if mean.len() != targets.len() || variances.len() != targets.len() {
        return Err(Error::shape(format!(
            "{} means, {} variances, {} targets",
            mean.len(),
            variances.len(),
            targets.len()
        )));
    }
    let mut total = 0.0;
    for ((m, v), y) in mean.iter().zip(variances).zip(targets) {
        let v = v + noise_variance;
        if !(v > 0.0 && v.is_finite()) {
            return Err(Error::Numerical(format!("non-positive predictive variance {v}")));
        }
        total += 0.5 * ((2.0 * PI * v).ln() + (y - m).powi(2) / v);
    }
    Ok(total)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn perfect_predictions() {
        let y = [1.0, -2.0, 0.5];
        assert_eq!(rmse(&y, &y).unwrap(), 0.0);
        let n = nlpd(&y, &[0.5, 0.5, 0.5], 0.5, &y).unwrap();
        assert!((n - 1.5 * (2.0 * PI).ln()).abs() < 1e-14);
    }

    #[test]
    fn single_point_density() {
        let n = nlpd(&[0.0], &[0.0], 1.0, &[1.0]).unwrap();
        assert!((n - 0.5 * ((2.0 * PI).ln() + 1.0)).abs() < 1e-15);
    }

    #[test]
    fn errors() {
        assert!(rmse(&[1.0], &[1.0, 2.0]).is_err());
        assert!(nlpd(&[0.0], &[-1.0], 0.5, &[0.0]).is_err());
    }
}
