//! Small dense linear-algebra helpers shared by the GP modules.

use nalgebra::{Cholesky, DMatrix, Dyn};

use crate::error::{Error, Result};

const JITTER_START: f64 = 1e-8;
const JITTER_MAX: f64 = 1e-4;

/// Cholesky factor of a symmetric positive definite matrix.
///
/// On failure a diagonal jitter of `1e-8 * mean(diag)` is added and escalated by
/// a factor of ten up to `1e-4 * mean(diag)` before giving up.
pub fn cholesky_with_jitter(matrix: &DMatrix<f64>) -> Result<Cholesky<f64, Dyn>> {
    if !matrix.iter().all(|v| v.is_finite()) {
        return Err(Error::Numerical("matrix has non-finite entries".into()));
    }
    if let Some(chol) = Cholesky::new(matrix.clone()) {
        return Ok(chol);
    }
    let n = matrix.nrows().max(1);
    let scale = (matrix.diagonal().sum() / n as f64).abs().max(f64::MIN_POSITIVE);
    let mut factor = JITTER_START;
    while factor <= JITTER_MAX * (1.0 + 1e-12) {
        let mut jittered = matrix.clone();
        for i in 0..matrix.nrows() {
            jittered[(i, i)] += factor * scale;
        }
        if let Some(chol) = Cholesky::new(jittered) {
            log::debug!("cholesky needed jitter {:e}", factor * scale);
            return Ok(chol);
        }
        factor *= 10.0;
    }
    Err(Error::IllConditioned {
        max_jitter: JITTER_MAX * scale,
    })
}

/// `log|A|` from a Cholesky factor.
pub fn log_det(chol: &Cholesky<f64, Dyn>) -> f64 {
    2.0 * chol.l_dirty().diagonal().iter().map(|v| v.ln()).sum::<f64>()
}

/// Smallest eigenvalue of a symmetric matrix.
pub fn min_eigenvalue(matrix: &DMatrix<f64>) -> f64 {
    let sym = (matrix + matrix.transpose()) * 0.5;
    sym.symmetric_eigenvalues().min()
}

pub fn all_finite(matrix: &DMatrix<f64>) -> bool {
    matrix.iter().all(|v| v.is_finite())
}

/// Matrix of `‖a_i - b_j‖²` over rows `a_i` of `a` and `b_j` of `b`.
pub fn pairwise_sq_dists_rows(a: &DMatrix<f64>, b: &DMatrix<f64>) -> DMatrix<f64> {
    debug_assert_eq!(a.ncols(), b.ncols());
    DMatrix::from_fn(a.nrows(), b.nrows(), |i, j| {
        let mut acc = 0.0;
        for k in 0..a.ncols() {
            let diff = a[(i, k)] - b[(j, k)];
            acc += diff * diff;
        }
        acc
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn jitter_rescues_singular_psd_matrix() {
        let ones = DMatrix::from_element(3, 3, 1.0);
        assert!(Cholesky::new(ones.clone()).is_none());
        let chol = cholesky_with_jitter(&ones).unwrap();
        let back = chol.l() * chol.l().transpose();
        assert!((back - ones).abs().max() < 1e-3);
    }

    #[test]
    fn indefinite_matrix_is_rejected() {
        let m = DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, -1.0]);
        assert!(matches!(
            cholesky_with_jitter(&m),
            Err(Error::IllConditioned { .. })
        ));
    }

    #[test]
    fn log_det_of_diagonal() {
        let m = DMatrix::from_diagonal(&nalgebra::DVector::from_vec(vec![2.0, 3.0]));
        let chol = cholesky_with_jitter(&m).unwrap();
        assert!((log_det(&chol) - 6f64.ln()).abs() < 1e-14);
    }
}
