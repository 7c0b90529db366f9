//! C ABI over the stein-features library.
//!
//! Matrices cross the boundary as row-major `double` buffers with one point
//! (or one frequency) per row. Every entry point returns an [`SfStatus`];
//! on failure [`sf_last_error_message`] describes the error for the calling
//! thread. Mixtures are opaque handles released with [`sf_mixture_free`].

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::ptr;

use nalgebra::{DMatrix, DVector};
use stein_features::msrfr::{msrfr_predict_marginals, train_msrfr, FrequencyPrior, MixtureModel, MsrfrConfig};
use stein_features::optim::Optimizer;
use stein_features::spectral::{rff_features, Sampler};
use stein_features::{Error, FrequencyMatrix, SpectralDensity};

/// Result code of every call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SfStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    Numerical = 3,
    Io = 4,
    Parse = 5,
    Panic = 6,
}

/// Frequency samplers accepted by [`sf_sample_frequencies`].
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SfSampler {
    Mc = 0,
    Qmc = 1,
    Orf = 2,
    Svgd = 3,
}

/// Training options for [`sf_mixture_fit`].
#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct SfFitOptions {
    pub iterations: usize,
    pub step_size: f64,
    /// Non-zero selects the adaptive (adagrad) step rule.
    pub adaptive: i32,
    /// Non-zero learns the noise variance.
    pub learn_noise: i32,
}

/// Opaque mixture of frequency matrices.
pub struct SfMixture {
    model: MixtureModel,
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_last_error(msg: &str) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = c);
}

/// Message for the last failed call on this thread, or an empty string.
/// The pointer stays valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn sf_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}

struct Failure(SfStatus, String);

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let status = match &e {
            Error::Config(_) | Error::DimensionMismatch(_) | Error::UnsupportedDimension { .. } => {
                SfStatus::InvalidArgument
            }
            Error::Divergence { .. }
            | Error::IllConditioned { .. }
            | Error::Numerical(_)
            | Error::OptimizationFailed { .. } => SfStatus::Numerical,
            Error::Dataset(_) | Error::Format(_) => SfStatus::Parse,
            Error::Io { .. } => SfStatus::Io,
        };
        Failure(status, e.to_string())
    }
}

fn null(what: &str) -> Failure {
    Failure(SfStatus::NullPointer, format!("{what} is null"))
}

fn invalid(msg: impl Into<String>) -> Failure {
    Failure(SfStatus::InvalidArgument, msg.into())
}

fn guard(f: impl FnOnce() -> Result<(), Failure>) -> SfStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => SfStatus::Ok,
        Ok(Err(Failure(status, msg))) => {
            set_last_error(&msg);
            status
        }
        Err(_) => {
            set_last_error("internal panic");
            SfStatus::Panic
        }
    }
}

/// # Safety
/// `ptr` must be null or valid for `len` reads.
unsafe fn slice<'a>(ptr: *const f64, len: usize, what: &str) -> Result<&'a [f64], Failure> {
    if ptr.is_null() {
        return Err(null(what));
    }
    Ok(std::slice::from_raw_parts(ptr, len))
}

/// # Safety
/// `ptr` must be null or valid for `len` writes.
unsafe fn slice_mut<'a>(ptr: *mut f64, len: usize, what: &str) -> Result<&'a mut [f64], Failure> {
    if ptr.is_null() {
        return Err(null(what));
    }
    Ok(std::slice::from_raw_parts_mut(ptr, len))
}

/// Row-major `n × d` points as the library's `d × n` layout.
unsafe fn points(ptr: *const f64, n: usize, d: usize, what: &str) -> Result<DMatrix<f64>, Failure> {
    if n == 0 || d == 0 {
        return Err(invalid(format!("{what} must have at least one row and column")));
    }
    let len = n.checked_mul(d).ok_or_else(|| invalid("size overflow"))?;
    Ok(DMatrix::from_column_slice(d, n, slice(ptr, len, what)?))
}

unsafe fn path_arg(path: *const c_char) -> Result<&'static Path, Failure> {
    if path.is_null() {
        return Err(null("path"));
    }
    let s = CStr::from_ptr(path)
        .to_str()
        .map_err(|_| invalid("path is not valid UTF-8"))?;
    Ok(Path::new(s))
}

fn fill_from_matrix(out: &mut [f64], m: &DMatrix<f64>) {
    // Row-major copy.
    for (i, v) in out.iter_mut().enumerate() {
        *v = m[(i / m.ncols(), i % m.ncols())];
    }
}

/// Draws `rows × dims` frequencies for an isotropic RBF kernel into `out`
/// (row-major). `sampler` is an [`SfSampler`] value; the SVGD sampler uses
/// 200 steps of size 0.05.
///
/// # Safety
/// `out` must be valid for `rows * dims` writes.
#[no_mangle]
pub unsafe extern "C" fn sf_sample_frequencies(
    sampler: u32,
    lengthscale: f64,
    rows: usize,
    dims: usize,
    seed: u64,
    out: *mut f64,
) -> SfStatus {
    guard(|| {
        let sampler = match sampler {
            0 => Sampler::Mc,
            1 => Sampler::Qmc,
            2 => Sampler::Orf,
            3 => Sampler::Svgd {
                steps: 200,
                step_size: 0.05,
            },
            other => return Err(invalid(format!("unknown sampler {other}"))),
        };
        let len = rows.checked_mul(dims).ok_or_else(|| invalid("size overflow"))?;
        let out = slice_mut(out, len, "out")?;
        let density = SpectralDensity::isotropic_rbf(lengthscale, dims)?;
        let omega = sampler.sample(&density, rows, seed)?;
        out.copy_from_slice(&omega.to_row_major());
        Ok(())
    })
}

/// Random Fourier features of `n × d` inputs `x` for `rows × d` frequencies
/// `omega`; writes the `2·rows × n` feature matrix row-major into `out`.
///
/// # Safety
/// Buffers must be valid for the stated sizes.
#[no_mangle]
pub unsafe extern "C" fn sf_rff_features(
    x: *const f64,
    n: usize,
    d: usize,
    omega: *const f64,
    rows: usize,
    out: *mut f64,
) -> SfStatus {
    guard(|| {
        let x = points(x, n, d, "x")?;
        let omega = FrequencyMatrix::new(points(omega, rows, d, "omega")?.transpose())?;
        let out = slice_mut(out, 2 * rows * n, "out")?;
        let phi = rff_features(&x, &omega)?;
        fill_from_matrix(out, phi.as_matrix());
        Ok(())
    })
}

/// Builds a mixture from a row-major `components × rows × dims` tensor.
///
/// # Safety
/// `tensor` must hold `components * rows * dims` values; `out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn sf_mixture_new(
    components: usize,
    rows: usize,
    dims: usize,
    tensor: *const f64,
    noise_variance: f64,
    alpha: f64,
    prior_scale: f64,
    out: *mut *mut SfMixture,
) -> SfStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        let len = components
            .checked_mul(rows)
            .and_then(|v| v.checked_mul(dims))
            .ok_or_else(|| invalid("size overflow"))?;
        let values = slice(tensor, len, "tensor")?;
        let model = MixtureModel::from_tensor(
            components,
            rows,
            dims,
            values,
            noise_variance,
            alpha,
            FrequencyPrior::gaussian(prior_scale)?,
        )?;
        *out = Box::into_raw(Box::new(SfMixture { model }));
        Ok(())
    })
}

/// Initial mixture for `n × d` data: independent MC draws per component
/// around the median input distance, default prior.
///
/// # Safety
/// `x` holds `n * d` values, `y` holds `n`; `out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn sf_mixture_init(
    x: *const f64,
    y: *const f64,
    n: usize,
    d: usize,
    rows: usize,
    components: usize,
    alpha: f64,
    seed: u64,
    out: *mut *mut SfMixture,
) -> SfStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        let x = points(x, n, d, "x")?;
        let y = DVector::from_column_slice(slice(y, n, "y")?);
        let model = MixtureModel::initial(&x, &y, rows, components, 1.0, alpha, FrequencyPrior::default(), seed)?;
        *out = Box::into_raw(Box::new(SfMixture { model }));
        Ok(())
    })
}

/// Releases a mixture. Null is ignored.
///
/// # Safety
/// `mixture` must come from this library and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn sf_mixture_free(mixture: *mut SfMixture) {
    if !mixture.is_null() {
        let _ = catch_unwind(AssertUnwindSafe(|| drop(Box::from_raw(mixture))));
    }
}

unsafe fn handle<'a>(mixture: *const SfMixture) -> Result<&'a SfMixture, Failure> {
    mixture.as_ref().ok_or_else(|| null("mixture"))
}

/// Reports the mixture's components `M`, frequencies `R` and input dimension `d`.
///
/// # Safety
/// All pointers must be valid.
#[no_mangle]
pub unsafe extern "C" fn sf_mixture_dims(
    mixture: *const SfMixture,
    components: *mut usize,
    rows: *mut usize,
    dims: *mut usize,
) -> SfStatus {
    guard(|| {
        let m = &handle(mixture)?.model;
        if components.is_null() || rows.is_null() || dims.is_null() {
            return Err(null("output"));
        }
        *components = m.len();
        *rows = m.frequencies();
        *dims = m.dims();
        Ok(())
    })
}

/// Copies the frequency tensor (row-major `M × R × d`) and the noise variance.
///
/// # Safety
/// `tensor` must be valid for `len` writes and `noise_variance` for one.
#[no_mangle]
pub unsafe extern "C" fn sf_mixture_parameters(
    mixture: *const SfMixture,
    tensor: *mut f64,
    len: usize,
    noise_variance: *mut f64,
) -> SfStatus {
    guard(|| {
        let m = &handle(mixture)?.model;
        let values = m.tensor();
        if len != values.len() {
            return Err(invalid(format!("tensor buffer holds {len} values, need {}", values.len())));
        }
        slice_mut(tensor, len, "tensor")?.copy_from_slice(&values);
        if noise_variance.is_null() {
            return Err(null("noise_variance"));
        }
        *noise_variance = m.noise_variance();
        Ok(())
    })
}

/// Trains the mixture in place on `n × d` data.
///
/// # Safety
/// `x` holds `n * d` values and `y` holds `n`.
#[no_mangle]
pub unsafe extern "C" fn sf_mixture_fit(
    mixture: *mut SfMixture,
    x: *const f64,
    y: *const f64,
    n: usize,
    d: usize,
    options: SfFitOptions,
) -> SfStatus {
    guard(|| {
        let h = mixture.as_mut().ok_or_else(|| null("mixture"))?;
        let x = points(x, n, d, "x")?;
        let y = DVector::from_column_slice(slice(y, n, "y")?);
        let config = MsrfrConfig {
            step_size: options.step_size,
            iterations: options.iterations,
            optimizer: if options.adaptive != 0 {
                Optimizer::Adagrad
            } else {
                Optimizer::Plain
            },
            learn_noise: options.learn_noise != 0,
            ..MsrfrConfig::default()
        };
        h.model = train_msrfr(&x, &y, &h.model, &config)?;
        Ok(())
    })
}

/// Mixture predictive mean and latent variance at `n_test × d` points,
/// conditioned on the `n × d` training data.
///
/// # Safety
/// Input buffers must match the stated sizes; `mean` and `variance` must be
/// valid for `n_test` writes.
#[no_mangle]
pub unsafe extern "C" fn sf_mixture_predict(
    mixture: *const SfMixture,
    x: *const f64,
    y: *const f64,
    n: usize,
    d: usize,
    x_test: *const f64,
    n_test: usize,
    mean: *mut f64,
    variance: *mut f64,
) -> SfStatus {
    guard(|| {
        let m = &handle(mixture)?.model;
        let x = points(x, n, d, "x")?;
        let y = DVector::from_column_slice(slice(y, n, "y")?);
        let xs = points(x_test, n_test, d, "x_test")?;
        let mean = slice_mut(mean, n_test, "mean")?;
        let variance = slice_mut(variance, n_test, "variance")?;
        let (mu, var) = msrfr_predict_marginals(m, &x, &y, &xs)?;
        mean.copy_from_slice(mu.as_slice());
        variance.copy_from_slice(var.as_slice());
        Ok(())
    })
}

/// Writes the mixture in the library's text model format.
///
/// # Safety
/// `path` must be a NUL-terminated string.
#[no_mangle]
pub unsafe extern "C" fn sf_mixture_save(mixture: *const SfMixture, path: *const c_char) -> SfStatus {
    guard(|| {
        let m = &handle(mixture)?.model;
        let path = path_arg(path)?;
        std::fs::write(path, m.to_text()).map_err(|e| Failure(SfStatus::Io, format!("{}: {e}", path.display())))
    })
}

/// Reads a mixture written by [`sf_mixture_save`].
///
/// # Safety
/// `path` must be a NUL-terminated string and `out` valid.
#[no_mangle]
pub unsafe extern "C" fn sf_mixture_load(path: *const c_char, out: *mut *mut SfMixture) -> SfStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        *out = ptr::null_mut();
        let path = path_arg(path)?;
        let text =
            std::fs::read_to_string(path).map_err(|e| Failure(SfStatus::Io, format!("{}: {e}", path.display())))?;
        let model = MixtureModel::from_text(&text)?;
        *out = Box::into_raw(Box::new(SfMixture { model }));
        Ok(())
    })
}
