//! Random Fourier feature kernel approximation, sparse spectrum GP regression,
//! and Stein variational gradient descent over spectral frequencies.

pub mod bench;
pub mod error;
pub mod exact_gp;
pub mod linalg;
pub mod msrfr;
pub mod optim;
pub mod rng;
pub mod spectral;
pub mod ssgp;
pub mod svgd;

pub use error::{Error, Result};
pub use exact_gp::Prediction;
pub use spectral::{FrequencyMatrix, SpectralDensity};
