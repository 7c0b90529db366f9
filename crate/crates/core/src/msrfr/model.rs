use std::io::{BufRead, Write};

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::rng::seeded_stream;
use crate::spectral::{sample_mc_with, FrequencyMatrix, SpectralDensity};
use crate::ssgp::{initial_noise_variance, median_lengthscale, SsgpModel};

/// Independent Gaussian prior `N(0, s²)` on every frequency entry.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FrequencyPrior {
    scale: f64,
}

impl FrequencyPrior {
    pub const DEFAULT_SCALE: f64 = 10.0;

    pub fn gaussian(scale: f64) -> Result<Self> {
        if !(scale.is_finite() && scale > 0.0) {
            return Err(Error::config(format!("prior scale must be positive, got {scale}")));
        }
        Ok(Self { scale })
    }

    pub fn scale(&self) -> f64 {
        self.scale
    }

    /// Entrywise `∇ log p(Ω) = -Ω / s²`.
    pub fn score(&self, omega: &DMatrix<f64>) -> DMatrix<f64> {
        omega / (-(self.scale * self.scale))
    }

    /// `log p(Ω)` summed over entries.
    pub fn log_density(&self, omega: &DMatrix<f64>) -> f64 {
        let var = self.scale * self.scale;
        let norm = -0.5 * (2.0 * std::f64::consts::PI * var).ln();
        omega.iter().map(|w| norm - 0.5 * w * w / var).sum()
    }
}

impl Default for FrequencyPrior {
    fn default() -> Self {
        Self {
            scale: Self::DEFAULT_SCALE,
        }
    }
}

/// `M` frequency matrices sharing one noise variance, a frequency prior and
/// the repulsion temperature `α`.
#[derive(Debug, Clone, PartialEq)]
pub struct MixtureModel {
    components: Vec<FrequencyMatrix>,
    noise_variance: f64,
    alpha: f64,
    prior: FrequencyPrior,
}

impl MixtureModel {
    pub fn new(
        components: Vec<FrequencyMatrix>,
        noise_variance: f64,
        alpha: f64,
        prior: FrequencyPrior,
    ) -> Result<Self> {
        let first = components
            .first()
            .ok_or_else(|| Error::config("mixture needs at least one component"))?;
        let shape = (first.rows(), first.dims());
        if let Some(bad) = components.iter().find(|c| (c.rows(), c.dims()) != shape) {
            return Err(Error::shape(format!(
                "mixture components must share shape {}x{}, found {}x{}",
                shape.0,
                shape.1,
                bad.rows(),
                bad.dims()
            )));
        }
        if !(noise_variance.is_finite() && noise_variance > 0.0) {
            return Err(Error::config(format!(
                "noise variance must be positive, got {noise_variance}"
            )));
        }
        if !(alpha.is_finite() && alpha >= 0.0) {
            return Err(Error::config(format!("temperature must be non-negative, got {alpha}")));
        }
        Ok(Self {
            components,
            noise_variance,
            alpha,
            prior,
        })
    }

    /// Independent MC draws per component (distinct streams of `seed`) from an
    /// isotropic RBF density at `lengthscale_scale` times the median input
    /// distance; noise starts at `0.1 · var(y)`.
    #[allow(clippy::too_many_arguments)]
    pub fn initial(
        x: &DMatrix<f64>,
        y: &nalgebra::DVector<f64>,
        frequencies: usize,
        components: usize,
        lengthscale_scale: f64,
        alpha: f64,
        prior: FrequencyPrior,
        seed: u64,
    ) -> Result<Self> {
        if components == 0 {
            return Err(Error::config("mixture needs at least one component"));
        }
        let density =
            SpectralDensity::isotropic_rbf(median_lengthscale(x) * lengthscale_scale, x.nrows())?;
        let comps = (0..components)
            .map(|m| sample_mc_with(&density, frequencies, &mut seeded_stream(seed, m as u64)))
            .collect::<Result<Vec<_>>>()?;
        Self::new(comps, initial_noise_variance(y), alpha, prior)
    }

    pub fn len(&self) -> usize {
        self.components.len()
    }

    pub fn is_empty(&self) -> bool {
        self.components.is_empty()
    }

    pub fn frequencies(&self) -> usize {
        self.components[0].rows()
    }

    pub fn dims(&self) -> usize {
        self.components[0].dims()
    }

    pub fn components(&self) -> &[FrequencyMatrix] {
        &self.components
    }

    pub fn noise_variance(&self) -> f64 {
        self.noise_variance
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn prior(&self) -> FrequencyPrior {
        self.prior
    }

    /// Component `m` as a standalone SSGP.
    pub fn component(&self, m: usize) -> Result<SsgpModel> {
        let omega = self.components.get(m).ok_or_else(|| {
            Error::config(format!("component index {m} out of range (M = {})", self.len()))
        })?;
        SsgpModel::new(omega.clone(), self.noise_variance)
    }

    pub fn with_components(&self, components: Vec<FrequencyMatrix>) -> Result<Self> {
        Self::new(components, self.noise_variance, self.alpha, self.prior)
    }

    pub fn with_noise_variance(&self, noise_variance: f64) -> Result<Self> {
        Self::new(self.components.clone(), noise_variance, self.alpha, self.prior)
    }

    pub fn with_alpha(&self, alpha: f64) -> Result<Self> {
        Self::new(self.components.clone(), self.noise_variance, alpha, self.prior)
    }

    /// Parameters as a row-major `M × R × d` tensor.
    pub fn tensor(&self) -> Vec<f64> {
        self.components.iter().flat_map(|c| c.to_row_major()).collect()
    }

    pub fn from_tensor(
        components: usize,
        frequencies: usize,
        dims: usize,
        values: &[f64],
        noise_variance: f64,
        alpha: f64,
        prior: FrequencyPrior,
    ) -> Result<Self> {
        let block = frequencies * dims;
        if components == 0 || block == 0 || values.len() != components * block {
            return Err(Error::shape(format!(
                "tensor of {} values does not match {components}x{frequencies}x{dims}",
                values.len()
            )));
        }
        let comps = values
            .chunks(block)
            .map(|chunk| FrequencyMatrix::from_row_slice(frequencies, dims, chunk))
            .collect::<Result<Vec<_>>>()?;
        Self::new(comps, noise_variance, alpha, prior)
    }

    /// Writes the versioned text container. Floats use the shortest
    /// representation that parses back to the same bits.
    pub fn write_to<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "{MAGIC}")?;
        writeln!(out, "version {FORMAT_VERSION}")?;
        writeln!(out, "components {}", self.len())?;
        writeln!(out, "frequencies {}", self.frequencies())?;
        writeln!(out, "dims {}", self.dims())?;
        writeln!(out, "noise_variance {:?}", self.noise_variance)?;
        writeln!(out, "alpha {:?}", self.alpha)?;
        writeln!(out, "prior gaussian {:?}", self.prior.scale)?;
        writeln!(out, "tensor")?;
        for c in &self.components {
            for r in 0..c.rows() {
                let row: Vec<String> = c.as_matrix().row(r).iter().map(|v| format!("{v:?}")).collect();
                writeln!(out, "{}", row.join(" "))?;
            }
        }
        Ok(())
    }

    pub fn to_text(&self) -> String {
        let mut buf = Vec::new();
        self.write_to(&mut buf).expect("writing to a Vec cannot fail");
        String::from_utf8(buf).expect("model text is ASCII")
    }

    pub fn read_from<R: BufRead>(input: R) -> Result<Self> {
        let mut lines = input.lines();
        let mut next = || -> Result<String> {
            loop {
                match lines.next() {
                    None => return Err(Error::Format("unexpected end of model file".into())),
                    Some(Err(e)) => return Err(Error::Format(e.to_string())),
                    Some(Ok(l)) if l.trim().is_empty() => continue,
                    Some(Ok(l)) => return Ok(l.trim().to_owned()),
                }
            }
        };
        if next()? != MAGIC {
            return Err(Error::Format("missing mixture model header".into()));
        }
        let version: u32 = keyed(&next()?, "version")?;
        if version != FORMAT_VERSION {
            return Err(Error::Format(format!("unsupported model format version {version}")));
        }
        let m: usize = keyed(&next()?, "components")?;
        let r: usize = keyed(&next()?, "frequencies")?;
        let d: usize = keyed(&next()?, "dims")?;
        let noise: f64 = keyed(&next()?, "noise_variance")?;
        let alpha: f64 = keyed(&next()?, "alpha")?;
        let prior_line = next()?;
        let scale: f64 = match prior_line.split_whitespace().collect::<Vec<_>>().as_slice() {
            ["prior", "gaussian", s] => parse_num(s)?,
            _ => return Err(Error::Format(format!("bad prior line: {prior_line}"))),
        };
        if next()? != "tensor" {
            return Err(Error::Format("missing tensor section".into()));
        }
        let mut values = Vec::with_capacity(m * r * d);
        for _ in 0..m * r {
            let line = next()?;
            let row = line.split_whitespace().map(parse_num).collect::<Result<Vec<f64>>>()?;
            if row.len() != d {
                return Err(Error::Format(format!("tensor row has {} values, expected {d}", row.len())));
            }
            values.extend(row);
        }
        Self::from_tensor(m, r, d, &values, noise, alpha, FrequencyPrior::gaussian(scale)?)
    }

    pub fn from_text(text: &str) -> Result<Self> {
        Self::read_from(text.as_bytes())
    }
}

const MAGIC: &str = "stein-features mixture";
const FORMAT_VERSION: u32 = 1;

fn parse_num<T: std::str::FromStr>(s: &str) -> Result<T> {
    s.parse()
        .map_err(|_| Error::Format(format!("cannot parse number {s:?}")))
}

fn keyed<T: std::str::FromStr>(line: &str, key: &str) -> Result<T> {
    match line.split_once(' ') {
        Some((k, v)) if k == key => parse_num(v.trim()),
        _ => Err(Error::Format(format!("expected `{key} <value>`, got {line:?}"))),
    }
}
