use std::path::{Path, PathBuf};

use nalgebra::{DMatrix, DVector};
use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::seeded;

/// Inputs are stored column-per-point (`d × N`) to match the feature map.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub name: String,
    pub x: DMatrix<f64>,
    pub y: DVector<f64>,
    pub feature_names: Vec<String>,
    pub provenance: PathBuf,
}

impl Dataset {
    pub fn new(
        name: impl Into<String>,
        x: DMatrix<f64>,
        y: DVector<f64>,
        feature_names: Vec<String>,
        provenance: impl Into<PathBuf>,
    ) -> Result<Self> {
        if x.ncols() != y.len() {
            return Err(Error::shape(format!("{} input columns for {} targets", x.ncols(), y.len())));
        }
        if feature_names.len() != x.nrows() {
            return Err(Error::shape(format!(
                "{} feature names for {} input rows",
                feature_names.len(),
                x.nrows()
            )));
        }
        if y.len() < 2 {
            return Err(Error::Dataset(format!("dataset needs at least 2 points, got {}", y.len())));
        }
        if !x.iter().chain(y.iter()).all(|v| v.is_finite()) {
            return Err(Error::Dataset("dataset contains non-finite values".into()));
        }
        Ok(Self {
            name: name.into(),
            x,
            y,
            feature_names,
            provenance: provenance.into(),
        })
    }

    pub fn len(&self) -> usize {
        self.y.len()
    }

    pub fn is_empty(&self) -> bool {
        self.y.is_empty()
    }

    pub fn dims(&self) -> usize {
        self.x.nrows()
    }
}

/// Reads a headed numeric CSV. Every non-target column is a feature, in
/// header order.
pub fn load_csv(path: &Path, target: &str) -> Result<Dataset> {
    let mut reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| csv_error(path, e))?;
    let header: Vec<String> = reader
        .headers()
        .map_err(|e| csv_error(path, e))?
        .iter()
        .map(str::to_owned)
        .collect();
    let target_col = header
        .iter()
        .position(|h| h == target)
        .ok_or_else(|| Error::Dataset(format!("{}: no column named {target:?}", path.display())))?;
    let feature_names: Vec<String> = header
        .iter()
        .enumerate()
        .filter(|&(i, _)| i != target_col)
        .map(|(_, h)| h.clone())
        .collect();

    let mut features = Vec::new();
    let mut targets = Vec::new();
    let mut bad_rows = Vec::new();
    for (i, record) in reader.records().enumerate() {
        // Row numbers count the header as line 1.
        let line = i + 2;
        let record = record.map_err(|e| csv_error(path, e))?;
        let parsed: Option<Vec<f64>> = record
            .iter()
            .map(|cell| cell.parse::<f64>().ok().filter(|v| v.is_finite()))
            .collect();
        match parsed {
            Some(values) if values.len() == header.len() => {
                for (j, v) in values.iter().enumerate() {
                    if j == target_col {
                        targets.push(*v);
                    } else {
                        features.push(*v);
                    }
                }
            }
            _ => bad_rows.push(line),
        }
    }
    if !bad_rows.is_empty() {
        return Err(Error::Dataset(format!(
            "{}: non-numeric or missing cells on line(s) {:?}",
            path.display(),
            bad_rows
        )));
    }
    if targets.is_empty() {
        return Err(Error::Dataset(format!("{}: no data rows", path.display())));
    }
    let n = targets.len();
    let d = feature_names.len();
    if d == 0 {
        return Err(Error::Dataset(format!("{}: no feature columns", path.display())));
    }
    let name = path
        .file_stem()
        .map_or_else(|| "dataset".to_owned(), |s| s.to_string_lossy().into_owned());
    Dataset::new(
        name,
        DMatrix::from_column_slice(d, n, &features),
        DVector::from_vec(targets),
        feature_names,
        path,
    )
}

/// Reads the named columns of a headed numeric CSV as a `d × N` matrix, in
/// the order given. Other columns are ignored.
pub fn load_feature_columns(path: &Path, names: &[String]) -> Result<DMatrix<f64>> {
    let mut reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| csv_error(path, e))?;
    let header = reader.headers().map_err(|e| csv_error(path, e))?.clone();
    let cols = names
        .iter()
        .map(|n| {
            header
                .iter()
                .position(|h| h == n)
                .ok_or_else(|| Error::Dataset(format!("{}: no column named {n:?}", path.display())))
        })
        .collect::<Result<Vec<_>>>()?;
    let mut values = Vec::new();
    let mut bad_rows = Vec::new();
    for (i, record) in reader.records().enumerate() {
        let record = record.map_err(|e| csv_error(path, e))?;
        let row: Option<Vec<f64>> = cols
            .iter()
            .map(|&c| record.get(c).and_then(|v| v.parse::<f64>().ok()).filter(|v| v.is_finite()))
            .collect();
        match row {
            Some(row) => values.extend(row),
            None => bad_rows.push(i + 2),
        }
    }
    if !bad_rows.is_empty() {
        return Err(Error::Dataset(format!(
            "{}: non-numeric or missing cells on line(s) {:?}",
            path.display(),
            bad_rows
        )));
    }
    if values.is_empty() {
        return Err(Error::Dataset(format!("{}: no data rows", path.display())));
    }
    let n = values.len() / names.len();
    Ok(DMatrix::from_column_slice(names.len(), n, &values))
}

fn csv_error(path: &Path, e: csv::Error) -> Error {
    match e.into_kind() {
        csv::ErrorKind::Io(source) => Error::io(path, source),
        other => Error::Dataset(format!("{}: {other:?}", path.display())),
    }
}

/// Affine maps fitted on training data. Constant feature columns are dropped.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scaler {
    /// Indices of the retained input rows.
    pub kept: Vec<usize>,
    pub input_mean: Vec<f64>,
    pub input_scale: Vec<f64>,
    pub target_mean: f64,
    pub target_scale: f64,
}

const CONSTANT_TOL: f64 = 1e-12;

impl Scaler {
    pub fn fit(x: &DMatrix<f64>, y: &DVector<f64>, feature_names: &[String]) -> Result<Self> {
        let n = y.len();
        if n == 0 || x.ncols() != n {
            return Err(Error::shape("cannot fit a scaler to an empty or mismatched sample"));
        }
        let mut kept = Vec::new();
        let mut input_mean = Vec::new();
        let mut input_scale = Vec::new();
        for j in 0..x.nrows() {
            let (mean, sd) = moments(x.row(j).iter().copied(), n);
            if sd <= CONSTANT_TOL * mean.abs().max(1.0) {
                let name = feature_names.get(j).map_or("?", String::as_str);
                log::warn!("dropping constant feature column {j} ({name})");
                continue;
            }
            kept.push(j);
            input_mean.push(mean);
            input_scale.push(sd);
        }
        if kept.is_empty() {
            return Err(Error::Dataset("every feature column is constant".into()));
        }
        let (target_mean, sd) = moments(y.iter().copied(), n);
        let target_scale = if sd > 0.0 { sd } else { 1.0 };
        Ok(Self {
            kept,
            input_mean,
            input_scale,
            target_mean,
            target_scale,
        })
    }

    /// Number of retained input dimensions.
    pub fn dims(&self) -> usize {
        self.kept.len()
    }

    pub fn transform_inputs(&self, x: &DMatrix<f64>) -> Result<DMatrix<f64>> {
        if let Some(&max) = self.kept.iter().max() {
            if max >= x.nrows() {
                return Err(Error::shape(format!(
                    "scaler expects at least {} input rows, got {}",
                    max + 1,
                    x.nrows()
                )));
            }
        }
        let mut out = x.select_rows(&self.kept);
        for (r, (m, s)) in self.input_mean.iter().zip(&self.input_scale).enumerate() {
            out.row_mut(r).apply(|v| *v = (*v - m) / s);
        }
        Ok(out)
    }

    pub fn transform_targets(&self, y: &DVector<f64>) -> DVector<f64> {
        y.map(|v| (v - self.target_mean) / self.target_scale)
    }

    pub fn inverse_targets(&self, y: &DVector<f64>) -> DVector<f64> {
        y.map(|v| v * self.target_scale + self.target_mean)
    }

    /// Rescales a variance from standardized to original target units.
    pub fn inverse_variance(&self, v: f64) -> f64 {
        v * self.target_scale * self.target_scale
    }
}

fn moments(values: impl Iterator<Item = f64> + Clone, n: usize) -> (f64, f64) {
    let mean = values.clone().sum::<f64>() / n as f64;
    let var = values.map(|v| (v - mean).powi(2)).sum::<f64>() / n as f64;
    (mean, var.sqrt())
}

/// Standardized train/test partition together with the training scaler.
#[derive(Debug, Clone)]
pub struct Split {
    pub train: Dataset,
    pub test: Dataset,
    pub scaler: Scaler,
}

/// Training-set size for `fraction` of `n` points: rounded up, and always
/// leaving at least one point on each side.
pub fn train_size(n: usize, fraction: f64) -> usize {
    // The small offset keeps exact products such as 0.8 * 1030 from rounding up.
    let raw = (fraction * n as f64 - 1e-9).ceil() as usize;
    raw.clamp(1, n.saturating_sub(1).max(1))
}

/// Seeded uniform shuffle into train/test, standardized with training
/// statistics only.
pub fn split_standardize(data: &Dataset, fraction: f64, seed: u64) -> Result<Split> {
    if !(fraction > 0.0 && fraction < 1.0) {
        return Err(Error::config(format!("train fraction must lie in (0, 1), got {fraction}")));
    }
    let n = data.len();
    let mut idx: Vec<usize> = (0..n).collect();
    idx.shuffle(&mut seeded(seed));
    let test_idx = idx.split_off(train_size(n, fraction));
    let (train_x, train_y) = (data.x.select_columns(&idx), select(&data.y, &idx));
    let (test_x, test_y) = (data.x.select_columns(&test_idx), select(&data.y, &test_idx));

    let scaler = Scaler::fit(&train_x, &train_y, &data.feature_names)?;
    let names: Vec<String> = scaler.kept.iter().map(|&j| data.feature_names[j].clone()).collect();
    let part = |suffix: &str, x: &DMatrix<f64>, y: &DVector<f64>| -> Result<Dataset> {
        Ok(Dataset {
            name: format!("{}-{suffix}", data.name),
            x: scaler.transform_inputs(x)?,
            y: scaler.transform_targets(y),
            feature_names: names.clone(),
            provenance: data.provenance.clone(),
        })
    };
    Ok(Split {
        train: part("train", &train_x, &train_y)?,
        test: part("test", &test_x, &test_y)?,
        scaler,
    })
}

fn select(y: &DVector<f64>, idx: &[usize]) -> DVector<f64> {
    DVector::from_iterator(idx.len(), idx.iter().map(|&i| y[i]))
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Write;

    fn write(contents: &str) -> tempfile::NamedTempFile {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        f.write_all(contents.as_bytes()).unwrap();
        f
    }

    fn toy(n: usize) -> Dataset {
        let x = DMatrix::from_fn(2, n, |r, c| (c * (r + 2)) as f64 + 0.5 * r as f64);
        let y = DVector::from_fn(n, |i, _| (i as f64).sin());
        Dataset::new("toy", x, y, vec!["a".into(), "b".into()], "mem").unwrap()
    }

    #[test]
    fn loads_three_rows() {
        let f = write("a,y,b\n1,2,3\n4,5,6\n7,8,9\n");
        let ds = load_csv(f.path(), "y").unwrap();
        assert_eq!(ds.x.shape(), (2, 3));
        assert_eq!(ds.y.len(), 3);
        assert_eq!(ds.feature_names, ["a", "b"]);
        assert_eq!(ds.x[(1, 2)], 9.0);
        assert_eq!(ds.y[1], 5.0);
    }

    #[test]
    fn header_only_is_empty() {
        let f = write("a,y\n");
        assert!(matches!(load_csv(f.path(), "y"), Err(Error::Dataset(_))));
    }

    #[test]
    fn reports_bad_rows_and_columns() {
        let f = write("a,y\n1,2\nx,3\n4,\n5,6\n");
        let msg = load_csv(f.path(), "y").unwrap_err().to_string();
        assert!(msg.contains("[3, 4]"), "{msg}");
        let f = write("a,y\n1,2\n2,3\n");
        assert!(load_csv(f.path(), "z").is_err());
        assert!(matches!(
            load_csv(Path::new("/nonexistent/file.csv"), "y"),
            Err(Error::Io { .. })
        ));
    }

    #[test]
    fn ceiling_train_sizes() {
        assert_eq!(train_size(1503, 0.9), 1353);
        assert_eq!(train_size(1030, 0.8), 824);
        assert_eq!(train_size(768, 0.8), 615);
        assert_eq!(train_size(1599, 0.9), 1440);
        assert_eq!(train_size(2, 0.99), 1);
    }

    #[test]
    fn split_is_seeded_and_standardized() {
        let ds = toy(50);
        let a = split_standardize(&ds, 0.8, 3).unwrap();
        let b = split_standardize(&ds, 0.8, 3).unwrap();
        assert_eq!(a.train.x, b.train.x);
        assert_eq!(a.test.y, b.test.y);
        assert_eq!((a.train.len(), a.test.len()), (40, 10));
        for r in 0..2 {
            assert!(a.train.x.row(r).mean().abs() < 1e-10);
            assert!((a.train.x.row(r).variance() - 1.0).abs() < 1e-10);
        }
        assert!(a.train.y.mean().abs() < 1e-10);
        let c = split_standardize(&ds, 0.8, 4).unwrap();
        assert_ne!(a.train.y, c.train.y);
    }

    #[test]
    fn constant_column_dropped() {
        let mut ds = toy(10);
        ds.x.row_mut(0).fill(3.0);
        let s = split_standardize(&ds, 0.5, 0).unwrap();
        assert_eq!(s.scaler.kept, vec![1]);
        assert_eq!(s.train.dims(), 1);
        assert_eq!(s.train.feature_names, ["b"]);
    }

    #[test]
    fn inverse_round_trip() {
        let s = split_standardize(&toy(20), 0.5, 1).unwrap();
        let back = s.scaler.inverse_targets(&s.scaler.transform_targets(&toy(20).y));
        assert!((back - toy(20).y).abs().max() < 1e-12);
    }

    #[test]
    fn bad_fraction() {
        assert!(split_standardize(&toy(10), 1.0, 0).is_err());
        assert!(split_standardize(&toy(10), 0.0, 0).is_err());
    }
}
