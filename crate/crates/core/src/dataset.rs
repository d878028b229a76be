//! Dataset container, CSV ingestion and seeded train/test splitting.
//!
//! Datasets are immutable after construction and safe to share read-only
//! across threads.

use std::fmt::Write as _;
use std::path::Path;

use ndarray::{Array2, ArrayView1, ArrayView2};
use rand::seq::SliceRandom;

use crate::error::{Error, Result};
use crate::rng;

/// A dataset of `len` points in `R^p` with ordinal labels in `1..=K`.
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledDataset {
    features: Array2<f64>,
    labels: Vec<usize>,
    k: usize,
}

impl LabeledDataset {
    /// Builds a dataset, validating the invariants: `k >= 2`, every label in
    /// `1..=k`, at least one row and one feature, all features finite.
    pub fn new(features: Array2<f64>, labels: Vec<usize>, k: usize) -> Result<Self> {
        if k < 2 {
            return Err(Error::InvalidDataset("K must be >= 2".into()));
        }
        if features.nrows() == 0 {
            return Err(Error::InvalidDataset("dataset has no rows".into()));
        }
        if features.ncols() == 0 {
            return Err(Error::InvalidDataset("dataset has no feature columns".into()));
        }
        if labels.len() != features.nrows() {
            return Err(Error::InvalidDataset(format!(
                "{} labels for {} rows",
                labels.len(),
                features.nrows()
            )));
        }
        if let Some((i, &y)) = labels.iter().enumerate().find(|(_, &y)| y < 1 || y > k) {
            return Err(Error::InvalidDataset(format!(
                "label {y} at row {} outside 1..={k}",
                i + 1
            )));
        }
        if !features.iter().all(|v| v.is_finite()) {
            return Err(Error::NonFinite("feature matrix".into()));
        }
        Ok(Self { features, labels, k })
    }

    pub fn n_rows(&self) -> usize {
        self.features.nrows()
    }

    pub fn n_features(&self) -> usize {
        self.features.ncols()
    }

    /// Number of classes `K`.
    pub fn k(&self) -> usize {
        self.k
    }

    pub fn features(&self) -> ArrayView2<'_, f64> {
        self.features.view()
    }

    pub fn row(&self, i: usize) -> ArrayView1<'_, f64> {
        self.features.row(i)
    }

    /// Ordinal labels, values in `1..=K`.
    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    /// True when every class `1..=K` occurs at least once.
    pub fn has_all_classes(&self) -> bool {
        (1..=self.k).all(|c| self.labels.contains(&c))
    }

    /// Sub-dataset of the given row indices (keeps `K`).
    pub fn select(&self, idx: &[usize]) -> Result<Self> {
        let features = self.features.select(ndarray::Axis(0), idx);
        let labels = idx.iter().map(|&i| self.labels[i]).collect();
        Self::new(features, labels, self.k)
    }
}

/// Specification of a random train/test split.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SplitSpec {
    /// Fraction of rows assigned to the training set, in `(0, 1)`.
    pub train_fraction: f64,
    pub seed: u64,
}

/// Splits a dataset by a seeded uniform permutation; the first
/// `ceil(fraction * len)` permuted rows form the training set.
pub fn split(data: &LabeledDataset, spec: SplitSpec) -> Result<(LabeledDataset, LabeledDataset)> {
    if !(spec.train_fraction > 0.0 && spec.train_fraction < 1.0) {
        return Err(Error::InvalidParam(format!(
            "train fraction {} outside (0, 1)",
            spec.train_fraction
        )));
    }
    let n = data.n_rows();
    let n_train = (spec.train_fraction * n as f64).ceil() as usize;
    if n_train >= n {
        return Err(Error::InvalidParam(format!(
            "train fraction {} leaves an empty test set for {n} rows",
            spec.train_fraction
        )));
    }
    let mut idx: Vec<usize> = (0..n).collect();
    let mut rng = rng::seeded(spec.seed ^ rng::SALT_SPLIT);
    idx.shuffle(&mut rng);
    let train = data.select(&idx[..n_train])?;
    let test = data.select(&idx[n_train..])?;
    Ok((train, test))
}

/// Canonical float formatting for dataset CSV files: 17 significant digits,
/// enough to round-trip any f64.
pub fn format_f64(v: f64) -> String {
    format!("{v:.16e}")
}

/// Reads a dataset from CSV with header `x1,...,xp,y`. `K` is the maximum
/// observed label; row order is preserved.
pub fn load_csv(path: impl AsRef<Path>) -> Result<LabeledDataset> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| {
        Error::Csv {
            row: 0,
            msg: format!("cannot read {}: {e}", path.display()),
        }
    })?;
    parse_csv(&text)
}

/// Parses CSV text in the dataset format. See [`load_csv`].
pub fn parse_csv(text: &str) -> Result<LabeledDataset> {
    let mut lines = text.lines().enumerate();
    let (_, header) = lines
        .next()
        .ok_or_else(|| Error::Csv { row: 1, msg: "empty file".into() })?;
    let cols: Vec<&str> = header.split(',').collect();
    if cols.len() < 2 || cols.last() != Some(&"y") {
        return Err(Error::Csv {
            row: 1,
            msg: format!("header must be x1,...,xp,y, got `{header}`"),
        });
    }
    for (j, c) in cols[..cols.len() - 1].iter().enumerate() {
        let expect = format!("x{}", j + 1);
        if *c != expect {
            return Err(Error::Csv {
                row: 1,
                msg: format!("feature column {} named `{c}`, expected `{expect}`", j + 1),
            });
        }
    }
    let p = cols.len() - 1;

    let mut flat: Vec<f64> = Vec::new();
    let mut labels: Vec<usize> = Vec::new();
    for (i, line) in lines {
        let row = i + 1; // 1-based, header is row 1
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != p + 1 {
            return Err(Error::Csv {
                row,
                msg: format!("expected {} fields, got {}", p + 1, fields.len()),
            });
        }
        for f in &fields[..p] {
            let v: f64 = f.trim().parse().map_err(|_| Error::Csv {
                row,
                msg: format!("non-numeric cell `{f}`"),
            })?;
            flat.push(v);
        }
        let y_str = fields[p].trim();
        let y: i64 = y_str.parse().map_err(|_| Error::Csv {
            row,
            msg: format!("non-integer label `{y_str}`"),
        })?;
        if y < 1 {
            return Err(Error::Csv { row, msg: format!("label {y} < 1") });
        }
        labels.push(y as usize);
    }
    if labels.is_empty() {
        return Err(Error::Csv { row: 1, msg: "no data rows".into() });
    }
    let k = *labels.iter().max().unwrap();
    let n = labels.len();
    let features = Array2::from_shape_vec((n, p), flat)
        .map_err(|e| Error::Csv { row: 0, msg: e.to_string() })?;
    LabeledDataset::new(features, labels, k)
}

/// Serializes a dataset in the canonical CSV format (UTF-8, `\n` line ends,
/// floats at 17 significant digits).
pub fn to_csv_string(data: &LabeledDataset) -> String {
    let p = data.n_features();
    let mut out = String::new();
    for j in 1..=p {
        let _ = write!(out, "x{j},");
    }
    out.push_str("y\n");
    for i in 0..data.n_rows() {
        for v in data.row(i) {
            let _ = write!(out, "{},", format_f64(*v));
        }
        let _ = writeln!(out, "{}", data.labels()[i]);
    }
    out
}

/// Writes a dataset to a CSV file in the canonical format.
pub fn write_csv(data: &LabeledDataset, path: impl AsRef<Path>) -> Result<()> {
    std::fs::write(path, to_csv_string(data))?;
    Ok(())
}
