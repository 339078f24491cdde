//! Labeled datasets: CSV ingestion, splits, cross-validation folds, min-max
//! scaling and synthetic generators.

use std::cmp::Ordering;
use std::fmt;
use std::fs::File;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Result, SomError};
use crate::matrix::Matrix;
use crate::scalar::Scalar;

/// A class identifier. Labels that both parse as integers compare
/// numerically, so `"2" < "10"`; anything else compares as text after all
/// integer labels.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ClassLabel(pub String);

impl ClassLabel {
    pub fn new(s: impl Into<String>) -> Self {
        ClassLabel(s.into())
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl Ord for ClassLabel {
    fn cmp(&self, other: &Self) -> Ordering {
        match (self.0.parse::<i64>(), other.0.parse::<i64>()) {
            (Ok(a), Ok(b)) => a.cmp(&b).then_with(|| self.0.cmp(&other.0)),
            (Ok(_), Err(_)) => Ordering::Less,
            (Err(_), Ok(_)) => Ordering::Greater,
            (Err(_), Err(_)) => self.0.cmp(&other.0),
        }
    }
}

impl PartialOrd for ClassLabel {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl fmt::Display for ClassLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl From<&str> for ClassLabel {
    fn from(s: &str) -> Self {
        ClassLabel(s.to_owned())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum LabelKind {
    #[default]
    None,
    Continuous,
    Categorical,
}

impl std::str::FromStr for LabelKind {
    type Err = SomError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "none" => Ok(LabelKind::None),
            "continuous" => Ok(LabelKind::Continuous),
            "categorical" => Ok(LabelKind::Categorical),
            _ => Err(SomError::InvalidConfig(format!(
                "unknown label kind `{s}`, expected none|continuous|categorical"
            ))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Labels<T> {
    None,
    Continuous(Vec<T>),
    Categorical(Vec<ClassLabel>),
}

impl<T> Labels<T> {
    pub fn kind(&self) -> LabelKind {
        match self {
            Labels::None => LabelKind::None,
            Labels::Continuous(_) => LabelKind::Continuous,
            Labels::Categorical(_) => LabelKind::Categorical,
        }
    }

    fn len(&self) -> Option<usize> {
        match self {
            Labels::None => None,
            Labels::Continuous(v) => Some(v.len()),
            Labels::Categorical(v) => Some(v.len()),
        }
    }
}

/// `N` datapoints of `n` features with optional labels.
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledDataset<T> {
    features: Matrix<T>,
    labels: Labels<T>,
    feature_names: Vec<String>,
    label_name: Option<String>,
}

impl<T: Scalar> LabeledDataset<T> {
    /// Checks finiteness and label length. Feature names default to
    /// `x0, x1, ...`.
    pub fn new(features: Matrix<T>, labels: Labels<T>) -> Result<Self> {
        let names = (0..features.n_cols()).map(|j| format!("x{j}")).collect();
        Self::with_names(features, labels, names, None)
    }

    pub fn with_names(
        features: Matrix<T>,
        labels: Labels<T>,
        feature_names: Vec<String>,
        label_name: Option<String>,
    ) -> Result<Self> {
        if feature_names.len() != features.n_cols() {
            return Err(SomError::LengthMismatch {
                left: feature_names.len(),
                right: features.n_cols(),
            });
        }
        if let Some(n) = labels.len() {
            if n != features.n_rows() {
                return Err(SomError::LengthMismatch {
                    left: features.n_rows(),
                    right: n,
                });
            }
        }
        for (i, row) in features.rows().enumerate() {
            if let Some(j) = row.iter().position(|v| !v.is_finite()) {
                return Err(SomError::NonFinite {
                    row: i + 1,
                    column: feature_names[j].clone(),
                    value: row[j].to_string(),
                });
            }
        }
        if let Labels::Continuous(y) = &labels {
            if let Some(i) = y.iter().position(|v| !v.is_finite()) {
                return Err(SomError::NonFinite {
                    row: i + 1,
                    column: label_name.clone().unwrap_or_else(|| "label".into()),
                    value: y[i].to_string(),
                });
            }
        }
        let label_name = match labels.kind() {
            LabelKind::None => None,
            _ => Some(label_name.unwrap_or_else(|| "label".into())),
        };
        Ok(LabeledDataset {
            features,
            labels,
            feature_names,
            label_name,
        })
    }

    pub fn len(&self) -> usize {
        self.features.n_rows()
    }

    pub fn is_empty(&self) -> bool {
        self.features.is_empty()
    }

    pub fn n_features(&self) -> usize {
        self.features.n_cols()
    }

    pub fn features(&self) -> &Matrix<T> {
        &self.features
    }

    pub fn labels(&self) -> &Labels<T> {
        &self.labels
    }

    pub fn label_kind(&self) -> LabelKind {
        self.labels.kind()
    }

    pub fn feature_names(&self) -> &[String] {
        &self.feature_names
    }

    pub fn label_name(&self) -> Option<&str> {
        self.label_name.as_deref()
    }

    pub fn continuous_labels(&self) -> Result<&[T]> {
        match &self.labels {
            Labels::Continuous(y) => Ok(y),
            _ => Err(SomError::MissingLabels("continuous")),
        }
    }

    pub fn class_labels(&self) -> Result<&[ClassLabel]> {
        match &self.labels {
            Labels::Categorical(y) => Ok(y),
            _ => Err(SomError::MissingLabels("categorical")),
        }
    }

    /// Copies the listed datapoints, in order.
    pub fn subset(&self, indices: &[usize]) -> Self {
        let labels = match &self.labels {
            Labels::None => Labels::None,
            Labels::Continuous(y) => Labels::Continuous(indices.iter().map(|&i| y[i]).collect()),
            Labels::Categorical(y) => {
                Labels::Categorical(indices.iter().map(|&i| y[i].clone()).collect())
            }
        };
        LabeledDataset {
            features: self.features.select_rows(indices),
            labels,
            feature_names: self.feature_names.clone(),
            label_name: self.label_name.clone(),
        }
    }

    /// Reorders and restricts features to `names`.
    pub fn select_features(&self, names: &[String]) -> Result<Self> {
        let columns = names
            .iter()
            .map(|n| {
                self.feature_names
                    .iter()
                    .position(|f| f == n)
                    .ok_or_else(|| SomError::MissingColumn(n.clone()))
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(LabeledDataset {
            features: self.features.select_columns(&columns),
            labels: self.labels.clone(),
            feature_names: names.to_vec(),
            label_name: self.label_name.clone(),
        })
    }

    /// Drops the feature columns named in `names`; every name must exist.
    pub fn drop_features(&self, names: &[String]) -> Result<Self> {
        if let Some(missing) = names.iter().find(|n| !self.feature_names.contains(n)) {
            return Err(SomError::MissingColumn(missing.clone()));
        }
        let keep: Vec<String> = self
            .feature_names
            .iter()
            .filter(|f| !names.contains(f))
            .cloned()
            .collect();
        self.select_features(&keep)
    }

    /// Removes datapoints whose class equals `class`.
    pub fn drop_class(&self, class: &ClassLabel) -> Result<Self> {
        let y = self.class_labels()?;
        let keep: Vec<usize> = (0..y.len()).filter(|&i| &y[i] != class).collect();
        Ok(self.subset(&keep))
    }

    pub fn with_features(&self, features: Matrix<T>) -> Result<Self> {
        Self::with_names(
            features,
            self.labels.clone(),
            self.feature_names.clone(),
            self.label_name.clone(),
        )
    }

    /// Writes a header row followed by one row per datapoint. Values use the
    /// shortest representation that parses back to the same number.
    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let file = File::create(path).map_err(|source| SomError::Io {
            path: path.to_owned(),
            source,
        })?;
        let mut w = csv::Writer::from_writer(file);
        let mut header = self.feature_names.clone();
        if let Some(name) = &self.label_name {
            header.push(name.clone());
        }
        w.write_record(&header)?;
        for (i, row) in self.features.rows().enumerate() {
            let mut rec: Vec<String> = row.iter().map(|v| v.to_string()).collect();
            match &self.labels {
                Labels::None => {}
                Labels::Continuous(y) => rec.push(y[i].to_string()),
                Labels::Categorical(y) => rec.push(y[i].0.clone()),
            }
            w.write_record(&rec)?;
        }
        w.flush().map_err(|source| SomError::Io {
            path: path.to_owned(),
            source,
        })?;
        Ok(())
    }
}

/// Reads the header row of a CSV file.
pub fn read_csv_header(path: &Path) -> Result<Vec<String>> {
    let file = File::open(path).map_err(|source| SomError::Io {
        path: path.to_owned(),
        source,
    })?;
    let mut r = csv::Reader::from_reader(file);
    Ok(r.headers()?.iter().map(|h| h.trim().to_owned()).collect())
}

/// Loads a CSV file with a header row. Every column except `label_column` is
/// parsed as a numeric feature. Row numbers in errors count data rows from 1.
pub fn load_csv<T: Scalar>(
    path: &Path,
    label_column: Option<&str>,
    label_kind: LabelKind,
) -> Result<LabeledDataset<T>> {
    let file = File::open(path).map_err(|source| SomError::Io {
        path: path.to_owned(),
        source,
    })?;
    let mut reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_reader(file);
    let header: Vec<String> = reader.headers()?.iter().map(str::to_owned).collect();

    let label_idx = match (label_column, label_kind) {
        (_, LabelKind::None) => None,
        (Some(name), _) => Some(
            header
                .iter()
                .position(|h| h == name)
                .ok_or_else(|| SomError::MissingColumn(name.to_owned()))?,
        ),
        (None, _) => {
            return Err(SomError::InvalidConfig(
                "a label column is required for labeled data".into(),
            ))
        }
    };
    let feature_cols: Vec<usize> = (0..header.len())
        .filter(|&j| Some(j) != label_idx)
        .collect();

    let mut data = Vec::new();
    let mut continuous = Vec::new();
    let mut categorical = Vec::new();
    let mut n_rows = 0;
    for (i, record) in reader.records().enumerate() {
        let record = record?;
        let row = i + 1;
        for &j in &feature_cols {
            data.push(parse_cell::<T>(
                record.get(j).unwrap_or(""),
                row,
                &header[j],
            )?);
        }
        if let Some(j) = label_idx {
            let cell = record.get(j).unwrap_or("");
            match label_kind {
                LabelKind::Continuous => continuous.push(parse_cell::<T>(cell, row, &header[j])?),
                LabelKind::Categorical => categorical.push(ClassLabel::new(cell)),
                LabelKind::None => unreachable!(),
            }
        }
        n_rows += 1;
    }
    if n_rows == 0 {
        return Err(SomError::EmptyDataset);
    }
    let labels = match label_kind {
        LabelKind::None => Labels::None,
        LabelKind::Continuous => Labels::Continuous(continuous),
        LabelKind::Categorical => Labels::Categorical(categorical),
    };
    let names = feature_cols.iter().map(|&j| header[j].clone()).collect();
    LabeledDataset::with_names(
        Matrix::new(n_rows, feature_cols.len(), data)?,
        labels,
        names,
        label_idx.map(|j| header[j].clone()),
    )
}

fn parse_cell<T: Scalar>(cell: &str, row: usize, column: &str) -> Result<T> {
    let v: f64 = cell.parse().map_err(|_| SomError::Parse {
        row,
        column: column.to_owned(),
        value: cell.to_owned(),
    })?;
    if !v.is_finite() {
        return Err(SomError::NonFinite {
            row,
            column: column.to_owned(),
            value: cell.to_owned(),
        });
    }
    Ok(T::of(v))
}

/// Reads a band mask: newline-separated 1-based band indices. Blank lines and
/// lines starting with `#` are skipped.
pub fn load_band_mask(path: &Path) -> Result<Vec<usize>> {
    let text = std::fs::read_to_string(path).map_err(|source| SomError::Io {
        path: path.to_owned(),
        source,
    })?;
    text.lines()
        .enumerate()
        .map(|(i, l)| (i, l.trim()))
        .filter(|(_, l)| !l.is_empty() && !l.starts_with('#'))
        .map(|(i, l)| {
            l.parse::<usize>()
                .ok()
                .filter(|&b| b >= 1)
                .ok_or_else(|| SomError::Parse {
                    row: i + 1,
                    column: "band".into(),
                    value: l.to_owned(),
                })
        })
        .collect()
}

/// Column names `band_<k>` for the masked bands.
pub fn band_column_names(mask: &[usize]) -> Vec<String> {
    mask.iter().map(|b| format!("band_{b}")).collect()
}

fn test_size(n: usize, test_fraction: f64) -> Result<usize> {
    if n < 2 {
        return Err(SomError::InvalidConfig(format!(
            "a train/test split needs at least 2 datapoints, got {n}"
        )));
    }
    if !(test_fraction > 0.0 && test_fraction < 1.0) {
        return Err(SomError::InvalidConfig(format!(
            "test fraction must lie in (0, 1), got {test_fraction}"
        )));
    }
    Ok(((n as f64 * test_fraction).round() as usize).clamp(1, n - 1))
}

/// Shuffled `(train, test)` index sets; `|test| = round(N * test_fraction)`,
/// kept within `1..N`.
pub fn split_indices<R: Rng + ?Sized>(
    n: usize,
    test_fraction: f64,
    rng: &mut R,
) -> Result<(Vec<usize>, Vec<usize>)> {
    let n_test = test_size(n, test_fraction)?;
    let mut perm: Vec<usize> = (0..n).collect();
    perm.shuffle(rng);
    let train = perm.split_off(n_test);
    Ok((train, perm))
}

pub fn train_test_split<T: Scalar, R: Rng + ?Sized>(
    data: &LabeledDataset<T>,
    test_fraction: f64,
    rng: &mut R,
) -> Result<(LabeledDataset<T>, LabeledDataset<T>)> {
    let (train, test) = split_indices(data.len(), test_fraction, rng)?;
    Ok((data.subset(&train), data.subset(&test)))
}

/// Test-fold index sets of a shuffled k-fold partition. The first `N % k`
/// folds hold one extra datapoint.
pub fn fold_indices<R: Rng + ?Sized>(n: usize, k: usize, rng: &mut R) -> Result<Vec<Vec<usize>>> {
    if k < 2 {
        return Err(SomError::InvalidConfig(format!(
            "k must be at least 2, got {k}"
        )));
    }
    if n < k {
        return Err(SomError::InvalidConfig(format!(
            "k-fold needs at least k={k} datapoints, got {n}"
        )));
    }
    let mut perm: Vec<usize> = (0..n).collect();
    perm.shuffle(rng);
    let (base, extra) = (n / k, n % k);
    let mut folds = Vec::with_capacity(k);
    let mut start = 0;
    for f in 0..k {
        let size = base + usize::from(f < extra);
        folds.push(perm[start..start + size].to_vec());
        start += size;
    }
    Ok(folds)
}

pub fn k_fold<T: Scalar, R: Rng + ?Sized>(
    data: &LabeledDataset<T>,
    k: usize,
    rng: &mut R,
) -> Result<Vec<(LabeledDataset<T>, LabeledDataset<T>)>> {
    let folds = fold_indices(data.len(), k, rng)?;
    Ok(folds
        .iter()
        .map(|test| {
            let train: Vec<usize> = (0..data.len()).filter(|i| !test.contains(i)).collect();
            (data.subset(&train), data.subset(test))
        })
        .collect())
}

/// Per-feature offsets and ranges of a min-max scaling.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScalingRecord<T> {
    pub min: Vec<T>,
    /// `max - min`; zero for constant features.
    pub range: Vec<T>,
}

impl<T: Scalar> ScalingRecord<T> {
    pub fn fit(features: &Matrix<T>) -> Result<Self> {
        if features.is_empty() {
            return Err(SomError::EmptyDataset);
        }
        let (min, range) = (0..features.n_cols())
            .map(|j| {
                let (lo, hi) = features
                    .column(j)
                    .fold((T::infinity(), T::neg_infinity()), |(lo, hi), v| {
                        (lo.min(v), hi.max(v))
                    });
                (lo, hi - lo)
            })
            .unzip();
        Ok(ScalingRecord { min, range })
    }

    pub fn apply(&self, features: &Matrix<T>) -> Result<Matrix<T>> {
        self.check(features)?;
        let n = features.n_cols();
        let data = features
            .as_slice()
            .iter()
            .enumerate()
            .map(|(k, &v)| {
                let j = k % n;
                if self.range[j] > T::zero() {
                    (v - self.min[j]) / self.range[j]
                } else {
                    T::zero()
                }
            })
            .collect();
        Matrix::new(features.n_rows(), n, data)
    }

    pub fn invert(&self, scaled: &Matrix<T>) -> Result<Matrix<T>> {
        self.check(scaled)?;
        let n = scaled.n_cols();
        let data = scaled
            .as_slice()
            .iter()
            .enumerate()
            .map(|(k, &v)| self.min[k % n] + v * self.range[k % n])
            .collect();
        Matrix::new(scaled.n_rows(), n, data)
    }

    fn check(&self, features: &Matrix<T>) -> Result<()> {
        if features.n_cols() != self.min.len() {
            return Err(SomError::DimensionMismatch {
                expected: self.min.len(),
                found: features.n_cols(),
            });
        }
        Ok(())
    }
}

/// Maps every feature onto `[0, 1]` by its range in `data`. Constant
/// features map to 0.
pub fn minmax_scale<T: Scalar>(
    data: &LabeledDataset<T>,
) -> Result<(LabeledDataset<T>, ScalingRecord<T>)> {
    let record = ScalingRecord::fit(data.features())?;
    let scaled = data.with_features(record.apply(data.features())?)?;
    Ok((scaled, record))
}

/// `X ~ U[0,1]^2`, `y = x0 + x1 + noise * N(0, 1)`.
pub fn synthetic_regression<T: Scalar, R: Rng + ?Sized>(
    n_samples: usize,
    noise: f64,
    rng: &mut R,
) -> Result<LabeledDataset<T>> {
    if n_samples == 0 {
        return Err(SomError::EmptyDataset);
    }
    if !(noise >= 0.0 && noise.is_finite()) {
        return Err(SomError::InvalidConfig(format!(
            "noise must be >= 0, got {noise}"
        )));
    }
    let normal = Normal::new(0.0, 1.0).expect("unit normal");
    let mut data = Vec::with_capacity(2 * n_samples);
    let mut y = Vec::with_capacity(n_samples);
    for _ in 0..n_samples {
        let x0: f64 = rng.random();
        let x1: f64 = rng.random();
        let eps = if noise > 0.0 {
            noise * normal.sample(rng)
        } else {
            0.0
        };
        data.extend([T::of(x0), T::of(x1)]);
        y.push(T::of(x0 + x1 + eps));
    }
    LabeledDataset::with_names(
        Matrix::new(n_samples, 2, data)?,
        Labels::Continuous(y),
        vec!["x0".into(), "x1".into()],
        Some("y".into()),
    )
}

/// Center of blob `k`: classes sit on a square lattice of side
/// `ceil(sqrt(n_classes))` with spacing `separation`.
pub fn blob_center(k: usize, n_classes: usize, separation: f64) -> [f64; 2] {
    let side = (n_classes as f64).sqrt().ceil().max(1.0) as usize;
    [
        separation * (k % side) as f64,
        separation * (k / side) as f64,
    ]
}

/// Unit-variance isotropic Gaussian blobs in two dimensions, labeled
/// `"0"..n_classes`. Class sizes differ by at most one.
pub fn synthetic_blobs<T: Scalar, R: Rng + ?Sized>(
    n_samples: usize,
    n_classes: usize,
    separation: f64,
    rng: &mut R,
) -> Result<LabeledDataset<T>> {
    if n_samples == 0 {
        return Err(SomError::EmptyDataset);
    }
    if n_classes == 0 || n_classes > n_samples {
        return Err(SomError::InvalidConfig(format!(
            "need 1 <= n_classes <= n_samples, got {n_classes} classes for {n_samples} samples"
        )));
    }
    if !(separation > 0.0 && separation.is_finite()) {
        return Err(SomError::InvalidConfig(format!(
            "separation must be positive, got {separation}"
        )));
    }
    let normal = Normal::new(0.0, 1.0).expect("unit normal");
    let mut data = Vec::with_capacity(2 * n_samples);
    let mut y = Vec::with_capacity(n_samples);
    for k in 0..n_classes {
        let count = n_samples / n_classes + usize::from(k < n_samples % n_classes);
        let center = blob_center(k, n_classes, separation);
        let label = ClassLabel(k.to_string());
        for _ in 0..count {
            data.push(T::of(center[0] + normal.sample(rng)));
            data.push(T::of(center[1] + normal.sample(rng)));
            y.push(label.clone());
        }
    }
    LabeledDataset::with_names(
        Matrix::new(n_samples, 2, data)?,
        Labels::Categorical(y),
        vec!["x0".into(), "x1".into()],
        Some("class".into()),
    )
}
