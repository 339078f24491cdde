//! Feature-space distance metrics and the grid-space distance used by the
//! neighborhood kernels.

use std::fmt;
use std::str::FromStr;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Result, SomError};
use crate::matrix::Matrix;
use crate::scalar::Scalar;

/// Ridge added to the sample covariance before inversion.
pub const COVARIANCE_RIDGE: f64 = 1e-8;

/// Name of a feature-space metric.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MetricId {
    #[default]
    Euclidean,
    Manhattan,
    Tanimoto,
    Mahalanobis,
}

impl MetricId {
    pub const ALL: [MetricId; 4] = [
        MetricId::Euclidean,
        MetricId::Manhattan,
        MetricId::Tanimoto,
        MetricId::Mahalanobis,
    ];

    pub fn name(self) -> &'static str {
        match self {
            MetricId::Euclidean => "euclidean",
            MetricId::Manhattan => "manhattan",
            MetricId::Tanimoto => "tanimoto",
            MetricId::Mahalanobis => "mahalanobis",
        }
    }
}

impl fmt::Display for MetricId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for MetricId {
    type Err = SomError;

    fn from_str(s: &str) -> Result<Self> {
        MetricId::ALL
            .into_iter()
            .find(|m| m.name() == s)
            .ok_or_else(|| {
                SomError::InvalidConfig(format!(
                    "unknown metric `{s}`, expected euclidean|manhattan|tanimoto|mahalanobis"
                ))
            })
    }
}

/// Shape of the rectangular map.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct GridShape {
    pub n_row: usize,
    pub n_column: usize,
}

impl GridShape {
    pub fn new(n_row: usize, n_column: usize) -> Self {
        GridShape { n_row, n_column }
    }

    pub fn n_nodes(&self) -> usize {
        self.n_row * self.n_column
    }

    pub fn contains(&self, index: GridIndex) -> bool {
        index.row < self.n_row && index.column < self.n_column
    }

    /// Row-major position of a node.
    pub fn flat(&self, index: GridIndex) -> usize {
        index.row * self.n_column + index.column
    }

    pub fn unflat(&self, flat: usize) -> GridIndex {
        GridIndex {
            row: flat / self.n_column,
            column: flat % self.n_column,
        }
    }

    /// All node indices in row-major order.
    pub fn indices(&self) -> impl Iterator<Item = GridIndex> + '_ {
        (0..self.n_nodes()).map(move |k| self.unflat(k))
    }
}

/// Position of a node on the map.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct GridIndex {
    pub row: usize,
    pub column: usize,
}

impl GridIndex {
    pub fn new(row: usize, column: usize) -> Self {
        GridIndex { row, column }
    }
}

/// Euclidean distance between two nodes treated as points in the plane.
pub fn grid_distance<T: Scalar>(c: GridIndex, i: GridIndex) -> T {
    grid_distance_sq::<T>(c, i).sqrt()
}

pub(crate) fn grid_distance_sq<T: Scalar>(c: GridIndex, i: GridIndex) -> T {
    let dr = c.row.abs_diff(i.row);
    let dc = c.column.abs_diff(i.column);
    T::of_usize(dr * dr + dc * dc)
}

/// A metric ready to evaluate, carrying the inverse covariance for Mahalanobis.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Metric<T> {
    Euclidean,
    Manhattan,
    Tanimoto,
    Mahalanobis { cov_inv: Matrix<T> },
}

impl<T: Scalar> Metric<T> {
    /// Resolves a metric name against training features. Mahalanobis estimates
    /// its inverse covariance from `features`.
    pub fn resolve(id: MetricId, features: &Matrix<T>) -> Result<Self> {
        Ok(match id {
            MetricId::Euclidean => Metric::Euclidean,
            MetricId::Manhattan => Metric::Manhattan,
            MetricId::Tanimoto => Metric::Tanimoto,
            MetricId::Mahalanobis => Metric::Mahalanobis {
                cov_inv: estimate_inverse_covariance(features)?,
            },
        })
    }

    pub fn id(&self) -> MetricId {
        match self {
            Metric::Euclidean => MetricId::Euclidean,
            Metric::Manhattan => MetricId::Manhattan,
            Metric::Tanimoto => MetricId::Tanimoto,
            Metric::Mahalanobis { .. } => MetricId::Mahalanobis,
        }
    }

    pub fn cov_inv(&self) -> Option<&Matrix<T>> {
        match self {
            Metric::Mahalanobis { cov_inv } => Some(cov_inv),
            _ => None,
        }
    }

    pub fn distance(&self, a: &[T], b: &[T]) -> Result<T> {
        feature_distance(a, b, self.id(), self.cov_inv())
    }

    /// Checks that a datapoint is admissible for this metric.
    pub fn validate_input(&self, x: &[T], dim: usize) -> Result<()> {
        if x.len() != dim {
            return Err(SomError::DimensionMismatch {
                expected: dim,
                found: x.len(),
            });
        }
        match self {
            Metric::Tanimoto => check_boolean(x),
            Metric::Mahalanobis { cov_inv } => check_cov_shape(cov_inv, dim),
            _ => Ok(()),
        }
    }

    /// Distance from a node prototype to a validated datapoint.
    ///
    /// Tanimoto rounds the prototype to the nearest boolean vector; prototypes of
    /// a map trained on boolean data stay inside the unit box but are not
    /// boolean themselves.
    pub(crate) fn prototype_distance(&self, w: &[T], x: &[T]) -> T {
        match self {
            Metric::Euclidean => euclidean(w, x),
            Metric::Manhattan => manhattan(w, x),
            Metric::Tanimoto => {
                let half = T::of(0.5);
                let counts = w.iter().zip(x).fold([0usize; 4], |mut acc, (&wi, &xi)| {
                    let p = wi >= half;
                    let q = xi == T::one();
                    acc[(p as usize) << 1 | q as usize] += 1;
                    acc
                });
                tanimoto_from_counts(counts)
            }
            Metric::Mahalanobis { cov_inv } => mahalanobis(w, x, cov_inv),
        }
    }
}

/// Distance between two feature vectors under the named metric.
pub fn feature_distance<T: Scalar>(
    a: &[T],
    b: &[T],
    metric: MetricId,
    cov_inv: Option<&Matrix<T>>,
) -> Result<T> {
    if a.len() != b.len() {
        return Err(SomError::DimensionMismatch {
            expected: a.len(),
            found: b.len(),
        });
    }
    if a.is_empty() {
        return Err(SomError::DimensionMismatch {
            expected: 1,
            found: 0,
        });
    }
    match metric {
        MetricId::Euclidean => Ok(euclidean(a, b)),
        MetricId::Manhattan => Ok(manhattan(a, b)),
        MetricId::Tanimoto => {
            check_boolean(a)?;
            check_boolean(b)?;
            let counts = a.iter().zip(b).fold([0usize; 4], |mut acc, (&ai, &bi)| {
                acc[((ai == T::one()) as usize) << 1 | (bi == T::one()) as usize] += 1;
                acc
            });
            Ok(tanimoto_from_counts(counts))
        }
        MetricId::Mahalanobis => {
            let cov_inv = cov_inv.ok_or(SomError::MissingCovariance)?;
            check_cov_shape(cov_inv, a.len())?;
            Ok(mahalanobis(a, b, cov_inv))
        }
    }
}

fn euclidean<T: Scalar>(a: &[T], b: &[T]) -> T {
    a.iter()
        .zip(b)
        .fold(T::zero(), |acc, (&x, &y)| acc + (x - y) * (x - y))
        .sqrt()
}

fn manhattan<T: Scalar>(a: &[T], b: &[T]) -> T {
    a.iter()
        .zip(b)
        .fold(T::zero(), |acc, (&x, &y)| acc + (x - y).abs())
}

/// `counts` indexed by `(a_true << 1) | b_true`: [FF, FT, TF, TT].
fn tanimoto_from_counts<T: Scalar>(counts: [usize; 4]) -> T {
    let [c_ff, c_ft, c_tf, c_tt] = counts;
    let r = 2 * (c_tf + c_ft);
    T::of_usize(r) / T::of_usize(c_tt + c_ff + r)
}

fn mahalanobis<T: Scalar>(a: &[T], b: &[T], cov_inv: &Matrix<T>) -> T {
    let n = a.len();
    let mut q = T::zero();
    for i in 0..n {
        let di = a[i] - b[i];
        let row = cov_inv.row(i);
        let mut s = T::zero();
        for j in 0..n {
            s += row[j] * (a[j] - b[j]);
        }
        q += di * s;
    }
    // round-off can push a PSD quadratic form slightly below zero
    q.max(T::zero()).sqrt()
}

fn check_boolean<T: Scalar>(x: &[T]) -> Result<()> {
    match x.iter().position(|&v| v != T::zero() && v != T::one()) {
        Some(index) => Err(SomError::NonBoolean {
            index,
            value: x[index].as_f64(),
        }),
        None => Ok(()),
    }
}

fn check_cov_shape<T>(cov_inv: &Matrix<T>, n: usize) -> Result<()>
where
    T: Copy,
{
    if cov_inv.n_rows() != n || cov_inv.n_cols() != n {
        return Err(SomError::CovarianceShape {
            expected: n,
            rows: cov_inv.n_rows(),
            cols: cov_inv.n_cols(),
        });
    }
    Ok(())
}

/// Inverse of the sample covariance of `features`, regularized by
/// [`COVARIANCE_RIDGE`]·I before inversion.
pub fn estimate_inverse_covariance<T: Scalar>(features: &Matrix<T>) -> Result<Matrix<T>> {
    let n = features.n_rows();
    let d = features.n_cols();
    if n == 0 || d == 0 {
        return Err(SomError::EmptyDataset);
    }
    let mean: Vec<f64> = (0..d)
        .map(|j| features.column(j).map(Scalar::as_f64).sum::<f64>() / n as f64)
        .collect();
    let denom = if n > 1 { (n - 1) as f64 } else { 1.0 };
    let mut cov = DMatrix::<f64>::zeros(d, d);
    for row in features.rows() {
        for i in 0..d {
            let di = row[i].as_f64() - mean[i];
            for j in i..d {
                cov[(i, j)] += di * (row[j].as_f64() - mean[j]);
            }
        }
    }
    for i in 0..d {
        for j in i..d {
            let v = cov[(i, j)] / denom;
            cov[(i, j)] = v;
            cov[(j, i)] = v;
        }
        cov[(i, i)] += COVARIANCE_RIDGE;
    }
    let inv = cov.try_inverse().ok_or(SomError::SingularCovariance)?;
    let data = (0..d)
        .flat_map(|i| (0..d).map(move |j| (i, j)))
        .map(|(i, j)| T::of(0.5 * (inv[(i, j)] + inv[(j, i)])))
        .collect();
    Matrix::new(d, d, data)
}
