//! The unsupervised map: initialization, best-matching-unit search,
//! neighborhood kernels, online and batch adaptation, and the training loop.

use std::io::Write;

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::config::{KernelKind, SomConfig, UpdateMode};
use crate::distance::{grid_distance_sq, GridIndex, GridShape, Metric};
use crate::error::{Result, SomError};
use crate::matrix::Matrix;
use crate::scalar::Scalar;
use crate::schedule::{learning_rate, neighborhood_radius, RADIUS_FLOOR};

/// Node weight vectors of an `n_row × n_column` map, row-major.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeightGrid<T> {
    shape: GridShape,
    feature_dim: usize,
    weights: Vec<T>,
}

impl<T: Scalar> WeightGrid<T> {
    pub fn from_weights(shape: GridShape, feature_dim: usize, weights: Vec<T>) -> Result<Self> {
        if shape.n_nodes() == 0 || feature_dim == 0 {
            return Err(SomError::InvalidConfig(
                "a weight grid needs at least one node and one feature".into(),
            ));
        }
        if weights.len() != shape.n_nodes() * feature_dim {
            return Err(SomError::LengthMismatch {
                left: weights.len(),
                right: shape.n_nodes() * feature_dim,
            });
        }
        if weights.iter().any(|w| !w.is_finite()) {
            return Err(SomError::InvalidConfig("weights must be finite".into()));
        }
        Ok(WeightGrid {
            shape,
            feature_dim,
            weights,
        })
    }

    /// Every node holds `value`.
    pub fn filled(shape: GridShape, value: &[T]) -> Result<Self> {
        let weights = value
            .iter()
            .copied()
            .cycle()
            .take(shape.n_nodes() * value.len())
            .collect();
        Self::from_weights(shape, value.len(), weights)
    }

    pub fn shape(&self) -> GridShape {
        self.shape
    }

    pub fn feature_dim(&self) -> usize {
        self.feature_dim
    }

    pub fn as_slice(&self) -> &[T] {
        &self.weights
    }

    pub fn node(&self, index: GridIndex) -> &[T] {
        self.node_flat(self.shape.flat(index))
    }

    pub fn node_mut(&mut self, index: GridIndex) -> &mut [T] {
        let k = self.shape.flat(index);
        &mut self.weights[k * self.feature_dim..(k + 1) * self.feature_dim]
    }

    fn node_flat(&self, k: usize) -> &[T] {
        &self.weights[k * self.feature_dim..(k + 1) * self.feature_dim]
    }

    fn nodes(&self) -> impl Iterator<Item = &[T]> {
        self.weights.chunks_exact(self.feature_dim)
    }
}

/// Neighborhood distance weights `h_{c,i}` for one BMU `c`, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct KernelMatrix<T> {
    shape: GridShape,
    values: Vec<T>,
}

impl<T: Scalar> KernelMatrix<T> {
    pub fn shape(&self) -> GridShape {
        self.shape
    }

    pub fn get(&self, index: GridIndex) -> T {
        self.values[self.shape.flat(index)]
    }

    pub fn as_slice(&self) -> &[T] {
        &self.values
    }
}

/// Kernel value at squared grid distance `d2`.
#[inline]
pub(crate) fn kernel_value<T: Scalar>(kind: KernelKind, d2: T, sigma: T) -> T {
    let s2 = sigma * sigma;
    let g = (-d2 / (T::of(2.0) * s2)).exp();
    match kind {
        KernelKind::Gaussian => g,
        KernelKind::MexicanHat => (T::one() - d2 / s2) * g,
    }
}

pub fn kernel_matrix<T: Scalar>(
    bmu: GridIndex,
    sigma: T,
    kind: KernelKind,
    shape: GridShape,
) -> Result<KernelMatrix<T>> {
    if sigma.is_nan() || sigma < T::of(RADIUS_FLOOR) {
        return Err(SomError::InvalidConfig(format!(
            "neighborhood radius must be >= {RADIUS_FLOOR}, got {sigma}"
        )));
    }
    let values = shape
        .indices()
        .map(|i| kernel_value(kind, grid_distance_sq::<T>(bmu, i), sigma))
        .collect();
    Ok(KernelMatrix { shape, values })
}

/// Draws every weight component uniformly from the per-feature range of `data`.
pub fn init_weights<T: Scalar, R: Rng + ?Sized>(
    shape: GridShape,
    data: &Matrix<T>,
    rng: &mut R,
) -> Result<WeightGrid<T>> {
    if data.is_empty() {
        return Err(SomError::EmptyDataset);
    }
    let dim = data.n_cols();
    let bounds: Vec<(T, T)> = (0..dim)
        .map(|j| {
            data.column(j)
                .fold((T::infinity(), T::neg_infinity()), |(lo, hi), v| {
                    (lo.min(v), hi.max(v))
                })
        })
        .collect();
    let mut weights = Vec::with_capacity(shape.n_nodes() * dim);
    for _ in 0..shape.n_nodes() {
        for &(lo, hi) in &bounds {
            let u = T::of(rng.random::<f64>());
            weights.push((lo + u * (hi - lo)).min(hi));
        }
    }
    WeightGrid::from_weights(shape, dim, weights)
}

/// Node closest to `x`; ties go to the smallest row-major index.
pub fn find_bmu<T: Scalar>(grid: &WeightGrid<T>, x: &[T], metric: &Metric<T>) -> Result<GridIndex> {
    metric.validate_input(x, grid.feature_dim)?;
    Ok(bmu_unchecked(grid, x, metric))
}

fn bmu_unchecked<T: Scalar>(grid: &WeightGrid<T>, x: &[T], metric: &Metric<T>) -> GridIndex {
    let mut best = 0;
    let mut best_d = T::infinity();
    for (k, w) in grid.nodes().enumerate() {
        let d = metric.prototype_distance(w, x);
        if d < best_d {
            best = k;
            best_d = d;
        }
    }
    grid.shape.unflat(best)
}

/// `w_i ← w_i + α·h_{c,i}·(x − w_i)` for every node.
pub fn online_update<T: Scalar>(
    grid: &mut WeightGrid<T>,
    x: &[T],
    alpha: T,
    h: &KernelMatrix<T>,
) -> Result<()> {
    if x.len() != grid.feature_dim {
        return Err(SomError::DimensionMismatch {
            expected: grid.feature_dim,
            found: x.len(),
        });
    }
    if h.shape != grid.shape {
        return Err(SomError::InvalidConfig(
            "kernel and grid shapes differ".into(),
        ));
    }
    let dim = grid.feature_dim;
    for (w, &hk) in grid.weights.chunks_exact_mut(dim).zip(&h.values) {
        let step = alpha * hk;
        if step == T::zero() {
            continue;
        }
        for (wj, &xj) in w.iter_mut().zip(x) {
            *wj += step * (xj - *wj);
        }
    }
    Ok(())
}

/// `w_i ← Σ_j h_{c_j,i} x_j / Σ_j h_{c_j,i}` with `c_j = bmus[j]`. Nodes with
/// zero kernel mass keep their weights.
pub fn batch_update<T: Scalar>(
    grid: &mut WeightGrid<T>,
    data: &Matrix<T>,
    bmus: &[GridIndex],
    sigma: T,
    kind: KernelKind,
) -> Result<()> {
    if data.n_cols() != grid.feature_dim {
        return Err(SomError::DimensionMismatch {
            expected: grid.feature_dim,
            found: data.n_cols(),
        });
    }
    if bmus.len() != data.n_rows() {
        return Err(SomError::LengthMismatch {
            left: data.n_rows(),
            right: bmus.len(),
        });
    }
    if sigma.is_nan() || sigma < T::of(RADIUS_FLOOR) {
        return Err(SomError::InvalidConfig(format!(
            "neighborhood radius must be >= {RADIUS_FLOOR}, got {sigma}"
        )));
    }
    let shape = grid.shape;
    let dim = grid.feature_dim;
    // datapoints only enter through their BMU, so aggregate per BMU node first
    let mut counts = vec![0usize; shape.n_nodes()];
    let mut sums = vec![T::zero(); shape.n_nodes() * dim];
    for (x, &c) in data.rows().zip(bmus) {
        if !shape.contains(c) {
            return Err(SomError::InvalidConfig(format!("BMU {c:?} outside grid")));
        }
        let k = shape.flat(c);
        counts[k] += 1;
        for (s, &v) in sums[k * dim..(k + 1) * dim].iter_mut().zip(x) {
            *s += v;
        }
    }
    let occupied: Vec<usize> = (0..shape.n_nodes()).filter(|&k| counts[k] > 0).collect();
    let mut num = vec![T::zero(); dim];
    for i in 0..shape.n_nodes() {
        let node = shape.unflat(i);
        let mut mass = T::zero();
        num.iter_mut().for_each(|v| *v = T::zero());
        for &c in &occupied {
            let h = kernel_value(kind, grid_distance_sq::<T>(shape.unflat(c), node), sigma);
            if h == T::zero() {
                continue;
            }
            mass += h * T::of_usize(counts[c]);
            for (n, &s) in num.iter_mut().zip(&sums[c * dim..(c + 1) * dim]) {
                *n += h * s;
            }
        }
        if mass != T::zero() {
            for (w, &n) in grid.weights[i * dim..(i + 1) * dim].iter_mut().zip(&num) {
                *w = n / mass;
            }
        }
    }
    Ok(())
}

/// A trained unsupervised map together with the metric it was trained under.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SelfOrganizingMap<T> {
    pub grid: WeightGrid<T>,
    pub metric: Metric<T>,
}

impl<T: Scalar> SelfOrganizingMap<T> {
    pub fn shape(&self) -> GridShape {
        self.grid.shape()
    }

    pub fn find_bmu(&self, x: &[T]) -> Result<GridIndex> {
        find_bmu(&self.grid, x, &self.metric)
    }

    pub fn transform(&self, data: &Matrix<T>) -> Result<Vec<GridIndex>> {
        transform(&self.grid, data, &self.metric)
    }

    pub fn bmu_histogram(&self, data: &Matrix<T>) -> Result<CountGrid> {
        bmu_histogram(&self.grid, data, &self.metric)
    }

    /// Mean distance of the datapoints to their BMU weights.
    pub fn quantization_error(&self, data: &Matrix<T>) -> Result<T> {
        quantization_error(&self.grid, data, &self.metric)
    }
}

/// Trains the unsupervised map for `n_iter_unsupervised` iterations.
///
/// Online mode draws one datapoint uniformly with replacement per iteration.
/// Batch mode recomputes every BMU at the start of each iteration.
pub fn fit_unsupervised<T: Scalar, R: Rng + ?Sized>(
    data: &Matrix<T>,
    config: &SomConfig<T>,
    rng: &mut R,
) -> Result<SelfOrganizingMap<T>> {
    config.validate_map()?;
    if config.n_iter_unsupervised == 0 {
        return Err(SomError::InvalidConfig(
            "n_iter_unsupervised must be at least 1".into(),
        ));
    }
    if data.is_empty() {
        return Err(SomError::EmptyDataset);
    }
    let metric = Metric::resolve(config.metric, data)?;
    for x in data.rows() {
        metric.validate_input(x, data.n_cols())?;
    }
    let shape = config.shape();
    let mut grid = init_weights(shape, data, rng)?;
    let t_max = config.n_iter_unsupervised;
    let lr = config.lr_schedule(t_max);
    let radius = config.radius_schedule(t_max);
    match config.update_mode {
        UpdateMode::Online => {
            for t in 0..t_max {
                let x = data.row(rng.random_range(0..data.n_rows()));
                let bmu = bmu_unchecked(&grid, x, &metric);
                let alpha = learning_rate(t, &lr)?;
                let sigma = neighborhood_radius(t, &radius)?;
                let h = kernel_matrix(bmu, sigma, config.kernel, shape)?;
                online_update(&mut grid, x, alpha, &h)?;
            }
        }
        UpdateMode::Batch => {
            for t in 0..t_max {
                let bmus = transform_unchecked(&grid, data, &metric);
                let sigma = neighborhood_radius(t, &radius)?;
                batch_update(&mut grid, data, &bmus, sigma, config.kernel)?;
            }
        }
    }
    Ok(SelfOrganizingMap { grid, metric })
}

/// BMU of every datapoint, in order.
pub fn transform<T: Scalar>(
    grid: &WeightGrid<T>,
    data: &Matrix<T>,
    metric: &Metric<T>,
) -> Result<Vec<GridIndex>> {
    if data.is_empty() {
        return Ok(Vec::new());
    }
    for x in data.rows() {
        metric.validate_input(x, grid.feature_dim)?;
    }
    Ok(transform_unchecked(grid, data, metric))
}

fn transform_unchecked<T: Scalar>(
    grid: &WeightGrid<T>,
    data: &Matrix<T>,
    metric: &Metric<T>,
) -> Vec<GridIndex> {
    (0..data.n_rows())
        .into_par_iter()
        .map(|i| bmu_unchecked(grid, data.row(i), metric))
        .collect()
}

/// Per-node datapoint counts.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CountGrid {
    pub shape: GridShape,
    pub counts: Vec<usize>,
}

impl CountGrid {
    pub fn get(&self, index: GridIndex) -> usize {
        self.counts[self.shape.flat(index)]
    }

    pub fn total(&self) -> usize {
        self.counts.iter().sum()
    }

    /// CSV with header `row,column,count`, one line per node, row-major.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["row", "column", "count"])?;
        for (k, c) in self.counts.iter().enumerate() {
            let i = self.shape.unflat(k);
            w.write_record([i.row.to_string(), i.column.to_string(), c.to_string()])?;
        }
        w.flush().map_err(csv::Error::from)?;
        Ok(())
    }
}

pub fn bmu_histogram<T: Scalar>(
    grid: &WeightGrid<T>,
    data: &Matrix<T>,
    metric: &Metric<T>,
) -> Result<CountGrid> {
    let shape = grid.shape();
    let mut counts = vec![0; shape.n_nodes()];
    for c in transform(grid, data, metric)? {
        counts[shape.flat(c)] += 1;
    }
    Ok(CountGrid { shape, counts })
}

pub fn quantization_error<T: Scalar>(
    grid: &WeightGrid<T>,
    data: &Matrix<T>,
    metric: &Metric<T>,
) -> Result<T> {
    if data.is_empty() {
        return Err(SomError::EmptyDataset);
    }
    let bmus = transform(grid, data, metric)?;
    let total = data
        .rows()
        .zip(&bmus)
        .map(|(x, &c)| metric.prototype_distance(grid.node(c), x))
        .fold(T::zero(), |a, b| a + b);
    Ok(total / T::of_usize(data.n_rows()))
}
