//! Supervised heads attached to a trained unsupervised map.
//!
//! The unsupervised map only selects BMUs; it is never modified here. A
//! regression head stores one continuous value per node and is trained with
//! the same update rule as the unsupervised weights. A classification head
//! stores one class per node; it starts from a per-node majority vote and is
//! then refined by stochastic class changes whose probability is
//! `w_class · α(t) · h_{c,i}(t)`.

use std::collections::BTreeMap;

use num_traits::{FromPrimitive, Num};
use rand::seq::IndexedRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::config::SomConfig;
use crate::distance::{GridIndex, GridShape};
use crate::error::{Result, SomError};
use crate::matrix::Matrix;
use crate::scalar::Scalar;
use crate::schedule::{learning_rate, neighborhood_radius};
use crate::som::{kernel_matrix, SelfOrganizingMap};

/// One continuous target value per node.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegressionHead<T> {
    shape: GridShape,
    values: Vec<T>,
}

impl<T: Scalar> RegressionHead<T> {
    pub fn from_values(shape: GridShape, values: Vec<T>) -> Result<Self> {
        if values.len() != shape.n_nodes() {
            return Err(SomError::LengthMismatch {
                left: values.len(),
                right: shape.n_nodes(),
            });
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(SomError::InvalidConfig("head values must be finite".into()));
        }
        Ok(RegressionHead { shape, values })
    }

    pub fn shape(&self) -> GridShape {
        self.shape
    }

    pub fn get(&self, index: GridIndex) -> T {
        self.values[self.shape.flat(index)]
    }

    pub fn values(&self) -> &[T] {
        &self.values
    }
}

/// One class per node. Classes are stored as positions in `class_set`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassificationHead<C> {
    shape: GridShape,
    class_set: Vec<C>,
    nodes: Vec<usize>,
}

impl<C: Ord + Clone> ClassificationHead<C> {
    /// `class_set` must be sorted and distinct; every entry of `nodes`
    /// indexes into it.
    pub fn from_parts(shape: GridShape, class_set: Vec<C>, nodes: Vec<usize>) -> Result<Self> {
        if nodes.len() != shape.n_nodes() {
            return Err(SomError::LengthMismatch {
                left: nodes.len(),
                right: shape.n_nodes(),
            });
        }
        if class_set.is_empty() || !class_set.windows(2).all(|w| w[0] < w[1]) {
            return Err(SomError::Model(
                "class set must be non-empty, sorted and distinct".into(),
            ));
        }
        if nodes.iter().any(|&k| k >= class_set.len()) {
            return Err(SomError::Model("node class outside class set".into()));
        }
        Ok(ClassificationHead {
            shape,
            class_set,
            nodes,
        })
    }

    /// Every node assigned `class`.
    pub fn uniform(shape: GridShape, class: C) -> Self {
        ClassificationHead {
            shape,
            class_set: vec![class],
            nodes: vec![0; shape.n_nodes()],
        }
    }

    pub fn shape(&self) -> GridShape {
        self.shape
    }

    pub fn class_set(&self) -> &[C] {
        &self.class_set
    }

    pub fn get(&self, index: GridIndex) -> &C {
        &self.class_set[self.nodes[self.shape.flat(index)]]
    }

    /// Node classes as positions in [`Self::class_set`], row-major.
    pub fn node_classes(&self) -> &[usize] {
        &self.nodes
    }

    pub fn class_index(&self, class: &C) -> Option<usize> {
        self.class_set.binary_search(class).ok()
    }
}

/// Per-class weights used to rebalance class-change probabilities.
#[derive(Debug, Clone, PartialEq)]
pub struct ClassWeightTable<T, C> {
    classes: Vec<C>,
    counts: Vec<usize>,
    weights: Vec<T>,
}

impl<T: Clone, C: Ord> ClassWeightTable<T, C> {
    pub fn classes(&self) -> &[C] {
        &self.classes
    }

    pub fn counts(&self) -> &[usize] {
        &self.counts
    }

    pub fn weights(&self) -> &[T] {
        &self.weights
    }

    pub fn weight(&self, class: &C) -> Option<T> {
        self.classes
            .binary_search(class)
            .ok()
            .map(|k| self.weights[k].clone())
    }
}

fn class_counts<C: Ord + Clone>(y: &[C]) -> (Vec<C>, Vec<usize>) {
    let mut map = BTreeMap::new();
    for c in y {
        *map.entry(c.clone()).or_insert(0usize) += 1;
    }
    map.into_iter().unzip()
}

/// `N / (n_classes · N_j)` per class when `enabled`, else 1.
///
/// Generic over any numeric type so the weights can be computed exactly with
/// rationals as well as in floating point.
pub fn class_weights<T, C>(y: &[C], enabled: bool) -> Result<ClassWeightTable<T, C>>
where
    T: Num + FromPrimitive + Clone,
    C: Ord + Clone,
{
    if y.is_empty() {
        return Err(SomError::EmptyDataset);
    }
    let (classes, counts) = class_counts(y);
    let n = T::from_usize(y.len()).expect("count fits");
    let n_classes = T::from_usize(classes.len()).expect("count fits");
    let weights = counts
        .iter()
        .map(|&nj| {
            if enabled {
                n.clone() / (n_classes.clone() * T::from_usize(nj).expect("count fits"))
            } else {
                T::one()
            }
        })
        .collect();
    Ok(ClassWeightTable {
        classes,
        counts,
        weights,
    })
}

fn check_rows<T: Scalar>(x: &Matrix<T>, n_labels: usize) -> Result<()> {
    if x.is_empty() {
        return Err(SomError::EmptyDataset);
    }
    if x.n_rows() != n_labels {
        return Err(SomError::LengthMismatch {
            left: x.n_rows(),
            right: n_labels,
        });
    }
    Ok(())
}

/// Trains a regression head on a frozen unsupervised map.
///
/// The head starts uniformly in `[min(y), max(y)]`; each iteration samples a
/// labeled datapoint and moves every node value towards its label by
/// `α(t)·h_{c,i}(t)`.
pub fn fit_regressor<T: Scalar, R: Rng + ?Sized>(
    som: &SelfOrganizingMap<T>,
    x: &Matrix<T>,
    y: &[T],
    config: &SomConfig<T>,
    rng: &mut R,
) -> Result<RegressionHead<T>> {
    check_rows(x, y.len())?;
    config.validate_map()?;
    if som.shape() != config.shape() {
        return Err(SomError::InvalidConfig(
            "map and configuration shapes differ".into(),
        ));
    }
    if let Some(i) = y.iter().position(|v| !v.is_finite()) {
        return Err(SomError::NonFinite {
            row: i + 1,
            column: "label".into(),
            value: y[i].to_string(),
        });
    }
    let bmus = som.transform(x)?;
    let shape = som.shape();
    let (lo, hi) = y
        .iter()
        .fold((T::infinity(), T::neg_infinity()), |(lo, hi), &v| {
            (lo.min(v), hi.max(v))
        });
    let mut values: Vec<T> = (0..shape.n_nodes())
        .map(|_| (lo + T::of(rng.random::<f64>()) * (hi - lo)).min(hi))
        .collect();

    let t_max = config.n_iter_supervised;
    let lr = config.lr_schedule(t_max);
    let radius = config.radius_schedule(t_max);
    for t in 0..t_max {
        let j = rng.random_range(0..y.len());
        let alpha = learning_rate(t, &lr)?;
        let sigma = neighborhood_radius(t, &radius)?;
        let h = kernel_matrix(bmus[j], sigma, config.kernel, shape)?;
        for (v, &hk) in values.iter_mut().zip(h.as_slice()) {
            *v += alpha * hk * (y[j] - *v);
        }
    }
    RegressionHead::from_values(shape, values)
}

/// Head value at each datapoint's BMU.
pub fn predict_regression<T: Scalar>(
    som: &SelfOrganizingMap<T>,
    head: &RegressionHead<T>,
    x: &Matrix<T>,
) -> Result<Vec<T>> {
    if head.shape != som.shape() {
        return Err(SomError::Model("head and map shapes differ".into()));
    }
    Ok(som.transform(x)?.into_iter().map(|c| head.get(c)).collect())
}

/// Majority vote of the datapoints mapped to each node. Per-node ties are
/// drawn uniformly from `rng`; nodes without datapoints take the most frequent
/// class overall (ties to the smallest class).
pub fn init_classifier<T: Scalar, C: Ord + Clone, R: Rng + ?Sized>(
    som: &SelfOrganizingMap<T>,
    x: &Matrix<T>,
    y: &[C],
    rng: &mut R,
) -> Result<ClassificationHead<C>> {
    check_rows(x, y.len())?;
    let (class_set, totals) = class_counts(y);
    let shape = som.shape();
    let global = argmax_first(&totals);
    let bmus = som.transform(x)?;

    let n_classes = class_set.len();
    let mut votes = vec![0usize; shape.n_nodes() * n_classes];
    for (c, label) in bmus.iter().zip(y) {
        let k = class_set.binary_search(label).expect("label from y");
        votes[shape.flat(*c) * n_classes + k] += 1;
    }
    let nodes = votes
        .chunks_exact(n_classes)
        .map(|v| {
            let best = *v.iter().max().expect("non-empty");
            if best == 0 {
                return global;
            }
            let tied: Vec<usize> = (0..n_classes).filter(|&k| v[k] == best).collect();
            if tied.len() == 1 {
                tied[0]
            } else {
                *tied.choose(rng).expect("non-empty")
            }
        })
        .collect();
    Ok(ClassificationHead {
        shape,
        class_set,
        nodes,
    })
}

fn argmax_first(v: &[usize]) -> usize {
    let mut best = 0;
    for (k, &c) in v.iter().enumerate() {
        if c > v[best] {
            best = k;
        }
    }
    best
}

/// Per-node class-change probabilities, row-major, each within `[0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct ProbabilityGrid<T> {
    pub shape: GridShape,
    pub values: Vec<T>,
}

impl<T: Scalar> ProbabilityGrid<T> {
    pub fn constant(shape: GridShape, p: T) -> Self {
        ProbabilityGrid {
            shape,
            values: vec![p; shape.n_nodes()],
        }
    }

    pub fn get(&self, index: GridIndex) -> T {
        self.values[self.shape.flat(index)]
    }
}

/// `clamp(w_y · α(t) · h_{c,i}(t), 0, 1)` for every node, with schedules over
/// `n_iter_supervised` iterations.
pub fn class_change_probability<T: Scalar>(
    bmu: GridIndex,
    t: usize,
    class_weight: T,
    config: &SomConfig<T>,
) -> Result<ProbabilityGrid<T>> {
    let t_max = config.n_iter_supervised;
    let alpha = learning_rate(t, &config.lr_schedule(t_max))?;
    let sigma = neighborhood_radius(t, &config.radius_schedule(t_max))?;
    Ok(probability_grid(bmu, alpha, sigma, class_weight, config))
}

fn probability_grid<T: Scalar>(
    bmu: GridIndex,
    alpha: T,
    sigma: T,
    class_weight: T,
    config: &SomConfig<T>,
) -> ProbabilityGrid<T> {
    let shape = config.shape();
    let h = kernel_matrix(bmu, sigma, config.kernel, shape).expect("radius is floored");
    let values = h
        .as_slice()
        .iter()
        .map(|&hk| (class_weight * alpha * hk).max(T::zero()).min(T::one()))
        .collect();
    ProbabilityGrid { shape, values }
}

/// Draws `u_i ~ U[0, 1)` per node in row-major order and sets node `i` to
/// `class` when `u_i < P_i`.
pub fn apply_class_update<T: Scalar, C: Ord + Clone, R: Rng + ?Sized>(
    head: &mut ClassificationHead<C>,
    p: &ProbabilityGrid<T>,
    class: &C,
    rng: &mut R,
) -> Result<()> {
    if p.shape != head.shape {
        return Err(SomError::InvalidConfig(
            "probability grid and head shapes differ".into(),
        ));
    }
    let k = head
        .class_index(class)
        .ok_or_else(|| SomError::InvalidConfig("class not in the head's class set".into()))?;
    apply_index_update(head, p, k, rng);
    Ok(())
}

fn apply_index_update<T: Scalar, C, R: Rng + ?Sized>(
    head: &mut ClassificationHead<C>,
    p: &ProbabilityGrid<T>,
    class: usize,
    rng: &mut R,
) {
    for (node, &pi) in head.nodes.iter_mut().zip(&p.values) {
        let u: f64 = rng.random();
        if u < pi.as_f64() {
            *node = class;
        }
    }
}

/// Majority-vote initialization followed by `n_iter_supervised` stochastic
/// class-change iterations.
pub fn fit_classifier<T: Scalar, C: Ord + Clone, R: Rng + ?Sized>(
    som: &SelfOrganizingMap<T>,
    x: &Matrix<T>,
    y: &[C],
    config: &SomConfig<T>,
    rng: &mut R,
) -> Result<ClassificationHead<C>> {
    config.validate_map()?;
    if som.shape() != config.shape() {
        return Err(SomError::InvalidConfig(
            "map and configuration shapes differ".into(),
        ));
    }
    let mut head = init_classifier(som, x, y, rng)?;
    let bmus = som.transform(x)?;
    let table: ClassWeightTable<T, C> = class_weights(y, config.class_weighting)?;
    let label_idx: Vec<usize> = y
        .iter()
        .map(|c| head.class_index(c).expect("class set built from y"))
        .collect();

    let t_max = config.n_iter_supervised;
    let lr = config.lr_schedule(t_max);
    let radius = config.radius_schedule(t_max);
    for t in 0..t_max {
        let j = rng.random_range(0..y.len());
        let k = label_idx[j];
        let alpha = learning_rate(t, &lr)?;
        let sigma = neighborhood_radius(t, &radius)?;
        let p = probability_grid(bmus[j], alpha, sigma, table.weights[k], config);
        apply_index_update(&mut head, &p, k, rng);
    }
    Ok(head)
}

/// Head class at each datapoint's BMU.
pub fn predict_classification<T: Scalar, C: Ord + Clone>(
    som: &SelfOrganizingMap<T>,
    head: &ClassificationHead<C>,
    x: &Matrix<T>,
) -> Result<Vec<C>> {
    if head.shape != som.shape() {
        return Err(SomError::Model("head and map shapes differ".into()));
    }
    Ok(som
        .transform(x)?
        .into_iter()
        .map(|c| head.get(c).clone())
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::distance::Metric;
    use crate::rng::rng_from_seed;
    use crate::som::{fit_unsupervised, WeightGrid};

    fn line_map(n: usize) -> SelfOrganizingMap<f64> {
        // node k of a 1×n map sits at (k, 0)
        let weights = (0..n).flat_map(|k| [k as f64, 0.0]).collect();
        SelfOrganizingMap {
            grid: WeightGrid::from_weights(GridShape::new(1, n), 2, weights).unwrap(),
            metric: Metric::Euclidean,
        }
    }

    fn config(n_row: usize, n_column: usize, n_sup: usize) -> SomConfig<f64> {
        SomConfig::new(n_row, n_column).with_iterations(1, n_sup)
    }

    #[test]
    fn zero_iterations_leave_initialization() {
        let som = line_map(4);
        let x = Matrix::from_rows(&[[0.0, 0.0], [3.0, 0.0]]).unwrap();
        let y = [1.0, 5.0];
        let head = fit_regressor(&som, &x, &y, &config(1, 4, 0), &mut rng_from_seed(1)).unwrap();
        let mut rng = rng_from_seed(1);
        let expected: Vec<f64> = (0..4)
            .map(|_| (1.0 + rng.random::<f64>() * 4.0).min(5.0))
            .collect();
        assert_eq!(head.values(), expected.as_slice());
    }

    #[test]
    fn constant_labels_contract() {
        let som = line_map(6);
        let x = Matrix::from_rows(&[[0.0, 0.0], [2.0, 0.0], [5.0, 0.0]]).unwrap();
        let y = [2.5; 3];
        let head = fit_regressor(&som, &x, &y, &config(1, 6, 50), &mut rng_from_seed(3)).unwrap();
        assert!(head.values().iter().all(|&v| v == 2.5));
    }

    #[test]
    fn predict_hits_node_value() {
        let som = line_map(3);
        let head = RegressionHead::from_values(GridShape::new(1, 3), vec![0.0, 7.5, 1.0]).unwrap();
        let x = Matrix::from_rows(&[[1.0, 0.0], [0.1, 0.0]]).unwrap();
        assert_eq!(predict_regression(&som, &head, &x).unwrap(), vec![7.5, 0.0]);
        assert!(predict_regression(&som, &head, &Matrix::empty(2))
            .unwrap()
            .is_empty());
    }

    #[test]
    fn init_classifier_votes() {
        let som = line_map(3);
        // node 0 gets {A, A, B}; node 1 gets nothing; node 2 gets {B, B}
        let x = Matrix::from_rows(&[[0.0, 0.0], [0.1, 0.0], [-0.1, 0.0], [2.0, 0.0], [2.1, 0.0]])
            .unwrap();
        let y = ["A", "A", "B", "B", "B"];
        let head = init_classifier(&som, &x, &y, &mut rng_from_seed(0)).unwrap();
        assert_eq!(*head.get(GridIndex::new(0, 0)), "A");
        assert_eq!(*head.get(GridIndex::new(0, 2)), "B");
        // global mode is B (3 of 5)
        assert_eq!(*head.get(GridIndex::new(0, 1)), "B");
    }

    #[test]
    fn unmapped_nodes_take_global_majority() {
        let som = line_map(5);
        // everything maps to node 0; dataset 60% A / 40% B
        let x = Matrix::from_rows(&[[0.0, 0.0]; 5]).unwrap();
        let y = ["A", "B", "A", "B", "A"];
        let head = init_classifier(&som, &x, &y, &mut rng_from_seed(0)).unwrap();
        for k in 1..5 {
            assert_eq!(*head.get(GridIndex::new(0, k)), "A");
        }
    }

    #[test]
    fn single_class_stays_put() {
        let som = line_map(4);
        let x = Matrix::from_rows(&[[0.0, 0.0], [3.0, 0.0]]).unwrap();
        let y = ["only", "only"];
        let head = fit_classifier(&som, &x, &y, &config(1, 4, 100), &mut rng_from_seed(2)).unwrap();
        assert_eq!(head.class_set(), &["only"]);
        assert!(head.node_classes().iter().all(|&k| k == 0));
    }

    #[test]
    fn class_weight_examples() {
        let balanced = ["a", "b", "a", "b"];
        let t: ClassWeightTable<f64, _> = class_weights(&balanced, true).unwrap();
        assert_eq!(t.weights(), &[1.0, 1.0]);
        let mut y = vec!["A"; 25];
        y.extend(vec!["B"; 75]);
        let t: ClassWeightTable<f64, _> = class_weights(&y, true).unwrap();
        assert_eq!(t.weight(&"A"), Some(2.0));
        let t: ClassWeightTable<f64, _> = class_weights(&y, false).unwrap();
        assert!(t.weights().iter().all(|&w| w == 1.0));
        assert!(class_weights::<f64, &str>(&[], true).is_err());
    }

    #[test]
    fn probability_examples() {
        let mut cfg = config(3, 3, 10);
        let c = GridIndex::new(1, 1);
        cfg.learning_rate.kind = crate::schedule::ScheduleKind::Linear;
        cfg.learning_rate.start = 0.5;
        let p = class_change_probability(c, 0, 1.0, &cfg).unwrap();
        assert_eq!(p.get(c), 0.5);
        let p = class_change_probability(c, 0, 4.0, &cfg).unwrap();
        assert_eq!(p.get(c), 1.0);
        assert!(p.values.iter().all(|&v| (0.0..=1.0).contains(&v)));
        // linear learning rate reaches zero at t = t_max
        let p = class_change_probability(c, 10, 1.0, &cfg).unwrap();
        assert!(p.values.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn class_update_extremes() {
        let shape = GridShape::new(3, 4);
        let head = ClassificationHead::from_parts(shape, vec!["a", "b"], vec![0; 12]).unwrap();
        let mut h = head.clone();
        apply_class_update(
            &mut h,
            &ProbabilityGrid::constant(shape, 0.0),
            &"b",
            &mut rng_from_seed(0),
        )
        .unwrap();
        assert_eq!(h, head);
        apply_class_update(
            &mut h,
            &ProbabilityGrid::constant(shape, 1.0),
            &"b",
            &mut rng_from_seed(0),
        )
        .unwrap();
        assert!(h.node_classes().iter().all(|&k| k == 1));
        let err = apply_class_update(
            &mut h,
            &ProbabilityGrid::constant(shape, 1.0),
            &"z",
            &mut rng_from_seed(0),
        );
        assert!(err.is_err());
    }

    #[test]
    fn half_probability_flips_about_half() {
        let shape = GridShape::new(100, 100);
        let mut head = ClassificationHead::from_parts(shape, vec![0, 1], vec![0; 10_000]).unwrap();
        apply_class_update(
            &mut head,
            &ProbabilityGrid::constant(shape, 0.5),
            &1,
            &mut rng_from_seed(21),
        )
        .unwrap();
        let changed = head.node_classes().iter().filter(|&&k| k == 1).count() as f64 / 10_000.0;
        assert!((0.48..=0.52).contains(&changed), "{changed}");
    }

    #[test]
    fn fit_classifier_is_seeded_and_freezes_map() {
        let mut rng = rng_from_seed(4);
        let data: crate::LabeledDataset<f64> =
            crate::dataset::synthetic_blobs(200, 2, 10.0, &mut rng).unwrap();
        let cfg = SomConfig::new(6, 6).with_iterations(1000, 3000);
        let som = fit_unsupervised(data.features(), &cfg, &mut rng_from_seed(1)).unwrap();
        let before = som.transform(data.features()).unwrap();
        let y = data.class_labels().unwrap();
        let a = fit_classifier(&som, data.features(), y, &cfg, &mut rng_from_seed(2)).unwrap();
        let b = fit_classifier(&som, data.features(), y, &cfg, &mut rng_from_seed(2)).unwrap();
        assert_eq!(a, b);
        assert_eq!(before, som.transform(data.features()).unwrap());
        let pred = predict_classification(&som, &a, data.features()).unwrap();
        let correct = pred.iter().zip(y).filter(|(p, t)| p == t).count();
        assert!(correct as f64 / y.len() as f64 >= 0.95, "{correct}");
    }
}
