//! Regression and classification scores.
//!
//! Every score is generic over the numeric type so that hand-worked cases can
//! be checked exactly with rationals; training code uses `f64`.

use std::collections::BTreeSet;

use num_traits::{FromPrimitive, Num};

use crate::error::{Result, SomError};

fn num<T: FromPrimitive>(v: u64) -> T {
    T::from_u64(v).expect("count fits the numeric type")
}

fn check_lengths(a: usize, b: usize) -> Result<()> {
    if a != b {
        return Err(SomError::LengthMismatch { left: a, right: b });
    }
    if a == 0 {
        return Err(SomError::EmptyDataset);
    }
    Ok(())
}

/// Coefficient of determination `1 − SS_res / SS_tot`.
pub fn r_squared<T>(y_true: &[T], y_pred: &[T]) -> Result<T>
where
    T: Num + FromPrimitive + Clone,
{
    check_lengths(y_true.len(), y_pred.len())?;
    let n: T = num(y_true.len() as u64);
    let mean = y_true.iter().cloned().fold(T::zero(), |a, b| a + b) / n;
    let ss_tot = y_true.iter().cloned().fold(T::zero(), |acc, y| {
        let d = y - mean.clone();
        acc + d.clone() * d
    });
    if ss_tot.is_zero() {
        return Err(SomError::ConstantTarget);
    }
    let ss_res =
        y_true
            .iter()
            .cloned()
            .zip(y_pred.iter().cloned())
            .fold(T::zero(), |acc, (y, p)| {
                let d = y - p;
                acc + d.clone() * d
            });
    Ok(T::one() - ss_res / ss_tot)
}

/// Counts indexed by (true class, predicted class).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConfusionMatrix<C> {
    class_set: Vec<C>,
    counts: Vec<u64>,
}

impl<C: Ord + Clone> ConfusionMatrix<C> {
    pub fn from_counts(class_set: Vec<C>, counts: Vec<u64>) -> Result<Self> {
        let n = class_set.len();
        if counts.len() != n * n {
            return Err(SomError::LengthMismatch {
                left: counts.len(),
                right: n * n,
            });
        }
        Ok(ConfusionMatrix { class_set, counts })
    }

    pub fn class_set(&self) -> &[C] {
        &self.class_set
    }

    pub fn n_classes(&self) -> usize {
        self.class_set.len()
    }

    pub fn get(&self, true_class: usize, predicted: usize) -> u64 {
        self.counts[true_class * self.n_classes() + predicted]
    }

    pub fn row(&self, true_class: usize) -> &[u64] {
        let n = self.n_classes();
        &self.counts[true_class * n..(true_class + 1) * n]
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }

    pub fn trace(&self) -> u64 {
        (0..self.n_classes()).map(|k| self.get(k, k)).sum()
    }

    pub fn row_sum(&self, k: usize) -> u64 {
        self.row(k).iter().sum()
    }

    pub fn col_sum(&self, k: usize) -> u64 {
        (0..self.n_classes()).map(|i| self.get(i, k)).sum()
    }

    pub fn is_diagonal(&self) -> bool {
        let n = self.n_classes();
        (0..n * n).all(|k| k / n == k % n || self.counts[k] == 0)
    }

    /// The same counts under a different class ordering; `order[k]` is the old
    /// position of the class placed at position `k`.
    pub fn permuted(&self, order: &[usize]) -> Self {
        let n = self.n_classes();
        let class_set = order.iter().map(|&k| self.class_set[k].clone()).collect();
        let counts = (0..n * n)
            .map(|k| self.get(order[k / n], order[k % n]))
            .collect();
        ConfusionMatrix { class_set, counts }
    }
}

/// Confusion matrix over the sorted union of observed classes.
pub fn confusion<C: Ord + Clone>(y_true: &[C], y_pred: &[C]) -> Result<ConfusionMatrix<C>> {
    check_lengths(y_true.len(), y_pred.len())?;
    let class_set: Vec<C> = y_true
        .iter()
        .chain(y_pred)
        .cloned()
        .collect::<BTreeSet<_>>()
        .into_iter()
        .collect();
    let n = class_set.len();
    let mut counts = vec![0u64; n * n];
    for (t, p) in y_true.iter().zip(y_pred) {
        let i = class_set.binary_search(t).expect("class in set");
        let j = class_set.binary_search(p).expect("class in set");
        counts[i * n + j] += 1;
    }
    Ok(ConfusionMatrix { class_set, counts })
}

/// Fraction of correctly classified datapoints.
pub fn overall_accuracy<T, C>(cm: &ConfusionMatrix<C>) -> Result<T>
where
    T: Num + FromPrimitive,
    C: Ord + Clone,
{
    let total = cm.total();
    if total == 0 {
        return Err(SomError::EmptyDataset);
    }
    Ok(num::<T>(cm.trace()) / num(total))
}

/// Mean per-class recall.
pub fn average_accuracy<T, C>(cm: &ConfusionMatrix<C>) -> Result<T>
where
    T: Num + FromPrimitive,
    C: Ord + Clone + ToString,
{
    if cm.total() == 0 {
        return Err(SomError::EmptyDataset);
    }
    let mut sum = T::zero();
    for k in 0..cm.n_classes() {
        let support = cm.row_sum(k);
        if support == 0 {
            return Err(SomError::EmptyClass(cm.class_set[k].to_string()));
        }
        sum = sum + num::<T>(cm.get(k, k)) / num(support);
    }
    Ok(sum / num(cm.n_classes() as u64))
}

/// Cohen's kappa `(OA − θ) / (1 − θ)` with `θ = Σ_k row_k · col_k / total²`.
pub fn cohens_kappa<T, C>(cm: &ConfusionMatrix<C>) -> Result<T>
where
    T: Num + FromPrimitive + Clone,
    C: Ord + Clone,
{
    let total = cm.total();
    if total == 0 {
        return Err(SomError::EmptyDataset);
    }
    // integer numerators keep θ = 1 detection exact
    let chance: u128 = (0..cm.n_classes())
        .map(|k| u128::from(cm.row_sum(k)) * u128::from(cm.col_sum(k)))
        .sum();
    let total_sq = u128::from(total) * u128::from(total);
    if chance == total_sq {
        return Err(SomError::DegenerateChance);
    }
    let as_t = |v: u128| T::from_u128(v).expect("count fits the numeric type");
    let theta = as_t(chance) / as_t(total_sq);
    let oa: T = overall_accuracy(cm)?;
    Ok((oa - theta.clone()) / (T::one() - theta))
}
