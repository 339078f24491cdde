//! End-to-end training, scoring and cross-validation, plus the plain-text
//! evaluation report.

use std::fmt::Write as _;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::config::SomConfig;
use crate::dataset::{fold_indices, ClassLabel, LabelKind, LabeledDataset, ScalingRecord};
use crate::error::{Result, SomError};
use crate::metrics::{
    average_accuracy, cohens_kappa, confusion, overall_accuracy, r_squared, ConfusionMatrix,
};
use crate::model::{Model, Predictions, SupervisedHead, Task};
use crate::rng::{derive_seed, rng_from_seed};
use crate::scalar::Scalar;
use crate::som::fit_unsupervised;
use crate::supervised::{fit_classifier, fit_regressor};

/// Options shared by training and cross-validation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrainOptions {
    pub task: Task,
    /// Min-max scale features by the training range before fitting.
    pub scale: bool,
}

/// Trains the unsupervised map and the requested head.
///
/// The two phases draw from independent streams seeded with
/// `derive_seed(config.seed, "unsupervised", index)` and
/// `derive_seed(config.seed, "supervised", index)`; `index` is the fold
/// number during cross-validation and 0 otherwise.
pub fn train_model<T: Scalar>(
    data: &LabeledDataset<T>,
    config: &SomConfig<T>,
    options: TrainOptions,
    index: u64,
) -> Result<Model<T>> {
    config.validate()?;
    if data.is_empty() {
        return Err(SomError::EmptyDataset);
    }
    let scaling = if options.scale {
        Some(ScalingRecord::fit(data.features())?)
    } else {
        None
    };
    let x = match &scaling {
        Some(record) => record.apply(data.features())?,
        None => data.features().clone(),
    };
    let mut unsup_rng = rng_from_seed(derive_seed(config.seed, "unsupervised", index));
    let map = fit_unsupervised(&x, config, &mut unsup_rng)?;
    let mut sup_rng = rng_from_seed(derive_seed(config.seed, "supervised", index));
    let head = match options.task {
        Task::None => SupervisedHead::None,
        Task::Regression => SupervisedHead::Regression(fit_regressor(
            &map,
            &x,
            data.continuous_labels()?,
            config,
            &mut sup_rng,
        )?),
        Task::Classification => SupervisedHead::Classification(fit_classifier(
            &map,
            &x,
            data.class_labels()?,
            config,
            &mut sup_rng,
        )?),
    };
    Ok(Model {
        config: config.clone(),
        map,
        head,
        feature_names: data.feature_names().to_vec(),
        label_name: data.label_name().map(str::to_owned),
        scaling,
    })
}

/// Label kind a task needs.
pub fn label_kind_for(task: Task) -> LabelKind {
    match task {
        Task::None => LabelKind::None,
        Task::Regression => LabelKind::Continuous,
        Task::Classification => LabelKind::Categorical,
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Scores {
    Regression {
        r2: f64,
    },
    Classification {
        oa: f64,
        aa: f64,
        kappa: f64,
        confusion: ConfusionMatrix<ClassLabel>,
    },
}

impl Scores {
    /// `(name, value)` pairs in report order.
    pub fn values(&self) -> Vec<(&'static str, f64)> {
        match self {
            Scores::Regression { r2 } => vec![("r2", *r2)],
            Scores::Classification { oa, aa, kappa, .. } => {
                vec![("oa", *oa), ("aa", *aa), ("kappa", *kappa)]
            }
        }
    }

    pub fn get(&self, name: &str) -> Option<f64> {
        self.values()
            .into_iter()
            .find(|(n, _)| *n == name)
            .map(|(_, v)| v)
    }
}

/// Scores a trained model on labeled data.
pub fn score<T: Scalar>(model: &Model<T>, data: &LabeledDataset<T>) -> Result<Scores> {
    match model.predict(data)? {
        Predictions::Regression(pred) => {
            let truth: Vec<f64> = data
                .continuous_labels()?
                .iter()
                .map(|v| v.as_f64())
                .collect();
            let pred: Vec<f64> = pred.iter().map(|v| v.as_f64()).collect();
            Ok(Scores::Regression {
                r2: r_squared(&truth, &pred)?,
            })
        }
        Predictions::Classification(pred) => {
            let cm = confusion(data.class_labels()?, &pred)?;
            Ok(Scores::Classification {
                oa: overall_accuracy(&cm)?,
                aa: average_accuracy(&cm)?,
                kappa: cohens_kappa(&cm)?,
                confusion: cm,
            })
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FoldResult {
    pub index: usize,
    pub train_size: usize,
    pub test_size: usize,
    pub train: Scores,
    pub test: Scores,
}

/// A named block of scores in a report.
#[derive(Debug, Clone, PartialEq)]
pub struct Section {
    pub name: String,
    pub scores: Scores,
}

/// Metrics for one model or for a cross-validation run.
#[derive(Debug, Clone, PartialEq)]
pub struct EvaluationReport {
    pub task: Task,
    pub sections: Vec<Section>,
    pub folds: Vec<FoldResult>,
}

impl EvaluationReport {
    pub fn section(&self, name: &str) -> Option<&Scores> {
        self.sections
            .iter()
            .find(|s| s.name == name)
            .map(|s| &s.scores)
    }

    /// Arithmetic mean of a metric over folds, e.g. `("test", "oa")`.
    pub fn fold_mean(&self, subset: &str, metric: &str) -> Option<f64> {
        if self.folds.is_empty() {
            return None;
        }
        let values = self
            .folds
            .iter()
            .map(|f| match subset {
                "train" => f.train.get(metric),
                _ => f.test.get(metric),
            })
            .collect::<Option<Vec<f64>>>()?;
        Some(values.iter().sum::<f64>() / values.len() as f64)
    }

    /// Plain-text rendering: `key: value` lines, values at 6 decimals, one
    /// block per section and fold.
    pub fn render(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "task: {}", self.task);
        if !self.folds.is_empty() {
            let _ = writeln!(out, "folds: {}", self.folds.len());
        }
        for s in &self.sections {
            let _ = writeln!(out, "\n[{}]", s.name);
            write_scores(&mut out, "", &s.scores);
        }
        for f in &self.folds {
            let _ = writeln!(out, "\n[fold {}]", f.index + 1);
            let _ = writeln!(out, "train_size: {}", f.train_size);
            let _ = writeln!(out, "test_size: {}", f.test_size);
            write_scores(&mut out, "train.", &f.train);
            write_scores(&mut out, "test.", &f.test);
        }
        if !self.folds.is_empty() {
            let _ = writeln!(out, "\n[mean]");
            for subset in ["train", "test"] {
                for (name, _) in self.folds[0].test.values() {
                    if let Some(v) = self.fold_mean(subset, name) {
                        let _ = writeln!(out, "{subset}.{name}: {v:.6}");
                    }
                }
            }
        }
        out
    }
}

fn write_scores(out: &mut String, prefix: &str, scores: &Scores) {
    for (name, v) in scores.values() {
        let _ = writeln!(out, "{prefix}{name}: {v:.6}");
    }
    if let Scores::Classification { confusion, .. } = scores {
        let _ = writeln!(out, "{prefix}confusion (rows: true, columns: predicted):");
        let labels: Vec<String> = confusion
            .class_set()
            .iter()
            .map(|c| c.to_string())
            .collect();
        let width = labels
            .iter()
            .map(String::len)
            .chain(
                (0..labels.len())
                    .flat_map(|i| confusion.row(i).iter().map(|c| c.to_string().len())),
            )
            .max()
            .unwrap_or(1);
        let _ = write!(out, "  {:>width$}", "");
        for l in &labels {
            let _ = write!(out, " {l:>width$}");
        }
        out.push('\n');
        for (i, l) in labels.iter().enumerate() {
            let _ = write!(out, "  {l:>width$}");
            for c in confusion.row(i) {
                let _ = write!(out, " {c:>width$}");
            }
            out.push('\n');
        }
    }
}

/// Scores a model on its training data and, when given, on held-out data.
pub fn evaluate<T: Scalar>(
    model: &Model<T>,
    train: Option<&LabeledDataset<T>>,
    test: Option<&LabeledDataset<T>>,
) -> Result<EvaluationReport> {
    let mut sections = Vec::new();
    for (name, data) in [("train", train), ("test", test)] {
        if let Some(data) = data {
            sections.push(Section {
                name: name.into(),
                scores: score(model, data)?,
            });
        }
    }
    Ok(EvaluationReport {
        task: model.task(),
        sections,
        folds: Vec::new(),
    })
}

/// k-fold cross-validation. Folds are drawn with
/// `derive_seed(config.seed, "folds", 0)`; fold `f` trains with sub-seeds
/// indexed by `f`. Folds run concurrently, results are ordered by fold.
pub fn cross_validate<T: Scalar>(
    data: &LabeledDataset<T>,
    config: &SomConfig<T>,
    options: TrainOptions,
    k: usize,
) -> Result<EvaluationReport> {
    if options.task == Task::None {
        return Err(SomError::InvalidConfig(
            "cross-validation needs a regression or classification task".into(),
        ));
    }
    config.validate()?;
    let folds = fold_indices(
        data.len(),
        k,
        &mut rng_from_seed(derive_seed(config.seed, "folds", 0)),
    )?;
    let results = folds
        .par_iter()
        .enumerate()
        .map(|(f, test_idx)| {
            let mut in_test = vec![false; data.len()];
            test_idx.iter().for_each(|&i| in_test[i] = true);
            let train_idx: Vec<usize> = (0..data.len()).filter(|&i| !in_test[i]).collect();
            let train = data.subset(&train_idx);
            let test = data.subset(test_idx);
            let model = train_model(&train, config, options, f as u64)?;
            Ok(FoldResult {
                index: f,
                train_size: train.len(),
                test_size: test.len(),
                train: score(&model, &train)?,
                test: score(&model, &test)?,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(EvaluationReport {
        task: options.task,
        sections: Vec::new(),
        folds: results,
    })
}
