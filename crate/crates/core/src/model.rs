//! Trained models and their JSON file format.

use std::fmt;
use std::io::Write;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::config::SomConfig;
use crate::dataset::{ClassLabel, LabeledDataset, ScalingRecord};
use crate::distance::{GridShape, Metric};
use crate::error::{Result, SomError};
use crate::matrix::Matrix;
use crate::scalar::Scalar;
use crate::som::{SelfOrganizingMap, WeightGrid};
use crate::supervised::{
    predict_classification, predict_regression, ClassificationHead, RegressionHead,
};

/// Version written to and required from model files.
pub const MODEL_FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Task {
    #[default]
    None,
    Regression,
    Classification,
}

impl fmt::Display for Task {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Task::None => "none",
            Task::Regression => "regression",
            Task::Classification => "classification",
        })
    }
}

impl FromStr for Task {
    type Err = SomError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "none" => Ok(Task::None),
            "regression" => Ok(Task::Regression),
            "classification" => Ok(Task::Classification),
            _ => Err(SomError::InvalidConfig(format!(
                "unknown task `{s}`, expected none|regression|classification"
            ))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum SupervisedHead<T> {
    None,
    Regression(RegressionHead<T>),
    Classification(ClassificationHead<ClassLabel>),
}

impl<T> SupervisedHead<T> {
    pub fn task(&self) -> Task {
        match self {
            SupervisedHead::None => Task::None,
            SupervisedHead::Regression(_) => Task::Regression,
            SupervisedHead::Classification(_) => Task::Classification,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Predictions<T> {
    Regression(Vec<T>),
    Classification(Vec<ClassLabel>),
}

impl<T> Predictions<T> {
    pub fn len(&self) -> usize {
        match self {
            Predictions::Regression(v) => v.len(),
            Predictions::Classification(v) => v.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// An unsupervised map, an optional supervised head and the feature
/// preprocessing needed to apply them to new data.
#[derive(Debug, Clone, PartialEq)]
pub struct Model<T> {
    pub config: SomConfig<T>,
    pub map: SelfOrganizingMap<T>,
    pub head: SupervisedHead<T>,
    pub feature_names: Vec<String>,
    pub label_name: Option<String>,
    pub scaling: Option<ScalingRecord<T>>,
}

impl<T: Scalar> Model<T> {
    pub fn task(&self) -> Task {
        self.head.task()
    }

    /// Selects the model's features from `data` by name and applies scaling.
    pub fn prepare(&self, data: &LabeledDataset<T>) -> Result<Matrix<T>> {
        let selected = data.select_features(&self.feature_names)?;
        match &self.scaling {
            Some(record) => record.apply(selected.features()),
            None => Ok(selected.features().clone()),
        }
    }

    pub fn predict(&self, data: &LabeledDataset<T>) -> Result<Predictions<T>> {
        let x = self.prepare(data)?;
        self.predict_prepared(&x)
    }

    pub(crate) fn predict_prepared(&self, x: &Matrix<T>) -> Result<Predictions<T>> {
        match &self.head {
            SupervisedHead::None => Err(SomError::Model(
                "model has no supervised head, nothing to predict".into(),
            )),
            SupervisedHead::Regression(h) => {
                predict_regression(&self.map, h, x).map(Predictions::Regression)
            }
            SupervisedHead::Classification(h) => {
                predict_classification(&self.map, h, x).map(Predictions::Classification)
            }
        }
    }

    /// CSV `row,column,value` with each node's regression value or class.
    pub fn write_output_map<W: Write>(&self, out: W) -> Result<()> {
        let shape = self.map.shape();
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["row", "column", "value"])?;
        for i in shape.indices() {
            let value = match &self.head {
                SupervisedHead::None => {
                    return Err(SomError::Model("model has no supervised head".into()))
                }
                SupervisedHead::Regression(h) => h.get(i).to_string(),
                SupervisedHead::Classification(h) => h.get(i).to_string(),
            };
            w.write_record([i.row.to_string(), i.column.to_string(), value])?;
        }
        w.flush().map_err(csv::Error::from)?;
        Ok(())
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(&ModelFile::from_model(self))?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let file: ModelFile<T> = serde_json::from_str(text)?;
        file.into_model()
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let mut text = self.to_json()?;
        text.push('\n');
        std::fs::write(path, text).map_err(|source| SomError::Io {
            path: path.to_owned(),
            source,
        })
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|source| SomError::Io {
            path: path.to_owned(),
            source,
        })?;
        Self::from_json(&text)
    }
}

#[derive(Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
enum HeadFile<T> {
    None,
    Regression {
        values: Vec<T>,
    },
    Classification {
        class_set: Vec<ClassLabel>,
        /// One class per node, row-major.
        classes: Vec<ClassLabel>,
    },
}

/// On-disk layout. Weights are row-major over nodes, then features.
#[derive(Serialize, Deserialize)]
struct ModelFile<T> {
    format_version: u32,
    config: SomConfig<T>,
    n_row: usize,
    n_column: usize,
    feature_dim: usize,
    feature_names: Vec<String>,
    label_name: Option<String>,
    metric: Metric<T>,
    weights: Vec<T>,
    scaling: Option<ScalingRecord<T>>,
    head: HeadFile<T>,
}

impl<T: Scalar> ModelFile<T> {
    fn from_model(model: &Model<T>) -> Self {
        let shape = model.map.shape();
        let head = match &model.head {
            SupervisedHead::None => HeadFile::None,
            SupervisedHead::Regression(h) => HeadFile::Regression {
                values: h.values().to_vec(),
            },
            SupervisedHead::Classification(h) => HeadFile::Classification {
                class_set: h.class_set().to_vec(),
                classes: shape.indices().map(|i| h.get(i).clone()).collect(),
            },
        };
        ModelFile {
            format_version: MODEL_FORMAT_VERSION,
            config: model.config.clone(),
            n_row: shape.n_row,
            n_column: shape.n_column,
            feature_dim: model.map.grid.feature_dim(),
            feature_names: model.feature_names.clone(),
            label_name: model.label_name.clone(),
            metric: model.map.metric.clone(),
            weights: model.map.grid.as_slice().to_vec(),
            scaling: model.scaling.clone(),
            head,
        }
    }

    fn into_model(self) -> Result<Model<T>> {
        if self.format_version != MODEL_FORMAT_VERSION {
            return Err(SomError::Model(format!(
                "unsupported format version {}, expected {MODEL_FORMAT_VERSION}",
                self.format_version
            )));
        }
        let shape = GridShape::new(self.n_row, self.n_column);
        if self.feature_names.len() != self.feature_dim {
            return Err(SomError::Model(
                "feature names do not match feature_dim".into(),
            ));
        }
        let grid = WeightGrid::from_weights(shape, self.feature_dim, self.weights)?;
        let head = match self.head {
            HeadFile::None => SupervisedHead::None,
            HeadFile::Regression { values } => {
                SupervisedHead::Regression(RegressionHead::from_values(shape, values)?)
            }
            HeadFile::Classification { class_set, classes } => {
                let nodes = classes
                    .iter()
                    .map(|c| {
                        class_set.binary_search(c).map_err(|_| {
                            SomError::Model(format!("node class `{c}` not in class_set"))
                        })
                    })
                    .collect::<Result<Vec<_>>>()?;
                SupervisedHead::Classification(ClassificationHead::from_parts(
                    shape, class_set, nodes,
                )?)
            }
        };
        Ok(Model {
            config: self.config,
            map: SelfOrganizingMap {
                grid,
                metric: self.metric,
            },
            head,
            feature_names: self.feature_names,
            label_name: self.label_name,
            scaling: self.scaling,
        })
    }
}
