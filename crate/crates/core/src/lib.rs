//! Self-organizing maps for unsupervised mapping, regression and
//! classification.
//!
//! An unsupervised map is trained on the features alone. A supervised head of
//! the same grid shape is then attached: continuous node values for
//! regression, discrete node classes for classification. Prediction looks up
//! the head at each datapoint's best matching unit.
//!
//! The numerical core is generic over [`Scalar`] (`f32` or `f64`); the
//! aliases below fix the common `f64` instantiation. Scores in [`metrics`]
//! and class weights accept any `num_traits::Num`, including exact rationals.
//!
//! ```
//! use supsom::{rng_from_seed, synthetic_regression, train_model, Dataset, Config, Task, TrainOptions};
//!
//! let data: Dataset = synthetic_regression(200, 0.05, &mut rng_from_seed(1)).unwrap();
//! let config = Config::new(8, 8).with_iterations(500, 500).with_seed(7);
//! let opts = TrainOptions { task: Task::Regression, scale: false };
//! let model = train_model(&data, &config, opts, 0).unwrap();
//! assert_eq!(model.predict(&data).unwrap().len(), 200);
//! ```

pub mod config;
pub mod dataset;
pub mod distance;
pub mod error;
pub mod evaluation;
pub mod matrix;
pub mod metrics;
pub mod model;
pub mod rng;
pub mod scalar;
pub mod schedule;
pub mod som;
pub mod supervised;

pub use config::{KernelKind, SomConfig, UpdateMode};
pub use dataset::{
    k_fold, load_csv, minmax_scale, synthetic_blobs, synthetic_regression, train_test_split,
    ClassLabel, LabelKind, LabeledDataset, Labels, ScalingRecord,
};
pub use distance::{feature_distance, grid_distance, GridIndex, GridShape, Metric, MetricId};
pub use error::{Result, SomError};
pub use evaluation::{
    cross_validate, evaluate, score, train_model, EvaluationReport, Scores, TrainOptions,
};
pub use matrix::Matrix;
pub use metrics::ConfusionMatrix;
pub use model::{Model, Predictions, SupervisedHead, Task};
pub use rng::{derive_seed, rng_from_seed, SomRng};
pub use scalar::Scalar;
pub use schedule::{learning_rate, neighborhood_radius, Decay, ScheduleKind, ScheduleSpec};
pub use som::{
    batch_update, bmu_histogram, find_bmu, fit_unsupervised, init_weights, kernel_matrix,
    online_update, transform, CountGrid, KernelMatrix, SelfOrganizingMap, WeightGrid,
};
pub use supervised::{
    apply_class_update, class_change_probability, class_weights, fit_classifier, fit_regressor,
    init_classifier, predict_classification, predict_regression, ClassWeightTable,
    ClassificationHead, ProbabilityGrid, RegressionHead,
};

pub type Config = SomConfig<f64>;
pub type Config32 = SomConfig<f32>;
pub type Dataset = LabeledDataset<f64>;
pub type Dataset32 = LabeledDataset<f32>;
pub type Grid = WeightGrid<f64>;
pub type Grid32 = WeightGrid<f32>;
pub type Som = SelfOrganizingMap<f64>;
pub type Som32 = SelfOrganizingMap<f32>;
pub type SomModel = Model<f64>;
pub type SomModel32 = Model<f32>;
