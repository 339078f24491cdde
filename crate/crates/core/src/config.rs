use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::distance::{GridShape, MetricId};
use crate::error::{Result, SomError};
use crate::scalar::Scalar;
use crate::schedule::{Decay, ScheduleKind, ScheduleSpec};

/// Default learning-rate start and end values.
pub const DEFAULT_LR_START: f64 = 0.5;
pub const DEFAULT_LR_END: f64 = 0.05;
/// Default neighborhood-radius end value (only read by `start-end`).
pub const DEFAULT_RADIUS_END: f64 = 1.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum KernelKind {
    /// `exp(-d² / 2σ²)`
    #[default]
    Gaussian,
    /// `(1 - d²/σ²) exp(-d² / 2σ²)`
    MexicanHat,
}

impl KernelKind {
    pub fn name(self) -> &'static str {
        match self {
            KernelKind::Gaussian => "gaussian",
            KernelKind::MexicanHat => "mexican-hat",
        }
    }
}

impl fmt::Display for KernelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for KernelKind {
    type Err = SomError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "gaussian" => Ok(KernelKind::Gaussian),
            "mexican-hat" => Ok(KernelKind::MexicanHat),
            _ => Err(SomError::InvalidConfig(format!(
                "unknown kernel `{s}`, expected gaussian|mexican-hat"
            ))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum UpdateMode {
    #[default]
    Online,
    Batch,
}

impl fmt::Display for UpdateMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            UpdateMode::Online => "online",
            UpdateMode::Batch => "batch",
        })
    }
}

impl FromStr for UpdateMode {
    type Err = SomError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "online" => Ok(UpdateMode::Online),
            "batch" => Ok(UpdateMode::Batch),
            _ => Err(SomError::InvalidConfig(format!(
                "unknown update mode `{s}`, expected online|batch"
            ))),
        }
    }
}

/// Hyperparameters of both the unsupervised map and the supervised head.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SomConfig<T> {
    pub n_row: usize,
    pub n_column: usize,
    pub n_iter_unsupervised: usize,
    pub n_iter_supervised: usize,
    pub metric: MetricId,
    pub learning_rate: Decay<T>,
    pub radius: Decay<T>,
    pub kernel: KernelKind,
    pub update_mode: UpdateMode,
    pub seed: u64,
    pub class_weighting: bool,
}

impl<T: Scalar> SomConfig<T> {
    /// Defaults for a grid: start-end learning rate 0.5 → 0.05, linear radius
    /// starting at half the longer grid side, Gaussian kernel, online updates,
    /// Euclidean metric.
    pub fn new(n_row: usize, n_column: usize) -> Self {
        SomConfig {
            n_row,
            n_column,
            n_iter_unsupervised: 1000,
            n_iter_supervised: 1000,
            metric: MetricId::Euclidean,
            learning_rate: Decay::new(
                ScheduleKind::StartEnd,
                T::of(DEFAULT_LR_START),
                T::of(DEFAULT_LR_END),
            ),
            radius: Decay::new(
                ScheduleKind::Linear,
                Self::default_radius_start(n_row, n_column),
                T::of(DEFAULT_RADIUS_END),
            ),
            kernel: KernelKind::Gaussian,
            update_mode: UpdateMode::Online,
            seed: 0,
            class_weighting: false,
        }
    }

    pub fn default_radius_start(n_row: usize, n_column: usize) -> T {
        T::of(n_row.max(n_column) as f64 / 2.0)
    }

    pub fn with_iterations(mut self, unsupervised: usize, supervised: usize) -> Self {
        self.n_iter_unsupervised = unsupervised;
        self.n_iter_supervised = supervised;
        self
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn shape(&self) -> GridShape {
        GridShape::new(self.n_row, self.n_column)
    }

    pub fn lr_schedule(&self, t_max: usize) -> ScheduleSpec<T> {
        self.learning_rate.over(t_max)
    }

    pub fn radius_schedule(&self, t_max: usize) -> ScheduleSpec<T> {
        self.radius.over(t_max)
    }

    /// Full check: grid, schedules and both iteration counts.
    pub fn validate(&self) -> Result<()> {
        self.validate_map()?;
        if self.n_iter_unsupervised == 0 || self.n_iter_supervised == 0 {
            return Err(SomError::InvalidConfig(
                "iteration counts must be at least 1".into(),
            ));
        }
        Ok(())
    }

    /// Grid shape and schedule parameters, independent of iteration counts.
    pub(crate) fn validate_map(&self) -> Result<()> {
        if self.n_row == 0 || self.n_column == 0 {
            return Err(SomError::InvalidConfig(format!(
                "grid must have at least one node, got {}x{}",
                self.n_row, self.n_column
            )));
        }
        self.learning_rate.over(1).validate()?;
        // α ≤ 1 keeps every update a convex combination
        if self.learning_rate.start > T::one() {
            return Err(SomError::InvalidSchedule(format!(
                "learning rate start must be <= 1, got {}",
                self.learning_rate.start
            )));
        }
        if !self.radius.kind.is_radius_kind() {
            return Err(SomError::InvalidSchedule(format!(
                "`{}` is not a neighborhood radius schedule",
                self.radius.kind
            )));
        }
        self.radius.over(1).validate()
    }
}
