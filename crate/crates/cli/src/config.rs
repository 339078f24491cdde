//! Run configuration: file values, flag overrides and the resolved record.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use supsom::{Config, Decay, KernelKind, MetricId, ScheduleKind, Task, UpdateMode};

use crate::CliError;

/// How phase and fold seeds are derived from the master seed. Written into
/// every resolved config so a run can be reproduced without the source.
pub const SEED_DERIVATION: &str = "splitmix64(seed ^ fnv1a64(tag) ^ splitmix64(index)); \
     tags: unsupervised, supervised (index = fold, 0 outside crossval), folds (index 0)";

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DecayOverrides {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub kind: Option<ScheduleKind>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub start: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub end: Option<f64>,
}

impl DecayOverrides {
    fn overlay(self, top: Self) -> Self {
        DecayOverrides {
            kind: top.kind.or(self.kind),
            start: top.start.or(self.start),
            end: top.end.or(self.end),
        }
    }

    fn apply(self, decay: &mut Decay<f64>) {
        if let Some(k) = self.kind {
            decay.kind = k;
        }
        if let Some(s) = self.start {
            decay.start = s;
        }
        if let Some(e) = self.end {
            decay.end = e;
        }
    }
}

/// Map hyperparameters, each optional so file and flag values can be layered.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SomOverrides {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub n_row: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub n_column: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub n_iter_unsupervised: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub n_iter_supervised: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub metric: Option<MetricId>,
    pub learning_rate: DecayOverrides,
    pub radius: DecayOverrides,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub kernel: Option<KernelKind>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub update_mode: Option<UpdateMode>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub class_weighting: Option<bool>,
}

impl SomOverrides {
    pub fn overlay(self, top: Self) -> Self {
        SomOverrides {
            n_row: top.n_row.or(self.n_row),
            n_column: top.n_column.or(self.n_column),
            n_iter_unsupervised: top.n_iter_unsupervised.or(self.n_iter_unsupervised),
            n_iter_supervised: top.n_iter_supervised.or(self.n_iter_supervised),
            metric: top.metric.or(self.metric),
            learning_rate: self.learning_rate.overlay(top.learning_rate),
            radius: self.radius.overlay(top.radius),
            kernel: top.kernel.or(self.kernel),
            update_mode: top.update_mode.or(self.update_mode),
            seed: top.seed.or(self.seed),
            class_weighting: top.class_weighting.or(self.class_weighting),
        }
    }

    /// Fills unset values with library defaults and validates.
    pub fn resolve(&self) -> Result<Config, CliError> {
        let (Some(n_row), Some(n_column)) = (self.n_row, self.n_column) else {
            return Err(CliError::Usage(
                "grid size is required: pass --n-row and --n-column or set them in --config".into(),
            ));
        };
        let mut c = Config::new(n_row, n_column);
        if let Some(n) = self.n_iter_unsupervised {
            c.n_iter_unsupervised = n;
        }
        if let Some(n) = self.n_iter_supervised {
            c.n_iter_supervised = n;
        }
        if let Some(m) = self.metric {
            c.metric = m;
        }
        self.learning_rate.apply(&mut c.learning_rate);
        self.radius.apply(&mut c.radius);
        if let Some(k) = self.kernel {
            c.kernel = k;
        }
        if let Some(u) = self.update_mode {
            c.update_mode = u;
        }
        if let Some(s) = self.seed {
            c.seed = s;
        }
        if let Some(w) = self.class_weighting {
            c.class_weighting = w;
        }
        c.validate()?;
        Ok(c)
    }

    pub fn from_config(c: &Config) -> Self {
        let decay = |d: &Decay<f64>| DecayOverrides {
            kind: Some(d.kind),
            start: Some(d.start),
            end: Some(d.end),
        };
        SomOverrides {
            n_row: Some(c.n_row),
            n_column: Some(c.n_column),
            n_iter_unsupervised: Some(c.n_iter_unsupervised),
            n_iter_supervised: Some(c.n_iter_supervised),
            metric: Some(c.metric),
            learning_rate: decay(&c.learning_rate),
            radius: decay(&c.radius),
            kernel: Some(c.kernel),
            update_mode: Some(c.update_mode),
            seed: Some(c.seed),
            class_weighting: Some(c.class_weighting),
        }
    }
}

/// Contents of a `--config` file and of the resolved record every run writes.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub command: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub data: Option<PathBuf>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub train_data: Option<PathBuf>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub model: Option<PathBuf>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub output: Option<PathBuf>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub out_dir: Option<PathBuf>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub task: Option<Task>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub label_column: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub scale: Option<bool>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub band_mask: Option<PathBuf>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub drop_label: Option<Vec<String>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub folds: Option<usize>,
    #[serde(skip_serializing_if = "SomOverrides::is_empty")]
    pub som: SomOverrides,
    /// Informational; ignored when read back.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed_derivation: Option<String>,
}

impl SomOverrides {
    fn is_empty(&self) -> bool {
        *self == SomOverrides::default()
    }
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Usage(format!("cannot read config {}: {e}", path.display())))?;
        serde_json::from_str(&text)
            .map_err(|e| CliError::Usage(format!("invalid config {}: {e}", path.display())))
    }

    pub fn load_optional(path: Option<&Path>) -> Result<Self, CliError> {
        path.map_or_else(|| Ok(RunConfig::default()), RunConfig::load)
    }

    /// Values set in `top` win.
    pub fn overlay(self, top: Self) -> Self {
        RunConfig {
            command: top.command.or(self.command),
            data: top.data.or(self.data),
            train_data: top.train_data.or(self.train_data),
            model: top.model.or(self.model),
            output: top.output.or(self.output),
            out_dir: top.out_dir.or(self.out_dir),
            task: top.task.or(self.task),
            label_column: top.label_column.or(self.label_column),
            scale: top.scale.or(self.scale),
            band_mask: top.band_mask.or(self.band_mask),
            drop_label: top.drop_label.or(self.drop_label),
            folds: top.folds.or(self.folds),
            som: self.som.overlay(top.som),
            seed_derivation: None,
        }
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("run config serializes");
        s.push('\n');
        s
    }
}
