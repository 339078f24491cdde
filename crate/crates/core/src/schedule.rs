//! Decreasing learning-rate and neighborhood-radius schedules.
//!
//! Iterations are zero-based. A schedule is evaluated for `t` in `0..=t_max`;
//! training only visits `0..t_max`, the closed end is accepted so endpoint
//! values can be inspected.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Result, SomError};
use crate::scalar::Scalar;

/// Lower bound applied to every neighborhood radius.
pub const RADIUS_FLOOR: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ScheduleKind {
    /// `start / max(t, 1)`
    Inverse,
    /// `start * (1 - t / t_max)`
    Linear,
    /// `start ^ (t / t_max)`
    Power,
    /// `start * exp(-t / t_max)`
    Exponential,
    /// `start * (end / start) ^ (t / t_max)`
    StartEnd,
}

impl ScheduleKind {
    pub const ALL: [ScheduleKind; 5] = [
        ScheduleKind::Inverse,
        ScheduleKind::Linear,
        ScheduleKind::Power,
        ScheduleKind::Exponential,
        ScheduleKind::StartEnd,
    ];

    /// Kinds usable as a neighborhood radius.
    pub const RADIUS: [ScheduleKind; 3] = [
        ScheduleKind::Linear,
        ScheduleKind::Exponential,
        ScheduleKind::StartEnd,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ScheduleKind::Inverse => "inverse",
            ScheduleKind::Linear => "linear",
            ScheduleKind::Power => "power",
            ScheduleKind::Exponential => "exponential",
            ScheduleKind::StartEnd => "start-end",
        }
    }

    pub fn is_radius_kind(self) -> bool {
        Self::RADIUS.contains(&self)
    }
}

impl fmt::Display for ScheduleKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ScheduleKind {
    type Err = SomError;

    fn from_str(s: &str) -> Result<Self> {
        ScheduleKind::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| {
                SomError::InvalidSchedule(format!(
                    "unknown schedule `{s}`, expected inverse|linear|power|exponential|start-end"
                ))
            })
    }
}

/// Decay shape without an iteration horizon; stored in the map configuration.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Decay<T> {
    pub kind: ScheduleKind,
    pub start: T,
    pub end: T,
}

impl<T: Scalar> Decay<T> {
    pub fn new(kind: ScheduleKind, start: T, end: T) -> Self {
        Decay { kind, start, end }
    }

    /// Fixes the horizon, producing an evaluable schedule.
    pub fn over(&self, t_max: usize) -> ScheduleSpec<T> {
        ScheduleSpec {
            kind: self.kind,
            start: self.start,
            end: self.end,
            t_max,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScheduleSpec<T> {
    pub kind: ScheduleKind,
    pub start: T,
    /// Only read by [`ScheduleKind::StartEnd`].
    pub end: T,
    pub t_max: usize,
}

impl<T: Scalar> ScheduleSpec<T> {
    pub fn new(kind: ScheduleKind, start: T, end: T, t_max: usize) -> Self {
        ScheduleSpec {
            kind,
            start,
            end,
            t_max,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.start <= T::zero() || !self.start.is_finite() {
            return Err(SomError::InvalidSchedule(format!(
                "start must be positive and finite, got {}",
                self.start
            )));
        }
        if self.t_max == 0 {
            return Err(SomError::InvalidSchedule("t_max must be at least 1".into()));
        }
        match self.kind {
            ScheduleKind::StartEnd if !(self.end > T::zero() && self.end <= self.start) => {
                Err(SomError::InvalidSchedule(format!(
                    "start-end requires 0 < end <= start, got start {} end {}",
                    self.start, self.end
                )))
            }
            // start^(t/t_max) only decreases for start <= 1
            ScheduleKind::Power if self.start > T::one() => Err(SomError::InvalidSchedule(
                format!("power schedule requires start <= 1, got {}", self.start),
            )),
            _ => Ok(()),
        }
    }

    fn raw(&self, t: usize) -> Result<T> {
        self.validate()?;
        if t > self.t_max {
            return Err(SomError::IterationOutOfRange {
                t,
                t_max: self.t_max,
            });
        }
        let frac = T::of_usize(t) / T::of_usize(self.t_max);
        Ok(match self.kind {
            ScheduleKind::Inverse => self.start / T::of_usize(t.max(1)),
            ScheduleKind::Linear => self.start * (T::one() - frac),
            ScheduleKind::Power => self.start.powf(frac),
            ScheduleKind::Exponential => self.start * (-frac).exp(),
            ScheduleKind::StartEnd => self.start * (self.end / self.start).powf(frac),
        })
    }
}

/// Learning rate at iteration `t`.
pub fn learning_rate<T: Scalar>(t: usize, spec: &ScheduleSpec<T>) -> Result<T> {
    spec.raw(t)
}

/// Neighborhood radius at iteration `t`, never below [`RADIUS_FLOOR`].
pub fn neighborhood_radius<T: Scalar>(t: usize, spec: &ScheduleSpec<T>) -> Result<T> {
    if !spec.kind.is_radius_kind() {
        return Err(SomError::InvalidSchedule(format!(
            "`{}` is not a neighborhood radius schedule, expected linear|exponential|start-end",
            spec.kind
        )));
    }
    Ok(spec.raw(t)?.max(T::of(RADIUS_FLOOR)))
}
