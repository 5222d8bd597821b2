//! Run time assurance filters.
//!
//! Every filter sits between the primary controller and the plant. Given the
//! current state and the desired command it either passes the command through
//! unchanged or substitutes a safer one. Monitoring is explicit (closed-form
//! safe set) or implicit (simulated backup trajectories); intervention is by
//! switching to a backup law or by solving a small QP.

mod barriers;
mod latch;
mod optimization;
mod switching;

use std::fmt;
use std::str::FromStr;
use std::sync::Arc;
use std::time::Instant;

use nalgebra::{Matrix6, Matrix6x3};
use serde::{Deserialize, Serialize};

use crate::controllers::{BackupLaw, LqrGains};
use crate::dynamics::{cw_matrices, ControlCommand, CwParameters, RelativeState};
use crate::error::{Result, RtaError};
use crate::nmt::NmtLibrary;
use crate::safety::SafetyParameters;

pub use barriers::{build_explicit_barriers, build_implicit_barriers, propagate_sensitivity, BackupRollout};
pub use latch::{LatchConfig, LatchedFilter, ReleaseCondition};
pub use optimization::{ExplicitOptimization, ImplicitOptimization};
pub use switching::{ExplicitSwitching, ImplicitSwitching};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FilterKind {
    ExplicitSwitching,
    ImplicitSwitching,
    ExplicitOptimization,
    ImplicitOptimization,
    None,
}

impl FilterKind {
    pub const RTA: [FilterKind; 4] = [
        FilterKind::ExplicitSwitching,
        FilterKind::ExplicitOptimization,
        FilterKind::ImplicitSwitching,
        FilterKind::ImplicitOptimization,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            FilterKind::ExplicitSwitching => "explicit-switching",
            FilterKind::ImplicitSwitching => "implicit-switching",
            FilterKind::ExplicitOptimization => "explicit-optimization",
            FilterKind::ImplicitOptimization => "implicit-optimization",
            FilterKind::None => "none",
        }
    }

    pub fn is_switching(self) -> bool {
        matches!(self, FilterKind::ExplicitSwitching | FilterKind::ImplicitSwitching)
    }

    pub fn is_optimization(self) -> bool {
        matches!(
            self,
            FilterKind::ExplicitOptimization | FilterKind::ImplicitOptimization
        )
    }
}

impl fmt::Display for FilterKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.pad(self.as_str())
    }
}

impl FromStr for FilterKind {
    type Err = RtaError;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s.to_ascii_lowercase().as_str() {
            "explicit-switching" | "es" => FilterKind::ExplicitSwitching,
            "implicit-switching" | "is" => FilterKind::ImplicitSwitching,
            "explicit-optimization" | "eo" => FilterKind::ExplicitOptimization,
            "implicit-optimization" | "io" => FilterKind::ImplicitOptimization,
            "none" => FilterKind::None,
            other => return Err(RtaError::InvalidConfig(format!("unknown filter kind `{other}`"))),
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Mechanism {
    Passthrough,
    SwitchedToBackup,
    QpModified,
    QpInfeasibleFallback,
}

impl Mechanism {
    pub fn as_str(self) -> &'static str {
        match self {
            Mechanism::Passthrough => "passthrough",
            Mechanism::SwitchedToBackup => "switched-to-backup",
            Mechanism::QpModified => "qp-modified",
            Mechanism::QpInfeasibleFallback => "qp-infeasible-fallback",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FilterDecision {
    pub u_act: ControlCommand,
    pub intervened: bool,
    pub mechanism: Mechanism,
    /// Wall-clock time spent inside the filter (s).
    pub latency: f64,
    /// Largest KKT multiplier on a barrier row; zero outside the QP path.
    pub barrier_multiplier: f64,
}

impl FilterDecision {
    pub fn passthrough(u_des: ControlCommand) -> Self {
        FilterDecision {
            u_act: u_des,
            intervened: false,
            mechanism: Mechanism::Passthrough,
            latency: 0.0,
            barrier_multiplier: 0.0,
        }
    }

    pub fn backup(u: ControlCommand) -> Self {
        FilterDecision {
            u_act: u,
            intervened: true,
            mechanism: Mechanism::SwitchedToBackup,
            latency: 0.0,
            barrier_multiplier: 0.0,
        }
    }
}

/// Sample times `0, dt, …, T` along a backup trajectory.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BackupHorizon {
    /// Horizon length `T` (s).
    pub length: f64,
    pub dt: f64,
}

impl BackupHorizon {
    pub fn new(length: f64, dt: f64) -> Result<Self> {
        let h = BackupHorizon { length, dt };
        h.validate()?;
        Ok(h)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.dt > 0.0 && self.length >= 0.0 && self.length.is_finite()) {
            return Err(RtaError::InvalidConfig("backup horizon needs dt > 0 and T >= 0".into()));
        }
        let ratio = self.length / self.dt;
        if (ratio - ratio.round()).abs() > 1e-9 {
            return Err(RtaError::InvalidConfig(
                "backup horizon must be a whole number of steps".into(),
            ));
        }
        Ok(())
    }

    /// Number of intervals `J`; there are `J + 1` samples.
    pub fn intervals(&self) -> usize {
        (self.length / self.dt).round() as usize
    }

    pub fn sample_times(&self) -> impl Iterator<Item = f64> + '_ {
        (0..=self.intervals()).map(move |j| j as f64 * self.dt)
    }
}

/// Shared, read-only inputs of every filter.
#[derive(Clone, Debug)]
pub struct FilterContext {
    pub params: CwParameters,
    pub safety: SafetyParameters,
    pub a: Matrix6<f64>,
    pub b: Matrix6x3<f64>,
    /// Integration / control step (s).
    pub dt: f64,
    pub horizon: BackupHorizon,
    pub library: NmtLibrary,
    pub backup_gains: LqrGains,
    /// Handover radius of the tracking backup (m).
    pub epsilon: f64,
}

impl FilterContext {
    pub fn new(
        params: CwParameters,
        safety: SafetyParameters,
        dt: f64,
        horizon: BackupHorizon,
        library: NmtLibrary,
        backup_gains: LqrGains,
        epsilon: f64,
    ) -> Self {
        let (a, b) = cw_matrices(&params);
        FilterContext {
            params,
            safety,
            a,
            b,
            dt,
            horizon,
            library,
            backup_gains,
            epsilon,
        }
    }

    pub fn backup_law(&self) -> BackupLaw<'_> {
        BackupLaw {
            library: &self.library,
            gains: &self.backup_gains,
            params: &self.params,
            epsilon: self.epsilon,
            dt: self.dt,
        }
    }
}

pub trait RtaFilter: Send {
    fn kind(&self) -> FilterKind;

    /// Filter body. `latency` in the result is left at zero.
    fn decide(&mut self, state: &RelativeState, u_des: &ControlCommand) -> FilterDecision;

    /// Clears per-run memory (trackers, warm starts).
    fn reset(&mut self) {}

    /// [`decide`](Self::decide) timed with a monotonic clock.
    fn filter(&mut self, state: &RelativeState, u_des: &ControlCommand) -> FilterDecision {
        let start = Instant::now();
        let mut d = self.decide(state, u_des);
        d.latency = start.elapsed().as_secs_f64();
        d
    }
}

/// Plan A only: every command passes.
#[derive(Clone, Debug, Default)]
pub struct NoFilter;

impl RtaFilter for NoFilter {
    fn kind(&self) -> FilterKind {
        FilterKind::None
    }

    fn decide(&mut self, _state: &RelativeState, u_des: &ControlCommand) -> FilterDecision {
        FilterDecision::passthrough(*u_des)
    }
}

pub fn build_filter(kind: FilterKind, ctx: Arc<FilterContext>) -> Box<dyn RtaFilter> {
    match kind {
        FilterKind::ExplicitSwitching => Box::new(ExplicitSwitching::new(ctx)),
        FilterKind::ImplicitSwitching => Box::new(ImplicitSwitching::new(ctx)),
        FilterKind::ExplicitOptimization => Box::new(ExplicitOptimization::new(ctx)),
        FilterKind::ImplicitOptimization => Box::new(ImplicitOptimization::new(ctx)),
        FilterKind::None => Box::new(NoFilter),
    }
}
