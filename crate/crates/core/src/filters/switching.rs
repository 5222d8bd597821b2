use std::sync::Arc;

use crate::controllers::{backup_control_explicit, backup_control_lqr, BackupTracker};
use crate::dynamics::{step_euler, ControlCommand, RelativeState};
use crate::safety::constraint_values;

use super::{BackupRollout, FilterContext, FilterDecision, FilterKind, RtaFilter};

/// Switching with the closed-form safe set: pass `u_des` if the one-step
/// successor under it satisfies every constraint, otherwise apply the
/// analytic backup law.
#[derive(Clone, Debug)]
pub struct ExplicitSwitching {
    ctx: Arc<FilterContext>,
}

impl ExplicitSwitching {
    pub fn new(ctx: Arc<FilterContext>) -> Self {
        ExplicitSwitching { ctx }
    }
}

impl RtaFilter for ExplicitSwitching {
    fn kind(&self) -> FilterKind {
        FilterKind::ExplicitSwitching
    }

    fn decide(&mut self, state: &RelativeState, u_des: &ControlCommand) -> FilterDecision {
        let c = &*self.ctx;
        let next = step_euler(state, u_des, &c.params, c.dt);
        if constraint_values(&next, &c.safety).all_nonnegative() {
            FilterDecision::passthrough(*u_des)
        } else {
            FilterDecision::backup(backup_control_explicit(state, &c.safety, &c.params, c.dt))
        }
    }
}

/// Switching with the implicit safe set: pass `u_des` if the NMT tracking
/// backup, started from the one-step successor under `u_des`, keeps every
/// rollout sample in the allowable set.
///
/// While the backup is in control it keeps its tracking target between
/// steps; a passing check releases it.
#[derive(Clone, Debug)]
pub struct ImplicitSwitching {
    ctx: Arc<FilterContext>,
    tracker: BackupTracker,
    rollout: BackupRollout,
}

impl ImplicitSwitching {
    pub fn new(ctx: Arc<FilterContext>) -> Self {
        ImplicitSwitching {
            ctx,
            tracker: BackupTracker::new(),
            rollout: BackupRollout::default(),
        }
    }

    pub fn tracker(&self) -> &BackupTracker {
        &self.tracker
    }
}

impl RtaFilter for ImplicitSwitching {
    fn kind(&self) -> FilterKind {
        FilterKind::ImplicitSwitching
    }

    fn decide(&mut self, state: &RelativeState, u_des: &ControlCommand) -> FilterDecision {
        let c = &*self.ctx;
        let next = step_euler(state, u_des, &c.params, c.dt);
        self.rollout.compute(c, &next, &BackupTracker::new(), false);
        if self.rollout.all_allowable(&c.safety) {
            self.tracker.disengage();
            FilterDecision::passthrough(*u_des)
        } else {
            FilterDecision::backup(backup_control_lqr(state, &mut self.tracker, &c.backup_law()))
        }
    }

    fn reset(&mut self) {
        self.tracker.disengage();
    }
}
