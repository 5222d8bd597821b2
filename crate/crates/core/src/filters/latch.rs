use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::controllers::{backup_control_lqr, BackupTracker};
use crate::dynamics::{ControlCommand, RelativeState};
use crate::safety::constraint_values;

use super::{FilterContext, FilterDecision, FilterKind, Mechanism, RtaFilter};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "kind")]
pub enum ReleaseCondition {
    /// Released once the backup has handed over to its NMT, the deputy is
    /// within the handover radius of the moving target and every `φ_i ≥ margin`.
    OnNmt {
        margin: f64,
    },
    Never,
}

impl Default for ReleaseCondition {
    fn default() -> Self {
        ReleaseCondition::OnNmt { margin: 0.0 }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LatchConfig {
    /// Consecutive infeasible-QP fallbacks that latch the backup.
    pub consecutive_fallbacks: usize,
    /// Step index at which to latch regardless of the inner filter.
    pub manual_trigger_step: Option<u64>,
    pub release: ReleaseCondition,
}

impl Default for LatchConfig {
    fn default() -> Self {
        LatchConfig {
            consecutive_fallbacks: 3,
            manual_trigger_step: None,
            release: ReleaseCondition::default(),
        }
    }
}

/// Wraps any filter and, once triggered, hands authority to the NMT
/// tracking backup until the release condition holds.
pub struct LatchedFilter {
    inner: Box<dyn RtaFilter>,
    ctx: Arc<FilterContext>,
    config: LatchConfig,
    tracker: BackupTracker,
    latched: bool,
    fallbacks: usize,
    step: u64,
}

impl LatchedFilter {
    pub fn new(inner: Box<dyn RtaFilter>, ctx: Arc<FilterContext>, config: LatchConfig) -> Self {
        LatchedFilter {
            inner,
            ctx,
            config,
            tracker: BackupTracker::new(),
            latched: false,
            fallbacks: 0,
            step: 0,
        }
    }

    pub fn is_latched(&self) -> bool {
        self.latched
    }

    pub fn tracker(&self) -> &BackupTracker {
        &self.tracker
    }

    /// Latch immediately.
    pub fn trigger(&mut self) {
        if !self.latched {
            log::debug!("latch engaged at step {}", self.step);
        }
        self.latched = true;
    }

    fn released(&self, state: &RelativeState) -> bool {
        match self.config.release {
            ReleaseCondition::Never => false,
            ReleaseCondition::OnNmt { margin } => {
                let Some(t) = self.tracker.target() else {
                    return false;
                };
                t.handed_over
                    && (state.position() - t.state.position()).norm() < self.ctx.epsilon
                    && constraint_values(state, &self.ctx.safety).min() >= margin
            }
        }
    }
}

impl RtaFilter for LatchedFilter {
    fn kind(&self) -> FilterKind {
        self.inner.kind()
    }

    fn decide(&mut self, state: &RelativeState, u_des: &ControlCommand) -> FilterDecision {
        let step = self.step;
        self.step += 1;
        if self.config.manual_trigger_step == Some(step) {
            self.trigger();
        }
        if self.latched && self.released(state) {
            log::debug!("latch released at step {step}");
            self.latched = false;
            self.fallbacks = 0;
            self.tracker.disengage();
        }
        if self.latched {
            let u = backup_control_lqr(state, &mut self.tracker, &self.ctx.backup_law());
            return FilterDecision::backup(u);
        }
        let d = self.inner.decide(state, u_des);
        if d.mechanism == Mechanism::QpInfeasibleFallback {
            self.fallbacks += 1;
            if self.fallbacks >= self.config.consecutive_fallbacks {
                self.trigger();
            }
        } else {
            self.fallbacks = 0;
        }
        d
    }

    fn reset(&mut self) {
        self.inner.reset();
        self.tracker.disengage();
        self.latched = false;
        self.fallbacks = 0;
        self.step = 0;
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::step_euler;
    use crate::filters::test_support::context;
    use crate::filters::{build_filter, ExplicitOptimization};

    fn sample_states() -> Vec<RelativeState> {
        (0..300)
            .map(|k| {
                let t = k as f64 * 0.05;
                RelativeState::new([-3000.0 + 5.0 * k as f64, 2000.0 * t.cos(), 0.0], [1.0, t.sin(), 0.2])
            })
            .collect()
    }

    #[test]
    fn untriggered_matches_inner() {
        let ctx = context();
        let mut plain = ExplicitOptimization::new(ctx.clone());
        let mut wrapped = LatchedFilter::new(
            Box::new(ExplicitOptimization::new(ctx.clone())),
            ctx,
            LatchConfig::default(),
        );
        let u = ControlCommand::new(0.4, -0.3, 1.0);
        for s in sample_states() {
            assert_eq!(plain.decide(&s, &u), wrapped.decide(&s, &u));
        }
        assert!(!wrapped.is_latched());
    }

    #[test]
    fn manual_trigger_latches_until_released() {
        let ctx = context();
        let config = LatchConfig {
            manual_trigger_step: Some(100),
            release: ReleaseCondition::Never,
            ..LatchConfig::default()
        };
        let inner = build_filter(FilterKind::ExplicitSwitching, ctx.clone());
        let mut f = LatchedFilter::new(inner, ctx, config);
        let u = ControlCommand::zero();
        for (k, s) in sample_states().iter().enumerate() {
            let d = f.decide(s, &u);
            if k >= 100 {
                assert_eq!(d.mechanism, Mechanism::SwitchedToBackup);
            }
        }
    }

    #[test]
    fn latched_run_settles_on_an_nmt() {
        let ctx = context();
        let config = LatchConfig {
            manual_trigger_step: Some(0),
            release: ReleaseCondition::Never,
            ..LatchConfig::default()
        };
        let inner = build_filter(FilterKind::ImplicitOptimization, ctx.clone());
        let mut f = LatchedFilter::new(inner, ctx.clone(), config);
        let mut s = RelativeState::new([-1500.0, 900.0, 50.0], [0.5, -0.5, 0.1]);
        for _ in 0..4000 {
            let d = f.decide(&s, &ControlCommand::zero());
            s = step_euler(&s, &d.u_act, &ctx.params, ctx.dt);
        }
        let t = f.tracker().target().unwrap();
        assert!(t.handed_over);
        assert!((s.position() - t.state.position()).norm() < ctx.epsilon);
        assert!(crate::nmt::admissible(&ctx.library.members[t.index], &ctx.safety, &ctx.params).unwrap());
    }
}
