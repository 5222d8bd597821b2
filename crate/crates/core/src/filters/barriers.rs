use nalgebra::{Matrix6, Vector3};

use crate::controllers::BackupTracker;
use crate::dynamics::{derivative, step_euler, ControlCommand, CwParameters, RelativeState};
use crate::qp::QpRow;
use crate::safety::{all_gradients, constraint_values, Constraint, SafetyParameters};

use super::FilterContext;

/// One row per constraint: `∇h_i·B u + ∇h_i·A x + λ_i h_i(x) ≥ 0`.
pub fn build_explicit_barriers(state: &RelativeState, sp: &SafetyParameters, params: &CwParameters) -> [QpRow; 4] {
    let grads = all_gradients(state, sp);
    let phi = constraint_values(state, sp);
    let drift = derivative(state, &ControlCommand::zero(), params);
    let inv_m = 1.0 / params.mass;
    Constraint::ALL.map(|c| {
        let g = &grads[c.index()];
        QpRow {
            g: Vector3::new(g[3], g[4], g[5]) * inv_m,
            h: g.dot(&drift) + sp.barrier_alpha(c, phi.get(c)),
        }
    })
}

/// Backup trajectory samples `x_0..x_J`, the backup command at each sample
/// and the flow sensitivity `D_j = ∂x_j/∂x_0`.
#[derive(Clone, Debug, Default)]
pub struct BackupRollout {
    pub states: Vec<RelativeState>,
    pub controls: Vec<ControlCommand>,
    pub sensitivities: Vec<Matrix6<f64>>,
}

impl BackupRollout {
    /// Rolls the tracking backup out from `start` for the context horizon.
    ///
    /// `tracker` is the backup engagement the rollout starts from; pass a
    /// fresh tracker to select the closest NMT point at `start`. Sensitivities
    /// use the closed-loop Jacobian `A − B K`, with the gain rows of saturated
    /// axes zeroed, and hold the tracking target fixed.
    pub fn compute(
        &mut self,
        ctx: &FilterContext,
        start: &RelativeState,
        tracker: &BackupTracker,
        with_sensitivity: bool,
    ) {
        self.states.clear();
        self.controls.clear();
        self.sensitivities.clear();
        let law = ctx.backup_law();
        let mut tracker = tracker.clone();
        let steps = ctx.horizon.intervals();
        let dt = ctx.horizon.dt;
        let inv_m = 1.0 / ctx.params.mass;
        let mut x = *start;
        let mut d = Matrix6::identity();
        for j in 0..=steps {
            let (u, sat) = law.control_with_saturation(&x, &mut tracker);
            self.states.push(x);
            self.controls.push(u);
            if with_sensitivity {
                self.sensitivities.push(d);
            }
            if j == steps {
                break;
            }
            if with_sensitivity {
                let mut jac = ctx.a;
                for axis in 0..3 {
                    if !sat[axis] {
                        for col in 0..6 {
                            jac[(3 + axis, col)] -= ctx.backup_gains.k[(axis, col)] * inv_m;
                        }
                    }
                }
                d = (Matrix6::identity() + jac * dt) * d;
            }
            x = step_euler(&x, &u, &ctx.params, dt);
        }
    }

    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    /// Every sample inside the allowable set.
    pub fn all_allowable(&self, sp: &SafetyParameters) -> bool {
        self.states.iter().all(|s| constraint_values(s, sp).all_nonnegative())
    }
}

pub fn propagate_sensitivity(ctx: &FilterContext, start: &RelativeState, tracker: &BackupTracker) -> BackupRollout {
    let mut r = BackupRollout::default();
    r.compute(ctx, start, tracker, true);
    r
}

/// One row per (constraint, sample):
/// `∇φ_i(x_j) D_j [A x + B u − A x_j − B u_b(x_j)] + λ_i φ_i(x_j) ≥ 0`.
pub fn build_implicit_barriers(
    state: &RelativeState,
    rollout: &BackupRollout,
    ctx: &FilterContext,
    rows: &mut Vec<QpRow>,
) {
    let sp = &ctx.safety;
    let params = &ctx.params;
    let inv_m = 1.0 / params.mass;
    let drift_now = derivative(state, &ControlCommand::zero(), params);
    rows.clear();
    for ((x_j, u_j), d_j) in rollout.states.iter().zip(&rollout.controls).zip(&rollout.sensitivities) {
        let grads = all_gradients(x_j, sp);
        let phi = constraint_values(x_j, sp);
        let bracket = drift_now - derivative(x_j, u_j, params);
        for c in Constraint::ALL {
            let w = d_j.tr_mul(&grads[c.index()]);
            rows.push(QpRow {
                g: Vector3::new(w[3], w[4], w[5]) * inv_m,
                h: w.dot(&bracket) + sp.barrier_alpha(c, phi.get(c)),
            });
        }
    }
}
