//! Primary (unsafe) docking controller and the two backup laws.

pub mod lqr;

use nalgebra::{Matrix3, Matrix3x6, Matrix6, Vector3, Vector6};
use serde::{Deserialize, Serialize};

use crate::dynamics::{cw_matrices, drift_accel, step_euler, ControlCommand, CwParameters, RelativeState};
use crate::error::Result;
use crate::nmt::NmtLibrary;
use crate::safety::{constraint_values, Constraint, SafetyParameters};

pub use lqr::{solve_lqr, spectral_radius};

/// Diagonal LQR weights: `Q = diag(q_position·I3, q_velocity·I3)`, `R = r·I3`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LqrWeights {
    pub q_position: f64,
    pub q_velocity: f64,
    pub r: f64,
}

impl LqrWeights {
    pub fn primary_default() -> Self {
        LqrWeights {
            q_position: 1e-4,
            q_velocity: 1e-1,
            r: 1.0,
        }
    }

    pub fn backup_default() -> Self {
        LqrWeights {
            q_position: 1e-5,
            q_velocity: 1.0,
            r: 5e2,
        }
    }

    pub fn q(&self) -> Matrix6<f64> {
        let mut d = Vector6::repeat(self.q_position);
        d.fixed_rows_mut::<3>(3).fill(self.q_velocity);
        Matrix6::from_diagonal(&d)
    }

    pub fn r(&self) -> Matrix3<f64> {
        Matrix3::identity() * self.r
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct LqrGains {
    pub k: Matrix3x6<f64>,
    pub q: Matrix6<f64>,
    pub r: Matrix3<f64>,
    /// Spectral radius of the discretised closed loop `Ad − Bd K`.
    pub closed_loop_radius: f64,
}

impl LqrGains {
    pub fn synthesize(params: &CwParameters, weights: &LqrWeights, dt: f64) -> Result<Self> {
        let (a, b) = cw_matrices(params);
        let q = weights.q();
        let r = weights.r();
        let sol = solve_lqr(&a, &b, &q, &r, dt)?;
        let radius = spectral_radius(&(sol.ad - sol.bd * sol.k));
        Ok(LqrGains {
            k: sol.k,
            q,
            r,
            closed_loop_radius: radius,
        })
    }

    /// `saturate(−K (x − target))`
    pub fn feedback(&self, state: &RelativeState, target: &RelativeState, u_max: f64) -> ControlCommand {
        let err = state.vector() - target.vector();
        ControlCommand::from_vector(-(self.k * err)).saturate(u_max)
    }
}

/// Plan A: drive to `target` (the chief at the origin) ignoring all constraints.
pub fn primary_control(
    state: &RelativeState,
    gains: &LqrGains,
    target: &RelativeState,
    params: &CwParameters,
) -> ControlCommand {
    gains.feedback(state, target, params.u_max)
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TrackedPoint {
    pub index: usize,
    pub phase: f64,
    pub state: RelativeState,
    pub handed_over: bool,
}

/// Engagement state of the NMT tracking backup controller.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct BackupTracker {
    target: Option<TrackedPoint>,
}

impl BackupTracker {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn is_engaged(&self) -> bool {
        self.target.is_some()
    }

    pub fn handed_over(&self) -> bool {
        self.target.is_some_and(|t| t.handed_over)
    }

    pub fn target(&self) -> Option<&TrackedPoint> {
        self.target.as_ref()
    }

    pub fn disengage(&mut self) {
        self.target = None;
    }

    /// Engage on the library point closest to `state` without issuing a command.
    pub fn lock_on(&mut self, library: &NmtLibrary, state: &RelativeState) {
        let c = library.closest_target(state);
        self.target = Some(TrackedPoint {
            index: c.index,
            phase: c.phase,
            state: c.state,
            handed_over: false,
        });
    }
}

/// Everything the tracking backup controller needs besides its own state.
#[derive(Clone, Copy, Debug)]
pub struct BackupLaw<'a> {
    pub library: &'a NmtLibrary,
    pub gains: &'a LqrGains,
    pub params: &'a CwParameters,
    /// Handover radius (m).
    pub epsilon: f64,
    pub dt: f64,
}

impl BackupLaw<'_> {
    /// One step of the NMT tracking law.
    ///
    /// On first use the tracker locks onto the closest library point. Until
    /// the deputy is within `epsilon` of it that point is held as a rest
    /// target, with a feedforward cancelling the CW drift there; a frozen NMT
    /// state with nonzero velocity is not an equilibrium and would leave a
    /// standing offset. After handover the target coasts along its NMT,
    /// advancing by `n dt` each call, and is tracked as a full state.
    pub fn control(&self, state: &RelativeState, tracker: &mut BackupTracker) -> ControlCommand {
        self.control_with_saturation(state, tracker).0
    }

    /// Same as [`control`](Self::control), also reporting which axes hit the thrust bound.
    pub fn control_with_saturation(
        &self,
        state: &RelativeState,
        tracker: &mut BackupTracker,
    ) -> (ControlCommand, [bool; 3]) {
        let lib = self.library;
        if tracker.target.is_none() {
            tracker.lock_on(lib, state);
        }
        let t = tracker.target.as_mut().expect("tracker engaged");
        if !t.handed_over && (state.position() - t.state.position()).norm() < self.epsilon {
            t.handed_over = true;
        }
        let raw = if t.handed_over {
            -(self.gains.k * (state.vector() - t.state.vector()))
        } else {
            let mut err = *state.vector();
            err.fixed_rows_mut::<3>(0)
                .copy_from(&(state.position() - t.state.position()));
            let hold = RelativeState::new(t.state.position().into(), [0.0; 3]);
            -(self.gains.k * err) - drift_accel(&hold, self.params) * self.params.mass
        };
        let m = self.params.u_max;
        let saturated = [raw[0].abs() > m, raw[1].abs() > m, raw[2].abs() > m];
        let u = ControlCommand::from_vector(raw).saturate(m);
        if t.handed_over {
            t.phase += lib.mean_motion * self.dt;
            t.state = lib.members[t.index].state_at(t.phase, lib.mean_motion);
        }
        (u, saturated)
    }
}

pub fn backup_control_lqr(state: &RelativeState, tracker: &mut BackupTracker, law: &BackupLaw<'_>) -> ControlCommand {
    law.control(state, tracker)
}

/// Backup law for explicit switching.
///
/// A constraint counts as engaged when it is already non-positive or when one
/// coasting step would take it negative. Each engaged velocity cap brakes its
/// axis at full thrust; the speed limit is handled last and overwrites every
/// axis with `u_max (ν1 r̂ − v̂)` scaled onto the thrust box.
pub fn backup_control_explicit(
    state: &RelativeState,
    sp: &SafetyParameters,
    params: &CwParameters,
    dt: f64,
) -> ControlCommand {
    let now = constraint_values(state, sp);
    let coast = step_euler(state, &ControlCommand::zero(), params, dt);
    let next = constraint_values(&coast, sp);
    let engaged = |c: Constraint| now.get(c) <= 0.0 || next.get(c) < 0.0;

    let mut u = Vector3::zeros();
    let v = state.velocity();
    let v_next = coast.velocity();
    for (axis, c) in [Constraint::MaxVx, Constraint::MaxVy, Constraint::MaxVz]
        .into_iter()
        .enumerate()
    {
        if engaged(c) {
            let dir = if v[axis] != 0.0 { v[axis] } else { v_next[axis] };
            u[axis] = -params.u_max * dir.signum();
        }
    }
    if engaged(Constraint::SpeedLimit) {
        let floor = sp.grad_epsilon.max(f64::MIN_POSITIVE);
        let r_hat = state.position() / state.r_norm().max(floor);
        let v_hat = v / state.v_norm().max(floor);
        let w = sp.nu1 * r_hat - v_hat;
        let peak = w.amax();
        if peak > 0.0 {
            u = w * (params.u_max / peak);
        }
    }
    ControlCommand::from_vector(u).saturate(params.u_max)
}
