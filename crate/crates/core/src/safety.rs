//! Safety constraints for the docking problem.
//!
//! Four constraints define the allowable set:
//!
//! * `φ1 = ν0 + ν1‖r‖ − ‖v‖`: distance dependent speed limit (m/s)
//! * `φ2..φ4 = v_max² − v_axis²`: per-axis velocity cap (m²/s²)
//!
//! With the default parameters both families are control invariant under the
//! thrust bound, so the barrier functions used by the filters are the
//! constraints themselves.

use nalgebra::Vector6;
use serde::{Deserialize, Serialize};

use crate::dynamics::{CwParameters, RelativeState};
use crate::error::{Result, RtaError};

pub const NUM_CONSTRAINTS: usize = 4;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Constraint {
    SpeedLimit,
    MaxVx,
    MaxVy,
    MaxVz,
}

impl Constraint {
    pub const ALL: [Constraint; NUM_CONSTRAINTS] = [
        Constraint::SpeedLimit,
        Constraint::MaxVx,
        Constraint::MaxVy,
        Constraint::MaxVz,
    ];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn name(self) -> &'static str {
        match self {
            Constraint::SpeedLimit => "phi1",
            Constraint::MaxVx => "phi2",
            Constraint::MaxVy => "phi3",
            Constraint::MaxVz => "phi4",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SafetyParameters {
    /// Maximum docking speed `ν0` (m/s).
    pub nu0: f64,
    /// Speed limit slope `ν1` (1/s).
    pub nu1: f64,
    /// Per-axis velocity cap (m/s).
    pub v_max: f64,
    /// Linear class-κ slopes `λ_i` (1/s), one per constraint.
    pub alpha_gains: [f64; NUM_CONSTRAINTS],
    /// Norm floor used when differentiating `‖r‖` and `‖v‖`.
    pub grad_epsilon: f64,
    /// Tightening `δ_i` of the barrier rows: the optimization filters keep
    /// `φ_i ≥ δ_i` rather than `φ_i ≥ 0`.
    pub barrier_margin: [f64; NUM_CONSTRAINTS],
}

impl Default for SafetyParameters {
    fn default() -> Self {
        SafetyParameters {
            nu0: 0.2,
            nu1: 4.0 * 0.001027,
            v_max: 10.0,
            alpha_gains: [0.05; NUM_CONSTRAINTS],
            grad_epsilon: 1e-6,
            barrier_margin: [0.05; NUM_CONSTRAINTS],
        }
    }
}

impl SafetyParameters {
    pub fn validate(&self) -> Result<()> {
        let pos = |v: f64| v.is_finite() && v > 0.0;
        if !pos(self.nu0) || !pos(self.nu1) || !pos(self.v_max) {
            return Err(RtaError::InvalidConfig("nu0, nu1 and v_max must be positive".into()));
        }
        if !self.alpha_gains.iter().all(|g| pos(*g)) {
            return Err(RtaError::InvalidConfig("alpha gains must be positive".into()));
        }
        if !(self.grad_epsilon.is_finite() && self.grad_epsilon >= 0.0) {
            return Err(RtaError::InvalidConfig("grad_epsilon must be >= 0".into()));
        }
        if !self.barrier_margin.iter().all(|d| d.is_finite() && *d >= 0.0) {
            return Err(RtaError::InvalidConfig("barrier margins must be >= 0".into()));
        }
        Ok(())
    }

    /// Linear class-κ function `α_i(h) = λ_i h`.
    pub fn alpha(&self, c: Constraint, h: f64) -> f64 {
        self.alpha_gains[c.index()] * h
    }

    /// `α_i(h − δ_i)`, the relaxation term of a barrier row.
    pub fn barrier_alpha(&self, c: Constraint, h: f64) -> f64 {
        self.alpha(c, h - self.barrier_margin[c.index()])
    }

    /// Speed limit `ν0 + ν1 r` at range `r`.
    pub fn speed_limit(&self, r: f64) -> f64 {
        self.nu0 + self.nu1 * r
    }
}

/// Values of `φ1..φ4` at one state.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConstraintVector(pub [f64; NUM_CONSTRAINTS]);

impl ConstraintVector {
    pub fn get(&self, c: Constraint) -> f64 {
        self.0[c.index()]
    }

    pub fn all_nonnegative(&self) -> bool {
        self.0.iter().all(|v| *v >= 0.0)
    }

    pub fn min(&self) -> f64 {
        self.0.iter().copied().fold(f64::INFINITY, f64::min)
    }
}

pub fn phi1(state: &RelativeState, sp: &SafetyParameters) -> f64 {
    sp.nu0 + sp.nu1 * state.r_norm() - state.v_norm()
}

pub fn phi234(state: &RelativeState, sp: &SafetyParameters) -> (f64, f64, f64) {
    let vm2 = sp.v_max * sp.v_max;
    (
        vm2 - state.vx() * state.vx(),
        vm2 - state.vy() * state.vy(),
        vm2 - state.vz() * state.vz(),
    )
}

pub fn constraint_values(state: &RelativeState, sp: &SafetyParameters) -> ConstraintVector {
    let (p2, p3, p4) = phi234(state, sp);
    ConstraintVector([phi1(state, sp), p2, p3, p4])
}

pub fn in_allowable(state: &RelativeState, sp: &SafetyParameters) -> (bool, ConstraintVector) {
    let phi = constraint_values(state, sp);
    (phi.all_nonnegative(), phi)
}

/// Analytic gradient of one constraint with respect to the state.
///
/// The speed limit uses `max(‖·‖, ε)` in the denominators; with `ε = 0` a zero
/// norm is reported as [`RtaError::SingularGradient`].
pub fn grad_phi(state: &RelativeState, sp: &SafetyParameters, c: Constraint) -> Result<Vector6<f64>> {
    if c == Constraint::SpeedLimit && sp.grad_epsilon == 0.0 && (state.r_norm() == 0.0 || state.v_norm() == 0.0) {
        return Err(RtaError::SingularGradient {
            index: c.index() + 1,
            epsilon: sp.grad_epsilon,
        });
    }
    Ok(grad_phi_regularized(state, sp, c))
}

/// Gradient without the singularity check; norms are floored at
/// `max(ε, f64::MIN_POSITIVE)` so the result is always finite.
pub fn grad_phi_regularized(state: &RelativeState, sp: &SafetyParameters, c: Constraint) -> Vector6<f64> {
    let s = state.vector();
    let mut g = Vector6::zeros();
    match c {
        Constraint::SpeedLimit => {
            let floor = sp.grad_epsilon.max(f64::MIN_POSITIVE);
            let r = state.r_norm().max(floor);
            let v = state.v_norm().max(floor);
            for k in 0..3 {
                g[k] = sp.nu1 * s[k] / r;
                g[k + 3] = -s[k + 3] / v;
            }
        }
        Constraint::MaxVx => g[3] = -2.0 * s[3],
        Constraint::MaxVy => g[4] = -2.0 * s[4],
        Constraint::MaxVz => g[5] = -2.0 * s[5],
    }
    g
}

pub fn all_gradients(state: &RelativeState, sp: &SafetyParameters) -> [Vector6<f64>; NUM_CONSTRAINTS] {
    Constraint::ALL.map(|c| grad_phi_regularized(state, sp, c))
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Lemma1Report {
    /// `(3n² + 2nν1 + ν1²) R_max + (2n + ν1) ν0`
    pub rhs: f64,
    pub u_max: f64,
    /// `u_max ≥ rhs`, with `u_max` taken in newtons as printed.
    pub satisfied: bool,
    /// `u_max / m`, the acceleration the thrusters actually deliver.
    pub accel_bound: f64,
    /// Whether the bound also holds when `u_max` is read as `u_max / m`.
    pub satisfied_as_accel: bool,
}

pub fn check_lemma1(params: &CwParameters, sp: &SafetyParameters) -> Lemma1Report {
    let n = params.mean_motion;
    let rhs = (3.0 * n * n + 2.0 * n * sp.nu1 + sp.nu1 * sp.nu1) * params.r_max + (2.0 * n + sp.nu1) * sp.nu0;
    let accel = params.max_accel();
    Lemma1Report {
        rhs,
        u_max: params.u_max,
        satisfied: params.u_max >= rhs,
        accel_bound: accel,
        satisfied_as_accel: accel >= rhs,
    }
}

/// The three strict drift-vs-thrust inequalities at one state.
pub fn check_lemma2(state: &RelativeState, params: &CwParameters) -> [bool; 3] {
    let bound = params.max_accel().powi(2);
    lemma2_terms(state, params).map(|t| t * t < bound)
}

fn lemma2_terms(state: &RelativeState, params: &CwParameters) -> [f64; 3] {
    let n = params.mean_motion;
    [
        3.0 * n * n * state.x() + 2.0 * n * state.vy(),
        -2.0 * n * state.vx(),
        -n * n * state.z(),
    ]
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Lemma2Report {
    /// Largest magnitude of each drift term over the state box.
    pub worst: [f64; 3],
    pub accel_bound: f64,
    pub satisfied: [bool; 3],
}

/// Lemma 2 over the box `|x|,|z| ≤ R_max`, `|v_axis| ≤ v_max`.
///
/// Each term is linear in the state, so its extreme magnitude sits at a
/// corner of the box.
pub fn check_lemma2_box(params: &CwParameters, sp: &SafetyParameters) -> Lemma2Report {
    let mut worst = [0.0f64; 3];
    for sx in [-1.0, 1.0] {
        for sz in [-1.0, 1.0] {
            for svx in [-1.0, 1.0] {
                for svy in [-1.0, 1.0] {
                    let s = RelativeState::new(
                        [sx * params.r_max, 0.0, sz * params.r_max],
                        [svx * sp.v_max, svy * sp.v_max, 0.0],
                    );
                    for (w, t) in worst.iter_mut().zip(lemma2_terms(&s, params)) {
                        *w = w.max(t.abs());
                    }
                }
            }
        }
    }
    let accel = params.max_accel();
    Lemma2Report {
        worst,
        accel_bound: accel,
        satisfied: worst.map(|w| w < accel),
    }
}
