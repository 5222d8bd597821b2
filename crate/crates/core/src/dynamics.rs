//! Clohessy-Wiltshire relative motion in Hill's frame.
//!
//! Hill's frame is centred on the chief: `x` points radially away from the
//! Earth, `y` along the direction of motion and `z` completes the triad.
//! All quantities are SI (m, m/s, N, kg, s).

use nalgebra::{Matrix6, Matrix6x3, Vector3, Vector6};
use serde::{Deserialize, Serialize};

use crate::error::{Result, RtaError};

/// Deputy state `[x, y, z, vx, vy, vz]` relative to the chief.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(from = "StateRepr", into = "StateRepr")]
pub struct RelativeState(Vector6<f64>);

#[derive(Serialize, Deserialize)]
struct StateRepr {
    position: [f64; 3],
    velocity: [f64; 3],
}

impl From<StateRepr> for RelativeState {
    fn from(r: StateRepr) -> Self {
        RelativeState::new(r.position, r.velocity)
    }
}

impl From<RelativeState> for StateRepr {
    fn from(s: RelativeState) -> Self {
        let v = s.0;
        StateRepr {
            position: [v[0], v[1], v[2]],
            velocity: [v[3], v[4], v[5]],
        }
    }
}

impl RelativeState {
    pub fn new(position: [f64; 3], velocity: [f64; 3]) -> Self {
        RelativeState(Vector6::new(
            position[0],
            position[1],
            position[2],
            velocity[0],
            velocity[1],
            velocity[2],
        ))
    }

    pub fn zero() -> Self {
        RelativeState(Vector6::zeros())
    }

    pub fn from_vector(v: Vector6<f64>) -> Self {
        RelativeState(v)
    }

    pub fn vector(&self) -> &Vector6<f64> {
        &self.0
    }

    pub fn position(&self) -> Vector3<f64> {
        self.0.fixed_rows::<3>(0).into_owned()
    }

    pub fn velocity(&self) -> Vector3<f64> {
        self.0.fixed_rows::<3>(3).into_owned()
    }

    pub fn x(&self) -> f64 {
        self.0[0]
    }
    pub fn y(&self) -> f64 {
        self.0[1]
    }
    pub fn z(&self) -> f64 {
        self.0[2]
    }
    pub fn vx(&self) -> f64 {
        self.0[3]
    }
    pub fn vy(&self) -> f64 {
        self.0[4]
    }
    pub fn vz(&self) -> f64 {
        self.0[5]
    }

    /// `‖r_H‖`
    pub fn r_norm(&self) -> f64 {
        (self.0[0] * self.0[0] + self.0[1] * self.0[1] + self.0[2] * self.0[2]).sqrt()
    }

    /// `‖v_H‖`
    pub fn v_norm(&self) -> f64 {
        (self.0[3] * self.0[3] + self.0[4] * self.0[4] + self.0[5] * self.0[5]).sqrt()
    }

    pub fn is_finite(&self) -> bool {
        self.0.iter().all(|c| c.is_finite())
    }

    pub fn max_abs(&self) -> f64 {
        self.0.amax()
    }
}

/// Thrust `[Fx, Fy, Fz]` in newtons.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(from = "[f64; 3]", into = "[f64; 3]")]
pub struct ControlCommand(Vector3<f64>);

impl From<[f64; 3]> for ControlCommand {
    fn from(a: [f64; 3]) -> Self {
        ControlCommand(Vector3::new(a[0], a[1], a[2]))
    }
}

impl From<ControlCommand> for [f64; 3] {
    fn from(c: ControlCommand) -> Self {
        [c.0[0], c.0[1], c.0[2]]
    }
}

impl ControlCommand {
    pub fn new(fx: f64, fy: f64, fz: f64) -> Self {
        ControlCommand(Vector3::new(fx, fy, fz))
    }

    pub fn zero() -> Self {
        ControlCommand(Vector3::zeros())
    }

    pub fn from_vector(v: Vector3<f64>) -> Self {
        ControlCommand(v)
    }

    pub fn vector(&self) -> &Vector3<f64> {
        &self.0
    }

    pub fn to_array(self) -> [f64; 3] {
        self.into()
    }

    /// Per-axis clamp to `[-u_max, u_max]`.
    pub fn saturate(self, u_max: f64) -> Self {
        ControlCommand(self.0.map(|c| c.clamp(-u_max, u_max)))
    }

    pub fn within(&self, u_max: f64) -> bool {
        self.0.iter().all(|c| c.abs() <= u_max)
    }

    /// Bitwise equality, so `-0.0 != 0.0` and NaN payloads are compared exactly.
    pub fn bitwise_eq(&self, other: &ControlCommand) -> bool {
        self.0
            .iter()
            .zip(other.0.iter())
            .all(|(a, b)| a.to_bits() == b.to_bits())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CwParameters {
    /// Mean motion `n` (rad/s).
    pub mean_motion: f64,
    /// Deputy mass (kg).
    pub mass: f64,
    /// Per-axis thrust bound (N).
    pub u_max: f64,
    /// Radius beyond which the linearisation is not trusted (m).
    pub r_max: f64,
}

impl Default for CwParameters {
    fn default() -> Self {
        CwParameters {
            mean_motion: 0.001027,
            mass: 12.0,
            u_max: 1.0,
            r_max: 10_000.0,
        }
    }
}

impl CwParameters {
    pub fn validate(&self) -> Result<()> {
        let ok = |v: f64| v.is_finite() && v > 0.0;
        if !ok(self.mean_motion) || !ok(self.mass) || !ok(self.u_max) || !ok(self.r_max) {
            return Err(RtaError::InvalidConfig(format!(
                "CW parameters must be finite and positive: {self:?}"
            )));
        }
        Ok(())
    }

    /// Largest per-axis acceleration the thrusters can produce (m/s²).
    pub fn max_accel(&self) -> f64 {
        self.u_max / self.mass
    }
}

/// System matrices `(A, B)` of `ẋ = A x + B u`.
pub fn cw_matrices(params: &CwParameters) -> (Matrix6<f64>, Matrix6x3<f64>) {
    let n = params.mean_motion;
    let mut a = Matrix6::zeros();
    a[(0, 3)] = 1.0;
    a[(1, 4)] = 1.0;
    a[(2, 5)] = 1.0;
    a[(3, 0)] = 3.0 * n * n;
    a[(3, 4)] = 2.0 * n;
    a[(4, 3)] = -2.0 * n;
    a[(5, 2)] = -n * n;

    let mut b = Matrix6x3::zeros();
    let inv_m = 1.0 / params.mass;
    b[(3, 0)] = inv_m;
    b[(4, 1)] = inv_m;
    b[(5, 2)] = inv_m;
    (a, b)
}

/// Drift acceleration `A x` restricted to the velocity rows.
pub fn drift_accel(state: &RelativeState, params: &CwParameters) -> Vector3<f64> {
    let n = params.mean_motion;
    let s = state.vector();
    Vector3::new(3.0 * n * n * s[0] + 2.0 * n * s[4], -2.0 * n * s[3], -n * n * s[2])
}

pub fn derivative(state: &RelativeState, u: &ControlCommand, params: &CwParameters) -> Vector6<f64> {
    let s = state.vector();
    let acc = drift_accel(state, params) + u.vector() / params.mass;
    Vector6::new(s[3], s[4], s[5], acc[0], acc[1], acc[2])
}

pub fn step_euler(state: &RelativeState, u: &ControlCommand, params: &CwParameters, dt: f64) -> RelativeState {
    RelativeState(state.vector() + dt * derivative(state, u, params))
}

/// Classical RK4 step with `u` held over the interval. Used for validation only.
pub fn step_rk4(state: &RelativeState, u: &ControlCommand, params: &CwParameters, dt: f64) -> RelativeState {
    let f = |v: &Vector6<f64>| derivative(&RelativeState(*v), u, params);
    let x = state.vector();
    let k1 = f(x);
    let k2 = f(&(x + 0.5 * dt * k1));
    let k3 = f(&(x + 0.5 * dt * k2));
    let k4 = f(&(x + dt * k3));
    RelativeState(x + dt / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn params() -> CwParameters {
        CwParameters::default()
    }

    #[test]
    fn matrices_match_assumed_values() {
        let (a, b) = cw_matrices(&params());
        assert_relative_eq!(a[(3, 0)], 3.164187e-6, max_relative = 1e-6);
        assert_eq!(b[(3, 0)], 1.0 / 12.0);
        for i in 0..3 {
            for j in 0..3 {
                assert_eq!(a[(i, j + 3)], if i == j { 1.0 } else { 0.0 });
            }
        }
    }

    #[test]
    fn zero_mean_motion_leaves_only_kinematics() {
        let p = CwParameters {
            mean_motion: 0.0,
            ..params()
        };
        let (a, _) = cw_matrices(&p);
        let nonzero: Vec<_> = a.iter().filter(|v| **v != 0.0).collect();
        assert_eq!(nonzero.len(), 3);
    }

    #[test]
    fn derivative_examples() {
        let p = params();
        let z = derivative(&RelativeState::zero(), &ControlCommand::zero(), &p);
        assert_eq!(z, Vector6::zeros());

        let d = derivative(
            &RelativeState::new([1.0, 0.0, 0.0], [0.0; 3]),
            &ControlCommand::zero(),
            &p,
        );
        assert_relative_eq!(d[3], 3.0 * 0.001027f64.powi(2));
        assert_eq!(d[4], 0.0);

        let d = derivative(&RelativeState::zero(), &ControlCommand::new(1.0, 0.0, 0.0), &p);
        assert_eq!(d, Vector6::new(0.0, 0.0, 0.0, 1.0 / 12.0, 0.0, 0.0));
    }

    #[test]
    fn derivative_matches_matrix_form() {
        let p = params();
        let (a, b) = cw_matrices(&p);
        let s = RelativeState::new([120.0, -33.0, 7.5], [0.4, -1.2, 0.03]);
        let u = ControlCommand::new(0.3, -0.9, 0.1);
        let expect = a * s.vector() + b * u.vector();
        assert_relative_eq!(derivative(&s, &u, &p), expect, epsilon = 1e-15);
    }

    #[test]
    fn euler_single_step() {
        let p = params();
        let s = step_euler(
            &RelativeState::new([0.0; 3], [1.0, 0.0, 0.0]),
            &ControlCommand::zero(),
            &p,
            1.0,
        );
        assert_eq!(s.x(), 1.0);
        assert_eq!(s.vx(), 1.0);
        assert_relative_eq!(s.vy(), -2.0 * 0.001027);
        assert_eq!(
            step_euler(&RelativeState::zero(), &ControlCommand::zero(), &p, 1.0),
            RelativeState::zero()
        );
        assert_eq!(
            step_rk4(&RelativeState::zero(), &ControlCommand::zero(), &p, 1.0),
            RelativeState::zero()
        );
    }

    // Local truncation: one step of size h vs two of h/2 differ by O(h²).
    #[test]
    fn euler_half_steps_differ_at_second_order() {
        let p = CwParameters {
            mean_motion: 0.05,
            ..params()
        };
        let s = RelativeState::new([300.0, -200.0, 50.0], [1.0, 2.0, -0.5]);
        let u = ControlCommand::new(0.5, -0.2, 0.7);
        let gap = |h: f64| {
            let full = step_euler(&s, &u, &p, h);
            let half = step_euler(&step_euler(&s, &u, &p, h / 2.0), &u, &p, h / 2.0);
            (full.vector() - half.vector()).norm()
        };
        let ratio = gap(1.0) / gap(0.5);
        assert!((ratio - 4.0).abs() < 0.05, "ratio {ratio}");
    }

    // Series-evaluated exp(A dt) as an independent propagator.
    #[test]
    fn rk4_matches_matrix_exponential() {
        let p = params();
        let (a, _) = cw_matrices(&p);
        let mut term = Matrix6::<f64>::identity();
        let mut expm = Matrix6::<f64>::identity();
        for k in 1..30 {
            term = term * a / k as f64;
            expm += term;
        }
        let s = RelativeState::new([-4000.0, 2500.0, 300.0], [0.8, -1.1, 0.2]);
        let exact = expm * s.vector();
        let rk = step_rk4(&s, &ControlCommand::zero(), &p, 1.0);
        for i in 0..6 {
            let scale = exact[i].abs().max(1e-3);
            assert!((rk.vector()[i] - exact[i]).abs() / scale < 1e-8, "component {i}");
        }
    }

    #[test]
    fn planar_motion_stays_planar() {
        let p = params();
        let mut e = RelativeState::new([500.0, -900.0, 0.0], [0.3, 0.1, 0.0]);
        let mut r = e;
        for _ in 0..500 {
            e = step_euler(&e, &ControlCommand::zero(), &p, 1.0);
            r = step_rk4(&r, &ControlCommand::zero(), &p, 1.0);
        }
        assert_eq!((e.z(), e.vz(), r.z(), r.vz()), (0.0, 0.0, 0.0, 0.0));
    }

    #[test]
    fn serde_shape() {
        let s = RelativeState::new([1.0, 2.0, 3.0], [4.0, 5.0, 6.0]);
        let j = serde_json::to_string(&s).unwrap();
        assert_eq!(j, r#"{"position":[1.0,2.0,3.0],"velocity":[4.0,5.0,6.0]}"#);
        let back: RelativeState = serde_json::from_str(&j).unwrap();
        assert_eq!(back, s);
    }
}

#[cfg(test)]
mod props {
    use super::*;
    use proptest::prelude::*;

    proptest! {
        #[test]
        fn derivative_is_linear(
            x1 in prop::array::uniform6(-1e4f64..1e4),
            x2 in prop::array::uniform6(-1e4f64..1e4),
            u1 in prop::array::uniform3(-1f64..1.0),
            u2 in prop::array::uniform3(-1f64..1.0),
            alpha in -3f64..3.0,
            beta in -3f64..3.0,
        ) {
            let p = CwParameters::default();
            let s1 = RelativeState::from_vector(Vector6::from_row_slice(&x1));
            let s2 = RelativeState::from_vector(Vector6::from_row_slice(&x2));
            let c1 = ControlCommand::from(u1);
            let c2 = ControlCommand::from(u2);
            let lhs = derivative(
                &RelativeState::from_vector(alpha * s1.vector() + beta * s2.vector()),
                &ControlCommand::from_vector(alpha * c1.vector() + beta * c2.vector()),
                &p,
            );
            let rhs = alpha * derivative(&s1, &c1, &p) + beta * derivative(&s2, &c2, &p);
            let scale = 1.0 + lhs.amax();
            prop_assert!((lhs - rhs).amax() <= 1e-12 * scale);
        }
    }
}
