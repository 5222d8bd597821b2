//! Closed elliptical natural motion trajectories (NMTs) used as the backup set.
//!
//! An NMT is a zero-thrust CW solution that stays bounded and periodic. Each
//! one is described by its semi-minor axis `b`, the two angles locating its
//! angular momentum vector and an initial phase `ψ`; the out-of-plane
//! amplitude `c` and in-plane phase `ν` follow from those.

use std::f64::consts::TAU;

use nalgebra::Vector3;
use serde::{Deserialize, Serialize};

use crate::dynamics::{CwParameters, RelativeState};
use crate::error::{Result, RtaError};
use crate::safety::SafetyParameters;

const SIN_FLOOR: f64 = 1e-12;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct NmtDescriptor {
    /// Semi-minor axis (m).
    pub b: f64,
    /// Angle from the x-y plane to the angular momentum vector (rad).
    pub theta1: f64,
    /// Angle from the y-z plane to the angular momentum vector (rad).
    pub theta2: f64,
    /// Initial out-of-plane phase (rad).
    pub psi: f64,
    /// Out-of-plane amplitude (m), derived.
    pub c: f64,
    /// Initial in-plane phase (rad), derived.
    pub nu: f64,
}

impl NmtDescriptor {
    pub fn new(b: f64, theta1: f64, theta2: f64, psi: f64) -> Result<Self> {
        let s1 = theta1.sin();
        if s1.abs() < SIN_FLOOR {
            return Err(RtaError::DegenerateGeometry);
        }
        let t2 = theta2.tan();
        let c1 = theta1.cos();
        let c = b / s1 * (t2 * t2 + 4.0 * c1 * c1).sqrt();
        // Two-argument form picks the quadrant the one-argument form loses.
        let nu = (2.0 * c1).atan2(t2) - psi;
        Ok(NmtDescriptor {
            b,
            theta1,
            theta2,
            psi,
            c,
            nu,
        })
    }

    /// Point on this NMT at out-of-plane phase `phase`.
    ///
    /// Both phases advance at `n` along the trajectory, so `ν − ψ` is held at
    /// its initial value; `phase == psi` gives the descriptor's own initial
    /// state and `phase = psi + n t` is the state after coasting for `t`.
    pub fn state_at(&self, phase: f64, mean_motion: f64) -> RelativeState {
        let n = mean_motion;
        let nu = self.nu + (phase - self.psi);
        let (sn, cn) = nu.sin_cos();
        let (sp, cp) = phase.sin_cos();
        RelativeState::new(
            [self.b * sn, 2.0 * self.b * cn, self.c * sp],
            [self.b * n * cn, -2.0 * self.b * n * sn, n * self.c * cp],
        )
    }

    fn position_at(&self, phase: f64) -> Vector3<f64> {
        let nu = self.nu + (phase - self.psi);
        let (sn, cn) = nu.sin_cos();
        Vector3::new(self.b * sn, 2.0 * self.b * cn, self.c * phase.sin())
    }
}

pub fn nmt_state(desc: &NmtDescriptor, phase: f64, params: &CwParameters) -> RelativeState {
    desc.state_at(phase, params.mean_motion)
}

/// Backup-set membership test for one NMT.
///
/// Checks the momentum-angle inequality together with the semi-axis caps
/// `b ≤ v_max/(2n)` and `c ≤ v_max/n`. The angle inequality is derived with
/// `ν0 = 0`, which only makes it conservative.
pub fn admissible(desc: &NmtDescriptor, sp: &SafetyParameters, params: &CwParameters) -> Result<bool> {
    let s1 = desc.theta1.sin();
    if s1.abs() < SIN_FLOOR {
        return Err(RtaError::DegenerateGeometry);
    }
    let n = params.mean_motion;
    let t2 = desc.theta2.tan();
    let c1 = desc.theta1.cos();
    let lhs = (t2 * t2 + 4.0 * c1 * c1) / (s1 * s1);
    let rhs = (sp.nu1 / n).powi(2) - 4.0;
    Ok(desc.b > 0.0 && lhs <= rhs && desc.b <= sp.v_max / (2.0 * n) && desc.c <= sp.v_max / n)
}

/// Cartesian grid the library is sampled from.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct NmtGrid {
    pub b_values: Vec<f64>,
    pub theta1_values: Vec<f64>,
    pub theta2_values: Vec<f64>,
    pub psi_values: Vec<f64>,
    /// Phase samples per NMT used by the closest-point search.
    pub phase_samples: usize,
}

impl Default for NmtGrid {
    fn default() -> Self {
        NmtGrid {
            b_values: vec![200.0, 500.0, 1000.0, 2000.0, 4000.0],
            theta1_values: vec![std::f64::consts::FRAC_PI_2],
            theta2_values: vec![0.0],
            psi_values: vec![0.0],
            phase_samples: 64,
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct NmtLibrary {
    pub members: Vec<NmtDescriptor>,
    pub phase_samples: usize,
    pub mean_motion: f64,
    pub grid: NmtGrid,
    #[serde(skip)]
    samples: Vec<Vec<Vector3<f64>>>,
}

/// Result of the closest-point search.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct NmtTarget {
    pub index: usize,
    pub phase: f64,
    pub state: RelativeState,
    pub distance: f64,
}

impl NmtLibrary {
    pub fn build(grid: &NmtGrid, sp: &SafetyParameters, params: &CwParameters) -> Result<Self> {
        if grid.b_values.is_empty()
            || grid.theta1_values.is_empty()
            || grid.theta2_values.is_empty()
            || grid.psi_values.is_empty()
            || grid.phase_samples == 0
        {
            return Err(RtaError::InvalidConfig("NMT grid ranges must be non-empty".into()));
        }
        let mut members = Vec::new();
        for &b in &grid.b_values {
            for &t1 in &grid.theta1_values {
                for &t2 in &grid.theta2_values {
                    for &psi in &grid.psi_values {
                        let d = NmtDescriptor::new(b, t1, t2, psi)?;
                        if admissible(&d, sp, params)? {
                            members.push(d);
                        }
                    }
                }
            }
        }
        if members.is_empty() {
            return Err(RtaError::EmptyLibrary);
        }
        Ok(Self::from_members(members, grid.clone(), params.mean_motion))
    }

    fn from_members(members: Vec<NmtDescriptor>, grid: NmtGrid, mean_motion: f64) -> Self {
        let mut lib = NmtLibrary {
            members,
            phase_samples: grid.phase_samples,
            mean_motion,
            grid,
            samples: Vec::new(),
        };
        lib.rebuild_cache();
        lib
    }

    /// Rebuilds the phase-sample cache; needed after deserialising.
    pub fn rebuild_cache(&mut self) {
        let k = self.phase_samples;
        self.samples = self
            .members
            .iter()
            .map(|d| (0..k).map(|j| d.position_at(self.phase_of(d, j))).collect())
            .collect();
    }

    fn phase_of(&self, d: &NmtDescriptor, j: usize) -> f64 {
        d.psi + TAU * j as f64 / self.phase_samples as f64
    }

    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    /// Closest library point to `state` by position.
    ///
    /// Scans every member at the sampled phases, then refines the winning
    /// interval with a golden-section search. Ties keep the lower member
    /// index, then the lower phase.
    pub fn closest_target(&self, state: &RelativeState) -> NmtTarget {
        assert!(!self.is_empty(), "closest_target on empty library");
        let r = state.position();
        let mut best = (0usize, 0usize, f64::INFINITY);
        for (i, pts) in self.samples.iter().enumerate() {
            for (j, p) in pts.iter().enumerate() {
                let d2 = (p - r).norm_squared();
                if d2 < best.2 {
                    best = (i, j, d2);
                }
            }
        }
        let (i, j, d2) = best;
        let desc = &self.members[i];
        let center = self.phase_of(desc, j);
        let half = TAU / self.phase_samples as f64;
        let dist2 = |ph: f64| (desc.position_at(ph) - r).norm_squared();
        let (ph, refined) = golden_section(dist2, center - half, center + half, 40);
        let (phase, d2) = if refined < d2 { (ph, refined) } else { (center, d2) };
        NmtTarget {
            index: i,
            phase,
            state: desc.state_at(phase, self.mean_motion),
            distance: d2.sqrt(),
        }
    }
}

pub fn build_library(grid: &NmtGrid, sp: &SafetyParameters, params: &CwParameters) -> Result<NmtLibrary> {
    NmtLibrary::build(grid, sp, params)
}

fn golden_section(f: impl Fn(f64) -> f64, mut lo: f64, mut hi: f64, iters: usize) -> (f64, f64) {
    let inv_phi = (5f64.sqrt() - 1.0) / 2.0;
    let mut a = hi - inv_phi * (hi - lo);
    let mut b = lo + inv_phi * (hi - lo);
    let mut fa = f(a);
    let mut fb = f(b);
    for _ in 0..iters {
        if fa <= fb {
            hi = b;
            b = a;
            fb = fa;
            a = hi - inv_phi * (hi - lo);
            fa = f(a);
        } else {
            lo = a;
            a = b;
            fa = fb;
            b = lo + inv_phi * (hi - lo);
            fb = f(b);
        }
    }
    if fa <= fb {
        (a, fa)
    } else {
        (b, fb)
    }
}
