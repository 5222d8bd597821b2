use serde::{Deserialize, Serialize};

use crate::controllers::primary_control;
use crate::dynamics::{step_euler, RelativeState};
use crate::error::{Result, RtaError};
use crate::filters::{FilterDecision, FilterKind, Mechanism, RtaFilter};
use crate::safety::{constraint_values, Constraint, SafetyParameters};

use super::config::{ScenarioConfig, Setup};

/// Any state component beyond this magnitude aborts the run.
pub const BLOWUP_LIMIT: f64 = 1e9;
/// Switching filters may graze the boundary by this much (m/s for φ1, m²/s² otherwise).
pub const SWITCHING_TOLERANCE: f64 = 1e-3;
/// Docking radius (m).
pub const DOCK_RADIUS: f64 = 1.0;

/// One control step: the state the decision was taken at and what the
/// filter did with the desired command.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StepRecord {
    pub step: u64,
    pub time: f64,
    pub x: f64,
    pub y: f64,
    pub z: f64,
    pub vx: f64,
    pub vy: f64,
    pub vz: f64,
    pub u_des_x: f64,
    pub u_des_y: f64,
    pub u_des_z: f64,
    pub u_act_x: f64,
    pub u_act_y: f64,
    pub u_act_z: f64,
    pub intervened: bool,
    pub mechanism: Mechanism,
    pub latency_s: f64,
    pub barrier_multiplier: f64,
    pub phi1: f64,
    pub phi2: f64,
    pub phi3: f64,
    pub phi4: f64,
    pub r_norm: f64,
    pub v_norm: f64,
}

impl StepRecord {
    pub fn new(
        step: u64,
        time: f64,
        state: &RelativeState,
        u_des: [f64; 3],
        d: &FilterDecision,
        sp: &SafetyParameters,
    ) -> Self {
        let phi = constraint_values(state, sp).0;
        let [x, y, z, vx, vy, vz]: [f64; 6] = (*state.vector()).into();
        let u = d.u_act.to_array();
        StepRecord {
            step,
            time,
            x,
            y,
            z,
            vx,
            vy,
            vz,
            u_des_x: u_des[0],
            u_des_y: u_des[1],
            u_des_z: u_des[2],
            u_act_x: u[0],
            u_act_y: u[1],
            u_act_z: u[2],
            intervened: d.intervened,
            mechanism: d.mechanism,
            latency_s: d.latency,
            barrier_multiplier: d.barrier_multiplier,
            phi1: phi[0],
            phi2: phi[1],
            phi3: phi[2],
            phi4: phi[3],
            r_norm: state.r_norm(),
            v_norm: state.v_norm(),
        }
    }

    pub fn state(&self) -> RelativeState {
        RelativeState::new([self.x, self.y, self.z], [self.vx, self.vy, self.vz])
    }

    pub fn u_des(&self) -> [f64; 3] {
        [self.u_des_x, self.u_des_y, self.u_des_z]
    }

    pub fn u_act(&self) -> [f64; 3] {
        [self.u_act_x, self.u_act_y, self.u_act_z]
    }

    pub fn phi(&self) -> [f64; 4] {
        [self.phi1, self.phi2, self.phi3, self.phi4]
    }

    /// Copy with wall-clock fields zeroed, for determinism comparisons.
    pub fn without_timing(&self) -> Self {
        StepRecord {
            latency_s: 0.0,
            ..self.clone()
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Termination {
    Duration,
    Docked,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Violation {
    pub step: u64,
    pub constraint: Constraint,
    pub value: f64,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct MechanismCounts {
    pub passthrough: u64,
    pub switched_to_backup: u64,
    pub qp_modified: u64,
    pub qp_infeasible_fallback: u64,
}

impl MechanismCounts {
    fn add(&mut self, m: Mechanism) {
        match m {
            Mechanism::Passthrough => self.passthrough += 1,
            Mechanism::SwitchedToBackup => self.switched_to_backup += 1,
            Mechanism::QpModified => self.qp_modified += 1,
            Mechanism::QpInfeasibleFallback => self.qp_infeasible_fallback += 1,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub filter: FilterKind,
    pub steps: u64,
    pub termination: Termination,
    pub initial_state: RelativeState,
    pub final_state: RelativeState,
    /// Smallest value of each constraint over every visited state, the final one included.
    pub min_phi: [f64; 4],
    /// First state with some `φ_i < 0`.
    pub first_violation: Option<Violation>,
    pub mechanisms: MechanismCounts,
    /// Changes of the `intervened` flag between consecutive steps.
    pub transitions: u64,
    pub mean_latency_s: f64,
}

impl Summary {
    /// Whether the run breaks the safety requirement for its filter kind:
    /// any negative value for the unfiltered baseline, below the grazing
    /// tolerance for switching filters and non-positive for QP filters.
    pub fn violates(&self) -> bool {
        let min = self.min_phi.iter().copied().fold(f64::INFINITY, f64::min);
        match self.filter {
            FilterKind::None => min < 0.0,
            k if k.is_switching() => min < -SWITCHING_TOLERANCE,
            _ => min <= 0.0,
        }
    }

    pub fn docked(&self) -> bool {
        self.termination == Termination::Docked
    }
}

#[derive(Clone, Debug)]
pub struct ScenarioOutput {
    pub records: Vec<StepRecord>,
    pub summary: Summary,
}

pub fn is_docked(state: &RelativeState, sp: &SafetyParameters) -> bool {
    state.r_norm() < DOCK_RADIUS && state.v_norm() < sp.nu0
}

/// Runs `config` with the filter it names.
pub fn run_scenario(config: &ScenarioConfig) -> Result<ScenarioOutput> {
    let setup = config.setup()?;
    let mut filter = setup.filter(config.filter, config.latch);
    let mut records = Vec::with_capacity(config.duration as usize);
    let summary = run_with(config, &setup, filter.as_mut(), |r| records.push(r))?;
    Ok(ScenarioOutput { records, summary })
}

/// Simulation loop feeding each record to `sink`.
pub fn run_with(
    config: &ScenarioConfig,
    setup: &Setup,
    filter: &mut dyn RtaFilter,
    mut sink: impl FnMut(StepRecord),
) -> Result<Summary> {
    let ctx = &*setup.context;
    let sp = &ctx.safety;
    let origin = RelativeState::zero();
    filter.reset();

    let mut state = config.initial_state;
    let mut min_phi = constraint_values(&state, sp).0;
    let mut first_violation = None;
    let mut note = |step: u64, s: &RelativeState, min_phi: &mut [f64; 4]| {
        let phi = constraint_values(s, sp).0;
        for (c, v) in Constraint::ALL.into_iter().zip(phi) {
            min_phi[c.index()] = min_phi[c.index()].min(v);
            if v < 0.0 && first_violation.is_none() {
                first_violation = Some(Violation {
                    step,
                    constraint: c,
                    value: v,
                });
            }
        }
    };
    note(0, &state, &mut min_phi);

    let mut mechanisms = MechanismCounts::default();
    let mut transitions = 0;
    let mut last_flag: Option<bool> = None;
    let mut latency_sum = 0.0;
    let mut termination = Termination::Duration;
    let mut step = 0;
    while step < config.duration {
        if config.stop_on_dock && is_docked(&state, sp) {
            termination = Termination::Docked;
            break;
        }
        let u_des = primary_control(&state, &setup.primary, &origin, &ctx.params);
        let d = filter.filter(&state, &u_des);
        let rec = StepRecord::new(step, step as f64 * ctx.dt, &state, u_des.to_array(), &d, sp);
        mechanisms.add(d.mechanism);
        if last_flag.is_some_and(|f| f != d.intervened) {
            transitions += 1;
        }
        last_flag = Some(d.intervened);
        latency_sum += d.latency;
        state = step_euler(&state, &d.u_act, &ctx.params, ctx.dt);
        step += 1;
        if !state.is_finite() || state.max_abs() > BLOWUP_LIMIT {
            return Err(RtaError::NumericBlowup {
                step: step as usize,
                last: Some(Box::new(rec)),
            });
        }
        note(step, &state, &mut min_phi);
        sink(rec);
    }
    log::debug!(
        "{} finished after {step} steps at r = {:.3} m",
        filter.kind(),
        state.r_norm()
    );
    Ok(Summary {
        filter: filter.kind(),
        steps: step,
        termination,
        initial_state: config.initial_state,
        final_state: state,
        min_phi,
        first_violation,
        mechanisms,
        transitions,
        mean_latency_s: if step > 0 { latency_sum / step as f64 } else { 0.0 },
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sim::config::default_config;

    #[test]
    fn zero_duration_is_empty() {
        let mut c = default_config();
        c.duration = 0;
        let out = run_scenario(&c).unwrap();
        assert!(out.records.is_empty());
        assert_eq!(out.summary.final_state, c.initial_state);
        assert_eq!(out.summary.steps, 0);
    }

    #[test]
    fn records_are_consistent() {
        let mut c = default_config();
        c.duration = 50;
        c.filter = FilterKind::ExplicitOptimization;
        let out = run_scenario(&c).unwrap();
        assert_eq!(out.records.len(), 50);
        for (k, r) in out.records.iter().enumerate() {
            assert_eq!(r.step, k as u64);
            assert_eq!(r.time, k as f64);
        }
        assert_eq!(out.records[0].state(), c.initial_state);
    }

    #[test]
    fn blowup_is_reported() {
        let mut c = default_config();
        c.params.mean_motion = 0.5;
        c.safety.nu1 = 2.0;
        c.primary_weights.q_position = 0.0;
        c.primary_weights.q_velocity = 0.0;
        c.nmt_grid.b_values = vec![5.0];
        c.filter = FilterKind::None;
        c.duration = 2000;
        c.stop_on_dock = false;
        match run_scenario(&c) {
            Err(RtaError::NumericBlowup { last, .. }) => assert!(last.is_some()),
            other => panic!("expected blowup, got {other:?}"),
        }
    }
}
