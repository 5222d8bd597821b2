use std::path::{Path, PathBuf};
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::controllers::{LqrGains, LqrWeights};
use crate::dynamics::{CwParameters, RelativeState};
use crate::error::{Result, RtaError};
use crate::filters::{build_filter, BackupHorizon, FilterContext, FilterKind, LatchConfig, LatchedFilter, RtaFilter};
use crate::nmt::{NmtGrid, NmtLibrary};
use crate::safety::{check_lemma1, check_lemma2_box, in_allowable, Lemma1Report, Lemma2Report, SafetyParameters};

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct OutputPaths {
    pub records_csv: Option<PathBuf>,
    pub records_ndjson: Option<PathBuf>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScenarioConfig {
    pub params: CwParameters,
    pub safety: SafetyParameters,
    pub initial_state: RelativeState,
    pub filter: FilterKind,
    /// Number of control steps.
    pub duration: u64,
    pub dt: f64,
    /// Backup rollout length `T` (s).
    pub horizon: f64,
    pub nmt_grid: NmtGrid,
    pub primary_weights: LqrWeights,
    pub backup_weights: LqrWeights,
    /// Handover radius of the tracking backup (m).
    pub epsilon: f64,
    /// Seeds the initial-state jitter between benchmark repetitions.
    pub seed: u64,
    pub allow_unsafe_start: bool,
    /// End the run once `‖r‖ < 1 m` and `‖v‖ < ν0`.
    pub stop_on_dock: bool,
    pub latch: Option<LatchConfig>,
    pub output: OutputPaths,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        default_config()
    }
}

pub fn default_config() -> ScenarioConfig {
    let d = 9850.0 / 2f64.sqrt();
    ScenarioConfig {
        params: CwParameters::default(),
        safety: SafetyParameters::default(),
        initial_state: RelativeState::new([-d, -d, 0.0], [0.5, 0.5, 0.5]),
        filter: FilterKind::ExplicitSwitching,
        duration: 6000,
        dt: 1.0,
        horizon: 5.0,
        nmt_grid: NmtGrid::default(),
        primary_weights: LqrWeights::primary_default(),
        backup_weights: LqrWeights::backup_default(),
        epsilon: 50.0,
        seed: 0,
        allow_unsafe_start: false,
        stop_on_dock: true,
        latch: None,
        output: OutputPaths::default(),
    }
}

/// Parameter checks reported when a configuration is loaded.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct ParameterReport {
    pub lemma1: Lemma1Report,
    pub lemma2: Lemma2Report,
    pub initial_allowable: bool,
}

impl ParameterReport {
    /// The thrust-bound inequality only holds if `u_max` is read in newtons
    /// against an acceleration, which mixes units.
    pub fn unit_warning(&self) -> Option<String> {
        let l = &self.lemma1;
        (l.satisfied && !l.satisfied_as_accel).then(|| {
            format!(
                "warning: thrust-bound check passes only with u_max = {} N compared directly to an acceleration \
                 bound of {:.5} m/s^2; as an acceleration u_max/m = {:.5} m/s^2 the check fails",
                l.u_max, l.rhs, l.accel_bound
            )
        })
    }
}

/// Everything derived from a configuration that a run needs.
pub struct Setup {
    pub context: Arc<FilterContext>,
    pub primary: LqrGains,
}

impl ScenarioConfig {
    pub fn from_json_str(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| RtaError::InvalidConfig(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| RtaError::io(path, e))?;
        Self::from_json_str(&text).map_err(|e| match e {
            RtaError::InvalidConfig(m) => RtaError::InvalidConfig(format!("{}: {m}", path.display())),
            other => other,
        })
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serialises")
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_json()).map_err(|e| RtaError::io(path, e))
    }

    pub fn parameter_report(&self) -> ParameterReport {
        ParameterReport {
            lemma1: check_lemma1(&self.params, &self.safety),
            lemma2: check_lemma2_box(&self.params, &self.safety),
            initial_allowable: in_allowable(&self.initial_state, &self.safety).0,
        }
    }

    /// Structural checks; returns the parameter report on success.
    pub fn validate(&self) -> Result<ParameterReport> {
        self.params.validate()?;
        self.safety.validate()?;
        if !(self.dt.is_finite() && self.dt > 0.0) {
            return Err(RtaError::InvalidConfig("dt must be positive".into()));
        }
        BackupHorizon::new(self.horizon, self.dt)?;
        if !(self.epsilon.is_finite() && self.epsilon > 0.0) {
            return Err(RtaError::InvalidConfig("epsilon must be positive".into()));
        }
        for (name, w) in [("primary", &self.primary_weights), ("backup", &self.backup_weights)] {
            if !(w.q_position >= 0.0 && w.q_velocity >= 0.0 && w.r > 0.0) {
                return Err(RtaError::InvalidConfig(format!(
                    "{name} LQR weights need Q >= 0 and R > 0"
                )));
            }
        }
        if !self.initial_state.is_finite() {
            return Err(RtaError::InvalidConfig("initial state is not finite".into()));
        }
        let report = self.parameter_report();
        if !report.initial_allowable && !self.allow_unsafe_start {
            return Err(RtaError::InvalidConfig(
                "initial state violates a constraint (set allow_unsafe_start to run anyway)".into(),
            ));
        }
        Ok(report)
    }

    /// Synthesises gains and builds the NMT library.
    pub fn setup(&self) -> Result<Setup> {
        self.validate()?;
        let library = NmtLibrary::build(&self.nmt_grid, &self.safety, &self.params)?;
        let backup = LqrGains::synthesize(&self.params, &self.backup_weights, self.dt)?;
        let primary = LqrGains::synthesize(&self.params, &self.primary_weights, self.dt)?;
        let horizon = BackupHorizon::new(self.horizon, self.dt)?;
        let context = FilterContext::new(
            self.params,
            self.safety,
            self.dt,
            horizon,
            library,
            backup,
            self.epsilon,
        );
        Ok(Setup {
            context: Arc::new(context),
            primary,
        })
    }
}

impl Setup {
    pub fn filter(&self, kind: FilterKind, latch: Option<LatchConfig>) -> Box<dyn RtaFilter> {
        let inner = build_filter(kind, self.context.clone());
        match latch {
            Some(cfg) if kind != FilterKind::None => Box::new(LatchedFilter::new(inner, self.context.clone(), cfg)),
            _ => inner,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_initial_state() {
        let c = default_config();
        assert!((c.initial_state.r_norm() - 9850.0).abs() < 0.5);
        assert!((c.initial_state.v_norm() - 0.75f64.sqrt()).abs() < 1e-12);
        assert!(c.validate().unwrap().initial_allowable);
    }

    #[test]
    fn round_trip() {
        let mut c = default_config();
        c.filter = FilterKind::ImplicitOptimization;
        c.latch = Some(LatchConfig::default());
        c.output.records_csv = Some("out.csv".into());
        let back = ScenarioConfig::from_json_str(&c.to_json()).unwrap();
        assert_eq!(back, c);
    }

    #[test]
    fn partial_file_takes_defaults() {
        let c = ScenarioConfig::from_json_str(r#"{"filter": "implicit-switching", "duration": 10}"#).unwrap();
        assert_eq!(c.filter, FilterKind::ImplicitSwitching);
        assert_eq!(c.duration, 10);
        assert_eq!(c.params, CwParameters::default());
    }

    #[test]
    fn rejects_bad_values() {
        assert!(ScenarioConfig::from_json_str(r#"{"bogus": 1}"#).is_err());
        let mut c = default_config();
        c.horizon = 2.5;
        assert!(c.validate().is_err());
        let mut c = default_config();
        c.initial_state = RelativeState::new([100.0, 0.0, 0.0], [20.0, 0.0, 0.0]);
        assert!(c.validate().is_err());
        c.allow_unsafe_start = true;
        assert!(c.validate().is_ok());
    }

    #[test]
    fn unit_warning_on_default_parameters() {
        let r = default_config().parameter_report();
        assert!(r.lemma1.satisfied);
        assert!(r.unit_warning().is_some());
    }
}
