use std::sync::Arc;

use crate::controllers::{backup_control_explicit, backup_control_lqr, BackupTracker};
use crate::dynamics::{ControlCommand, RelativeState};
use crate::qp::{QpProblem, QpRow, QpSolution, QpSolver, QpStatus};

use super::{
    build_explicit_barriers, build_implicit_barriers, BackupRollout, FilterContext, FilterDecision, FilterKind,
    Mechanism, RtaFilter,
};

/// Changes below this norm are reported as passthrough.
pub const MODIFIED_TOL: f64 = 1e-9;

fn decision_from(u_des: &ControlCommand, sol: &QpSolution, rows: usize) -> Option<FilterDecision> {
    if sol.status != QpStatus::Optimal {
        return None;
    }
    let u = ControlCommand::from_vector(sol.u);
    if (sol.u - u_des.vector()).norm() <= MODIFIED_TOL {
        return Some(FilterDecision::passthrough(*u_des));
    }
    Some(FilterDecision {
        u_act: u,
        intervened: true,
        mechanism: Mechanism::QpModified,
        latency: 0.0,
        barrier_multiplier: sol.max_row_multiplier(rows),
    })
}

fn fallback(u: ControlCommand) -> FilterDecision {
    FilterDecision {
        mechanism: Mechanism::QpInfeasibleFallback,
        ..FilterDecision::backup(u)
    }
}

/// Minimum-norm correction of `u_des` subject to one barrier row per
/// constraint, built from the closed-form safe set.
#[derive(Clone, Debug)]
pub struct ExplicitOptimization {
    ctx: Arc<FilterContext>,
    solver: QpSolver,
    last: Option<QpSolution>,
}

impl ExplicitOptimization {
    pub fn new(ctx: Arc<FilterContext>) -> Self {
        ExplicitOptimization {
            ctx,
            solver: QpSolver::new(),
            last: None,
        }
    }

    /// Solution of the most recent QP.
    pub fn last_solution(&self) -> Option<&QpSolution> {
        self.last.as_ref()
    }
}

impl RtaFilter for ExplicitOptimization {
    fn kind(&self) -> FilterKind {
        FilterKind::ExplicitOptimization
    }

    fn decide(&mut self, state: &RelativeState, u_des: &ControlCommand) -> FilterDecision {
        let c = &*self.ctx;
        let rows = build_explicit_barriers(state, &c.safety, &c.params).to_vec();
        let n = rows.len();
        let problem = QpProblem::new(*u_des.vector(), rows, c.params.u_max);
        let sol = self.solver.solve(&problem);
        let d = decision_from(u_des, &sol, n);
        self.last = Some(sol);
        d.unwrap_or_else(|| fallback(backup_control_explicit(state, &c.safety, &c.params, c.dt)))
    }

    fn reset(&mut self) {
        self.solver = QpSolver::new();
        self.last = None;
    }
}

/// Minimum-norm correction of `u_des` subject to barrier rows at every
/// sample of the NMT tracking backup rollout from the current state.
#[derive(Clone, Debug)]
pub struct ImplicitOptimization {
    ctx: Arc<FilterContext>,
    solver: QpSolver,
    tracker: BackupTracker,
    rollout: BackupRollout,
    rows: Vec<QpRow>,
    last: Option<QpSolution>,
}

impl ImplicitOptimization {
    pub fn new(ctx: Arc<FilterContext>) -> Self {
        ImplicitOptimization {
            ctx,
            solver: QpSolver::new(),
            tracker: BackupTracker::new(),
            rollout: BackupRollout::default(),
            rows: Vec::new(),
            last: None,
        }
    }

    pub fn last_solution(&self) -> Option<&QpSolution> {
        self.last.as_ref()
    }

    pub fn rollout(&self) -> &BackupRollout {
        &self.rollout
    }
}

impl RtaFilter for ImplicitOptimization {
    fn kind(&self) -> FilterKind {
        FilterKind::ImplicitOptimization
    }

    fn decide(&mut self, state: &RelativeState, u_des: &ControlCommand) -> FilterDecision {
        let c = &*self.ctx;
        self.rollout.compute(c, state, &BackupTracker::new(), true);
        build_implicit_barriers(state, &self.rollout, c, &mut self.rows);
        let n = self.rows.len();
        let problem = QpProblem::new(*u_des.vector(), self.rows.clone(), c.params.u_max);
        let sol = self.solver.solve(&problem);
        let d = decision_from(u_des, &sol, n);
        self.last = Some(sol);
        match d {
            Some(d) => {
                self.tracker.disengage();
                d
            }
            None => fallback(backup_control_lqr(state, &mut self.tracker, &c.backup_law())),
        }
    }

    fn reset(&mut self) {
        self.solver = QpSolver::new();
        self.tracker.disengage();
        self.last = None;
    }
}
