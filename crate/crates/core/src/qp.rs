//! Dense primal active-set solver for the optimization filters.
//!
//! Solves
//!
//! ```text
//!     minimize   ‖u − u_des‖²
//!     subject to g_i · u + h_i ≥ 0     i = 0..k
//!                lower ≤ u ≤ upper
//! ```
//!
//! over three decision variables. Box bounds are appended as six extra rows
//! after the `k` general rows, in the order `u_x ≥ lo, −u_x ≥ −hi, u_y ≥ …`.
//! When no start point is at hand a phase-1 problem minimising the largest
//! row violation finds one or certifies infeasibility.

use nalgebra::{DMatrix, DVector, SVector, Vector3};
use serde::Serialize;

pub const MAX_ITERATIONS: usize = 100;
/// Phase-1 regularisation; bounds the phase-1 optimum by `6 η` when a feasible point exists.
const PHASE1_REG: f64 = 1e-10;
const PHASE1_ACCEPT: f64 = 1e-9;

/// One general inequality `g · u + h ≥ 0`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct QpRow {
    pub g: Vector3<f64>,
    pub h: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct QpProblem {
    pub u_des: Vector3<f64>,
    pub rows: Vec<QpRow>,
    pub lower: Vector3<f64>,
    pub upper: Vector3<f64>,
}

impl QpProblem {
    pub fn new(u_des: Vector3<f64>, rows: Vec<QpRow>, bound: f64) -> Self {
        QpProblem {
            u_des,
            rows,
            lower: Vector3::repeat(-bound),
            upper: Vector3::repeat(bound),
        }
    }

    /// Total row count including the six box rows.
    pub fn num_constraints(&self) -> usize {
        self.rows.len() + 6
    }

    /// Row `i` as `(a, b)` with meaning `a · u ≥ b`.
    fn constraint(&self, i: usize) -> (Vector3<f64>, f64) {
        let k = self.rows.len();
        if i < k {
            (self.rows[i].g, -self.rows[i].h)
        } else {
            let j = i - k;
            let axis = j / 2;
            let mut a = Vector3::zeros();
            if j.is_multiple_of(2) {
                a[axis] = 1.0;
                (a, self.lower[axis])
            } else {
                a[axis] = -1.0;
                (a, -self.upper[axis])
            }
        }
    }

    pub fn is_feasible(&self, u: &Vector3<f64>, tol: f64) -> bool {
        (0..self.num_constraints()).all(|i| {
            let (a, b) = self.constraint(i);
            a.dot(u) - b >= -tol
        })
    }

    pub fn max_violation(&self, u: &Vector3<f64>) -> f64 {
        (0..self.num_constraints())
            .map(|i| {
                let (a, b) = self.constraint(i);
                b - a.dot(u)
            })
            .fold(0.0, f64::max)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum QpStatus {
    Optimal,
    Infeasible,
    MaxIterations,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct QpSolution {
    pub u: Vector3<f64>,
    pub status: QpStatus,
    /// Active constraint indices (general rows first, then box rows).
    pub active: Vec<usize>,
    /// KKT multipliers matching `active`.
    pub multipliers: Vec<f64>,
    pub kkt_residual: f64,
    pub iterations: usize,
}

impl QpSolution {
    /// Largest multiplier on a general (non-box) row, 0 when none is active.
    pub fn max_row_multiplier(&self, num_rows: usize) -> f64 {
        self.active
            .iter()
            .zip(&self.multipliers)
            .filter(|(i, _)| **i < num_rows)
            .map(|(_, m)| *m)
            .fold(0.0, f64::max)
    }
}

/// Solver with a warm-start memory of the previous active set.
#[derive(Clone, Debug, Default)]
pub struct QpSolver {
    warm: Vec<usize>,
    pub warm_start: bool,
}

impl QpSolver {
    pub fn new() -> Self {
        QpSolver {
            warm: Vec::new(),
            warm_start: true,
        }
    }

    pub fn solve(&mut self, problem: &QpProblem) -> QpSolution {
        let sol = self.solve_inner(problem);
        self.warm = match sol.status {
            QpStatus::Optimal => sol.active.clone(),
            _ => Vec::new(),
        };
        log::trace!("qp problem {problem:?} -> {sol:?}");
        sol
    }

    fn solve_inner(&self, p: &QpProblem) -> QpSolution {
        let m = p.num_constraints();
        // Passthrough must be exact, so feasibility of u_des is tested with no slack.
        if p.is_feasible(&p.u_des, 0.0) {
            return QpSolution {
                u: p.u_des,
                status: QpStatus::Optimal,
                active: Vec::new(),
                multipliers: Vec::new(),
                kkt_residual: 0.0,
                iterations: 0,
            };
        }

        let cons: Vec<(Vector3<f64>, f64)> = (0..m).map(|i| p.constraint(i)).collect();
        let hess = Vector3::repeat(1.0);
        let lin = -p.u_des;

        let mut start: Option<(Vector3<f64>, Vec<usize>)> = None;
        if self.warm_start && !self.warm.is_empty() && self.warm.iter().all(|&i| i < m) {
            if let Some(z) = project_onto(&cons, &self.warm, &hess, &lin) {
                if cons.iter().all(|(a, b)| a.dot(&z) - b >= -1e-12) {
                    start = Some((z, self.warm.clone()));
                }
            }
        }
        if start.is_none() {
            let clamped = p.u_des.zip_zip_map(&p.lower, &p.upper, |u, lo, hi| u.clamp(lo, hi));
            if p.is_feasible(&clamped, 0.0) {
                start = Some((clamped, Vec::new()));
            }
        }
        let mut phase1_iters = 0;
        if start.is_none() {
            match phase_one(p, &cons) {
                Phase1::Feasible(z, it) => {
                    phase1_iters = it;
                    start = Some((z, Vec::new()));
                }
                Phase1::Infeasible(z, it) => {
                    return QpSolution {
                        u: z,
                        status: QpStatus::Infeasible,
                        active: Vec::new(),
                        multipliers: Vec::new(),
                        kkt_residual: f64::NAN,
                        iterations: it,
                    };
                }
                Phase1::MaxIterations(z) => {
                    return QpSolution {
                        u: z,
                        status: QpStatus::MaxIterations,
                        active: Vec::new(),
                        multipliers: Vec::new(),
                        kkt_residual: f64::NAN,
                        iterations: MAX_ITERATIONS,
                    };
                }
            }
        }
        let (z0, w0) = start.expect("start point");
        let out = active_set(&cons, &hess, &lin, z0, w0);
        let status = if out.converged {
            QpStatus::Optimal
        } else {
            QpStatus::MaxIterations
        };
        let grad = out.z - p.u_des;
        let mut resid = grad;
        for (i, l) in out.working.iter().zip(&out.lambda) {
            resid -= cons[*i].0 * *l;
        }
        QpSolution {
            u: out.z,
            status,
            active: out.working,
            multipliers: out.lambda,
            kkt_residual: resid.amax(),
            iterations: out.iterations + phase1_iters,
        }
    }
}

/// One-shot solve without warm start.
pub fn solve(problem: &QpProblem) -> QpSolution {
    QpSolver::new().solve(problem)
}

enum Phase1 {
    Feasible(Vector3<f64>, usize),
    Infeasible(Vector3<f64>, usize),
    MaxIterations(Vector3<f64>),
}

// minimize t + η/2 (‖u − u_c‖² + t²)  s.t.  g·u + h + t ≥ 0,  box on u,  t ≥ 0
fn phase_one(p: &QpProblem, cons: &[(Vector3<f64>, f64)]) -> Phase1 {
    let k = p.rows.len();
    let u_c = p.u_des.zip_zip_map(&p.lower, &p.upper, |u, lo, hi| u.clamp(lo, hi));
    let mut ext: Vec<(SVector<f64, 4>, f64)> = Vec::with_capacity(cons.len() + 1);
    for (i, (a, b)) in cons.iter().enumerate() {
        let t_coef = if i < k { 1.0 } else { 0.0 };
        ext.push((SVector::<f64, 4>::new(a[0], a[1], a[2], t_coef), *b));
    }
    ext.push((SVector::<f64, 4>::new(0.0, 0.0, 0.0, 1.0), 0.0));
    let t0 = p.max_violation(&u_c) + 1.0;
    let hess = SVector::<f64, 4>::repeat(PHASE1_REG);
    let lin = SVector::<f64, 4>::new(-PHASE1_REG * u_c[0], -PHASE1_REG * u_c[1], -PHASE1_REG * u_c[2], 1.0);
    let z0 = SVector::<f64, 4>::new(u_c[0], u_c[1], u_c[2], t0);
    let out = active_set(&ext, &hess, &lin, z0, Vec::new());
    let u = Vector3::new(out.z[0], out.z[1], out.z[2]);
    if !out.converged {
        return Phase1::MaxIterations(u);
    }
    if p.max_violation(&u) <= PHASE1_ACCEPT {
        Phase1::Feasible(u, out.iterations)
    } else {
        Phase1::Infeasible(u, out.iterations)
    }
}

struct ActiveSetOutcome<const D: usize> {
    z: SVector<f64, D>,
    working: Vec<usize>,
    lambda: Vec<f64>,
    converged: bool,
    iterations: usize,
}

/// Minimiser of `½ zᵀ diag(hess) z + linᵀ z` on `{a_i · z = b_i, i ∈ set}`.
fn project_onto<const D: usize>(
    cons: &[(SVector<f64, D>, f64)],
    set: &[usize],
    hess: &SVector<f64, D>,
    lin: &SVector<f64, D>,
) -> Option<SVector<f64, D>> {
    // unconstrained minimiser, then correct onto the affine set
    let z_free = -lin.component_div(hess);
    let grad = SVector::<f64, D>::zeros();
    let (p, _) = eqp_step(cons, set, hess, &grad, |i| cons[i].1 - cons[i].0.dot(&z_free))?;
    Some(z_free + p)
}

/// Solves `min ½ pᵀHp + gradᵀp  s.t.  a_i · p = r_i` for `i ∈ set`.
///
/// Returns the step and the multipliers of the working rows. The full KKT
/// system is factorised directly so that a tiny `H` (phase 1) does not
/// amplify rounding.
fn eqp_step<const D: usize>(
    cons: &[(SVector<f64, D>, f64)],
    set: &[usize],
    hess: &SVector<f64, D>,
    grad: &SVector<f64, D>,
    rhs: impl Fn(usize) -> f64,
) -> Option<(SVector<f64, D>, Vec<f64>)> {
    let w = set.len();
    if w > D {
        return None;
    }
    // [H  −Aᵀ] [p]   [−grad]
    // [A   0 ] [λ] = [  r  ]
    let n = D + w;
    let mut kkt = DMatrix::<f64>::zeros(n, n);
    let mut b = DVector::<f64>::zeros(n);
    for i in 0..D {
        kkt[(i, i)] = hess[i];
        b[i] = -grad[i];
    }
    for (r, &i) in set.iter().enumerate() {
        let a = &cons[i].0;
        for c in 0..D {
            kkt[(D + r, c)] = a[c];
            kkt[(c, D + r)] = -a[c];
        }
        b[D + r] = rhs(i);
    }
    let x = kkt.lu().solve(&b)?;
    if !x.iter().all(|v| v.is_finite()) {
        return None;
    }
    let step = SVector::<f64, D>::from_fn(|i, _| x[i]);
    Some((step, x.iter().skip(D).copied().collect()))
}

fn active_set<const D: usize>(
    cons: &[(SVector<f64, D>, f64)],
    hess: &SVector<f64, D>,
    lin: &SVector<f64, D>,
    mut z: SVector<f64, D>,
    mut working: Vec<usize>,
) -> ActiveSetOutcome<D> {
    let mut iterations = 0;
    while iterations < MAX_ITERATIONS {
        iterations += 1;
        let grad = hess.component_mul(&z) + lin;
        let Some((p, lambda)) = eqp_step(cons, &working, hess, &grad, |_| 0.0) else {
            // singular working set: drop the newest row and retry
            working.pop();
            continue;
        };
        let scale = 1.0 + z.amax();
        if p.amax() <= 1e-13 * scale {
            let worst = lambda
                .iter()
                .enumerate()
                .filter(|(_, l)| **l < -1e-14)
                .min_by(|a, b| a.1.partial_cmp(b.1).unwrap().then(working[a.0].cmp(&working[b.0])));
            match worst {
                None => {
                    return ActiveSetOutcome {
                        z,
                        working,
                        lambda,
                        converged: true,
                        iterations,
                    }
                }
                Some((idx, _)) => {
                    working.remove(idx);
                }
            }
            continue;
        }
        let mut alpha = 1.0;
        let mut blocking = None;
        for (i, (a, b)) in cons.iter().enumerate() {
            if working.contains(&i) {
                continue;
            }
            let ap = a.dot(&p);
            if ap < -1e-15 * a.amax().max(1.0) * p.amax() {
                let ratio = ((b - a.dot(&z)) / ap).max(0.0);
                if ratio < alpha {
                    alpha = ratio;
                    blocking = Some(i);
                }
            }
        }
        z += p * alpha;
        if let Some(i) = blocking {
            working.push(i);
        }
    }
    let grad = hess.component_mul(&z) + lin;
    let lambda = eqp_step(cons, &working, hess, &grad, |_| 0.0)
        .map(|(_, l)| l)
        .unwrap_or_else(|| vec![f64::NAN; working.len()]);
    ActiveSetOutcome {
        z,
        working,
        lambda,
        converged: false,
        iterations,
    }
}
