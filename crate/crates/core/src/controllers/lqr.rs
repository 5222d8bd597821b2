//! Discrete-time LQR synthesis.
//!
//! The continuous pair `(A, B)` is discretised by zero-order hold and the
//! discrete Riccati difference equation is iterated to its fixed point.

use nalgebra::{DMatrix, SMatrix};

use crate::error::{Result, RtaError};

const RICCATI_TOL: f64 = 1e-10;
const RICCATI_MAX_ITER: usize = 100_000;

/// `exp(M)` by scaling and squaring around a truncated Taylor series.
pub fn expm(m: &DMatrix<f64>) -> DMatrix<f64> {
    let n = m.nrows();
    let norm = m.abs().row_sum().max();
    let squarings = if norm > 0.5 {
        (norm / 0.5).log2().ceil() as u32
    } else {
        0
    };
    let scaled = m / 2f64.powi(squarings as i32);
    let mut term = DMatrix::<f64>::identity(n, n);
    let mut sum = DMatrix::<f64>::identity(n, n);
    for k in 1..=20 {
        term = &term * &scaled / k as f64;
        sum += &term;
    }
    for _ in 0..squarings {
        sum = &sum * &sum;
    }
    sum
}

/// Zero-order-hold discretisation `(Ad, Bd)` of `ẋ = A x + B u` over `dt`.
pub fn discretize_zoh(a: &DMatrix<f64>, b: &DMatrix<f64>, dt: f64) -> (DMatrix<f64>, DMatrix<f64>) {
    let n = a.nrows();
    let m = b.ncols();
    let mut aug = DMatrix::<f64>::zeros(n + m, n + m);
    aug.view_mut((0, 0), (n, n)).copy_from(&(a * dt));
    aug.view_mut((0, n), (n, m)).copy_from(&(b * dt));
    let e = expm(&aug);
    (e.view((0, 0), (n, n)).into_owned(), e.view((0, n), (n, m)).into_owned())
}

/// Steady-state gain of the discrete Riccati recursion for `(ad, bd, q, r)`.
pub fn dlqr(
    ad: &DMatrix<f64>,
    bd: &DMatrix<f64>,
    q: &DMatrix<f64>,
    r: &DMatrix<f64>,
) -> Result<(DMatrix<f64>, DMatrix<f64>)> {
    let at = ad.transpose();
    let bt = bd.transpose();
    let mut p = q.clone();
    for _ in 0..RICCATI_MAX_ITER {
        let s = r + &bt * &p * bd;
        let s_inv = s.try_inverse().ok_or(RtaError::RiccatiDivergence { iterations: 0 })?;
        let atp = &at * &p;
        let next = q + &atp * ad - &atp * bd * &s_inv * &bt * &p * ad;
        let next = (&next + next.transpose()) * 0.5;
        if !next.iter().all(|v| v.is_finite()) {
            break;
        }
        let change = (&next - &p).amax();
        let scale = next.amax();
        p = next;
        if change <= RICCATI_TOL * scale || change == 0.0 {
            let k = (r + &bt * &p * bd)
                .try_inverse()
                .ok_or(RtaError::RiccatiDivergence { iterations: 0 })?
                * &bt
                * &p
                * ad;
            return Ok((k, p));
        }
    }
    Err(RtaError::RiccatiDivergence {
        iterations: RICCATI_MAX_ITER,
    })
}

/// Feedback gain `K` (so `u = −K x`) and the discretised plant it was
/// synthesised for.
#[derive(Clone, Debug)]
pub struct LqrSolution<const N: usize, const M: usize> {
    pub k: SMatrix<f64, M, N>,
    pub p: SMatrix<f64, N, N>,
    pub ad: SMatrix<f64, N, N>,
    pub bd: SMatrix<f64, N, M>,
}

pub fn solve_lqr<const N: usize, const M: usize>(
    a: &SMatrix<f64, N, N>,
    b: &SMatrix<f64, N, M>,
    q: &SMatrix<f64, N, N>,
    r: &SMatrix<f64, M, M>,
    dt: f64,
) -> Result<LqrSolution<N, M>> {
    let dyn_of = |rows: usize, cols: usize, s: &[f64]| DMatrix::from_column_slice(rows, cols, s);
    let (ad, bd) = discretize_zoh(&dyn_of(N, N, a.as_slice()), &dyn_of(N, M, b.as_slice()), dt);
    let (k, p) = dlqr(&ad, &bd, &dyn_of(N, N, q.as_slice()), &dyn_of(M, M, r.as_slice()))?;
    Ok(LqrSolution {
        k: SMatrix::from_column_slice(k.as_slice()),
        p: SMatrix::from_column_slice(p.as_slice()),
        ad: SMatrix::from_column_slice(ad.as_slice()),
        bd: SMatrix::from_column_slice(bd.as_slice()),
    })
}

/// Largest eigenvalue modulus.
pub fn spectral_radius<const N: usize>(m: &SMatrix<f64, N, N>) -> f64 {
    DMatrix::from_column_slice(N, N, m.as_slice())
        .complex_eigenvalues()
        .iter()
        .map(|c| c.norm())
        .fold(0.0, f64::max)
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::{Matrix1, Matrix2, Matrix2x1, Matrix4};

    #[test]
    fn expm_matches_known_rotation() {
        let m = DMatrix::from_row_slice(2, 2, &[0.0, -3.0, 3.0, 0.0]);
        let e = expm(&m);
        assert!((e[(0, 0)] - 3f64.cos()).abs() < 1e-12);
        assert!((e[(1, 0)] - 3f64.sin()).abs() < 1e-12);
    }

    #[test]
    fn zoh_double_integrator() {
        let a = DMatrix::from_row_slice(2, 2, &[0.0, 1.0, 0.0, 0.0]);
        let b = DMatrix::from_row_slice(2, 1, &[0.0, 1.0]);
        let (ad, bd) = discretize_zoh(&a, &b, 0.1);
        assert!((ad[(0, 1)] - 0.1).abs() < 1e-15);
        assert!((bd[(0, 0)] - 0.005).abs() < 1e-15);
        assert!((bd[(1, 0)] - 0.1).abs() < 1e-15);
    }

    // Hewer policy iteration with an exact Kronecker Lyapunov solve, started
    // from a different stabilising gain than the Riccati recursion uses.
    fn policy_iteration(ad: &Matrix2<f64>, bd: &Matrix2x1<f64>, q: &Matrix2<f64>, r: f64) -> nalgebra::Matrix1x2<f64> {
        let mut k = nalgebra::Matrix1x2::new(1.0, 1.5);
        for _ in 0..200 {
            let acl = ad - bd * k;
            let qk = q + k.transpose() * k * r;
            // vec(P) = (I - Acl' ⊗ Acl')^-1 vec(Qk)
            let at = acl.transpose();
            let kron = Matrix4::from_fn(|i, j| at[(i % 2, j % 2)] * at[(i / 2, j / 2)]);
            let lhs = Matrix4::identity() - kron;
            let vp = lhs.try_inverse().unwrap() * nalgebra::Vector4::from_column_slice(qk.as_slice());
            let p = Matrix2::from_column_slice(vp.as_slice());
            let s = r + (bd.transpose() * p * bd)[(0, 0)];
            k = bd.transpose() * p * ad / s;
        }
        k
    }

    #[test]
    fn double_integrator_against_policy_iteration() {
        let a = Matrix2::new(0.0, 1.0, 0.0, 0.0);
        let b = Matrix2x1::new(0.0, 1.0);
        let q = Matrix2::identity();
        let r = Matrix1::new(1.0);
        let sol = solve_lqr(&a, &b, &q, &r, 0.1).unwrap();
        let oracle = policy_iteration(&sol.ad, &sol.bd, &q, 1.0);
        for j in 0..2 {
            let rel = (sol.k[(0, j)] - oracle[(0, j)]).abs() / oracle[(0, j)].abs();
            assert!(rel < 1e-6, "gain {j}: {} vs {}", sol.k[(0, j)], oracle[(0, j)]);
        }
        assert!(spectral_radius(&(sol.ad - sol.bd * sol.k)) < 1.0);
    }

    #[test]
    fn zero_state_cost_gives_zero_gain() {
        let a = Matrix2::new(0.0, 1.0, 0.0, 0.0);
        let b = Matrix2x1::new(0.0, 1.0);
        let sol = solve_lqr(&a, &b, &Matrix2::zeros(), &Matrix1::new(1.0), 0.1).unwrap();
        assert_eq!(sol.k.amax(), 0.0);
    }
}
