//! Geodesics between Gaussians by boundary-value shooting.
//!
//! The geodesic equations of the Gaussian-manifold metric,
//!
//! ```text
//! mu''  = P' P^-1 mu'
//! P''   = P' P^-1 P' - mu' mu'^T
//! ```
//!
//! are integrated with fixed-step RK4 over t in [0, 1]; Newton iteration on
//! the unknown initial velocity (mu'(0), P'(0)) drives the terminal state
//! onto the target, with the velocity Jacobian taken by forward differences
//! and a step-halving line search guarding against leaving the SPD cone.
//!
//! The initial velocity guess is the tangent of the curve
//! `P(t) = P_a^(1/2) (P_a^(-1/2) P_b P_a^(-1/2))^t P_a^(1/2)` plus the mean
//! chord; for shared-mean endpoints that curve already is the geodesic, so
//! Newton only has to absorb integration error.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::frgeom::{gauss_metric_ds2, GaussianState};
use crate::matfun::{self, SpdMatrix, SymMatrix};

/// A numerically integrated geodesic, sampled at `steps + 1` uniform times.
#[derive(Debug, Clone)]
pub struct GaussGeodesicPath {
    pub times: Vec<f64>,
    pub means: Vec<DVector<f64>>,
    pub covariances: Vec<SpdMatrix>,
    /// Total arc length under the Gaussian-manifold metric (trapezoid rule
    /// over the pointwise speeds, which are constant on an exact geodesic).
    pub length: f64,
    /// Terminal defect sqrt(|mu(1)-mu_b|^2 + |P(1)-P_b|_F^2) after Newton.
    pub terminal_mismatch: f64,
    pub newton_iterations: usize,
}

/// Phase-space point of the geodesic flow, kept in matrix form.
#[derive(Clone)]
struct GeoState {
    mu: DVector<f64>,
    p: DMatrix<f64>,
    dmu: DVector<f64>,
    dp: DMatrix<f64>,
}

impl GeoState {
    fn axpy(&self, scale: f64, rhs: &GeoState) -> GeoState {
        GeoState {
            mu: &self.mu + scale * &rhs.mu,
            p: &self.p + scale * &rhs.p,
            dmu: &self.dmu + scale * &rhs.dmu,
            dp: &self.dp + scale * &rhs.dp,
        }
    }
}

fn geodesic_rhs(s: &GeoState) -> Result<GeoState> {
    let chol = matfun::symmetrize(&s.p)
        .cholesky()
        .ok_or_else(|| Error::SpdLost {
            context: "geodesic integration".to_string(),
        })?;
    // A = P' P^-1 = (P^-1 P')^T since both factors are symmetric.
    let a = chol.solve(&s.dp).transpose();
    Ok(GeoState {
        mu: s.dmu.clone(),
        p: s.dp.clone(),
        dmu: &a * &s.dmu,
        dp: &a * &s.dp - &s.dmu * s.dmu.transpose(),
    })
}

fn rk4_step(s: &GeoState, dt: f64) -> Result<GeoState> {
    let k1 = geodesic_rhs(s)?;
    let k2 = geodesic_rhs(&s.axpy(0.5 * dt, &k1))?;
    let k3 = geodesic_rhs(&s.axpy(0.5 * dt, &k2))?;
    let k4 = geodesic_rhs(&s.axpy(dt, &k3))?;
    let mut out = s.axpy(dt / 6.0, &k1);
    out = out.axpy(dt / 3.0, &k2);
    out = out.axpy(dt / 3.0, &k3);
    out = out.axpy(dt / 6.0, &k4);
    out.p = matfun::symmetrize(&out.p);
    out.dp = matfun::symmetrize(&out.dp);
    Ok(out)
}

/// Packs (dmu, dP) into the shooting unknowns: means first, then the upper
/// triangle of the symmetric velocity row by row.
fn pack_velocity(n: usize, dmu: &DVector<f64>, dp: &DMatrix<f64>) -> DVector<f64> {
    let mut v = DVector::zeros(n + n * (n + 1) / 2);
    for i in 0..n {
        v[i] = dmu[i];
    }
    let mut k = n;
    for i in 0..n {
        for j in i..n {
            v[k] = dp[(i, j)];
            k += 1;
        }
    }
    v
}

fn unpack_velocity(n: usize, v: &DVector<f64>) -> (DVector<f64>, DMatrix<f64>) {
    let dmu = DVector::from_fn(n, |i, _| v[i]);
    let mut dp = DMatrix::zeros(n, n);
    let mut k = n;
    for i in 0..n {
        for j in i..n {
            dp[(i, j)] = v[k];
            dp[(j, i)] = v[k];
            k += 1;
        }
    }
    (dmu, dp)
}

/// Integrates the flow from `a` with initial velocity `v`, returning the
/// terminal residual against `b` in packed coordinates.
fn terminal_residual(
    a: &GaussianState,
    b: &GaussianState,
    v: &DVector<f64>,
    steps: usize,
) -> Result<DVector<f64>> {
    let n = a.dim();
    let (dmu, dp) = unpack_velocity(n, v);
    let mut state = GeoState {
        mu: a.mean.clone(),
        p: a.cov.as_matrix().clone(),
        dmu,
        dp,
    };
    let dt = 1.0 / steps as f64;
    for _ in 0..steps {
        state = rk4_step(&state, dt)?;
    }
    let dmu_err = &state.mu - &b.mean;
    let dp_err = &state.p - b.cov.as_matrix();
    Ok(pack_velocity(n, &dmu_err, &dp_err))
}

/// Terminal defect in unpacked (Frobenius) units, for reporting.
fn mismatch_norm(n: usize, residual: &DVector<f64>) -> f64 {
    let (dmu, dp) = unpack_velocity(n, residual);
    (dmu.norm_squared() + dp.norm_squared()).sqrt()
}

/// Shoots the geodesic boundary-value problem from `a` to `b`.
///
/// `steps` RK4 steps resolve the flow; Newton stops once the terminal defect
/// drops below `tol`. All covariances along the returned path are verified
/// SPD. Fails with [`Error::ShootingFailed`] when the defect cannot be
/// driven below `tol` within 50 Newton iterations.
pub fn gauss_geodesic_shoot(
    a: &GaussianState,
    b: &GaussianState,
    steps: usize,
    tol: f64,
) -> Result<GaussGeodesicPath> {
    if a.dim() != b.dim() {
        return Err(Error::DimensionMismatch {
            context: format!("endpoints have dimensions {} and {}", a.dim(), b.dim()),
        });
    }
    if steps < 2 {
        return Err(Error::OutOfRange {
            what: "integration steps",
            details: format!("steps = {steps}, need at least 2"),
        });
    }
    if !(tol > 0.0 && tol.is_finite()) {
        return Err(Error::OutOfRange {
            what: "shooting tolerance",
            details: format!("tol = {tol} must be positive and finite"),
        });
    }
    let n = a.dim();

    // Affine-invariant initial guess: exact for shared means.
    let s_a = matfun::spd_sqrt(&a.cov)?;
    let s_a_inv = s_a.inverse_matrix()?;
    let h = SpdMatrix::new(matfun::symmetrize(
        &(&s_a_inv * b.cov.as_matrix() * &s_a_inv),
    ))?;
    let log_h = matfun::spd_log(&h)?;
    let dp0 = s_a.as_matrix() * log_h.as_matrix() * s_a.as_matrix();
    let dmu0 = &b.mean - &a.mean;
    let mut v = pack_velocity(n, &dmu0, &matfun::symmetrize(&dp0));

    let mut residual = terminal_residual(a, b, &v, steps)?;
    let mut mismatch = mismatch_norm(n, &residual);
    let dof = v.len();
    let mut iterations = 0usize;
    while mismatch > tol {
        if iterations >= 50 {
            return Err(Error::ShootingFailed {
                mismatch,
                iterations,
            });
        }
        iterations += 1;
        // Forward-difference Jacobian of the residual in the velocity.
        let mut jac = DMatrix::zeros(dof, dof);
        for k in 0..dof {
            let delta = 1e-6 * v[k].abs().max(1.0);
            let mut vk = v.clone();
            vk[k] += delta;
            let rk = terminal_residual(a, b, &vk, steps).map_err(|_| Error::ShootingFailed {
                mismatch,
                iterations,
            })?;
            jac.set_column(k, &((&rk - &residual) / delta));
        }
        let step = jac.lu().solve(&(-&residual)).ok_or(Error::ShootingFailed {
            mismatch,
            iterations,
        })?;
        // Step-halving line search; integration failures count as rejections.
        let mut alpha = 1.0;
        let mut improved = false;
        for _ in 0..12 {
            let candidate = &v + alpha * &step;
            if let Ok(r_new) = terminal_residual(a, b, &candidate, steps) {
                let m_new = mismatch_norm(n, &r_new);
                if m_new < mismatch {
                    v = candidate;
                    residual = r_new;
                    mismatch = m_new;
                    improved = true;
                    break;
                }
            }
            alpha *= 0.5;
        }
        if !improved {
            return Err(Error::ShootingFailed {
                mismatch,
                iterations,
            });
        }
    }

    // Converged: integrate once more, recording the path and its speeds.
    let (dmu, dp) = unpack_velocity(n, &v);
    let mut state = GeoState {
        mu: a.mean.clone(),
        p: a.cov.as_matrix().clone(),
        dmu,
        dp,
    };
    let dt = 1.0 / steps as f64;
    let mut times = Vec::with_capacity(steps + 1);
    let mut means = Vec::with_capacity(steps + 1);
    let mut covariances = Vec::with_capacity(steps + 1);
    let mut speeds = Vec::with_capacity(steps + 1);
    for k in 0..=steps {
        times.push(k as f64 * dt);
        let p = SpdMatrix::new(matfun::symmetrize(&state.p)).map_err(|_| Error::SpdLost {
            context: format!("geodesic path at t = {:.4}", k as f64 * dt),
        })?;
        let ds2 = gauss_metric_ds2(&p, &state.dmu, &SymMatrix::new(state.dp.clone())?)?;
        speeds.push(ds2.max(0.0).sqrt());
        means.push(state.mu.clone());
        covariances.push(p);
        if k < steps {
            state = rk4_step(&state, dt)?;
        }
    }
    let length =
        dt * (0.5 * speeds[0] + 0.5 * speeds[steps] + speeds[1..steps].iter().sum::<f64>());

    Ok(GaussGeodesicPath {
        times,
        means,
        covariances,
        length,
        terminal_mismatch: mismatch,
        newton_iterations: iterations,
    })
}
