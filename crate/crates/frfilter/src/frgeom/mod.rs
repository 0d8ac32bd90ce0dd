//! The Fisher-Rao metric: nonparametric on grids, closed-form on Gaussians.
//!
//! On the Gaussian manifold with coordinates (mean, covariance) the line
//! element is
//!
//! ```text
//! ds^2 = dmu^T P^-1 dmu + (1/2) trace( (P^-1 dP)^2 )
//! ```
//!
//! Two submanifold distances have closed forms and both are provided: the
//! Mahalanobis distance along constant-covariance curves, and for a shared
//! mean the log-eigenvalue distance
//! `d(P1, P2) = sqrt( (1/2) sum_i ln^2 l_i(P1^-1 P2) )`. Geodesics between
//! general endpoint pairs have no closed form and are produced numerically
//! by [`gauss_geodesic_shoot`].
//!
//! [`grad_fr2_cov`] is the covariance gradient of the squared shared-mean
//! distance, `P^-1 log(P P0^-1)`, the object driving the filter's
//! variational covariance update.

pub mod geodesic;
pub mod grid;
pub mod parametric;

pub use geodesic::{gauss_geodesic_shoot, GaussGeodesicPath};
pub use grid::{fr_distance_grid, fr_geodesic_grid, gaussian_to_grid, GridDensity, GridSpec};
pub use parametric::{fisher_info_matrix, fisher_info_matrix_hessian, ParametricFamily};

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::matfun::{self, SpdMatrix, SymMatrix};

/// A Gaussian distribution described by its mean and covariance.
#[derive(Debug, Clone, PartialEq)]
pub struct GaussianState {
    pub mean: DVector<f64>,
    pub cov: SpdMatrix,
}

impl GaussianState {
    pub fn new(mean: DVector<f64>, cov: SpdMatrix) -> Result<Self> {
        if mean.len() != cov.dim() {
            return Err(Error::DimensionMismatch {
                context: format!(
                    "mean has dimension {}, covariance is {}x{1}",
                    mean.len(),
                    cov.dim()
                ),
            });
        }
        if mean.iter().any(|x| !x.is_finite()) {
            return Err(Error::NotFinite {
                context: "GaussianState mean".to_string(),
            });
        }
        Ok(Self { mean, cov })
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }
}

/// Fisher-Rao arc length between Gaussians that share the covariance `p`,
/// measured along the constant-covariance curve: the Mahalanobis distance
/// `sqrt( (mu1-mu2)^T P^-1 (mu1-mu2) )`.
pub fn fr_distance_gauss_mean(
    mu1: &DVector<f64>,
    mu2: &DVector<f64>,
    p: &SpdMatrix,
) -> Result<f64> {
    if mu1.len() != p.dim() || mu2.len() != p.dim() {
        return Err(Error::DimensionMismatch {
            context: format!(
                "means have dimensions {} and {}, covariance is {}x{2}",
                mu1.len(),
                mu2.len(),
                p.dim()
            ),
        });
    }
    let diff = mu1 - mu2;
    let chol = p
        .as_matrix()
        .clone()
        .cholesky()
        .expect("SpdMatrix is positive definite by construction");
    Ok(diff.dot(&chol.solve(&diff)).max(0.0).sqrt())
}

/// Shared-mean distance via the spectral logarithm of the congruence
/// transform: `norm_F( log(P1^-1/2 P2 P1^-1/2) ) / sqrt(2)`.
pub fn cov_distance_via_log(p1: &SpdMatrix, p2: &SpdMatrix) -> Result<f64> {
    check_same_dim(p1, p2)?;
    let s_inv = matfun::spd_sqrt(p1)?.inverse_matrix()?;
    let w = SpdMatrix::new(matfun::symmetrize(&(&s_inv * p2.as_matrix() * &s_inv)))?;
    Ok(matfun::spd_log(&w)?.norm() / 2.0f64.sqrt())
}

/// Shared-mean distance via the generalized eigenvalues of (P1, P2):
/// `sqrt( (1/2) sum_i ln^2 l_i )` with `P2 v = l P1 v`, reduced to an
/// ordinary symmetric problem through the Cholesky factor of P1.
pub fn cov_distance_via_geneig(p1: &SpdMatrix, p2: &SpdMatrix) -> Result<f64> {
    check_same_dim(p1, p2)?;
    let l = p1
        .as_matrix()
        .clone()
        .cholesky()
        .expect("SpdMatrix is positive definite by construction")
        .l();
    // M = L^-1 P2 L^-T is symmetric with the generalized eigenvalues.
    let y = l
        .solve_lower_triangular(p2.as_matrix())
        .ok_or_else(|| Error::Singular {
            context: "triangular solve in generalized eigenvalue route".to_string(),
        })?;
    let m = l
        .solve_lower_triangular(&y.transpose())
        .ok_or_else(|| Error::Singular {
            context: "triangular solve in generalized eigenvalue route".to_string(),
        })?;
    let w = SpdMatrix::new(matfun::symmetrize(&m))?;
    let d = matfun::sym_eig(&w)?;
    let sum: f64 = d.eigenvalues.iter().map(|l| l.ln().powi(2)).sum();
    Ok((0.5 * sum).sqrt())
}

/// Tightest acceptable disagreement between the two covariance-distance
/// routes; beyond this the inputs are too ill-conditioned to trust.
pub const COV_DISTANCE_CROSSCHECK_TOL: f64 = 1e-12;

/// Fisher-Rao distance between Gaussians sharing a mean, as a function of
/// the two covariances.
///
/// Computed through two independent factorizations (spectral square root +
/// log, and Cholesky-reduced generalized eigenvalues) which must agree to
/// [`COV_DISTANCE_CROSSCHECK_TOL`] relative to max(1, distance); their mean
/// is returned.
pub fn fr_distance_gauss_cov(p1: &SpdMatrix, p2: &SpdMatrix) -> Result<f64> {
    let a = cov_distance_via_log(p1, p2)?;
    let b = cov_distance_via_geneig(p1, p2)?;
    let gap = (a - b).abs();
    if gap > COV_DISTANCE_CROSSCHECK_TOL * a.abs().max(1.0) {
        return Err(Error::NoConvergence {
            context: "covariance distance cross-check".to_string(),
            residual: gap,
            iterations: 0,
        });
    }
    Ok(0.5 * (a + b))
}

/// Great-circle distance between two Gaussian laws seen as points of the
/// unit sphere of square-root densities: `arccos` of the Bhattacharyya
/// affinity `integral of sqrt(p q)`, which has the closed form
/// `det(M)^-1/2 det(P1)^1/4 det(P2)^1/4 exp(-dmu^T M^-1 dmu / 8)` with
/// `M = (P1 + P2) / 2`.
///
/// This is the same quantity [`grid::fr_distance_grid`] computes by
/// quadrature when both densities are Gaussian, and it is the yardstick the
/// moment-constrained minimality property is measured against. It is not
/// the Gaussian-manifold geodesic distance of [`fr_distance_gauss_cov`]:
/// the chord through general densities is shorter than the path confined to
/// the Gaussian family.
pub fn gauss_bhattacharyya_arc(a: &GaussianState, b: &GaussianState) -> Result<f64> {
    if a.dim() != b.dim() {
        return Err(Error::DimensionMismatch {
            context: format!("Gaussian laws of dimension {} and {}", a.dim(), b.dim()),
        });
    }
    let ln_det = |m: &DMatrix<f64>| -> Result<f64> {
        let chol = m.clone().cholesky().ok_or_else(|| Error::Singular {
            context: "Cholesky factorization of a covariance average".to_string(),
        })?;
        Ok(2.0 * chol.l().diagonal().iter().map(|d| d.ln()).sum::<f64>())
    };
    let mid = (a.cov.as_matrix() + b.cov.as_matrix()) * 0.5;
    let chol_mid = mid.clone().cholesky().ok_or_else(|| Error::Singular {
        context: "Cholesky factorization of a covariance average".to_string(),
    })?;
    let dmu = &a.mean - &b.mean;
    let quad = dmu.dot(&chol_mid.solve(&dmu));
    let ln_affinity = 0.25 * ln_det(a.cov.as_matrix())? + 0.25 * ln_det(b.cov.as_matrix())?
        - 0.5 * ln_det(&mid)?
        - 0.125 * quad;
    Ok(ln_affinity.exp().clamp(0.0, 1.0).acos())
}

/// Squared line element of the Gaussian-manifold metric at (mu, P) in the
/// tangent direction (dmu, dP):
/// `dmu^T P^-1 dmu + (1/2) trace( (P^-1 dP)^2 )`.
pub fn gauss_metric_ds2(p: &SpdMatrix, dmu: &DVector<f64>, dp: &SymMatrix) -> Result<f64> {
    if dmu.len() != p.dim() || dp.dim() != p.dim() {
        return Err(Error::DimensionMismatch {
            context: format!(
                "tangent pieces have dimensions {} and {}x{1}, base point is {}x{2}",
                dmu.len(),
                dp.dim(),
                p.dim()
            ),
        });
    }
    let chol = p
        .as_matrix()
        .clone()
        .cholesky()
        .expect("SpdMatrix is positive definite by construction");
    let mean_part = dmu.dot(&chol.solve(dmu));
    let a = chol.solve(dp.as_matrix());
    // trace(A^2) for A = P^-1 dP; A is similar to a symmetric matrix so the
    // trace is a sum of squared congruence eigenvalues, hence nonnegative.
    let mut trace_sq = 0.0;
    for i in 0..a.nrows() {
        for j in 0..a.ncols() {
            trace_sq += a[(i, j)] * a[(j, i)];
        }
    }
    Ok(mean_part + 0.5 * trace_sq)
}

/// Gradient in P of the squared shared-mean distance d^2(P, P0):
/// `P^-1 log(P P0^-1)`, evaluated in congruence coordinates as
/// `P0^-1/2 log(P0^-1/2 P P0^-1/2) P0^1/2 P^-1`, then symmetrized.
pub fn grad_fr2_cov(p: &SpdMatrix, p0: &SpdMatrix) -> Result<SymMatrix> {
    check_same_dim(p, p0)?;
    let s0 = matfun::spd_sqrt(p0)?;
    let s0_inv = s0.inverse_matrix()?;
    let w = SpdMatrix::new(matfun::symmetrize(&(&s0_inv * p.as_matrix() * &s0_inv)))?;
    let log_w = matfun::spd_log(&w)?;
    let p_inv = p.inverse_matrix()?;
    let grad = &s0_inv * log_w.as_matrix() * s0.as_matrix() * p_inv;
    SymMatrix::new(matfun::symmetrize(&grad))
}

fn check_same_dim(p1: &SpdMatrix, p2: &SpdMatrix) -> Result<()> {
    if p1.dim() != p2.dim() {
        return Err(Error::DimensionMismatch {
            context: format!("covariances are {}x{0} and {}x{1}", p1.dim(), p2.dim()),
        });
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha12Rng;
    use rand_distr::StandardNormal;

    fn rng(seed: u64) -> ChaCha12Rng {
        ChaCha12Rng::seed_from_u64(seed)
    }

    #[test]
    fn mean_distance_is_mahalanobis() {
        let p = SpdMatrix::from_diagonal(&[4.0, 1.0]).unwrap();
        let mu1 = DVector::from_row_slice(&[2.0, 0.0]);
        let mu2 = DVector::from_row_slice(&[0.0, 0.0]);
        // (2,0) under P = diag(4,1): sqrt(4/4) = 1.
        assert_relative_eq!(
            fr_distance_gauss_mean(&mu1, &mu2, &p).unwrap(),
            1.0,
            max_relative = 1e-14
        );
        assert_eq!(fr_distance_gauss_mean(&mu1, &mu1, &p).unwrap(), 0.0);
    }

    #[test]
    fn bhattacharyya_arc_matches_grid_quadrature() {
        // 1-D, different mean and variance. The scalar affinity is
        // sqrt(2 s1 s2 / (s1^2 + s2^2)) * exp(-dmu^2 / (4 (s1^2 + s2^2))).
        let a = GaussianState::new(
            DVector::from_row_slice(&[0.0]),
            SpdMatrix::from_diagonal(&[1.0]).unwrap(),
        )
        .unwrap();
        let b = GaussianState::new(
            DVector::from_row_slice(&[0.7]),
            SpdMatrix::from_diagonal(&[1.8]).unwrap(),
        )
        .unwrap();
        let closed = gauss_bhattacharyya_arc(&a, &b).unwrap();
        let (s1, s2) = (1.0f64, 1.8f64.sqrt());
        let scalar = ((2.0 * s1 * s2 / (s1 * s1 + s2 * s2)).sqrt()
            * (-0.49 / (4.0 * (s1 * s1 + s2 * s2))).exp())
        .acos();
        assert_relative_eq!(closed, scalar, max_relative = 1e-14);

        let spec = GridSpec::new(vec![-14.0], vec![15.0], vec![4096]).unwrap();
        let quad = fr_distance_grid(
            &gaussian_to_grid(&a, &spec).unwrap(),
            &gaussian_to_grid(&b, &spec).unwrap(),
        )
        .unwrap();
        assert_relative_eq!(closed, quad, epsilon = 1e-9);

        // 2-D with correlation, against quadrature on a planar grid.
        let a2 = GaussianState::new(
            DVector::from_row_slice(&[0.0, 0.0]),
            SpdMatrix::new(DMatrix::from_row_slice(2, 2, &[1.0, 0.3, 0.3, 0.8])).unwrap(),
        )
        .unwrap();
        let b2 = GaussianState::new(
            DVector::from_row_slice(&[0.5, -0.2]),
            SpdMatrix::new(DMatrix::from_row_slice(2, 2, &[1.4, -0.2, -0.2, 1.1])).unwrap(),
        )
        .unwrap();
        let closed2 = gauss_bhattacharyya_arc(&a2, &b2).unwrap();
        let spec2 = GridSpec::new(vec![-11.0, -11.0], vec![11.5, 10.6], vec![448, 448]).unwrap();
        let quad2 = fr_distance_grid(
            &gaussian_to_grid(&a2, &spec2).unwrap(),
            &gaussian_to_grid(&b2, &spec2).unwrap(),
        )
        .unwrap();
        assert_relative_eq!(closed2, quad2, epsilon = 1e-8);

        // Coincident laws sit at arc distance zero.
        assert!(gauss_bhattacharyya_arc(&a2, &a2).unwrap() < 1e-7);
        // Dimension mismatch is rejected.
        assert!(gauss_bhattacharyya_arc(&a, &a2).is_err());
    }

    #[test]
    fn cov_distance_isotropic_example() {
        // P1 = I, P2 = e^2 I in dimension 2: each eigenvalue contributes
        // (1/2) * 4, so d = sqrt(4) = 2.
        let e2 = std::f64::consts::E * std::f64::consts::E;
        let p1 = SpdMatrix::from_diagonal(&[1.0, 1.0]).unwrap();
        let p2 = SpdMatrix::from_diagonal(&[e2, e2]).unwrap();
        assert_relative_eq!(
            fr_distance_gauss_cov(&p1, &p2).unwrap(),
            2.0,
            max_relative = 1e-12
        );
    }

    #[test]
    fn cov_distance_routes_agree() {
        let mut r = rng(101);
        for _ in 0..100 {
            let dim = r.random_range(1..=6usize);
            let p1 = SpdMatrix::random_with_condition(dim, 20.0, &mut r);
            let p2 = SpdMatrix::random_with_condition(dim, 20.0, &mut r);
            let a = cov_distance_via_log(&p1, &p2).unwrap();
            let b = cov_distance_via_geneig(&p1, &p2).unwrap();
            assert!((a - b).abs() <= 1e-12 * a.max(1.0), "dim {dim}: {a} vs {b}");
        }
    }

    #[test]
    fn cov_distance_symmetry_and_inversion() {
        let mut r = rng(103);
        let p1 = SpdMatrix::random_with_condition(3, 30.0, &mut r);
        let p2 = SpdMatrix::random_with_condition(3, 30.0, &mut r);
        let d12 = fr_distance_gauss_cov(&p1, &p2).unwrap();
        let d21 = fr_distance_gauss_cov(&p2, &p1).unwrap();
        assert_relative_eq!(d12, d21, max_relative = 1e-11);
        // Inversion isometry: d(P1^-1, P2^-1) = d(P1, P2).
        let p1i = SpdMatrix::new(p1.inverse_matrix().unwrap()).unwrap();
        let p2i = SpdMatrix::new(p2.inverse_matrix().unwrap()).unwrap();
        let dinv = fr_distance_gauss_cov(&p1i, &p2i).unwrap();
        assert_relative_eq!(d12, dinv, max_relative = 1e-10);
    }

    #[test]
    fn cov_distance_affine_invariance() {
        // d(A P1 A^T, A P2 A^T) = d(P1, P2) for any invertible A.
        let mut r = rng(107);
        for _ in 0..10 {
            let p1 = SpdMatrix::random_with_condition(3, 20.0, &mut r);
            let p2 = SpdMatrix::random_with_condition(3, 20.0, &mut r);
            let mut a = DMatrix::from_fn(3, 3, |_, _| r.sample::<f64, _>(StandardNormal));
            a += 2.5 * DMatrix::identity(3, 3);
            let q1 =
                SpdMatrix::new(matfun::symmetrize(&(&a * p1.as_matrix() * a.transpose()))).unwrap();
            let q2 =
                SpdMatrix::new(matfun::symmetrize(&(&a * p2.as_matrix() * a.transpose()))).unwrap();
            let d = fr_distance_gauss_cov(&p1, &p2).unwrap();
            let dt = fr_distance_gauss_cov(&q1, &q2).unwrap();
            assert!((d - dt).abs() <= 1e-10 * d.max(1.0), "{d} vs {dt}");
        }
    }

    #[test]
    fn metric_scalar_line_element() {
        // ds^2 at P = (s^2) with dP = (ds2): (1/2) (ds2 / s^2)^2.
        let p = SpdMatrix::from_diagonal(&[2.0]).unwrap();
        let dp = SymMatrix::new(DMatrix::from_element(1, 1, 0.3)).unwrap();
        let dmu = DVector::from_row_slice(&[0.5]);
        let got = gauss_metric_ds2(&p, &dmu, &dp).unwrap();
        let expect = 0.5 * 0.5 / 2.0 + 0.5 * (0.3f64 / 2.0).powi(2);
        assert_relative_eq!(got, expect, max_relative = 1e-14);
    }

    #[test]
    fn metric_is_positive_on_random_tangents() {
        let mut r = rng(109);
        for _ in 0..20 {
            let p = SpdMatrix::random_with_condition(3, 40.0, &mut r);
            let dmu = DVector::from_fn(3, |_, _| r.sample::<f64, _>(StandardNormal));
            let g = DMatrix::from_fn(3, 3, |_, _| r.sample::<f64, _>(StandardNormal));
            let dp = SymMatrix::new(matfun::symmetrize(&g)).unwrap();
            let ds2 = gauss_metric_ds2(&p, &dmu, &dp).unwrap();
            assert!(ds2 >= 0.0);
            if dmu.norm() + dp.norm() > 1e-12 {
                assert!(ds2 > 0.0);
            }
        }
    }

    #[test]
    fn gradient_scalar_closed_form() {
        // d^2(P, P0) = (1/2) ln^2(P/P0); gradient ln(P/P0)/P. At P = e^2 P0
        // this is 2/(e^2 P0).
        let p0v = 0.7;
        let p0 = SpdMatrix::from_diagonal(&[p0v]).unwrap();
        let e2 = std::f64::consts::E * std::f64::consts::E;
        let p = SpdMatrix::from_diagonal(&[e2 * p0v]).unwrap();
        let g = grad_fr2_cov(&p, &p0).unwrap();
        assert_relative_eq!(g[(0, 0)], 2.0 / (e2 * p0v), max_relative = 1e-12);
        // Gradient vanishes exactly at the base point.
        let g0 = grad_fr2_cov(&p0, &p0).unwrap();
        assert!(g0.norm() < 1e-14);
    }

    #[test]
    fn gradient_matches_finite_differences() {
        let mut r = rng(113);
        let eps = 1e-5;
        for trial in 0..20 {
            let p = SpdMatrix::random_with_condition(3, 50.0, &mut r);
            let p0 = SpdMatrix::random_with_condition(3, 50.0, &mut r);
            let grad = grad_fr2_cov(&p, &p0).unwrap();
            let gm = DMatrix::from_fn(3, 3, |_, _| r.sample::<f64, _>(StandardNormal));
            let z = matfun::symmetrize(&gm);
            let d2 = |m: &DMatrix<f64>| -> f64 {
                let sp = SpdMatrix::new(m.clone()).unwrap();
                let d = fr_distance_gauss_cov(&sp, &p0).unwrap();
                d * d
            };
            let plus = d2(&(p.as_matrix() + eps * &z));
            let minus = d2(&(p.as_matrix() - eps * &z));
            let fd = (plus - minus) / (2.0 * eps);
            let directional = (grad.as_matrix().transpose() * &z).trace();
            assert!(
                (fd - directional).abs() <= 1e-6 * directional.abs().max(1.0),
                "trial {trial}: fd {fd} vs grad {directional}"
            );
        }
    }
}
