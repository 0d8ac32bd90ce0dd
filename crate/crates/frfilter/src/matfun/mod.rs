//! Dense matrix functions on small symmetric positive definite matrices.
//!
//! Everything here goes through explicit spectral decompositions: for the
//! state dimensions this crate targets (n <= 16) that is both faster and far
//! better conditioned than truncated series. The only series expansions left
//! are the scaling-and-squaring exponential and the inverse
//! scaling-and-squaring logarithm for *general* square matrices, which the
//! symmetric paths never use.
//!
//! Conventions:
//! * `vectorize` stacks columns, so `vectorize(A*B*C) = kron(C^T, A) * vectorize(B)`.
//! * `kron_sum(A, B) = kron(A, I) + kron(I, B)`.
//! * Functions returning symmetric matrices symmetrize the result before
//!   handing it back; the wrappers below make that explicit in the types.

pub mod quad;

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::StandardNormal;
use std::ops::Deref;

use crate::error::{Error, Result};

/// Largest relative Frobenius asymmetry accepted by the symmetric wrappers.
pub const SYMMETRY_RTOL: f64 = 1e-12;
/// A matrix counts as positive definite when its smallest eigenvalue exceeds
/// this fraction of the largest one.
pub const SPD_EIG_RTOL: f64 = 1e-12;
/// Relative Frobenius tolerance for eigendecomposition reconstruction.
pub const EIG_RECONSTRUCTION_RTOL: f64 = 1e-10;

/// Symmetric part (M + M^T)/2.
pub fn symmetrize(m: &DMatrix<f64>) -> DMatrix<f64> {
    0.5 * (m + m.transpose())
}

fn relative_asymmetry(m: &DMatrix<f64>) -> f64 {
    let scale = m.norm();
    if scale == 0.0 {
        return 0.0;
    }
    (m - m.transpose()).norm() / scale
}

fn check_square(m: &DMatrix<f64>) -> Result<()> {
    if m.nrows() != m.ncols() {
        return Err(Error::NotSquare {
            rows: m.nrows(),
            cols: m.ncols(),
        });
    }
    Ok(())
}

fn check_finite(m: &DMatrix<f64>, context: &str) -> Result<()> {
    if m.iter().any(|x| !x.is_finite()) {
        return Err(Error::NotFinite {
            context: context.to_string(),
        });
    }
    Ok(())
}

/// A square matrix guaranteed symmetric: validated on construction and
/// symmetrized exactly, so downstream code never re-checks.
#[derive(Debug, Clone, PartialEq)]
pub struct SymMatrix(DMatrix<f64>);

impl SymMatrix {
    /// Accepts a square matrix whose relative asymmetry is below
    /// [`SYMMETRY_RTOL`] and stores its exact symmetric part.
    pub fn new(m: DMatrix<f64>) -> Result<Self> {
        check_square(&m)?;
        check_finite(&m, "SymMatrix::new")?;
        let asym = relative_asymmetry(&m);
        if asym > SYMMETRY_RTOL {
            return Err(Error::NotSymmetric {
                asymmetry: asym,
                tol: SYMMETRY_RTOL,
            });
        }
        Ok(Self(symmetrize(&m)))
    }

    pub fn zeros(dim: usize) -> Self {
        Self(DMatrix::zeros(dim, dim))
    }

    pub fn dim(&self) -> usize {
        self.0.nrows()
    }

    pub fn as_matrix(&self) -> &DMatrix<f64> {
        &self.0
    }

    pub fn into_matrix(self) -> DMatrix<f64> {
        self.0
    }
}

impl Deref for SymMatrix {
    type Target = DMatrix<f64>;
    fn deref(&self) -> &DMatrix<f64> {
        &self.0
    }
}

/// A symmetric positive definite matrix.
///
/// Construction symmetrizes the input and verifies, via a full symmetric
/// eigendecomposition, that the smallest eigenvalue is positive and exceeds
/// [`SPD_EIG_RTOL`] times the largest. Numerically semidefinite inputs are
/// rejected rather than silently regularized.
#[derive(Debug, Clone, PartialEq)]
pub struct SpdMatrix(DMatrix<f64>);

impl SpdMatrix {
    pub fn new(m: DMatrix<f64>) -> Result<Self> {
        check_square(&m)?;
        check_finite(&m, "SpdMatrix::new")?;
        let asym = relative_asymmetry(&m);
        if asym > SYMMETRY_RTOL {
            return Err(Error::NotSymmetric {
                asymmetry: asym,
                tol: SYMMETRY_RTOL,
            });
        }
        let sym = symmetrize(&m);
        let (eigenvalues, _) = sym_eig_raw(&sym)?;
        let max_eig = eigenvalues[0];
        let min_eig = eigenvalues[eigenvalues.len() - 1];
        if !(min_eig > 0.0 && min_eig > SPD_EIG_RTOL * max_eig) {
            return Err(Error::NotPositiveDefinite { min_eig, max_eig });
        }
        Ok(Self(sym))
    }

    pub(crate) fn new_unchecked(m: DMatrix<f64>) -> Self {
        Self(m)
    }

    pub fn identity(dim: usize) -> Self {
        Self(DMatrix::identity(dim, dim))
    }

    pub fn from_diagonal(diag: &[f64]) -> Result<Self> {
        Self::new(DMatrix::from_diagonal(&DVector::from_row_slice(diag)))
    }

    /// Random SPD matrix with spectrum log-uniform in
    /// [1/sqrt(condition), sqrt(condition)] and a Haar-ish random eigenbasis.
    /// Deterministic given the generator state; used by the self-test suites
    /// and the geometry benchmarks.
    pub fn random_with_condition(dim: usize, condition: f64, rng: &mut impl Rng) -> Self {
        assert!(dim >= 1 && condition >= 1.0);
        let gauss = DMatrix::from_fn(dim, dim, |_, _| rng.sample::<f64, _>(StandardNormal));
        let q = gauss.qr().q();
        let half_log = 0.5 * condition.ln();
        let eigs = DVector::from_fn(dim, |_, _| (rng.random_range(-1.0..=1.0) * half_log).exp());
        let m = &q * DMatrix::from_diagonal(&eigs) * q.transpose();
        Self(symmetrize(&m))
    }

    pub fn dim(&self) -> usize {
        self.0.nrows()
    }

    pub fn as_matrix(&self) -> &DMatrix<f64> {
        &self.0
    }

    pub fn into_matrix(self) -> DMatrix<f64> {
        self.0
    }

    /// Inverse through a Cholesky factorization, symmetrized.
    pub fn inverse_matrix(&self) -> Result<DMatrix<f64>> {
        let chol = self.0.clone().cholesky().ok_or_else(|| Error::Singular {
            context: "Cholesky factorization of an SPD matrix".to_string(),
        })?;
        Ok(symmetrize(&chol.inverse()))
    }
}

impl Deref for SpdMatrix {
    type Target = DMatrix<f64>;
    fn deref(&self) -> &DMatrix<f64> {
        &self.0
    }
}

/// Ordered spectral decomposition X = V diag(eigenvalues) V^T of an SPD
/// matrix: eigenvalues descending and strictly positive, columns of
/// `eigenvectors` orthonormal.
#[derive(Debug, Clone)]
pub struct SpectralDecomp {
    pub eigenvalues: DVector<f64>,
    pub eigenvectors: DMatrix<f64>,
}

impl SpectralDecomp {
    /// V f(diag) V^T, the standard spectral function calculus.
    pub fn apply(&self, f: impl Fn(f64) -> f64) -> DMatrix<f64> {
        let mapped = self.eigenvalues.map(f);
        &self.eigenvectors * DMatrix::from_diagonal(&mapped) * self.eigenvectors.transpose()
    }

    /// Reconstructs the original matrix.
    pub fn matrix(&self) -> DMatrix<f64> {
        self.apply(|x| x)
    }
}

/// Symmetric eigendecomposition with descending eigenvalue order.
/// No positivity requirement; shared by the SPD and merely-symmetric paths.
fn sym_eig_raw(m: &DMatrix<f64>) -> Result<(DVector<f64>, DMatrix<f64>)> {
    let n = m.nrows();
    let se = nalgebra::linalg::SymmetricEigen::try_new(m.clone(), f64::EPSILON, 10_000)
        .ok_or_else(|| Error::EigenFailed {
            condition: condition_estimate(m),
        })?;
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| se.eigenvalues[b].total_cmp(&se.eigenvalues[a]));
    let eigenvalues = DVector::from_fn(n, |i, _| se.eigenvalues[order[i]]);
    let mut eigenvectors = DMatrix::zeros(n, n);
    for (dst, &src) in order.iter().enumerate() {
        eigenvectors.set_column(dst, &se.eigenvectors.column(src));
    }
    Ok((eigenvalues, eigenvectors))
}

fn condition_estimate(m: &DMatrix<f64>) -> f64 {
    match m.clone().try_inverse() {
        Some(inv) => m.norm() * inv.norm(),
        None => f64::INFINITY,
    }
}

/// Spectral decomposition of an SPD matrix.
///
/// Verifies orthonormality of the eigenvector basis and reconstruction of the
/// input to within [`EIG_RECONSTRUCTION_RTOL`]; a violation reports
/// [`Error::EigenFailed`] with a condition estimate.
pub fn sym_eig(x: &SpdMatrix) -> Result<SpectralDecomp> {
    let (eigenvalues, eigenvectors) = sym_eig_raw(x)?;
    let n = x.dim();
    let ortho = (eigenvectors.transpose() * &eigenvectors - DMatrix::identity(n, n)).norm();
    let decomp = SpectralDecomp {
        eigenvalues,
        eigenvectors,
    };
    let recon_err = (decomp.matrix() - x.as_matrix()).norm() / x.norm().max(f64::MIN_POSITIVE);
    if ortho > EIG_RECONSTRUCTION_RTOL || recon_err > EIG_RECONSTRUCTION_RTOL {
        return Err(Error::EigenFailed {
            condition: condition_estimate(x),
        });
    }
    Ok(decomp)
}

/// Principal matrix logarithm of an SPD matrix (spectral path).
pub fn spd_log(x: &SpdMatrix) -> Result<SymMatrix> {
    let d = sym_eig(x)?;
    SymMatrix::new(symmetrize(&d.apply(f64::ln)))
}

/// Matrix exponential of a symmetric matrix (spectral path). The result is
/// SPD by construction; eigenvalues beyond the f64 exponent range report
/// overflow instead of returning infinities.
pub fn spd_exp(z: &SymMatrix) -> Result<SpdMatrix> {
    let (eigenvalues, eigenvectors) = sym_eig_raw(z)?;
    if eigenvalues.iter().any(|l| *l > 709.0) {
        return Err(Error::Overflow {
            context: "spd_exp eigenvalue exceeds exp range".to_string(),
        });
    }
    let d = SpectralDecomp {
        eigenvalues,
        eigenvectors,
    };
    Ok(SpdMatrix::new_unchecked(symmetrize(&d.apply(f64::exp))))
}

/// Principal square root of an SPD matrix (spectral path).
pub fn spd_sqrt(x: &SpdMatrix) -> Result<SpdMatrix> {
    let d = sym_eig(x)?;
    Ok(SpdMatrix::new_unchecked(symmetrize(&d.apply(f64::sqrt))))
}

/// Matrix exponential of a general square matrix by scaling and squaring
/// with a convergent Taylor kernel on the scaled block.
pub fn exp_general(a: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    check_square(a)?;
    check_finite(a, "exp_general")?;
    let n = a.nrows();
    let norm = a.norm();
    let squarings = if norm > 0.5 {
        (norm / 0.5).log2().ceil() as u32
    } else {
        0
    };
    if squarings > 60 {
        return Err(Error::Overflow {
            context: format!("exp_general input norm {norm:.3e} too large"),
        });
    }
    let b = a / 2f64.powi(squarings as i32);
    let mut term = DMatrix::identity(n, n);
    let mut sum = DMatrix::identity(n, n);
    for k in 1..=40 {
        term = &term * &b / k as f64;
        sum += &term;
        if term.norm() <= 1e-17 * sum.norm() {
            break;
        }
    }
    let mut result = sum;
    for _ in 0..squarings {
        result = &result * &result;
    }
    check_finite(&result, "exp_general result").map_err(|_| Error::Overflow {
        context: "exp_general result is not finite".to_string(),
    })?;
    Ok(result)
}

/// Principal logarithm of a general square matrix with spectrum off the
/// closed negative real axis, by inverse scaling and squaring: Denman-Beavers
/// square roots until the iterate is near the identity, then a log(I + X)
/// series, then doubling. Covers the similar-to-SPD matrices the geometry
/// layer produces; it is not a general-purpose log for defective inputs.
pub fn log_general(a: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    check_square(a)?;
    check_finite(a, "log_general")?;
    let n = a.nrows();
    let identity = DMatrix::identity(n, n);
    let mut m = a.clone();
    let mut doublings = 0u32;
    while (&m - &identity).norm() > 0.25 {
        if doublings >= 60 {
            return Err(Error::NoConvergence {
                context: "log_general square-root phase".to_string(),
                residual: (&m - &identity).norm(),
                iterations: doublings as usize,
            });
        }
        m = denman_beavers_sqrt(&m)?;
        doublings += 1;
    }
    let x = &m - &identity;
    let mut power = x.clone();
    let mut sum = x.clone();
    for j in 2..=80 {
        power = &power * &x;
        let term = &power / j as f64;
        if j % 2 == 0 {
            sum -= &term;
        } else {
            sum += &term;
        }
        if term.norm() <= 1e-17 * sum.norm().max(f64::MIN_POSITIVE) {
            break;
        }
    }
    let result = sum * 2f64.powi(doublings as i32);
    // Round-trip guard: the exponential of the computed log must recover the
    // input, otherwise the spectrum was outside this routine's reach.
    let roundtrip = exp_general(&result)?;
    let err = (&roundtrip - a).norm() / a.norm().max(f64::MIN_POSITIVE);
    if err > 1e-9 {
        return Err(Error::NoConvergence {
            context: "log_general round-trip check".to_string(),
            residual: err,
            iterations: doublings as usize,
        });
    }
    Ok(result)
}

/// One Denman-Beavers square root: the coupled iteration
/// Y <- (Y + Z^-1)/2, Z <- (Z + Y^-1)/2 from (A, I) converges quadratically
/// to (A^(1/2), A^(-1/2)) for spectra off the closed negative real axis.
fn denman_beavers_sqrt(a: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let n = a.nrows();
    let mut y = a.clone();
    let mut z = DMatrix::identity(n, n);
    let mut prev_delta = f64::INFINITY;
    for iter in 0..100 {
        let y_inv = y.clone().try_inverse().ok_or_else(|| Error::Singular {
            context: "Denman-Beavers iterate".to_string(),
        })?;
        let z_inv = z.clone().try_inverse().ok_or_else(|| Error::Singular {
            context: "Denman-Beavers iterate".to_string(),
        })?;
        let y_next = 0.5 * (&y + &z_inv);
        let z_next = 0.5 * (&z + &y_inv);
        let delta = (&y_next - &y).norm();
        y = y_next;
        z = z_next;
        let scale = y.norm().max(f64::MIN_POSITIVE);
        // Quadratic convergence squares the step size each pass; once the
        // step stops shrinking the iteration sits on its roundoff floor.
        if delta <= 1e-14 * scale || (iter >= 4 && delta >= 0.5 * prev_delta) {
            return Ok(y);
        }
        prev_delta = delta;
    }
    Err(Error::NoConvergence {
        context: "Denman-Beavers square root".to_string(),
        residual: (&y * &y - a).norm(),
        iterations: 100,
    })
}

/// Column-stacking vectorization.
pub fn vectorize(m: &DMatrix<f64>) -> DVector<f64> {
    DVector::from_column_slice(m.as_slice())
}

/// Kronecker product A (x) B.
pub fn kron(a: &DMatrix<f64>, b: &DMatrix<f64>) -> DMatrix<f64> {
    a.kronecker(b)
}

/// Kronecker sum A (+) B = A (x) I + I (x) B for square A (n x n), B (m x m).
pub fn kron_sum(a: &DMatrix<f64>, b: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    check_square(a)?;
    check_square(b)?;
    let ia = DMatrix::identity(a.nrows(), a.nrows());
    let ib = DMatrix::identity(b.nrows(), b.nrows());
    Ok(a.kronecker(&ib) + ia.kronecker(b))
}

/// Jacobian, in vectorized coordinates, of the map B -> X^T B + B X:
/// X^T (+) X. For X = diag(1, 2) this is diag(2, 3, 3, 4).
pub fn jacobian_square(x: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    check_square(x)?;
    kron_sum(&x.transpose(), x)
}

/// Stable divided difference of the scalar logarithm:
/// (ln a - ln b)/(a - b), continued by 1/a at coincident arguments.
fn log_divided_difference(a: f64, b: f64) -> f64 {
    let d = a - b;
    if d == 0.0 {
        1.0 / a
    } else {
        (d / b).ln_1p() / d
    }
}

/// Frechet derivative of the matrix logarithm at SPD X applied to the
/// symmetric direction Z.
///
/// In the eigenbasis of X the derivative acts entrywise through the divided
/// differences (ln l_i - ln l_j)/(l_i - l_j), with the 1/l_i limit on the
/// diagonal and at coincident eigenvalue pairs.
pub fn frechet_log(x: &SpdMatrix, z: &SymMatrix) -> Result<SymMatrix> {
    if x.dim() != z.dim() {
        return Err(Error::DimensionMismatch {
            context: format!("frechet_log: X is {}x{0}, Z is {1}x{1}", x.dim(), z.dim()),
        });
    }
    let d = sym_eig(x)?;
    let mut w = d.eigenvectors.transpose() * z.as_matrix() * &d.eigenvectors;
    let n = x.dim();
    for i in 0..n {
        for j in 0..n {
            w[(i, j)] *= log_divided_difference(d.eigenvalues[i], d.eigenvalues[j]);
        }
    }
    let out = &d.eigenvectors * w * d.eigenvectors.transpose();
    SymMatrix::new(symmetrize(&out))
}

/// X^-1 ln X for SPD X, evaluated spectrally as V diag(ln l / l) V^T.
/// Equals the resolvent integral of the log's derivative applied to ln X.
pub fn loginv_integral(x: &SpdMatrix) -> Result<SymMatrix> {
    let d = sym_eig(x)?;
    SymMatrix::new(symmetrize(&d.apply(|l| l.ln() / l)))
}

/// Frobenius norm of the geometric-mean integral defect
/// `int_0^1 H^t M H^(1-t) dt - ln H`, with the integral evaluated by an
/// n-point Gauss-Legendre rule. Zero (to quadrature accuracy) exactly when
/// M = H^-1 ln H, which is how the filter's covariance update is certified.
pub fn log_mean_residual(h: &SpdMatrix, m: &SymMatrix, quad_order: usize) -> Result<f64> {
    if h.dim() != m.dim() {
        return Err(Error::DimensionMismatch {
            context: format!(
                "log_mean_residual: H is {}x{0}, M is {1}x{1}",
                h.dim(),
                m.dim()
            ),
        });
    }
    if quad_order == 0 {
        return Err(Error::OutOfRange {
            what: "quadrature order",
            details: "must be at least 1".to_string(),
        });
    }
    let d = sym_eig(h)?;
    let log_h = d.apply(f64::ln);
    let (nodes, weights) = quad::gauss_legendre_on(0.0, 1.0, quad_order);
    let n = h.dim();
    let mut integral = DMatrix::zeros(n, n);
    for (t, w) in nodes.iter().zip(&weights) {
        let h_t = d.apply(|l| l.powf(*t));
        let h_1mt = d.apply(|l| l.powf(1.0 - *t));
        integral += *w * h_t * m.as_matrix() * h_1mt;
    }
    Ok((integral - log_h).norm())
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use rand::SeedableRng;
    use rand_chacha::ChaCha12Rng;

    fn mat2(a: f64, b: f64, c: f64, d: f64) -> DMatrix<f64> {
        DMatrix::from_row_slice(2, 2, &[a, b, c, d])
    }

    fn spd2(a: f64, b: f64, c: f64, d: f64) -> SpdMatrix {
        SpdMatrix::new(mat2(a, b, c, d)).unwrap()
    }

    fn rng(seed: u64) -> ChaCha12Rng {
        ChaCha12Rng::seed_from_u64(seed)
    }

    fn random_sym(dim: usize, rng: &mut impl Rng) -> SymMatrix {
        let g = DMatrix::from_fn(dim, dim, |_, _| rng.sample::<f64, _>(StandardNormal));
        SymMatrix::new(symmetrize(&g)).unwrap()
    }

    /// Oracle: the resolvent integral int_0^inf (X+tI)^-1 Z (X+tI)^-1 dt,
    /// mapped to [0,1] by t = s/(1-s) and integrated with 64-point
    /// Gauss-Legendre. Uses only LU inverses, no spectral machinery, so it is
    /// an independent check on the eigenbasis formulas.
    fn resolvent_integral_oracle(x: &DMatrix<f64>, z: &DMatrix<f64>) -> DMatrix<f64> {
        let n = x.nrows();
        let (nodes, weights) = quad::gauss_legendre_on(0.0, 1.0, 64);
        let mut total = DMatrix::zeros(n, n);
        for (s, w) in nodes.iter().zip(&weights) {
            let tau = s / (1.0 - s);
            let jac = 1.0 / ((1.0 - s) * (1.0 - s));
            let resolvent = (x + tau * DMatrix::identity(n, n))
                .try_inverse()
                .expect("resolvent inverse");
            total += *w * jac * &resolvent * z * &resolvent;
        }
        total
    }

    #[test]
    fn spd_construction_symmetrizes_and_checks() {
        let x = spd2(2.0, 1.0, 1.0, 2.0);
        assert_eq!(x.dim(), 2);
        // Indefinite input: eigenvalues 3 and -1.
        let err = SpdMatrix::new(mat2(1.0, 2.0, 2.0, 1.0)).unwrap_err();
        assert!(matches!(err, Error::NotPositiveDefinite { .. }));
        // Asymmetric input beyond tolerance.
        let err = SpdMatrix::new(mat2(2.0, 1.0, 1.1, 2.0)).unwrap_err();
        assert!(matches!(err, Error::NotSymmetric { .. }));
        // Non-square input.
        let err = SpdMatrix::new(DMatrix::zeros(2, 3)).unwrap_err();
        assert!(matches!(err, Error::NotSquare { .. }));
    }

    #[test]
    fn sym_eig_matches_hand_decomposition() {
        // [[2,1],[1,2]] has eigenpairs (3, (1,1)/sqrt2) and (1, (1,-1)/sqrt2).
        let x = spd2(2.0, 1.0, 1.0, 2.0);
        let d = sym_eig(&x).unwrap();
        assert_relative_eq!(d.eigenvalues[0], 3.0, max_relative = 1e-12);
        assert_relative_eq!(d.eigenvalues[1], 1.0, max_relative = 1e-12);
        let s = 1.0 / 2.0f64.sqrt();
        for (col, expect) in [(0, [s, s]), (1, [s, -s])] {
            let v = d.eigenvectors.column(col);
            // Eigenvector signs are arbitrary; normalize on the first entry.
            let sign = if v[0] >= 0.0 { 1.0 } else { -1.0 };
            assert_relative_eq!(sign * v[0], expect[0], epsilon = 1e-12);
            assert_relative_eq!(sign * v[1], expect[1], epsilon = 1e-12);
        }
        assert!((d.matrix() - x.as_matrix()).norm() < 1e-12);
        let ortho = (d.eigenvectors.transpose() * &d.eigenvectors - DMatrix::identity(2, 2)).norm();
        assert!(ortho < 1e-12);
    }

    #[test]
    fn spd_log_hand_value() {
        // log [[2,1],[1,2]] = (ln 3 / 2) * [[1,1],[1,1]]: the unit eigenvalue
        // contributes nothing.
        let x = spd2(2.0, 1.0, 1.0, 2.0);
        let l = spd_log(&x).unwrap();
        let half_ln3 = 3.0f64.ln() / 2.0;
        let expect = mat2(half_ln3, half_ln3, half_ln3, half_ln3);
        assert!((l.as_matrix() - expect).norm() < 1e-12);
    }

    #[test]
    fn spd_sqrt_hand_value() {
        let x = spd2(2.0, 1.0, 1.0, 2.0);
        let r = spd_sqrt(&x).unwrap();
        let s3 = 3.0f64.sqrt();
        let expect = mat2(
            (s3 + 1.0) / 2.0,
            (s3 - 1.0) / 2.0,
            (s3 - 1.0) / 2.0,
            (s3 + 1.0) / 2.0,
        );
        assert!((r.as_matrix() - expect).norm() < 1e-12);
        assert!((r.as_matrix() * r.as_matrix() - x.as_matrix()).norm() < 1e-12);
    }

    #[test]
    fn exp_log_roundtrip() {
        let mut r = rng(11);
        for dim in 1..=5 {
            let x = SpdMatrix::random_with_condition(dim, 50.0, &mut r);
            let back = spd_exp(&spd_log(&x).unwrap()).unwrap();
            assert!(
                (back.as_matrix() - x.as_matrix()).norm() < 1e-11 * x.norm(),
                "dim {dim}"
            );
        }
    }

    #[test]
    fn exp_general_nilpotent_is_exact() {
        let a = mat2(0.0, 1.0, 0.0, 0.0);
        let e = exp_general(&a).unwrap();
        assert!((e - mat2(1.0, 1.0, 0.0, 1.0)).norm() < 1e-15);
    }

    #[test]
    fn exp_general_inverse_identity() {
        let mut r = rng(17);
        for _ in 0..10 {
            let a = DMatrix::from_fn(3, 3, |_, _| r.sample::<f64, _>(StandardNormal));
            let prod = exp_general(&a).unwrap() * exp_general(&(-&a)).unwrap();
            assert!((prod - DMatrix::identity(3, 3)).norm() < 1e-10);
        }
        let z = exp_general(&DMatrix::zeros(4, 4)).unwrap();
        assert!((z - DMatrix::identity(4, 4)).norm() == 0.0);
    }

    #[test]
    fn exp_general_matches_spectral_path_on_symmetric_input() {
        let mut r = rng(23);
        let x = SpdMatrix::random_with_condition(4, 10.0, &mut r);
        let z = spd_log(&x).unwrap();
        let via_general = exp_general(z.as_matrix()).unwrap();
        let via_spectral = spd_exp(&z).unwrap();
        assert!((via_general - via_spectral.as_matrix()).norm() < 1e-12 * x.norm());
    }

    #[test]
    fn vectorize_kron_identity() {
        // vec(A B C) = (C^T kron A) vec(B) for conformable shapes.
        let mut r = rng(5);
        let a = DMatrix::from_fn(2, 3, |_, _| r.sample::<f64, _>(StandardNormal));
        let b = DMatrix::from_fn(3, 4, |_, _| r.sample::<f64, _>(StandardNormal));
        let c = DMatrix::from_fn(4, 2, |_, _| r.sample::<f64, _>(StandardNormal));
        let lhs = vectorize(&(&a * &b * &c));
        let rhs = kron(&c.transpose(), &a) * vectorize(&b);
        assert!((lhs - rhs).norm() < 1e-13);
    }

    #[test]
    fn kron_mixed_product_identity() {
        // (A kron B)(C kron D) = (AC) kron (BD).
        let mut r = rng(7);
        let a = DMatrix::from_fn(2, 2, |_, _| r.sample::<f64, _>(StandardNormal));
        let b = DMatrix::from_fn(3, 3, |_, _| r.sample::<f64, _>(StandardNormal));
        let c = DMatrix::from_fn(2, 2, |_, _| r.sample::<f64, _>(StandardNormal));
        let d = DMatrix::from_fn(3, 3, |_, _| r.sample::<f64, _>(StandardNormal));
        let lhs = kron(&a, &b) * kron(&c, &d);
        let rhs = kron(&(&a * &c), &(&b * &d));
        assert!((lhs - rhs).norm() < 1e-12);
    }

    #[test]
    fn kron_sum_diagonal_example() {
        let a = DMatrix::from_diagonal(&DVector::from_row_slice(&[1.0, 2.0]));
        let b = DMatrix::from_diagonal(&DVector::from_row_slice(&[10.0, 20.0]));
        let ks = kron_sum(&a, &b).unwrap();
        let expect = DMatrix::from_diagonal(&DVector::from_row_slice(&[11.0, 21.0, 12.0, 22.0]));
        assert_eq!(ks, expect);
    }

    #[test]
    fn jacobian_square_diagonal_example() {
        let x = DMatrix::from_diagonal(&DVector::from_row_slice(&[1.0, 2.0]));
        let j = jacobian_square(&x).unwrap();
        let expect = DMatrix::from_diagonal(&DVector::from_row_slice(&[2.0, 3.0, 3.0, 4.0]));
        assert_eq!(j, expect);
    }

    #[test]
    fn jacobian_square_matches_vectorized_map() {
        // X^T (+) X acting on vec(B) is the two-sided product map:
        // vec(X B + B X), the derivative of X -> X^2 in direction B.
        let mut r = rng(29);
        let x = DMatrix::from_fn(3, 3, |_, _| r.sample::<f64, _>(StandardNormal));
        let b = DMatrix::from_fn(3, 3, |_, _| r.sample::<f64, _>(StandardNormal));
        let direct = vectorize(&(&x * &b + &b * &x));
        let via_jac = jacobian_square(&x).unwrap() * vectorize(&b);
        assert!((direct - via_jac).norm() < 1e-12);
    }

    #[test]
    fn frechet_log_diagonal_and_offdiagonal_kernels() {
        // Diagonal X: diagonal directions scale by 1/l_i, off-diagonal ones by
        // the divided difference. X = diag(1, e^2) and Z = [[0,1],[1,0]] gives
        // (ln 1 - ln e^2)/(1 - e^2) = 2/(e^2 - 1) off the diagonal.
        let e2 = std::f64::consts::E * std::f64::consts::E;
        let x = SpdMatrix::from_diagonal(&[1.0, e2]).unwrap();
        let z = SymMatrix::new(mat2(0.0, 1.0, 1.0, 0.0)).unwrap();
        let dz = frechet_log(&x, &z).unwrap();
        let k = 2.0 / (e2 - 1.0);
        assert!((dz.as_matrix() - mat2(0.0, k, k, 0.0)).norm() < 1e-13);

        let zd = SymMatrix::new(mat2(1.0, 0.0, 0.0, 1.0)).unwrap();
        let dzd = frechet_log(&x, &zd).unwrap();
        assert!((dzd.as_matrix() - mat2(1.0, 0.0, 0.0, 1.0 / e2)).norm() < 1e-13);
    }

    #[test]
    fn frechet_log_handles_repeated_eigenvalues() {
        // X = 2I has a double eigenvalue; the kernel must fall back to 1/l.
        let x = SpdMatrix::from_diagonal(&[2.0, 2.0]).unwrap();
        let z = random_sym(2, &mut rng(3));
        let dz = frechet_log(&x, &z).unwrap();
        assert!((dz.as_matrix() - z.as_matrix() / 2.0).norm() < 1e-14);
    }

    #[test]
    fn frechet_log_is_linear() {
        let mut r = rng(41);
        let x = SpdMatrix::random_with_condition(4, 30.0, &mut r);
        let z1 = random_sym(4, &mut r);
        let z2 = random_sym(4, &mut r);
        let (a, b) = (0.7, -1.3);
        let combo = SymMatrix::new(a * z1.as_matrix() + b * z2.as_matrix()).unwrap();
        let lhs = frechet_log(&x, &combo).unwrap();
        let rhs = a * frechet_log(&x, &z1).unwrap().as_matrix()
            + b * frechet_log(&x, &z2).unwrap().as_matrix();
        assert!((lhs.as_matrix() - rhs).norm() < 1e-12);
    }

    #[test]
    fn frechet_log_matches_resolvent_quadrature() {
        let mut r = rng(43);
        for dim in [2usize, 3] {
            let x = SpdMatrix::random_with_condition(dim, 20.0, &mut r);
            let z = random_sym(dim, &mut r);
            let direct = frechet_log(&x, &z).unwrap();
            let oracle = resolvent_integral_oracle(x.as_matrix(), z.as_matrix());
            let defect = (direct.as_matrix() - oracle).norm();
            assert!(defect < 1e-10, "dim {dim}: defect {defect}");
        }
    }

    #[test]
    fn frechet_log_matches_finite_differences() {
        let mut r = rng(47);
        let x = SpdMatrix::random_with_condition(3, 50.0, &mut r);
        let z = random_sym(3, &mut r);
        let eps = 1e-5;
        let plus = SpdMatrix::new(x.as_matrix() + eps * z.as_matrix()).unwrap();
        let minus = SpdMatrix::new(x.as_matrix() - eps * z.as_matrix()).unwrap();
        let fd = (spd_log(&plus).unwrap().as_matrix() - spd_log(&minus).unwrap().as_matrix())
            / (2.0 * eps);
        let direct = frechet_log(&x, &z).unwrap();
        assert!(
            (direct.as_matrix() - &fd).norm() <= 1e-6 * fd.norm().max(1.0),
            "defect {}",
            (direct.as_matrix() - fd).norm()
        );
    }

    #[test]
    fn loginv_scalar_values() {
        let x = SpdMatrix::from_diagonal(&[std::f64::consts::E]).unwrap();
        let m = loginv_integral(&x).unwrap();
        assert_relative_eq!(m[(0, 0)], 1.0 / std::f64::consts::E, max_relative = 1e-14);

        let e = std::f64::consts::E;
        let x2 = SpdMatrix::from_diagonal(&[e, e * e]).unwrap();
        let m2 = loginv_integral(&x2).unwrap();
        assert_relative_eq!(m2[(0, 0)], 1.0 / e, max_relative = 1e-14);
        assert_relative_eq!(m2[(1, 1)], 2.0 / (e * e), max_relative = 1e-14);
    }

    #[test]
    fn loginv_matches_resolvent_quadrature() {
        // X^-1 ln X equals the resolvent integral applied to ln X. The log fed
        // to the oracle comes from the series-based general path so the two
        // sides share no spectral code.
        let mut r = rng(53);
        for dim in [2usize, 3] {
            let x = SpdMatrix::random_with_condition(dim, 20.0, &mut r);
            let log_x = log_general(x.as_matrix()).unwrap();
            let oracle = resolvent_integral_oracle(x.as_matrix(), &log_x);
            let direct = loginv_integral(&x).unwrap();
            assert!((direct.as_matrix() - oracle).norm() < 1e-10, "dim {dim}");
        }
    }

    #[test]
    fn log_similarity_identity() {
        // A ln(B) A^-1 = ln(A B A^-1), with the right side computed by the
        // series path, which never sees the similarity structure.
        let mut r = rng(59);
        for dim in [2usize, 3, 4] {
            let b = SpdMatrix::random_with_condition(dim, 10.0, &mut r);
            let mut a = DMatrix::from_fn(dim, dim, |_, _| r.sample::<f64, _>(StandardNormal));
            a += 3.0 * DMatrix::identity(dim, dim);
            let a_inv = a.clone().try_inverse().expect("A is invertible");
            let log_b = spd_log(&b).unwrap();
            let lhs = &a * log_b.as_matrix() * &a_inv;
            let rhs = log_general(&(&a * b.as_matrix() * &a_inv)).unwrap();
            let defect = (lhs - rhs).norm();
            let tol = 1e-9 * log_b.norm();
            assert!(
                defect <= tol,
                "dim {dim}: defect {defect:.3e} tol {tol:.3e}"
            );
        }
    }

    #[test]
    fn log_mean_residual_vanishes_at_loginv() {
        let mut r = rng(61);
        let x = SpdMatrix::random_with_condition(4, 100.0, &mut r);
        let m = loginv_integral(&x).unwrap();
        let res = log_mean_residual(&x, &m, 32).unwrap();
        assert!(res <= 1e-8, "residual {res:.3e}");
        // A perturbed candidate must be visibly rejected.
        let off = SymMatrix::new(m.as_matrix() + 1e-3 * DMatrix::identity(4, 4)).unwrap();
        assert!(log_mean_residual(&x, &off, 32).unwrap() > 1e-4);
    }

    #[test]
    fn log_mean_scalar_closed_form() {
        // Scalar case: int_0^1 h^t m h^(1-t) dt = h*m, so the defect is
        // |h*m - ln h|. It vanishes exactly at m = ln(h)/h.
        let h = SpdMatrix::from_diagonal(&[4.0]).unwrap();
        let m_good = SymMatrix::new(DMatrix::from_element(1, 1, 4.0f64.ln() / 4.0)).unwrap();
        assert!(log_mean_residual(&h, &m_good, 32).unwrap() < 1e-12);
        // int_0^1 4^t * m * 4^(1-t) dt = 4 m, so m = ln(4)/4 is the unique
        // scalar making the defect zero; m = 1 leaves |4 - ln 4|.
        let m_one = SymMatrix::new(DMatrix::from_element(1, 1, 1.0)).unwrap();
        let res = log_mean_residual(&h, &m_one, 32).unwrap();
        assert_relative_eq!(res, 4.0 - 4.0f64.ln(), max_relative = 1e-12);
    }

    #[test]
    fn random_spd_respects_condition_bound() {
        let mut r = rng(67);
        for _ in 0..20 {
            let x = SpdMatrix::random_with_condition(5, 50.0, &mut r);
            let d = sym_eig(&x).unwrap();
            let cond = d.eigenvalues[0] / d.eigenvalues[4];
            assert!(cond <= 50.0 * (1.0 + 1e-9), "condition {cond}");
        }
    }
}
