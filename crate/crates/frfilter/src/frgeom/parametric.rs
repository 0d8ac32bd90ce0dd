//! Fisher information of parametric density families by quadrature.
//!
//! A family supplies its density and log-density as closures together with
//! an integration box; the information matrix comes out of midpoint-rule
//! quadrature in the sample variable and central finite differences in the
//! parameter. Two estimators are exposed: the score outer product
//! `g_ij = E[ d_i log p * d_j log p ]` and the negative expected Hessian
//! `g_ij = -E[ d2_ij log p ]`, equal in exact arithmetic, so their
//! agreement bounds the differencing error.

use std::sync::Arc;

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::frgeom::grid::GridSpec;
use crate::matfun::{symmetrize, SymMatrix};

type DensityFn = dyn Fn(&[f64], &[f64]) -> f64 + Send + Sync;

/// A parametric family of densities over the box described by `domain`.
///
/// Closures receive `(x, theta)`. The density must integrate to one over the
/// domain (checked to 1e-6 at every parameter point the quadrature visits).
#[derive(Clone)]
pub struct ParametricFamily {
    param_dim: usize,
    density: Arc<DensityFn>,
    log_density: Arc<DensityFn>,
    domain: GridSpec,
}

impl std::fmt::Debug for ParametricFamily {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("ParametricFamily")
            .field("param_dim", &self.param_dim)
            .field("domain", &self.domain)
            .finish_non_exhaustive()
    }
}

impl ParametricFamily {
    pub fn new(
        param_dim: usize,
        density: Arc<DensityFn>,
        log_density: Arc<DensityFn>,
        domain: GridSpec,
    ) -> Result<Self> {
        if param_dim == 0 {
            return Err(Error::OutOfRange {
                what: "parameter dimension",
                details: "must be at least 1".to_string(),
            });
        }
        Ok(Self {
            param_dim,
            density,
            log_density,
            domain,
        })
    }

    /// The 1-D Gaussian family with parameters theta = (mean, std dev).
    pub fn gaussian_location_scale(domain: GridSpec) -> Result<Self> {
        if domain.dims() != 1 {
            return Err(Error::InvalidGrid {
                context: "Gaussian location-scale family is one-dimensional".to_string(),
            });
        }
        let log_density = |x: &[f64], theta: &[f64]| -> f64 {
            let (mu, sigma) = (theta[0], theta[1]);
            let z = (x[0] - mu) / sigma;
            -0.5 * z * z - sigma.ln() - 0.5 * (2.0 * std::f64::consts::PI).ln()
        };
        Self::new(
            2,
            Arc::new(move |x, theta| log_density(x, theta).exp()),
            Arc::new(log_density),
            domain,
        )
    }

    /// A location family `x -> base(x - theta)` of the given base density.
    pub fn location(base: Arc<dyn Fn(f64) -> f64 + Send + Sync>, domain: GridSpec) -> Result<Self> {
        if domain.dims() != 1 {
            return Err(Error::InvalidGrid {
                context: "location family is one-dimensional".to_string(),
            });
        }
        let base2 = base.clone();
        Self::new(
            1,
            Arc::new(move |x, theta| base(x[0] - theta[0])),
            Arc::new(move |x, theta| base2(x[0] - theta[0]).ln()),
            domain,
        )
    }

    pub fn param_dim(&self) -> usize {
        self.param_dim
    }

    pub fn domain(&self) -> &GridSpec {
        &self.domain
    }

    pub fn density_at(&self, x: &[f64], theta: &[f64]) -> f64 {
        (self.density)(x, theta)
    }

    pub fn log_density_at(&self, x: &[f64], theta: &[f64]) -> f64 {
        (self.log_density)(x, theta)
    }

    /// Midpoint-rule mass of the density at `theta` over the domain.
    pub fn mass(&self, theta: &[f64]) -> f64 {
        let mut total = 0.0;
        self.domain
            .for_each_point(|_, x| total += self.density_at(x, theta));
        total * self.domain.cell()
    }

    fn check_theta(&self, theta: &[f64]) -> Result<()> {
        if theta.len() != self.param_dim {
            return Err(Error::DimensionMismatch {
                context: format!(
                    "family has {} parameters, {} were given",
                    self.param_dim,
                    theta.len()
                ),
            });
        }
        let mass = self.mass(theta);
        if (mass - 1.0).abs() > 1e-6 {
            return Err(Error::InvalidDensity {
                context: format!(
                    "density at theta {theta:?} integrates to {mass:.8} over the domain"
                ),
            });
        }
        Ok(())
    }
}

fn perturbed(theta: &[f64], i: usize, delta: f64) -> Vec<f64> {
    let mut t = theta.to_vec();
    t[i] += delta;
    t
}

/// Fisher information matrix at `theta` from the score outer product.
///
/// Scores are central finite differences of the log-density with step
/// `fd_step` per parameter; the expectation is the midpoint rule over the
/// family's domain. Any non-finite integrand value (a vanishing density
/// inside the domain, a parameter step outside the family's range) is
/// reported with the offending sample location.
pub fn fisher_info_matrix(
    family: &ParametricFamily,
    theta: &[f64],
    fd_step: f64,
) -> Result<SymMatrix> {
    if !(fd_step > 0.0 && fd_step.is_finite()) {
        return Err(Error::OutOfRange {
            what: "finite-difference step",
            details: format!("fd_step = {fd_step} must be positive and finite"),
        });
    }
    family.check_theta(theta)?;
    let r = family.param_dim;
    let mut info = DMatrix::zeros(r, r);
    let cell = family.domain().cell();
    let mut bad: Option<String> = None;
    let mut score = vec![0.0; r];
    family.domain().for_each_point(|_, x| {
        if bad.is_some() {
            return;
        }
        let weight = family.density_at(x, theta);
        for i in 0..r {
            let plus = family.log_density_at(x, &perturbed(theta, i, fd_step));
            let minus = family.log_density_at(x, &perturbed(theta, i, -fd_step));
            score[i] = (plus - minus) / (2.0 * fd_step);
        }
        if !weight.is_finite() || score.iter().any(|s| !s.is_finite()) {
            bad = Some(format!("x = {x:?}"));
            return;
        }
        for i in 0..r {
            for j in 0..r {
                info[(i, j)] += score[i] * score[j] * weight * cell;
            }
        }
    });
    if let Some(location) = bad {
        return Err(Error::NonFiniteIntegrand { location });
    }
    SymMatrix::new(symmetrize(&info))
}

/// Fisher information at `theta` from the negative expected Hessian of the
/// log-density, with second-order central differences of step `fd_step`.
/// Agreement with [`fisher_info_matrix`] bounds the differencing error.
pub fn fisher_info_matrix_hessian(
    family: &ParametricFamily,
    theta: &[f64],
    fd_step: f64,
) -> Result<SymMatrix> {
    if !(fd_step > 0.0 && fd_step.is_finite()) {
        return Err(Error::OutOfRange {
            what: "finite-difference step",
            details: format!("fd_step = {fd_step} must be positive and finite"),
        });
    }
    family.check_theta(theta)?;
    let r = family.param_dim;
    let h = fd_step;
    let mut info = DMatrix::zeros(r, r);
    let cell = family.domain().cell();
    let mut bad: Option<String> = None;
    family.domain().for_each_point(|_, x| {
        if bad.is_some() {
            return;
        }
        let weight = family.density_at(x, theta);
        let center = family.log_density_at(x, theta);
        let mut ok = weight.is_finite() && center.is_finite();
        for i in 0..r {
            for j in i..r {
                let second = if i == j {
                    let p = family.log_density_at(x, &perturbed(theta, i, h));
                    let m = family.log_density_at(x, &perturbed(theta, i, -h));
                    (p - 2.0 * center + m) / (h * h)
                } else {
                    let mut t = theta.to_vec();
                    t[i] += h;
                    t[j] += h;
                    let pp = family.log_density_at(x, &t);
                    t[j] -= 2.0 * h;
                    let pm = family.log_density_at(x, &t);
                    t[i] -= 2.0 * h;
                    let mm = family.log_density_at(x, &t);
                    t[j] += 2.0 * h;
                    let mp = family.log_density_at(x, &t);
                    (pp - pm - mp + mm) / (4.0 * h * h)
                };
                ok &= second.is_finite();
                if ok {
                    info[(i, j)] -= second * weight * cell;
                }
            }
        }
        if !ok {
            bad = Some(format!("x = {x:?}"));
        }
    });
    if let Some(location) = bad {
        return Err(Error::NonFiniteIntegrand { location });
    }
    // Only the upper triangle was accumulated.
    for i in 0..r {
        for j in 0..i {
            info[(i, j)] = info[(j, i)];
        }
    }
    SymMatrix::new(info)
}
