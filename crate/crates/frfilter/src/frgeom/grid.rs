//! Probability densities on uniform grids and the nonparametric metric.
//!
//! Grids are cell-centered: an axis with k points over [lo, hi] has spacing
//! (hi - lo)/k and stores values at the k cell midpoints, so sums against the
//! cell volume are midpoint-rule integrals. One- and two-dimensional grids
//! are supported; axis 0 varies fastest in the flat value layout.
//!
//! The distance between two densities on a shared grid is the angle between
//! their square roots in the discrete L2 sphere,
//! `d = arccos( sum_x sqrt(r1 r2) * cell )`, which lands in [0, pi/2]. The
//! connecting geodesic is the normalized great-circle arc of the square
//! roots, mapped back to densities by squaring.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::frgeom::GaussianState;

/// Axis-aligned uniform grid over a box, cell-centered.
#[derive(Debug, Clone, PartialEq)]
pub struct GridSpec {
    lower: Vec<f64>,
    upper: Vec<f64>,
    points: Vec<usize>,
}

impl GridSpec {
    pub fn new(lower: Vec<f64>, upper: Vec<f64>, points: Vec<usize>) -> Result<Self> {
        let dims = lower.len();
        if dims == 0 || dims > 2 {
            return Err(Error::InvalidGrid {
                context: format!("{dims} axes given, only 1 or 2 supported"),
            });
        }
        if upper.len() != dims || points.len() != dims {
            return Err(Error::InvalidGrid {
                context: format!(
                    "axis count disagreement: {} lower, {} upper, {} point counts",
                    lower.len(),
                    upper.len(),
                    points.len()
                ),
            });
        }
        for axis in 0..dims {
            if !(lower[axis].is_finite() && upper[axis].is_finite()) {
                return Err(Error::InvalidGrid {
                    context: format!("axis {axis} bounds are not finite"),
                });
            }
            if lower[axis] >= upper[axis] {
                return Err(Error::InvalidGrid {
                    context: format!(
                        "axis {axis} has empty extent [{}, {}]",
                        lower[axis], upper[axis]
                    ),
                });
            }
            if points[axis] < 2 {
                return Err(Error::InvalidGrid {
                    context: format!("axis {axis} needs at least 2 points"),
                });
            }
        }
        Ok(Self {
            lower,
            upper,
            points,
        })
    }

    pub fn dims(&self) -> usize {
        self.lower.len()
    }

    pub fn points(&self, axis: usize) -> usize {
        self.points[axis]
    }

    pub fn lower(&self, axis: usize) -> f64 {
        self.lower[axis]
    }

    pub fn upper(&self, axis: usize) -> f64 {
        self.upper[axis]
    }

    pub fn spacing(&self, axis: usize) -> f64 {
        (self.upper[axis] - self.lower[axis]) / self.points[axis] as f64
    }

    /// Volume of one grid cell.
    pub fn cell(&self) -> f64 {
        (0..self.dims()).map(|a| self.spacing(a)).product()
    }

    /// Total number of grid points.
    pub fn len(&self) -> usize {
        self.points.iter().product()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Center coordinate of cell `index` along `axis`.
    pub fn coordinate(&self, axis: usize, index: usize) -> f64 {
        self.lower[axis] + (index as f64 + 0.5) * self.spacing(axis)
    }

    /// Visits every grid point as (flat index, coordinates); axis 0 fastest.
    pub fn for_each_point(&self, mut f: impl FnMut(usize, &[f64])) {
        let dims = self.dims();
        let mut coords = vec![0.0; dims];
        match dims {
            1 => {
                for i in 0..self.points[0] {
                    coords[0] = self.coordinate(0, i);
                    f(i, &coords);
                }
            }
            2 => {
                let n0 = self.points[0];
                for j in 0..self.points[1] {
                    coords[1] = self.coordinate(1, j);
                    for i in 0..n0 {
                        coords[0] = self.coordinate(0, i);
                        f(i + n0 * j, &coords);
                    }
                }
            }
            _ => unreachable!("GridSpec::new admits only 1 or 2 axes"),
        }
    }
}

/// A probability density sampled on a [`GridSpec`].
///
/// Values are nonnegative and the constructor rescales them so the midpoint
/// integral is exactly one; inputs with zero or non-finite mass are rejected.
#[derive(Debug, Clone, PartialEq)]
pub struct GridDensity {
    spec: GridSpec,
    values: DVector<f64>,
}

impl GridDensity {
    pub fn new(spec: GridSpec, values: DVector<f64>) -> Result<Self> {
        if values.len() != spec.len() {
            return Err(Error::DimensionMismatch {
                context: format!(
                    "grid has {} points but {} values were given",
                    spec.len(),
                    values.len()
                ),
            });
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite() || *v < 0.0) {
            return Err(Error::InvalidDensity {
                context: format!(
                    "value {} at flat index {i} is negative or not finite",
                    values[i]
                ),
            });
        }
        let mass = values.sum() * spec.cell();
        if !(mass.is_finite() && mass > 0.0) {
            return Err(Error::InvalidDensity {
                context: format!("total mass {mass} is not a positive finite number"),
            });
        }
        Ok(Self {
            spec,
            values: values / mass,
        })
    }

    /// Samples `f` at the cell centers and normalizes.
    pub fn from_fn(spec: GridSpec, f: impl Fn(&[f64]) -> f64) -> Result<Self> {
        let mut values = DVector::zeros(spec.len());
        spec.for_each_point(|i, x| values[i] = f(x));
        Self::new(spec, values)
    }

    pub fn spec(&self) -> &GridSpec {
        &self.spec
    }

    pub fn values(&self) -> &DVector<f64> {
        &self.values
    }

    /// Midpoint-rule mass; exactly 1 up to roundoff after construction.
    pub fn mass(&self) -> f64 {
        self.values.sum() * self.spec.cell()
    }

    /// Midpoint-rule mean along each axis.
    pub fn mean(&self) -> DVector<f64> {
        let dims = self.spec.dims();
        let mut mean = DVector::zeros(dims);
        let cell = self.spec.cell();
        self.spec.for_each_point(|i, x| {
            for (axis, xa) in x.iter().enumerate() {
                mean[axis] += xa * self.values[i] * cell;
            }
        });
        mean
    }

    /// Midpoint-rule covariance matrix about the density's own mean.
    pub fn covariance(&self) -> DMatrix<f64> {
        let dims = self.spec.dims();
        let mean = self.mean();
        let mut cov = DMatrix::zeros(dims, dims);
        let cell = self.spec.cell();
        self.spec.for_each_point(|i, x| {
            let w = self.values[i] * cell;
            for a in 0..dims {
                for b in 0..dims {
                    cov[(a, b)] += w * (x[a] - mean[a]) * (x[b] - mean[b]);
                }
            }
        });
        cov
    }

    fn require_same_grid(&self, other: &Self) -> Result<()> {
        if self.spec != other.spec {
            return Err(Error::GridMismatch {
                context: format!(
                    "left grid {:?} points on {:?}..{:?}, right grid {:?} points on {:?}..{:?}",
                    self.spec.points,
                    self.spec.lower,
                    self.spec.upper,
                    other.spec.points,
                    other.spec.lower,
                    other.spec.upper
                ),
            });
        }
        Ok(())
    }
}

/// Square-root affinity `sum sqrt(r1 r2) * cell`, clamped into [0, 1].
fn affinity(r1: &GridDensity, r2: &GridDensity) -> f64 {
    let cell = r1.spec.cell();
    let dot: f64 = r1
        .values
        .iter()
        .zip(r2.values.iter())
        .map(|(a, b)| (a * b).sqrt())
        .sum();
    (dot * cell).clamp(0.0, 1.0)
}

/// Fisher-Rao distance between densities on a shared grid: the arc length
/// between their square roots on the unit sphere. Always in [0, pi/2].
pub fn fr_distance_grid(r1: &GridDensity, r2: &GridDensity) -> Result<f64> {
    r1.require_same_grid(r2)?;
    Ok(affinity(r1, r2).acos())
}

/// Point at parameter `t` on the Fisher-Rao geodesic from `r1` to `r2`:
/// the squared, renormalized chord of the square-root embedding,
/// `((1-t) s1 + t s2)^2 / ((1-t)^2 + t^2 + 2 t (1-t) <s1, s2>)`.
pub fn fr_geodesic_grid(r1: &GridDensity, r2: &GridDensity, t: f64) -> Result<GridDensity> {
    r1.require_same_grid(r2)?;
    if !(0.0..=1.0).contains(&t) {
        return Err(Error::OutOfRange {
            what: "geodesic parameter",
            details: format!("t = {t} lies outside [0, 1]"),
        });
    }
    if t == 0.0 {
        return Ok(r1.clone());
    }
    if t == 1.0 {
        return Ok(r2.clone());
    }
    let inner = affinity(r1, r2);
    let denom = (1.0 - t) * (1.0 - t) + t * t + 2.0 * t * (1.0 - t) * inner;
    let values = DVector::from_fn(r1.values.len(), |i, _| {
        let chord = (1.0 - t) * r1.values[i].sqrt() + t * r2.values[i].sqrt();
        chord * chord / denom
    });
    GridDensity::new(r1.spec.clone(), values)
}

/// Discretizes a Gaussian onto a grid.
///
/// The grid must cover eight marginal standard deviations around the mean on
/// every axis and resolve the density with at least two cells per standard
/// deviation; the discretized mass must agree with 1 to 1e-6 before the
/// final renormalization.
pub fn gaussian_to_grid(g: &GaussianState, spec: &GridSpec) -> Result<GridDensity> {
    let dims = spec.dims();
    if g.dim() != dims {
        return Err(Error::DimensionMismatch {
            context: format!("Gaussian has dimension {}, grid has {dims}", g.dim()),
        });
    }
    for axis in 0..dims {
        let sigma = g.cov[(axis, axis)].sqrt();
        let (lo, hi) = (g.mean[axis] - 8.0 * sigma, g.mean[axis] + 8.0 * sigma);
        if spec.lower(axis) > lo || spec.upper(axis) < hi {
            return Err(Error::InvalidGrid {
                context: format!(
                    "axis {axis} must cover [{lo:.3}, {hi:.3}] (mean +/- 8 std devs), \
                     grid spans [{:.3}, {:.3}]",
                    spec.lower(axis),
                    spec.upper(axis)
                ),
            });
        }
        if spec.spacing(axis) > 0.5 * sigma {
            return Err(Error::InvalidGrid {
                context: format!(
                    "axis {axis} spacing {:.4} exceeds half a standard deviation ({:.4}); \
                     the grid cannot resolve the density",
                    spec.spacing(axis),
                    0.5 * sigma
                ),
            });
        }
    }
    let chol = g
        .cov
        .as_matrix()
        .clone()
        .cholesky()
        .expect("SpdMatrix is positive definite by construction");
    let det = chol.determinant();
    let norm_const = 1.0 / ((2.0 * std::f64::consts::PI).powi(dims as i32) * det).sqrt();
    let mut values = DVector::zeros(spec.len());
    let mut diff = DVector::zeros(dims);
    spec.for_each_point(|i, x| {
        for (a, xa) in x.iter().enumerate() {
            diff[a] = xa - g.mean[a];
        }
        let solved = chol.solve(&diff);
        let quad = diff.dot(&solved);
        values[i] = norm_const * (-0.5 * quad).exp();
    });
    let mass = values.sum() * spec.cell();
    if (mass - 1.0).abs() > 1e-6 {
        return Err(Error::MassOutsideGrid {
            missing: (mass - 1.0).abs(),
        });
    }
    GridDensity::new(spec.clone(), values)
}
