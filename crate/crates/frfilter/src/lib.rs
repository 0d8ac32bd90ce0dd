//! Fisher-Rao geometry on probability densities and a proximal recursion for
//! continuous-time linear-Gaussian filtering.
//!
//! The crate is organized in four layers:
//!
//! * [`matfun`]: dense spectral kernels on small SPD matrices (log, exp,
//!   square root, Frechet derivative of the log, Kronecker utilities).
//! * [`frgeom`]: the Fisher-Rao metric itself, both nonparametric (densities
//!   on uniform grids) and on the Gaussian manifold (closed-form distances,
//!   geodesic shooting, the gradient of the squared covariance distance,
//!   Fisher information by quadrature).
//! * [`proxfilter`]: the proximal measurement update and the explicit
//!   propagation step that together discretize the continuous filter, with
//!   an exact fixed-point covariance update and its first-order truncation.
//! * [`reference`]: what the filter is checked against: an Euler-Maruyama
//!   simulator, the classical continuous-filter recursion on the same noise,
//!   and the stationary Riccati solver.
//!
//! [`selftest`] packages the invariant checks of all four layers behind a
//! deterministic, seedable interface so a binary can run them as a gate.

pub mod error;
pub mod frgeom;
pub mod matfun;
pub mod proxfilter;
pub mod reference;
pub mod selftest;

pub use error::{Error, Result};
pub use matfun::{SpdMatrix, SymMatrix};
