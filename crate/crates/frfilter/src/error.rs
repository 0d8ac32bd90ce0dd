use thiserror::Error;

/// Crate-wide result alias.
pub type Result<T> = std::result::Result<T, Error>;

/// Failure modes across the matrix kernels, the geometry layer, the
/// proximal filter and the reference simulators.
///
/// Every variant carries enough context to diagnose the offending input
/// without re-running the computation.
#[derive(Debug, Clone, Error)]
pub enum Error {
    #[error("matrix must be square, got {rows}x{cols}")]
    NotSquare { rows: usize, cols: usize },

    #[error("dimension mismatch: {context}")]
    DimensionMismatch { context: String },

    #[error("matrix is not symmetric: relative asymmetry {asymmetry:.3e} exceeds {tol:.1e}")]
    NotSymmetric { asymmetry: f64, tol: f64 },

    #[error("matrix is not positive definite: eigenvalue range [{min_eig:.6e}, {max_eig:.6e}]")]
    NotPositiveDefinite { min_eig: f64, max_eig: f64 },

    #[error("eigendecomposition did not converge (condition estimate {condition:.3e})")]
    EigenFailed { condition: f64 },

    #[error("non-finite value encountered in {context}")]
    NotFinite { context: String },

    #[error("numeric overflow in {context}")]
    Overflow { context: String },

    #[error("{what} out of range: {details}")]
    OutOfRange { what: &'static str, details: String },

    #[error("{context}: residual {residual:.3e} after {iterations} iterations")]
    NoConvergence {
        context: String,
        residual: f64,
        iterations: usize,
    },

    #[error("grids do not match: {context}")]
    GridMismatch { context: String },

    #[error("invalid grid: {context}")]
    InvalidGrid { context: String },

    #[error("invalid density: {context}")]
    InvalidDensity { context: String },

    #[error("quadrature integrand is not finite near {location}")]
    NonFiniteIntegrand { location: String },

    #[error("probability mass outside the grid exceeds tolerance: missing {missing:.3e}")]
    MassOutsideGrid { missing: f64 },

    #[error(
        "geodesic shooting failed: terminal mismatch {mismatch:.3e} after {iterations} iterations"
    )]
    ShootingFailed { mismatch: f64, iterations: usize },

    #[error("covariance lost positive definiteness during {context}")]
    SpdLost { context: String },

    #[error("singular matrix in {context}")]
    Singular { context: String },
}
