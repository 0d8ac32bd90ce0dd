//! Gauss-Legendre quadrature rules.
//!
//! Nodes are roots of the Legendre polynomial P_n, found by Newton's method
//! from the classical cosine initial guesses; weights follow from the
//! derivative values. Rules of the orders used here (up to a few hundred
//! points) converge in a handful of Newton steps.

/// Nodes and weights of the n-point Gauss-Legendre rule on [-1, 1].
///
/// Panics if `n == 0`. Nodes come out in ascending order and the rule is
/// symmetric about zero by construction.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(n >= 1, "quadrature order must be positive");
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    let nf = n as f64;
    for i in 0..n.div_ceil(2) {
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (nf + 0.5)).cos();
        let mut dp = 1.0;
        for _ in 0..100 {
            let (p, d) = legendre_with_derivative(n, x);
            dp = d;
            let dx = p / d;
            x -= dx;
            if dx.abs() <= 1e-15 * x.abs().max(1.0) {
                break;
            }
        }
        // x is the (i-th from the right) root; mirror it to fill both halves.
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        nodes[n - 1 - i] = x;
        weights[n - 1 - i] = w;
        nodes[i] = -x;
        weights[i] = w;
    }
    if n % 2 == 1 {
        // Odd rules have an exact node at the origin.
        let (_, d) = legendre_with_derivative(n, 0.0);
        nodes[n / 2] = 0.0;
        weights[n / 2] = 2.0 / (d * d);
    }
    (nodes, weights)
}

/// Nodes and weights of the n-point Gauss-Legendre rule on [a, b].
pub fn gauss_legendre_on(a: f64, b: f64, n: usize) -> (Vec<f64>, Vec<f64>) {
    let (xs, ws) = gauss_legendre(n);
    let mid = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    let nodes = xs.iter().map(|x| mid + half * x).collect();
    let weights = ws.iter().map(|w| w * half).collect();
    (nodes, weights)
}

/// P_n(x) and P_n'(x) by the three-term recurrence.
fn legendre_with_derivative(n: usize, x: f64) -> (f64, f64) {
    let (mut p0, mut p1) = (1.0, x);
    for k in 2..=n {
        let kf = k as f64;
        let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
        p0 = p1;
        p1 = p2;
    }
    if n == 0 {
        return (1.0, 0.0);
    }
    let d = if (x * x - 1.0).abs() < f64::EPSILON {
        // Endpoint limit, not used by interior Newton iterations.
        0.5 * (n * (n + 1)) as f64 * x.powi(n as i32 + 1)
    } else {
        (n as f64) * (x * p1 - p0) / (x * x - 1.0)
    };
    (p1, d)
}
