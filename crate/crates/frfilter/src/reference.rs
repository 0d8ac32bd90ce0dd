//! Ground-truth stack: linear-Gaussian SDE simulation, the continuous-time
//! Kalman-Bucy filter (Euler-discretized at a fine reference step), and a
//! stationary Riccati solver.
//!
//! Noise layout. Every trajectory owns two independent ChaCha streams
//! derived from its seed — one for process noise, one for measurement
//! noise. Each coarse step of size `h` consumes `M = round(h / REFERENCE_STEP)`
//! fine draws per noise channel and aggregates them into the step's
//! standard-normal variate. Because the fine draws live on a fixed lattice,
//! trajectories generated at different step sizes from the same seed ride
//! the same underlying Brownian paths, and the sub-stepped oracle can
//! decompose each coarse increment into conditionally consistent
//! sub-increments (the Brownian-bridge split reproduces exactly the fine
//! draws whose sum the coarse increment is), so a filter under test and the
//! oracle always see the same noise realization.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::matfun::{self, SpdMatrix};
use crate::proxfilter::LinearGaussianModel;

/// Step size of the reference (oracle) integration lattice.
pub const REFERENCE_STEP: f64 = 1e-4;

const STREAM_PROCESS: u64 = 0;
const STREAM_MEASUREMENT: u64 = 1;

/// Derives a per-trajectory seed from a base seed and a trajectory index so
/// Monte-Carlo batches are reproducible independent of scheduling
/// (SplitMix64 finalizer on the combined value).
pub fn derive_stream_seed(base: u64, index: u64) -> u64 {
    let mut z = base
        .wrapping_add(index.wrapping_mul(0x9e37_79b9_7f4a_7c15))
        .wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

fn stream_rng(seed: u64, stream: u64) -> ChaCha12Rng {
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

fn draw_standard(rng: &mut ChaCha12Rng, dim: usize) -> DVector<f64> {
    DVector::from_fn(dim, |_, _| rng.sample::<f64, _>(StandardNormal))
}

/// Number of fine sub-steps hiding inside one coarse step of size `h`.
fn substeps_per_step(h: f64) -> usize {
    ((h / REFERENCE_STEP).round() as usize).max(1)
}

/// One sampled path of the model: states on a uniform time grid of step `h`
/// and the measurement increments between consecutive grid points.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub h: f64,
    pub seed: u64,
    pub times: Vec<f64>,
    pub states: Vec<DVector<f64>>,
    pub increments: Vec<DVector<f64>>,
}

/// Output of a filter pass over a trajectory: the posterior law at every
/// grid time, plus the model it was filtered under and a label naming the
/// method that produced it.
#[derive(Debug, Clone)]
pub struct FilterRun {
    pub times: Vec<f64>,
    pub means: Vec<DVector<f64>>,
    pub covariances: Vec<SpdMatrix>,
    pub model: LinearGaussianModel,
    pub method: String,
}

fn check_horizon(h: f64, t_final: f64) -> Result<usize> {
    if !(h > 0.0 && h.is_finite()) {
        return Err(Error::OutOfRange {
            what: "step size",
            details: format!("h = {h} must be positive and finite"),
        });
    }
    if !(t_final >= h && t_final.is_finite()) {
        return Err(Error::OutOfRange {
            what: "horizon",
            details: format!("T = {t_final} must be finite and at least h = {h}"),
        });
    }
    let steps = (t_final / h).round();
    if steps > 5e7 {
        return Err(Error::Overflow {
            context: format!("{steps} steps requested; refusing above 5e7"),
        });
    }
    Ok((steps as usize).max(1))
}

/// Euler-Maruyama simulation of the model:
/// `x_{k+1} = x_k + h A x_k + sqrt(2h) B xi_k`,
/// `dz_k = h C x_k + sqrt(h) R^(1/2) eta_k`,
/// fully deterministic given the seed. The per-step variates `xi_k`,
/// `eta_k` are exact standard normals assembled from the fine noise lattice
/// (see the module docs), so the same seed yields coupled trajectories
/// across step sizes.
pub fn simulate_sde(
    model: &LinearGaussianModel,
    x0: &DVector<f64>,
    h: f64,
    t_final: f64,
    seed: u64,
) -> Result<Trajectory> {
    let n = model.state_dim();
    if x0.len() != n {
        return Err(Error::DimensionMismatch {
            context: format!("x0 has dimension {} but the model expects {n}", x0.len()),
        });
    }
    let steps = check_horizon(h, t_final)?;
    let m_sub = substeps_per_step(h);
    let q = model.noise_dim();
    let m = model.obs_dim();
    let r_sqrt = matfun::spd_sqrt(model.noise_cov())?;

    let mut process = stream_rng(seed, STREAM_PROCESS);
    let mut measurement = stream_rng(seed, STREAM_MEASUREMENT);

    let mut states = Vec::with_capacity(steps + 1);
    let mut increments = Vec::with_capacity(steps);
    let mut times = Vec::with_capacity(steps + 1);
    let scale = 1.0 / (m_sub as f64).sqrt();
    let mut x = x0.clone();
    states.push(x.clone());
    times.push(0.0);
    for k in 0..steps {
        let mut xi = DVector::zeros(q);
        let mut eta = DVector::zeros(m);
        for _ in 0..m_sub {
            xi += draw_standard(&mut process, q);
            eta += draw_standard(&mut measurement, m);
        }
        xi *= scale;
        eta *= scale;
        let dz = h * (model.observation() * &x) + h.sqrt() * (r_sqrt.as_matrix() * eta);
        x = &x + h * (model.drift() * &x) + (2.0 * h).sqrt() * (model.diffusion() * xi);
        increments.push(dz);
        states.push(x.clone());
        times.push((k + 1) as f64 * h);
    }
    Ok(Trajectory {
        h,
        seed,
        times,
        states,
        increments,
    })
}

fn check_prior(model: &LinearGaussianModel, mu0: &DVector<f64>, p0: &SpdMatrix) -> Result<()> {
    let n = model.state_dim();
    if mu0.len() != n || p0.dim() != n {
        return Err(Error::DimensionMismatch {
            context: format!(
                "prior has dimensions ({}, {}) but the model expects {n}",
                mu0.len(),
                p0.dim()
            ),
        });
    }
    Ok(())
}

/// One Euler step of the Kalman-Bucy recursion at step `h`:
/// `mu <- mu + h A mu + K (dz - h C mu)`,
/// `P <- P + h (A P + P A^T + 2 B B^T - K R K^T)` with `K = P C^T R^-1`.
fn kalman_bucy_step(
    mu: &mut DVector<f64>,
    p: &mut DMatrix<f64>,
    dz: &DVector<f64>,
    h: f64,
    model: &LinearGaussianModel,
) {
    let k_gain = &*p * model.observation().transpose() * model.noise_cov_inv();
    let innovation = dz - h * (model.observation() * &*mu);
    *mu += h * (model.drift() * &*mu) + &k_gain * innovation;
    let flow = model.drift() * &*p
        + &*p * model.drift().transpose()
        + 2.0 * (model.diffusion() * model.diffusion().transpose())
        - &k_gain * model.noise_cov().as_matrix() * k_gain.transpose();
    *p = matfun::symmetrize(&(&*p + h * flow));
}

/// Runs the Euler-discretized Kalman-Bucy filter along a trajectory at the
/// trajectory's own step size.
pub fn kalman_bucy_run(
    traj: &Trajectory,
    model: &LinearGaussianModel,
    mu0: &DVector<f64>,
    p0: &SpdMatrix,
) -> Result<FilterRun> {
    check_prior(model, mu0, p0)?;
    if traj.states.first().map(DVector::len) != Some(model.state_dim()) {
        return Err(Error::DimensionMismatch {
            context: "trajectory does not match the model's state dimension".to_string(),
        });
    }
    let mut mu = mu0.clone();
    let mut p = p0.as_matrix().clone();
    let mut means = Vec::with_capacity(traj.times.len());
    let mut covariances = Vec::with_capacity(traj.times.len());
    means.push(mu.clone());
    covariances.push(p0.clone());
    for dz in &traj.increments {
        kalman_bucy_step(&mut mu, &mut p, dz, traj.h, model);
        covariances.push(SpdMatrix::new(p.clone()).map_err(|_| Error::SpdLost {
            context: format!("Kalman-Bucy covariance at step {}", means.len()),
        })?);
        means.push(mu.clone());
    }
    Ok(FilterRun {
        times: traj.times.clone(),
        means,
        covariances,
        model: model.clone(),
        method: format!("kalman-bucy[h={}]", traj.h),
    })
}

/// Runs the Kalman-Bucy filter at the reference step inside every coarse
/// interval of `traj`, consuming the same noise realization: each coarse
/// Gaussian increment splits into conditionally consistent sub-increments
/// (Brownian bridge), the fine state path is rebuilt from the split process
/// noise, and fine measurement increments drive the filter. Posterior laws
/// are recorded at the coarse grid times.
pub fn kalman_bucy_substepped(
    traj: &Trajectory,
    model: &LinearGaussianModel,
    mu0: &DVector<f64>,
    p0: &SpdMatrix,
) -> Result<FilterRun> {
    check_prior(model, mu0, p0)?;
    let n = model.state_dim();
    if traj.states.first().map(DVector::len) != Some(n) {
        return Err(Error::DimensionMismatch {
            context: "trajectory does not match the model's state dimension".to_string(),
        });
    }
    let h = traj.h;
    let m_sub = substeps_per_step(h);
    let h_fine = h / m_sub as f64;
    let q = model.noise_dim();
    let m = model.obs_dim();
    let r_sqrt = matfun::spd_sqrt(model.noise_cov())?;

    // Replay the trajectory's noise streams; the draws arrive in the same
    // per-step order simulate_sde consumed them.
    let mut process = stream_rng(traj.seed, STREAM_PROCESS);
    let mut measurement = stream_rng(traj.seed, STREAM_MEASUREMENT);

    let mut x_fine = traj.states[0].clone();
    let mut mu = mu0.clone();
    let mut p = p0.as_matrix().clone();
    let mut means = Vec::with_capacity(traj.times.len());
    let mut covariances = Vec::with_capacity(traj.times.len());
    means.push(mu.clone());
    covariances.push(p0.clone());
    for step in 0..traj.increments.len() {
        for _ in 0..m_sub {
            let xi = draw_standard(&mut process, q);
            let eta = draw_standard(&mut measurement, m);
            let dz_fine = h_fine * (model.observation() * &x_fine)
                + h_fine.sqrt() * (r_sqrt.as_matrix() * eta);
            x_fine = &x_fine
                + h_fine * (model.drift() * &x_fine)
                + (2.0 * h_fine).sqrt() * (model.diffusion() * xi);
            kalman_bucy_step(&mut mu, &mut p, &dz_fine, h_fine, model);
        }
        covariances.push(SpdMatrix::new(p.clone()).map_err(|_| Error::SpdLost {
            context: format!("sub-stepped Kalman-Bucy covariance at coarse step {step}"),
        })?);
        means.push(mu.clone());
    }
    Ok(FilterRun {
        times: traj.times.clone(),
        means,
        covariances,
        model: model.clone(),
        method: format!("kalman-bucy-substepped[h={h}, h_fine={h_fine}]"),
    })
}

/// Residual of the algebraic Riccati equation
/// `A P + P A^T + 2 B B^T - P C^T R^-1 C P` at `p`.
fn riccati_flow(model: &LinearGaussianModel, p: &DMatrix<f64>) -> DMatrix<f64> {
    model.drift() * p
        + p * model.drift().transpose()
        + 2.0 * (model.diffusion() * model.diffusion().transpose())
        - p * model.obs_information() * p
}

/// Stationary covariance of the Kalman-Bucy flow: integrates the matrix
/// Riccati ODE with adaptive pseudo-time steps until the algebraic residual
/// drops below `tol`. Requires the usual detectability/stabilizability
/// conditions for convergence; their violation surfaces as
/// [`Error::NoConvergence`].
pub fn riccati_stationary(
    model: &LinearGaussianModel,
    tol: f64,
    max_iter: usize,
) -> Result<SpdMatrix> {
    if !(tol > 0.0 && tol.is_finite()) {
        return Err(Error::OutOfRange {
            what: "Riccati tolerance",
            details: format!("tol = {tol} must be positive and finite"),
        });
    }
    let n = model.state_dim();
    let mut p = DMatrix::<f64>::identity(n, n);
    let mut dt = 0.1 / (1.0 + model.drift().norm());
    let mut residual = riccati_flow(model, &p).norm();
    for _ in 0..max_iter {
        if residual <= tol {
            return SpdMatrix::new(p).map_err(|_| Error::SpdLost {
                context: "stationary Riccati solution".to_string(),
            });
        }
        let flow = riccati_flow(model, &p);
        let candidate = matfun::symmetrize(&(&p + dt * &flow));
        // Accept steps that stay meaningfully positive; otherwise halve.
        let min_eig = candidate
            .clone()
            .symmetric_eigenvalues()
            .iter()
            .copied()
            .fold(f64::INFINITY, f64::min);
        if min_eig > -1e-14 * candidate.norm().max(1.0) {
            p = candidate;
            residual = riccati_flow(model, &p).norm();
            dt = (dt * 1.25).min(0.5 / (1.0 + model.drift().norm()));
        } else {
            dt *= 0.5;
            if dt < 1e-12 {
                return Err(Error::NoConvergence {
                    context: "Riccati pseudo-time integration stalled".to_string(),
                    residual,
                    iterations: max_iter,
                });
            }
        }
    }
    Err(Error::NoConvergence {
        context: "Riccati pseudo-time integration".to_string(),
        residual,
        iterations: max_iter,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::frgeom::GaussianState;
    use crate::proxfilter::propagate;

    fn scalar_model(a: f64, b: f64, c: f64, r: f64) -> LinearGaussianModel {
        LinearGaussianModel::new(
            DMatrix::from_element(1, 1, a),
            DMatrix::from_element(1, 1, b),
            DMatrix::from_element(1, 1, c),
            SpdMatrix::new(DMatrix::from_element(1, 1, r)).unwrap(),
        )
        .unwrap()
    }

    fn benchmark() -> LinearGaussianModel {
        scalar_model(-1.0, 1.0, 1.0, 1.0)
    }

    #[test]
    fn trajectories_are_deterministic_and_well_shaped() {
        let model = benchmark();
        let x0 = DVector::from_element(1, 0.3);
        let t1 = simulate_sde(&model, &x0, 0.01, 0.5, 7).unwrap();
        let t2 = simulate_sde(&model, &x0, 0.01, 0.5, 7).unwrap();
        assert_eq!(t1, t2);
        assert_eq!(t1.states.len(), 51);
        assert_eq!(t1.increments.len(), 50);
        for (k, t) in t1.times.iter().enumerate() {
            assert!((t - 0.01 * k as f64).abs() < 1e-12);
        }
        let t3 = simulate_sde(&model, &x0, 0.01, 0.5, 8).unwrap();
        assert_ne!(t1, t3);
    }

    #[test]
    fn process_noise_std_scales_as_sqrt_h() {
        // A = 0, B = 1: increments are sqrt(2h) xi exactly.
        let model = scalar_model(0.0, 1.0, 1.0, 1.0);
        let x0 = DVector::zeros(1);
        let std_at = |h: f64| {
            let steps = 100_000;
            let traj = simulate_sde(&model, &x0, h, h * steps as f64, 99).unwrap();
            let incs: Vec<f64> = traj.states.windows(2).map(|w| w[1][0] - w[0][0]).collect();
            let mean = incs.iter().sum::<f64>() / incs.len() as f64;
            (incs.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (incs.len() - 1) as f64).sqrt()
        };
        let ratio = std_at(8e-4) / std_at(4e-4);
        assert!(
            (ratio - 2.0f64.sqrt()).abs() / 2.0f64.sqrt() < 0.02,
            "ratio {ratio}"
        );
    }

    #[test]
    fn brownian_variance_matches_monte_carlo() {
        // dx = sqrt(2) dw: Var(x_T) = 2T.
        let model = scalar_model(0.0, 1.0, 1.0, 1.0);
        let x0 = DVector::zeros(1);
        let t_final = 0.1;
        let n_seeds = 10_000;
        let mut sum2 = 0.0;
        for i in 0..n_seeds {
            let seed = derive_stream_seed(2024, i);
            let traj = simulate_sde(&model, &x0, 0.01, t_final, seed).unwrap();
            let x_t = traj.states.last().unwrap()[0];
            sum2 += x_t * x_t;
        }
        let var = sum2 / n_seeds as f64;
        let expect = 2.0 * t_final;
        assert!(
            (var - expect).abs() / expect < 0.05,
            "Var(x_T) = {var}, expected {expect}"
        );
    }

    #[test]
    fn noiseless_degenerate_model_is_constant() {
        // B = 0 and R tiny: constant state, dz = h C x0 up to the tiny
        // measurement noise floor.
        let model = scalar_model(0.0, 0.0, 1.0, 1e-12);
        let x0 = DVector::from_element(1, 1.5);
        let traj = simulate_sde(&model, &x0, 0.01, 0.1, 5).unwrap();
        for x in &traj.states {
            assert_eq!(x[0], 1.5);
        }
        for dz in &traj.increments {
            assert!((dz[0] - 0.01 * 1.5).abs() < 5e-6);
        }
    }

    #[test]
    fn same_seed_couples_trajectories_across_step_sizes() {
        // Coarse and half-step trajectories ride the same Brownian path, so
        // their terminal states differ by the O(h) Euler gap, not by an
        // independent-realization O(1) amount.
        let model = benchmark();
        let x0 = DVector::from_element(1, 0.2);
        for seed in 0..10 {
            let a = simulate_sde(&model, &x0, 0.01, 1.0, seed).unwrap();
            let b = simulate_sde(&model, &x0, 0.005, 1.0, seed).unwrap();
            let gap = (a.states.last().unwrap()[0] - b.states.last().unwrap()[0]).abs();
            assert!(gap < 0.1, "seed {seed}: gap {gap}");
        }
    }

    #[test]
    fn kalman_without_measurements_reduces_to_propagation() {
        let model = scalar_model(-0.8, 0.7, 0.0, 1.0);
        let x0 = DVector::from_element(1, 1.0);
        let traj = simulate_sde(&model, &x0, 0.05, 0.5, 3).unwrap();
        let mu0 = DVector::from_element(1, 0.4);
        let p0 = SpdMatrix::from_diagonal(&[1.2]).unwrap();
        let run = kalman_bucy_run(&traj, &model, &mu0, &p0).unwrap();
        let mut g = GaussianState::new(mu0, p0).unwrap();
        for k in 1..run.times.len() {
            g = propagate(&g, 0.05, &model).unwrap();
            assert!((run.means[k][0] - g.mean[0]).abs() < 1e-13);
            assert!((run.covariances[k][(0, 0)] - g.cov[(0, 0)]).abs() < 1e-13);
        }
    }

    #[test]
    fn riccati_scalar_benchmark_and_edge_cases() {
        // A=-1, B=1, C=1, R=1: P^2 + 2P - 2 = 0, positive root sqrt(3) - 1.
        let p = riccati_stationary(&benchmark(), 1e-10, 100_000).unwrap();
        assert!((p[(0, 0)] - (3.0f64.sqrt() - 1.0)).abs() < 1e-8);

        // No observations, A = -I, B = I: Lyapunov balance at P = I.
        let model = LinearGaussianModel::new(
            -DMatrix::<f64>::identity(2, 2),
            DMatrix::<f64>::identity(2, 2),
            DMatrix::<f64>::zeros(1, 2),
            SpdMatrix::identity(1),
        )
        .unwrap();
        let p = riccati_stationary(&model, 1e-10, 100_000).unwrap();
        assert!((p.as_matrix() - DMatrix::<f64>::identity(2, 2)).norm() < 1e-8);

        // No process noise, stable drift: covariance drains to zero.
        let model = scalar_model(-1.0, 0.0, 1.0, 1.0);
        let p = riccati_stationary(&model, 1e-8, 200_000).unwrap();
        assert!(p[(0, 0)] < 1e-7);
    }

    #[test]
    fn kalman_reaches_and_holds_the_stationary_covariance() {
        let model = benchmark();
        let x0 = DVector::zeros(1);
        let p_inf = 3.0f64.sqrt() - 1.0;

        // Convergence from P0 = 1 over T = 10 at the reference step.
        let traj = simulate_sde(&model, &x0, REFERENCE_STEP, 10.0, 11).unwrap();
        let run =
            kalman_bucy_run(&traj, &model, &DVector::zeros(1), &SpdMatrix::identity(1)).unwrap();
        let p_end = run.covariances.last().unwrap()[(0, 0)];
        assert!((p_end - p_inf).abs() < 1e-3, "P(10) = {p_end}");

        // Stationarity: initialized at the Riccati solution, the covariance
        // drifts at most 1e-6 per unit time.
        let p0 = riccati_stationary(&model, 1e-12, 200_000).unwrap();
        let traj = simulate_sde(&model, &x0, REFERENCE_STEP, 1.0, 12).unwrap();
        let run = kalman_bucy_run(&traj, &model, &DVector::zeros(1), &p0).unwrap();
        let drift = (run.covariances.last().unwrap()[(0, 0)] - p0[(0, 0)]).abs();
        assert!(drift <= 1e-6, "drift {drift}");
    }

    #[test]
    fn innovations_are_white_at_stationarity() {
        let model = benchmark();
        let p0 = riccati_stationary(&model, 1e-12, 200_000).unwrap();
        let h = REFERENCE_STEP;
        let x0 = DVector::zeros(1);
        let traj = simulate_sde(&model, &x0, h, 1.0, 21).unwrap();
        let run = kalman_bucy_run(&traj, &model, &x0, &p0).unwrap();
        let mut sum2 = 0.0;
        for (k, dz) in traj.increments.iter().enumerate() {
            let nu = (dz[0] - h * run.means[k][0]) / (h * 1.0).sqrt();
            sum2 += nu * nu;
        }
        let var = sum2 / traj.increments.len() as f64;
        assert!(
            (var - 1.0).abs() < 0.1,
            "normalized innovation variance {var}"
        );
    }

    #[test]
    fn substepped_oracle_equals_plain_run_at_reference_step() {
        let model = benchmark();
        let x0 = DVector::from_element(1, 0.1);
        let traj = simulate_sde(&model, &x0, REFERENCE_STEP, 0.05, 17).unwrap();
        let mu0 = DVector::zeros(1);
        let p0 = SpdMatrix::identity(1);
        let plain = kalman_bucy_run(&traj, &model, &mu0, &p0).unwrap();
        let sub = kalman_bucy_substepped(&traj, &model, &mu0, &p0).unwrap();
        for k in 0..plain.times.len() {
            assert!((plain.means[k][0] - sub.means[k][0]).abs() < 1e-13);
            assert!((plain.covariances[k][(0, 0)] - sub.covariances[k][(0, 0)]).abs() < 1e-13);
        }
    }

    #[test]
    fn substepped_oracle_stays_near_coarse_kalman() {
        // At moderate h the sub-stepped oracle and the coarse-grained filter
        // differ by the coarse filter's own O(h) discretization error.
        let model = benchmark();
        let x0 = DVector::from_element(1, 0.4);
        let traj = simulate_sde(&model, &x0, 0.01, 1.0, 23).unwrap();
        let mu0 = DVector::zeros(1);
        let p0 = SpdMatrix::identity(1);
        let coarse = kalman_bucy_run(&traj, &model, &mu0, &p0).unwrap();
        let oracle = kalman_bucy_substepped(&traj, &model, &mu0, &p0).unwrap();
        let mean_gap = (coarse.means.last().unwrap()[0] - oracle.means.last().unwrap()[0]).abs();
        let cov_gap = (coarse.covariances.last().unwrap()[(0, 0)]
            - oracle.covariances.last().unwrap()[(0, 0)])
            .abs();
        assert!(mean_gap < 0.05, "mean gap {mean_gap}");
        assert!(cov_gap < 0.01, "covariance gap {cov_gap}");
    }

    #[test]
    fn derived_seeds_are_deterministic_and_spread() {
        let a = derive_stream_seed(42, 0);
        let b = derive_stream_seed(42, 1);
        assert_eq!(a, derive_stream_seed(42, 0));
        assert_ne!(a, b);
        let mut seen = std::collections::HashSet::new();
        for i in 0..1000 {
            seen.insert(derive_stream_seed(7, i));
        }
        assert_eq!(seen.len(), 1000);
    }

    #[test]
    fn horizon_validation() {
        let model = benchmark();
        let x0 = DVector::zeros(1);
        assert!(simulate_sde(&model, &x0, 0.0, 1.0, 0).is_err());
        assert!(simulate_sde(&model, &x0, 0.1, 0.05, 0).is_err());
        assert!(simulate_sde(&model, &x0, 1e-9, 1e3, 0).is_err());
    }
}
