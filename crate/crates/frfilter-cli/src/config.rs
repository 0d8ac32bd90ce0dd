//! Experiment configuration: a single versioned JSON document.
//!
//! Matrices are row-major nested arrays. Validation failures name the
//! offending field so a bad config is diagnosable from the error message
//! alone.

use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{anyhow, bail, Context, Result};
use nalgebra::{DMatrix, DVector};
use serde::Deserialize;

use frfilter::matfun::SpdMatrix;
use frfilter::proxfilter::{CovUpdateMode, LinearGaussianModel};

/// The schema tag every config must carry; bump the suffix on breaking
/// layout changes.
pub const SCHEMA: &str = "frfilter-experiment/1";

/// Raw JSON shape of an experiment file, prior to numeric validation.
#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    schema: String,
    /// Drift matrix A (n x n), row-major.
    a: Vec<Vec<f64>>,
    /// Diffusion input matrix B (n x q), row-major.
    b: Vec<Vec<f64>>,
    /// Observation matrix C (m x n), row-major.
    c: Vec<Vec<f64>>,
    /// Measurement noise covariance R (m x m), row-major, SPD.
    r: Vec<Vec<f64>>,
    /// True initial state of the simulated system.
    x0: Vec<f64>,
    /// Prior mean of the filters.
    mu0: Vec<f64>,
    /// Prior covariance of the filters (n x n), SPD.
    p0: Vec<Vec<f64>>,
    /// Time horizon T.
    horizon: f64,
    /// Step sizes to sweep; each must be positive and at most T.
    step_sizes: Vec<f64>,
    /// Trajectory seeds to sweep.
    seeds: Vec<u64>,
    /// Covariance update rule: "exact" or "truncated".
    cov_update: String,
    /// Output directory; the --out flag overrides it.
    #[serde(default)]
    out_dir: Option<PathBuf>,
}

/// A fully validated experiment: model plus sweep settings.
#[derive(Debug, Clone)]
pub struct Experiment {
    pub model: LinearGaussianModel,
    pub x0: DVector<f64>,
    pub mu0: DVector<f64>,
    pub p0: SpdMatrix,
    pub horizon: f64,
    pub step_sizes: Vec<f64>,
    pub seeds: Vec<u64>,
    pub mode: CovUpdateMode,
    pub out_dir: Option<PathBuf>,
}

/// Reads and validates an experiment file.
pub fn load(path: &Path) -> Result<Experiment> {
    let text = fs::read_to_string(path)
        .with_context(|| format!("reading config file {}", path.display()))?;
    let raw: RawConfig = serde_json::from_str(&text)
        .with_context(|| format!("parsing config file {}", path.display()))?;
    validate(raw)
}

fn validate(raw: RawConfig) -> Result<Experiment> {
    if raw.schema != SCHEMA {
        bail!(
            "config field \"schema\": expected \"{SCHEMA}\", found \"{}\"",
            raw.schema
        );
    }

    let a = parse_matrix("a", &raw.a)?;
    let b = parse_matrix("b", &raw.b)?;
    let c = parse_matrix("c", &raw.c)?;
    let r_mat = parse_matrix("r", &raw.r)?;
    let r = SpdMatrix::new(r_mat)
        .map_err(|e| anyhow!("config field \"r\": not symmetric positive definite ({e})"))?;
    let model = LinearGaussianModel::new(a, b, c, r)
        .map_err(|e| anyhow!("config fields \"a\"/\"b\"/\"c\"/\"r\": inconsistent model ({e})"))?;

    let n = model.state_dim();
    let x0 = parse_vector("x0", &raw.x0, n)?;
    let mu0 = parse_vector("mu0", &raw.mu0, n)?;
    let p0_mat = parse_matrix("p0", &raw.p0)?;
    if p0_mat.nrows() != n || p0_mat.ncols() != n {
        bail!(
            "config field \"p0\": expected a {n}x{n} matrix to match \"a\", found {}x{}",
            p0_mat.nrows(),
            p0_mat.ncols()
        );
    }
    let p0 = SpdMatrix::new(p0_mat)
        .map_err(|e| anyhow!("config field \"p0\": not symmetric positive definite ({e})"))?;

    if !(raw.horizon.is_finite() && raw.horizon > 0.0) {
        bail!(
            "config field \"horizon\": must be a positive finite time, found {}",
            raw.horizon
        );
    }
    if raw.step_sizes.is_empty() {
        bail!("config field \"step_sizes\": empty list (need at least one step size)");
    }
    for (i, &h) in raw.step_sizes.iter().enumerate() {
        if !(h.is_finite() && h > 0.0) {
            bail!("config field \"step_sizes\": entry {i} is {h}, must be positive and finite");
        }
        if h > raw.horizon {
            bail!(
                "config field \"step_sizes\": entry {i} is {h}, larger than the horizon {}",
                raw.horizon
            );
        }
    }
    if raw.seeds.is_empty() {
        bail!("config field \"seeds\": empty list (need at least one seed)");
    }

    let mode = match raw.cov_update.as_str() {
        "exact" => CovUpdateMode::Exact,
        "truncated" => CovUpdateMode::Truncated,
        other => bail!(
            "config field \"cov_update\": expected \"exact\" or \"truncated\", found \"{other}\""
        ),
    };

    Ok(Experiment {
        model,
        x0,
        mu0,
        p0,
        horizon: raw.horizon,
        step_sizes: raw.step_sizes,
        seeds: raw.seeds,
        mode,
        out_dir: raw.out_dir,
    })
}

fn parse_matrix(field: &str, rows: &[Vec<f64>]) -> Result<DMatrix<f64>> {
    if rows.is_empty() {
        bail!("config field \"{field}\": empty matrix");
    }
    let ncols = rows[0].len();
    if ncols == 0 {
        bail!("config field \"{field}\": rows must not be empty");
    }
    for (i, row) in rows.iter().enumerate() {
        if row.len() != ncols {
            bail!(
                "config field \"{field}\": row {i} has {} entries, expected {ncols} (rows must be equal length)",
                row.len()
            );
        }
        if let Some(v) = row.iter().find(|v| !v.is_finite()) {
            bail!("config field \"{field}\": row {i} contains the non-finite value {v}");
        }
    }
    Ok(DMatrix::from_row_iterator(
        rows.len(),
        ncols,
        rows.iter().flatten().copied(),
    ))
}

fn parse_vector(field: &str, entries: &[f64], expected_len: usize) -> Result<DVector<f64>> {
    if entries.len() != expected_len {
        bail!(
            "config field \"{field}\": expected {expected_len} entries to match \"a\", found {}",
            entries.len()
        );
    }
    if let Some(v) = entries.iter().find(|v| !v.is_finite()) {
        bail!("config field \"{field}\": contains the non-finite value {v}");
    }
    Ok(DVector::from_row_slice(entries))
}
