//! Observation datasets, the synthetic noise model and data transforms.
//!
//! The first row of every dataset is the initial time. It is treated as
//! known: synthetic data never perturbs it and it is never used as a
//! calibration point.

pub mod csv;
mod transform;

use ndarray::{Array2, Axis};
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::models::ModelSpec;
use crate::ode::{check_grid, integrate, IntegratorConfig};
use crate::seed::{self, stream};

pub use transform::{apply_transform, invert_transform_bounds, Transform, TransformKind};

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct DatasetMeta {
    pub model: Option<String>,
    pub epsilon: Option<f64>,
    pub seed: Option<u64>,
    /// Tag of the transform applied to `y`, `identity` when untouched.
    pub transform: String,
}

/// Observations `y` (`n_rows × n_y`) on a strictly increasing time grid.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub times: Vec<f64>,
    pub y: Array2<f64>,
    pub meta: DatasetMeta,
}

impl Dataset {
    pub fn new(times: Vec<f64>, y: Array2<f64>, meta: DatasetMeta) -> Result<Self> {
        if times.len() != y.nrows() {
            return Err(Error::DimensionMismatch(format!(
                "{} times for {} observation rows",
                times.len(),
                y.nrows()
            )));
        }
        if times.len() < 3 {
            return Err(Error::InvalidDataset(format!(
                "need at least 3 rows (initial time plus two observations), got {}",
                times.len()
            )));
        }
        if y.ncols() == 0 {
            return Err(Error::InvalidDataset("no observable columns".into()));
        }
        check_grid(&times).map_err(|e| Error::InvalidDataset(e.to_string()))?;
        if let Some(((i, k), v)) = y.indexed_iter().find(|(_, v)| !v.is_finite()) {
            return Err(Error::InvalidDataset(format!(
                "non-finite observation {v} at row {i}, column {k}"
            )));
        }
        let mut meta = meta;
        if meta.transform.is_empty() {
            meta.transform = "identity".into();
        }
        Ok(Self { times, y, meta })
    }

    /// Build a dataset from `(time, observations)` rows in any order.
    pub fn from_rows(mut rows: Vec<(f64, Vec<f64>)>, meta: DatasetMeta) -> Result<Self> {
        rows.sort_by(|a, b| a.0.total_cmp(&b.0));
        let n_y = rows.first().map_or(0, |r| r.1.len());
        if let Some(r) = rows.iter().find(|r| r.1.len() != n_y) {
            return Err(Error::DimensionMismatch(format!(
                "row at t = {} has {} values, expected {n_y}",
                r.0,
                r.1.len()
            )));
        }
        let times = rows.iter().map(|r| r.0).collect();
        let flat: Vec<f64> = rows.into_iter().flat_map(|r| r.1).collect();
        let n = flat.len() / n_y.max(1);
        let y = Array2::from_shape_vec((n, n_y), flat)
            .map_err(|e| Error::DimensionMismatch(e.to_string()))?;
        Self::new(times, y, meta)
    }

    pub fn n_rows(&self) -> usize {
        self.times.len()
    }

    pub fn n_y(&self) -> usize {
        self.y.ncols()
    }

    /// Number of calibration-eligible rows (all rows except the initial one).
    pub fn n_cal(&self) -> usize {
        self.times.len() - 1
    }

    pub fn t0(&self) -> f64 {
        self.times[0]
    }
}

/// Homoscedastic Gaussian noise with `σ_k = ε · mean_k`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NoiseSpec {
    pub epsilon: f64,
    pub seed: u64,
}

impl NoiseSpec {
    pub fn validate(&self) -> Result<()> {
        if !(self.epsilon >= 0.0) || !self.epsilon.is_finite() {
            return Err(Error::InvalidConfig(format!(
                "noise fraction must be finite and >= 0, got {}",
                self.epsilon
            )));
        }
        Ok(())
    }
}

/// Noise-free observables of `spec` at its true parameters.
pub fn nominal_observables(
    spec: &ModelSpec,
    grid: &[f64],
    cfg: &IntegratorConfig,
) -> Result<Array2<f64>> {
    let theta = spec.true_params.as_ref().ok_or_else(|| {
        Error::InvalidConfig(format!("model `{}` has no data-generating parameters", spec.name()))
    })?;
    Ok(integrate(&spec.model, theta, grid, cfg)?.observables)
}

/// Per-coordinate noise scale `ε · (1/n) Σ_{i≥1} y_k(t_i)`; the initial row
/// does not enter the mean.
pub fn noise_sigma(nominal: &Array2<f64>, epsilon: f64) -> Vec<f64> {
    let body = nominal.slice(ndarray::s![1.., ..]);
    body.mean_axis(Axis(0))
        .map(|m| m.iter().map(|mu| epsilon * mu.abs()).collect())
        .unwrap_or_else(|| vec![0.0; nominal.ncols()])
}

/// Add `N(0, σ_k²)` to every row but the first. Each draw is keyed by
/// `(path…, k, i)`, so the result does not depend on evaluation order.
pub fn perturb(nominal: &Array2<f64>, sigma: &[f64], path: &[u64]) -> Array2<f64> {
    let mut out = nominal.clone();
    let mut key = path.to_vec();
    key.extend([0, 0]);
    let len = key.len();
    for ((i, k), v) in out.indexed_iter_mut() {
        if i == 0 || sigma[k] == 0.0 {
            continue;
        }
        key[len - 2] = k as u64;
        key[len - 1] = i as u64;
        let z: f64 = seed::rng(&key).sample(StandardNormal);
        *v += sigma[k] * z;
    }
    out
}

fn noisy(
    spec: &ModelSpec,
    grid: &[f64],
    noise: &NoiseSpec,
    domain: u64,
    replicate: u64,
) -> Result<Dataset> {
    noise.validate()?;
    let nominal = nominal_observables(spec, grid, &IntegratorConfig::default())?;
    let sigma = noise_sigma(&nominal, noise.epsilon);
    let y = perturb(&nominal, &sigma, &[noise.seed, domain, replicate]);
    Dataset::new(
        grid.to_vec(),
        y,
        DatasetMeta {
            model: Some(spec.name().to_string()),
            epsilon: Some(noise.epsilon),
            seed: Some(noise.seed),
            transform: "identity".into(),
        },
    )
}

/// Synthetic dataset at the true parameters of `spec`.
pub fn simulate_dataset(spec: &ModelSpec, grid: &[f64], noise: &NoiseSpec) -> Result<Dataset> {
    simulate_replicate(spec, grid, noise, 0)
}

/// Synthetic dataset for replicate `replicate` of an experiment seeded by
/// `noise.seed`.
pub fn simulate_replicate(
    spec: &ModelSpec,
    grid: &[f64],
    noise: &NoiseSpec,
    replicate: u64,
) -> Result<Dataset> {
    noisy(spec, grid, noise, stream::NOISE, replicate)
}

/// Independent draws from the same noise model, used as new observations
/// when measuring coverage.
pub fn fresh_observations(
    spec: &ModelSpec,
    grid: &[f64],
    noise: &NoiseSpec,
    replicate: u64,
) -> Result<Dataset> {
    noisy(spec, grid, noise, stream::TRUTH, replicate)
}
