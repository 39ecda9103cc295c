//! Built-in benchmark systems.
//!
//! | name             | n_θ | n_x | n_y |
//! |------------------|-----|-----|-----|
//! | `logistic`       | 2   | 1   | 1   |
//! | `lotka_volterra` | 4   | 2   | 2   |
//! | `alpha_pinene`   | 5   | 5   | 5   |
//! | `nfkb`           | 29  | 15  | 6   |
//!
//! Initial conditions are treated as known and do not depend on θ.

mod alpha_pinene;
mod logistic;
mod lotka_volterra;
mod nfkb;

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::ode::OdeModel;

pub use alpha_pinene::{alpha_pinene_real_dataset, AlphaPinene};
pub use logistic::Logistic;
pub use lotka_volterra::LotkaVolterra;
pub use nfkb::{nfkb_observe, Nfkb, NFKB_PARAM_NAMES, NFKB_STATE_NAMES};

/// Names accepted by [`registry_get`].
pub const MODEL_NAMES: [&str; 4] = ["logistic", "lotka_volterra", "alpha_pinene", "nfkb"];

/// A benchmark system with its reference scenario.
#[derive(Debug, Clone)]
pub struct ModelSpec {
    pub model: OdeModel,
    /// Data-generating parameters; `None` for real-data scenarios.
    pub true_params: Option<Vec<f64>>,
    pub default_x0: Vec<f64>,
    pub default_horizon: (f64, f64),
    pub default_n: usize,
}

impl ModelSpec {
    pub fn name(&self) -> &str {
        &self.model.name
    }

    /// `n_points + 1` equispaced times over the default horizon; the first
    /// one is the (noise-free) initial time.
    pub fn uniform_grid(&self, n_points: usize) -> Vec<f64> {
        let (t0, t1) = self.default_horizon;
        let n = n_points.max(1);
        (0..=n)
            .map(|i| {
                if i == n {
                    t1
                } else {
                    t0 + (t1 - t0) * i as f64 / n as f64
                }
            })
            .collect()
    }

    /// Replace the initial state with the first observed row. Only valid for
    /// fully observed systems, where that row is the state itself.
    pub fn anchored_to(&self, data: &Dataset) -> Result<ModelSpec> {
        if self.model.n_y != self.model.n_x {
            return Err(Error::InvalidConfig(format!(
                "model `{}` is not fully observed; its initial state cannot be read from data",
                self.name()
            )));
        }
        if data.n_y() != self.model.n_y {
            return Err(Error::DimensionMismatch(format!(
                "dataset has {} observables, model `{}` has {}",
                data.n_y(),
                self.name(),
                self.model.n_y
            )));
        }
        let x0 = data.y.row(0).to_vec();
        Ok(ModelSpec {
            model: self.model.with_initial_state(x0.clone())?,
            default_x0: x0,
            ..self.clone()
        })
    }
}

/// Look up a built-in model by name.
pub fn registry_get(name: &str) -> Result<ModelSpec> {
    match name {
        "logistic" => Ok(logistic::spec()),
        "lotka_volterra" => Ok(lotka_volterra::spec()),
        "alpha_pinene" => Ok(alpha_pinene::spec()),
        "nfkb" => Ok(nfkb::spec()),
        other => Err(Error::UnknownModel(other.to_string())),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn dimensions_match_the_benchmark_table() {
        let dims = |n: &str| {
            let m = registry_get(n).unwrap().model;
            (m.n_theta, m.n_x, m.n_y)
        };
        assert_eq!(dims("logistic"), (2, 1, 1));
        assert_eq!(dims("lotka_volterra"), (4, 2, 2));
        assert_eq!(dims("alpha_pinene"), (5, 5, 5));
        assert_eq!(dims("nfkb"), (29, 15, 6));
    }

    #[test]
    fn unknown_model() {
        assert!(matches!(
            registry_get("unknown"),
            Err(Error::UnknownModel(n)) if n == "unknown"
        ));
    }

    #[test]
    fn truths_lie_within_bounds() {
        for name in MODEL_NAMES {
            let spec = registry_get(name).unwrap();
            let theta = spec.true_params.as_ref().unwrap();
            assert!(spec.model.within_bounds(theta), "{name}");
            assert_eq!(spec.default_x0.len(), spec.model.n_x);
            assert_eq!(spec.model.initial_state(theta), spec.default_x0);
        }
    }

    #[test]
    fn uniform_grid_includes_both_ends() {
        let spec = registry_get("logistic").unwrap();
        let g = spec.uniform_grid(10);
        assert_eq!(g.len(), 11);
        assert_eq!(g[0], 0.0);
        assert_eq!(g[1], 10.0);
        assert_eq!(g[10], 100.0);
    }
}
