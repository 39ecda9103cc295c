//! Maximum-likelihood / least-squares fitting and leave-one-out refits.

mod loo;
pub mod nelder_mead;
pub mod search;

use std::f64::consts::PI;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::Dataset;
use crate::ode::{integrate, IntegratorConfig, OdeModel};
use crate::{Error, Result};

pub use loo::{loo_fit, GridPredictions, LooEnsemble};
use nelder_mead::NmConfig;
use search::{start_points, SearchSpace};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ObjectiveKind {
    Sse,
    GaussianNll,
}

/// Noise scale used by the Gaussian likelihood.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SigmaSpec {
    /// RMS residual of a preliminary least-squares fit, then one refit.
    Estimate,
    Fixed(Vec<f64>),
}

/// A fully specified cost function.
#[derive(Debug, Clone, PartialEq)]
pub enum Cost {
    Sse,
    GaussianNll { sigma: Vec<f64> },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OptimizerConfig {
    pub n_starts: usize,
    pub max_local_iters: usize,
    pub local_tol: f64,
    pub seed: u64,
    pub objective: ObjectiveKind,
    pub sigma: SigmaSpec,
    /// Parameter vectors tried before the Latin-hypercube starts.
    pub initial_points: Vec<Vec<f64>>,
    pub integrator: IntegratorConfig,
}

impl Default for OptimizerConfig {
    fn default() -> Self {
        Self {
            n_starts: 20,
            max_local_iters: 400,
            local_tol: 1e-10,
            seed: 0,
            objective: ObjectiveKind::GaussianNll,
            sigma: SigmaSpec::Estimate,
            initial_points: Vec::new(),
            integrator: IntegratorConfig {
                max_steps: 100_000,
                ..IntegratorConfig::default()
            },
        }
    }
}

impl OptimizerConfig {
    pub fn validate(&self, model: &OdeModel) -> Result<()> {
        if self.n_starts == 0 {
            return Err(Error::InvalidConfig("n_starts must be at least 1".into()));
        }
        if self.max_local_iters == 0 || !(self.local_tol > 0.0) {
            return Err(Error::InvalidConfig(
                "max_local_iters and local_tol must be positive".into(),
            ));
        }
        if let SigmaSpec::Fixed(s) = &self.sigma {
            if s.len() != model.n_y || s.iter().any(|v| !(*v > 0.0 && v.is_finite())) {
                return Err(Error::InvalidConfig(format!(
                    "sigma needs {} positive entries",
                    model.n_y
                )));
            }
        }
        for p in &self.initial_points {
            if p.len() != model.n_theta {
                return Err(Error::InvalidConfig(format!(
                    "initial point has {} entries, expected {}",
                    p.len(),
                    model.n_theta
                )));
            }
        }
        self.integrator.validate()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitResult {
    pub theta_hat: Vec<f64>,
    pub cost: f64,
    pub n_objective_evals: usize,
    pub n_starts: usize,
    pub converged: bool,
    /// Noise scale the likelihood was evaluated with, if any.
    pub sigma: Option<Vec<f64>>,
}

impl FitResult {
    /// Wrap a parameter vector obtained elsewhere.
    pub fn external(theta: Vec<f64>) -> Self {
        Self {
            theta_hat: theta,
            cost: 0.0,
            n_objective_evals: 0,
            n_starts: 0,
            converged: true,
            sigma: None,
        }
    }
}

/// Cost restricted to a subset of rows.
struct Problem<'a> {
    model: &'a OdeModel,
    grid: Vec<f64>,
    obs: Vec<Vec<f64>>,
    integrator: IntegratorConfig,
}

impl<'a> Problem<'a> {
    /// `rows` are dataset row indices (never 0).
    fn new(dataset: &Dataset, model: &'a OdeModel, rows: &[usize], integrator: IntegratorConfig) -> Self {
        let mut grid = vec![dataset.t0()];
        grid.extend(rows.iter().map(|&i| dataset.times[i]));
        let obs = rows.iter().map(|&i| dataset.y.row(i).to_vec()).collect();
        Self {
            model,
            grid,
            obs,
            integrator,
        }
    }

    fn residuals(&self, theta: &[f64]) -> Option<Vec<Vec<f64>>> {
        let traj = integrate(self.model, theta, &self.grid, &self.integrator).ok()?;
        Some(
            self.obs
                .iter()
                .enumerate()
                .map(|(i, y)| {
                    y.iter()
                        .zip(traj.observables.row(i + 1))
                        .map(|(a, b)| a - b)
                        .collect()
                })
                .collect(),
        )
    }

    fn eval(&self, theta: &[f64], cost: &Cost) -> f64 {
        let Some(res) = self.residuals(theta) else {
            return f64::INFINITY;
        };
        let v = match cost {
            Cost::Sse => res.iter().flatten().map(|r| r * r).sum(),
            Cost::GaussianNll { sigma } => {
                let mut acc = 0.0;
                for row in &res {
                    for (r, s) in row.iter().zip(sigma) {
                        acc += (2.0 * PI * s * s).ln() + (r / s).powi(2);
                    }
                }
                0.5 * acc
            }
        };
        if v.is_finite() {
            v
        } else {
            f64::INFINITY
        }
    }
}

fn check_dims(dataset: &Dataset, model: &OdeModel) -> Result<()> {
    if dataset.n_y() != model.n_y {
        return Err(Error::DimensionMismatch(format!(
            "dataset has {} observables, model `{}` has {}",
            dataset.n_y(),
            model.name,
            model.n_y
        )));
    }
    Ok(())
}

/// Cost of `theta` on every non-initial row of `dataset`. Integration
/// failures give `+inf`.
pub fn objective(
    theta: &[f64],
    dataset: &Dataset,
    model: &OdeModel,
    cost: &Cost,
    integrator: &IntegratorConfig,
) -> f64 {
    let rows: Vec<usize> = (1..dataset.n_rows()).collect();
    Problem::new(dataset, model, &rows, *integrator).eval(theta, cost)
}

struct Best {
    theta: Vec<f64>,
    cost: f64,
    evals: usize,
    converged: bool,
}

fn multistart(
    problem: &Problem,
    cost: &Cost,
    cfg: &OptimizerConfig,
    initial: &[Vec<f64>],
    seed: u64,
) -> Option<Best> {
    let space = SearchSpace::new(&problem.model.bounds);
    let starts = start_points(&space, initial, cfg.n_starts, seed);
    let nm = NmConfig {
        max_iters: cfg.max_local_iters,
        tol: cfg.local_tol,
        ..NmConfig::default()
    };
    let runs: Vec<_> = starts
        .par_iter()
        .map(|u0| nelder_mead::minimize(|u| problem.eval(&space.to_theta(u), cost), u0, &nm))
        .collect();
    let evals = runs.iter().map(|r| r.evals).sum();
    // Strict `<` keeps the lowest index among ties.
    let mut best: Option<&nelder_mead::NmResult> = None;
    for r in runs.iter().filter(|r| r.f.is_finite()) {
        if best.is_none_or(|b| r.f < b.f) {
            best = Some(r);
        }
    }
    best.map(|b| Best {
        theta: space.to_theta(&b.x),
        cost: b.f,
        evals,
        converged: b.converged,
    })
}

const SIGMA_FLOOR: f64 = 1e-12;

fn fit_rows(
    dataset: &Dataset,
    model: &OdeModel,
    cfg: &OptimizerConfig,
    rows: &[usize],
    seed: u64,
) -> Option<FitResult> {
    let problem = Problem::new(dataset, model, rows, cfg.integrator);
    let n_starts = cfg.n_starts.max(cfg.initial_points.len());
    let sigma = match (&cfg.objective, &cfg.sigma) {
        (ObjectiveKind::Sse, _) => None,
        (ObjectiveKind::GaussianNll, SigmaSpec::Fixed(s)) => Some(s.clone()),
        (ObjectiveKind::GaussianNll, SigmaSpec::Estimate) => {
            let pre = multistart(&problem, &Cost::Sse, cfg, &cfg.initial_points, seed)?;
            let res = problem.residuals(&pre.theta)?;
            let sigma: Vec<f64> = (0..model.n_y)
                .map(|k| {
                    let ms = res.iter().map(|r| r[k] * r[k]).sum::<f64>() / res.len() as f64;
                    let scale = problem.obs.iter().map(|y| y[k].abs()).sum::<f64>() / res.len() as f64;
                    ms.sqrt().max(SIGMA_FLOOR * scale.max(1.0))
                })
                .collect();
            let cost = Cost::GaussianNll { sigma: sigma.clone() };
            if model.n_y == 1 {
                // A single scale does not move the least-squares minimizer.
                return Some(FitResult {
                    cost: problem.eval(&pre.theta, &cost),
                    theta_hat: pre.theta,
                    n_objective_evals: pre.evals,
                    n_starts,
                    converged: pre.converged,
                    sigma: Some(sigma),
                });
            }
            // The weights only rescale coordinates, so a local search from
            // the least-squares optimum is enough.
            let polish = OptimizerConfig {
                n_starts: 1,
                ..cfg.clone()
            };
            let post = multistart(&problem, &cost, &polish, std::slice::from_ref(&pre.theta), seed)?;
            return Some(FitResult {
                theta_hat: post.theta,
                cost: post.cost,
                n_objective_evals: pre.evals + post.evals,
                n_starts,
                converged: post.converged,
                sigma: Some(sigma),
            });
        }
    };
    let cost = match &sigma {
        None => Cost::Sse,
        Some(s) => Cost::GaussianNll { sigma: s.clone() },
    };
    let best = multistart(&problem, &cost, cfg, &cfg.initial_points, seed)?;
    Some(FitResult {
        theta_hat: best.theta,
        cost: best.cost,
        n_objective_evals: best.evals,
        n_starts,
        converged: best.converged,
        sigma,
    })
}

/// Multistart fit on all non-initial rows.
pub fn fit(dataset: &Dataset, model: &OdeModel, cfg: &OptimizerConfig) -> Result<FitResult> {
    check_dims(dataset, model)?;
    cfg.validate(model)?;
    let rows: Vec<usize> = (1..dataset.n_rows()).collect();
    fit_rows(dataset, model, cfg, &rows, cfg.seed).ok_or(Error::AllStartsFailed { index: None })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{simulate_dataset, NoiseSpec};
    use crate::models::registry_get;

    fn noiseless(name: &str, n: usize) -> (crate::models::ModelSpec, Dataset) {
        let spec = registry_get(name).unwrap();
        let grid = spec.uniform_grid(n);
        let d = simulate_dataset(&spec, &grid, &NoiseSpec { epsilon: 0.0, seed: 1 }).unwrap();
        (spec, d)
    }

    #[test]
    fn sse_vanishes_at_the_truth() {
        let (spec, d) = noiseless("logistic", 10);
        let theta = spec.true_params.clone().unwrap();
        let c = objective(&theta, &d, &spec.model, &Cost::Sse, &IntegratorConfig::default());
        assert!(c < 1e-12 * 100.0);
        let other = objective(&[0.2, 100.0], &d, &spec.model, &Cost::Sse, &IntegratorConfig::default());
        assert!(other > c);
    }

    #[test]
    fn nll_constant_term() {
        let (spec, d) = noiseless("lotka_volterra", 6);
        let theta = spec.true_params.clone().unwrap();
        let cost = Cost::GaussianNll { sigma: vec![1.0, 1.0] };
        let c = objective(&theta, &d, &spec.model, &cost, &IntegratorConfig::default());
        let expected = (6.0 * 2.0 / 2.0) * (2.0 * PI).ln();
        assert!((c - expected).abs() < 1e-9, "{c} vs {expected}");
    }

    #[test]
    fn failed_integration_is_infinite_cost() {
        let (spec, d) = noiseless("logistic", 5);
        let cfg = IntegratorConfig {
            max_steps: 1,
            ..Default::default()
        };
        let c = objective(&[0.1, 100.0], &d, &spec.model, &Cost::Sse, &cfg);
        assert_eq!(c, f64::INFINITY);
    }

    #[test]
    fn single_start_at_truth_converges() {
        let (spec, d) = noiseless("logistic", 10);
        let cfg = OptimizerConfig {
            n_starts: 1,
            objective: ObjectiveKind::Sse,
            initial_points: vec![spec.true_params.clone().unwrap()],
            ..Default::default()
        };
        let r = fit(&d, &spec.model, &cfg).unwrap();
        assert!(r.converged);
        assert!(r.cost < 1e-10);
    }

    #[test]
    fn logistic_recovery_and_bounds() {
        let (spec, d) = noiseless("logistic", 20);
        let r = fit(&d, &spec.model, &OptimizerConfig::default()).unwrap();
        assert!((r.theta_hat[0] / 0.1 - 1.0).abs() < 1e-3, "{:?}", r.theta_hat);
        assert!((r.theta_hat[1] / 100.0 - 1.0).abs() < 1e-3, "{:?}", r.theta_hat);
        assert!(spec.model.within_bounds(&r.theta_hat));
        assert!(r.cost.is_finite());
    }

    #[test]
    fn dimension_mismatch_is_reported() {
        let (_, d) = noiseless("logistic", 5);
        let lv = registry_get("lotka_volterra").unwrap();
        assert!(matches!(
            fit(&d, &lv.model, &OptimizerConfig::default()),
            Err(Error::DimensionMismatch(_))
        ));
    }

    #[test]
    fn zero_starts_rejected() {
        let (spec, d) = noiseless("logistic", 5);
        let cfg = OptimizerConfig {
            n_starts: 0,
            ..Default::default()
        };
        assert!(matches!(fit(&d, &spec.model, &cfg), Err(Error::InvalidConfig(_))));
    }
}
