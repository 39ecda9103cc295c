//! Parametric ODE systems and their numerical integration.
//!
//! A model couples a vector field `dx/dt = f(t, x, θ)`, an initial-state map
//! `x(t0) = x0(θ)` and an observation map `y = g(t, x, θ)`. [`integrate`]
//! evaluates states and observables on an arbitrary increasing time grid
//! using an adaptive Dormand–Prince 5(4) pair with dense output.

mod dopri5;

use std::fmt;
use std::sync::Arc;

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use dopri5::Dopri5;

/// Right-hand side, initial state and observation map of an ODE system.
///
/// Implementations must be pure: identical inputs give identical outputs.
pub trait OdeSystem: Send + Sync {
    fn rhs(&self, t: f64, x: &[f64], theta: &[f64], dx: &mut [f64]);

    fn initial_state(&self, theta: &[f64], x0: &mut [f64]);

    fn observe(&self, t: f64, x: &[f64], theta: &[f64], y: &mut [f64]);
}

/// How the optimizer moves along a parameter axis.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ParamScale {
    Linear,
    /// Geometric between the bounds; a zero lower bound is handled with a
    /// fixed number of decades below the upper bound.
    Log,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ParamBounds {
    pub lo: f64,
    pub hi: f64,
    pub scale: ParamScale,
}

impl ParamBounds {
    pub fn linear(lo: f64, hi: f64) -> Self {
        Self {
            lo,
            hi,
            scale: ParamScale::Linear,
        }
    }

    pub fn log(lo: f64, hi: f64) -> Self {
        Self {
            lo,
            hi,
            scale: ParamScale::Log,
        }
    }

    pub fn fixed(value: f64) -> Self {
        Self::linear(value, value)
    }

    pub fn is_fixed(&self) -> bool {
        self.lo == self.hi
    }

    pub fn contains(&self, v: f64) -> bool {
        v >= self.lo && v <= self.hi
    }
}

/// A parametric dynamical system with its dimensions and parameter box.
#[derive(Clone)]
pub struct OdeModel {
    pub name: String,
    pub n_x: usize,
    pub n_y: usize,
    pub n_theta: usize,
    pub bounds: Vec<ParamBounds>,
    /// Parameter names, in order.
    pub param_names: Vec<String>,
    pub system: Arc<dyn OdeSystem>,
}

impl fmt::Debug for OdeModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("OdeModel")
            .field("name", &self.name)
            .field("n_x", &self.n_x)
            .field("n_y", &self.n_y)
            .field("n_theta", &self.n_theta)
            .finish_non_exhaustive()
    }
}

impl OdeModel {
    pub fn new(
        name: impl Into<String>,
        n_x: usize,
        n_y: usize,
        param_names: Vec<String>,
        bounds: Vec<ParamBounds>,
        system: Arc<dyn OdeSystem>,
    ) -> Result<Self> {
        let name = name.into();
        let n_theta = bounds.len();
        if n_x == 0 || n_y == 0 || n_theta == 0 {
            return Err(Error::InvalidConfig(format!(
                "model `{name}` needs n_x, n_y, n_theta >= 1"
            )));
        }
        if param_names.len() != n_theta {
            return Err(Error::DimensionMismatch(format!(
                "{} parameter names for {n_theta} bounds",
                param_names.len()
            )));
        }
        if let Some(j) = bounds.iter().position(|b| !(b.lo <= b.hi)) {
            return Err(Error::InvalidConfig(format!(
                "bounds for parameter {j} of `{name}` are inverted"
            )));
        }
        Ok(Self {
            name,
            n_x,
            n_y,
            n_theta,
            bounds,
            param_names,
            system,
        })
    }

    pub fn within_bounds(&self, theta: &[f64]) -> bool {
        theta.len() == self.n_theta && self.bounds.iter().zip(theta).all(|(b, &v)| b.contains(v))
    }

    pub fn initial_state(&self, theta: &[f64]) -> Vec<f64> {
        let mut x0 = vec![0.0; self.n_x];
        self.system.initial_state(theta, &mut x0);
        x0
    }

    pub fn observe(&self, t: f64, x: &[f64], theta: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; self.n_y];
        self.system.observe(t, x, theta, &mut y);
        y
    }

    /// Replace the observation map with `wrap(t, y)` applied after the
    /// original one. Used for transform-both-sides fitting.
    pub fn map_observables<F>(&self, suffix: &str, wrap: F) -> OdeModel
    where
        F: Fn(usize, f64) -> f64 + Send + Sync + 'static,
    {
        OdeModel {
            name: format!("{}{}", self.name, suffix),
            system: Arc::new(MappedObservation {
                inner: self.system.clone(),
                n_y: self.n_y,
                wrap,
            }),
            ..self.clone()
        }
    }

    /// Same dynamics with a fixed initial state independent of the parameters.
    pub fn with_initial_state(&self, x0: Vec<f64>) -> Result<OdeModel> {
        if x0.len() != self.n_x {
            return Err(Error::DimensionMismatch(format!(
                "initial state has {} entries, model `{}` has n_x = {}",
                x0.len(),
                self.name,
                self.n_x
            )));
        }
        Ok(OdeModel {
            system: Arc::new(FixedInitialState {
                inner: self.system.clone(),
                x0,
            }),
            ..self.clone()
        })
    }
}

struct MappedObservation<F> {
    inner: Arc<dyn OdeSystem>,
    n_y: usize,
    wrap: F,
}

impl<F> OdeSystem for MappedObservation<F>
where
    F: Fn(usize, f64) -> f64 + Send + Sync,
{
    fn rhs(&self, t: f64, x: &[f64], theta: &[f64], dx: &mut [f64]) {
        self.inner.rhs(t, x, theta, dx)
    }

    fn initial_state(&self, theta: &[f64], x0: &mut [f64]) {
        self.inner.initial_state(theta, x0)
    }

    fn observe(&self, t: f64, x: &[f64], theta: &[f64], y: &mut [f64]) {
        self.inner.observe(t, x, theta, y);
        for (k, v) in y.iter_mut().enumerate().take(self.n_y) {
            *v = (self.wrap)(k, *v);
        }
    }
}

struct FixedInitialState {
    inner: Arc<dyn OdeSystem>,
    x0: Vec<f64>,
}

impl OdeSystem for FixedInitialState {
    fn rhs(&self, t: f64, x: &[f64], theta: &[f64], dx: &mut [f64]) {
        self.inner.rhs(t, x, theta, dx)
    }

    fn initial_state(&self, _theta: &[f64], x0: &mut [f64]) {
        x0.copy_from_slice(&self.x0);
    }

    fn observe(&self, t: f64, x: &[f64], theta: &[f64], y: &mut [f64]) {
        self.inner.observe(t, x, theta, y)
    }
}

/// Step-size control settings for [`integrate`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IntegratorConfig {
    pub rel_tol: f64,
    pub abs_tol: f64,
    pub max_steps: usize,
    /// `None` selects the initial step automatically.
    pub initial_step: Option<f64>,
}

impl Default for IntegratorConfig {
    fn default() -> Self {
        Self {
            rel_tol: 1e-8,
            abs_tol: 1e-10,
            max_steps: 1_000_000,
            initial_step: None,
        }
    }
}

impl IntegratorConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.rel_tol > 0.0) || !(self.abs_tol > 0.0) || self.max_steps == 0 {
            return Err(Error::InvalidConfig(
                "integrator tolerances and max_steps must be positive".into(),
            ));
        }
        if let Some(h) = self.initial_step {
            if !(h > 0.0) {
                return Err(Error::InvalidConfig("initial_step must be positive".into()));
            }
        }
        Ok(())
    }
}

/// States and observables sampled on a time grid.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub times: Vec<f64>,
    /// `|times| × n_x`
    pub states: Array2<f64>,
    /// `|times| × n_y`
    pub observables: Array2<f64>,
}

pub(crate) fn check_grid(grid: &[f64]) -> Result<()> {
    if grid.is_empty() {
        return Err(Error::InvalidGrid("empty grid".into()));
    }
    if grid.iter().any(|t| !t.is_finite()) {
        return Err(Error::InvalidGrid("non-finite time".into()));
    }
    if let Some(w) = grid.windows(2).find(|w| !(w[1] > w[0])) {
        return Err(Error::InvalidGrid(format!(
            "times must be strictly increasing ({} then {})",
            w[0], w[1]
        )));
    }
    Ok(())
}

/// Integrate `model` at parameters `theta` and sample it at every point of
/// `grid`; `grid[0]` is the initial time.
pub fn integrate(
    model: &OdeModel,
    theta: &[f64],
    grid: &[f64],
    cfg: &IntegratorConfig,
) -> Result<Trajectory> {
    check_grid(grid)?;
    cfg.validate()?;
    if theta.len() != model.n_theta {
        return Err(Error::DimensionMismatch(format!(
            "theta has {} entries, model `{}` expects {}",
            theta.len(),
            model.name,
            model.n_theta
        )));
    }
    if !model.within_bounds(theta) {
        log::warn!("integrating `{}` outside its parameter bounds", model.name);
    }
    let x0 = model.initial_state(theta);
    let system = model.system.as_ref();
    let states = Dopri5::new(model.n_x, cfg).solve(
        |t, x, dx| system.rhs(t, x, theta, dx),
        &x0,
        grid,
    )?;
    let mut observables = Array2::zeros((grid.len(), model.n_y));
    let mut y = vec![0.0; model.n_y];
    for (i, &t) in grid.iter().enumerate() {
        let x = states.row(i);
        system.observe(t, x.as_slice().expect("row-major states"), theta, &mut y);
        if y.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFiniteState { t });
        }
        observables.row_mut(i).assign(&ndarray::ArrayView1::from(&y[..]));
    }
    Ok(Trajectory {
        times: grid.to_vec(),
        states,
        observables,
    })
}

/// Closed-form solution of `dx/dt = r x (1 - x/K)` with `x(0) = x0`.
pub fn logistic_closed_form(t: f64, r: f64, k: f64, x0: f64) -> f64 {
    // exp_m1 keeps precision for small r t; the ratio form avoids overflow.
    let em1 = (r * t).exp_m1();
    if em1.is_infinite() {
        return k;
    }
    k * x0 * (em1 + 1.0) / (k + x0 * em1)
}
