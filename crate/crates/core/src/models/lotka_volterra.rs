use std::sync::Arc;

use super::ModelSpec;
use crate::ode::{OdeModel, OdeSystem, ParamBounds};

/// Predator–prey system, θ = (α, β, γ, δ):
/// `dx1/dt = x1 (α - β x2)`, `dx2/dt = -x2 (γ - δ x1)`.
#[derive(Debug, Clone)]
pub struct LotkaVolterra {
    pub x0: [f64; 2],
}

impl OdeSystem for LotkaVolterra {
    fn rhs(&self, _t: f64, x: &[f64], theta: &[f64], dx: &mut [f64]) {
        let (alpha, beta, gamma, delta) = (theta[0], theta[1], theta[2], theta[3]);
        dx[0] = x[0] * (alpha - beta * x[1]);
        dx[1] = -x[1] * (gamma - delta * x[0]);
    }

    fn initial_state(&self, _theta: &[f64], x0: &mut [f64]) {
        x0.copy_from_slice(&self.x0);
    }

    fn observe(&self, _t: f64, x: &[f64], _theta: &[f64], y: &mut [f64]) {
        y.copy_from_slice(x);
    }
}

pub(super) fn spec() -> ModelSpec {
    let rate = ParamBounds::linear(1e-3, 1.0);
    let coupling = ParamBounds::linear(1e-3, 0.1);
    let model = OdeModel::new(
        "lotka_volterra",
        2,
        2,
        vec!["alpha".into(), "beta".into(), "gamma".into(), "delta".into()],
        vec![rate, coupling, rate, coupling],
        Arc::new(LotkaVolterra { x0: [10.0, 5.0] }),
    )
    .expect("static model definition");
    ModelSpec {
        model,
        true_params: Some(vec![0.5, 0.02, 0.5, 0.02]),
        default_x0: vec![10.0, 5.0],
        default_horizon: (0.0, 30.0),
        default_n: 30,
    }
}
