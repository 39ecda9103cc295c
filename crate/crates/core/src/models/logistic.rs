use std::sync::Arc;

use super::ModelSpec;
use crate::ode::{OdeModel, OdeSystem, ParamBounds};

/// `dx/dt = r x (1 - x/K)`, θ = (r, K).
#[derive(Debug, Clone)]
pub struct Logistic {
    pub x0: f64,
}

impl OdeSystem for Logistic {
    fn rhs(&self, _t: f64, x: &[f64], theta: &[f64], dx: &mut [f64]) {
        let (r, k) = (theta[0], theta[1]);
        dx[0] = r * x[0] * (1.0 - x[0] / k);
    }

    fn initial_state(&self, _theta: &[f64], x0: &mut [f64]) {
        x0[0] = self.x0;
    }

    fn observe(&self, _t: f64, x: &[f64], _theta: &[f64], y: &mut [f64]) {
        y[0] = x[0];
    }
}

pub(super) fn spec() -> ModelSpec {
    let model = OdeModel::new(
        "logistic",
        1,
        1,
        vec!["r".into(), "K".into()],
        vec![ParamBounds::linear(1e-3, 1.0), ParamBounds::linear(1.0, 1000.0)],
        Arc::new(Logistic { x0: 10.0 }),
    )
    .expect("static model definition");
    ModelSpec {
        model,
        true_params: Some(vec![0.1, 100.0]),
        default_x0: vec![10.0],
        default_horizon: (0.0, 100.0),
        default_n: 10,
    }
}
