use std::sync::Arc;

use super::ModelSpec;
use crate::data::{self, Dataset};
use crate::ode::{OdeModel, OdeSystem, ParamBounds};

const REAL_DATA: &str = include_str!("../../data/alpha_pinene.csv");

/// First-order isomerization network of α-pinene, θ = (p1, …, p5).
///
/// ```text
/// dx1/dt = -(p1 + p2) x1
/// dx2/dt = p1 x1
/// dx3/dt = p2 x1 - (p3 + p4) x3 + p5 x5
/// dx4/dt = p3 x3
/// dx5/dt = p4 x3 - p5 x5
/// ```
///
/// The right-hand side sums to zero, so total mass is conserved.
#[derive(Debug, Clone)]
pub struct AlphaPinene {
    pub x0: [f64; 5],
}

impl OdeSystem for AlphaPinene {
    fn rhs(&self, _t: f64, x: &[f64], p: &[f64], dx: &mut [f64]) {
        dx[0] = -(p[0] + p[1]) * x[0];
        dx[1] = p[0] * x[0];
        dx[2] = p[1] * x[0] - (p[2] + p[3]) * x[2] + p[4] * x[4];
        dx[3] = p[2] * x[2];
        dx[4] = p[3] * x[2] - p[4] * x[4];
    }

    fn initial_state(&self, _theta: &[f64], x0: &mut [f64]) {
        x0.copy_from_slice(&self.x0);
    }

    fn observe(&self, _t: f64, x: &[f64], _theta: &[f64], y: &mut [f64]) {
        y.copy_from_slice(x);
    }
}

pub(super) fn spec() -> ModelSpec {
    let model = OdeModel::new(
        "alpha_pinene",
        5,
        5,
        (1..=5).map(|i| format!("p{i}")).collect(),
        vec![ParamBounds::log(0.0, 1.0); 5],
        Arc::new(AlphaPinene {
            x0: [100.0, 0.0, 0.0, 0.0, 0.0],
        }),
    )
    .expect("static model definition");
    ModelSpec {
        model,
        true_params: Some(vec![5.93e-05, 2.96e-05, 2.05e-05, 2.75e-04, 4.00e-05]),
        default_x0: vec![100.0, 0.0, 0.0, 0.0, 0.0],
        default_horizon: (0.0, 36420.0),
        default_n: 8,
    }
}

/// The nine-point multiresponse α-pinene dataset bundled with the crate.
pub fn alpha_pinene_real_dataset() -> Dataset {
    let mut d = data::csv::parse_dataset(REAL_DATA.as_bytes()).expect("bundled fixture parses");
    d.meta.model = Some("alpha_pinene".into());
    d
}
