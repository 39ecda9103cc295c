//! IKK / IκBα / A20 / NF-κB signalling module (15 states, 29 parameters).
//!
//! State order: IKKn, IKKa, IKKi, IKKaIkBa, IKKaIkBaNFkB, NFkB, NFkBn, A20,
//! A20t, IkBa, IkBan, IkBat, IkBaNFkB, IkBanNFkBn, cgent.
//!
//! Parameter order: a1, a2, t1, a3, t2, c1a, c2a, c3a, c4a, c5a, c6a, c1, c2,
//! c3, c4, c5, k1, k2, k3, kprod, kdeg, kv, i1, e2a, i1a, e1a, c1c, c2c, c3c.
//!
//! The stimulus `Tr` is held constant (persistent TNF exposure, `Tr = 1`).
//! The resting initial state puts all IKK in the neutral form at its
//! production/degradation balance (kprod/kdeg = 0.2) and all NF-κB in the
//! cytoplasmic IκBα complex (0.06); every other species starts at zero.

use std::sync::Arc;

use super::ModelSpec;
use crate::ode::{OdeModel, OdeSystem, ParamBounds};

pub const NFKB_STATE_NAMES: [&str; 15] = [
    "IKKn",
    "IKKa",
    "IKKi",
    "IKKaIkBa",
    "IKKaIkBaNFkB",
    "NFkB",
    "NFkBn",
    "A20",
    "A20t",
    "IkBa",
    "IkBan",
    "IkBat",
    "IkBaNFkB",
    "IkBanNFkBn",
    "cgent",
];

pub const NFKB_PARAM_NAMES: [&str; 29] = [
    "a1", "a2", "t1", "a3", "t2", "c1a", "c2a", "c3a", "c4a", "c5a", "c6a", "c1", "c2", "c3", "c4",
    "c5", "k1", "k2", "k3", "kprod", "kdeg", "kv", "i1", "e2a", "i1a", "e1a", "c1c", "c2c", "c3c",
];

const TRUE_PARAMS: [f64; 29] = [
    5e-01, 2e-01, 1e-01, 1e+00, 1e-01, 5e-07, 0e+00, 4e-04, 5e-01, 1e-04, 2e-05, 5e-07, 0e+00,
    4e-04, 5e-01, 3e-04, 2.5e-03, 1e-01, 1.5e-03, 2.5e-05, 1.25e-04, 5e+00, 2.5e-03, 1e-02,
    1e-03, 5e-04, 5e-07, 0e+00, 4e-04,
];

const RESTING_STATE: [f64; 15] = [
    0.2, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.06, 0.0, 0.0,
];

#[derive(Debug, Clone)]
pub struct Nfkb {
    /// Constant stimulus level.
    pub tr: f64,
    pub x0: [f64; 15],
}

impl OdeSystem for Nfkb {
    fn rhs(&self, _t: f64, x: &[f64], p: &[f64], dx: &mut [f64]) {
        let [a1, a2, t1, a3, t2, c1a, c2a, c3a, c4a, c5a, c6a, c1, c2, c3, c4, c5, k1, k2, k3, kprod, kdeg, kv, i1, e2a, i1a, e1a, c1c, c2c, c3c] =
            <[f64; 29]>::try_from(p).expect("29 parameters");
        let [ikkn, ikka, ikki, ikka_ikba, ikka_ikba_nfkb, nfkb, nfkbn, a20, a20t, ikba, ikban, ikbat, ikba_nfkb, ikban_nfkbn, cgent] =
            <[f64; 15]>::try_from(x).expect("15 states");
        let tr = self.tr;

        dx[0] = kprod - kdeg * ikkn - tr * k1 * ikkn;
        dx[1] = tr * k1 * ikkn - k3 * ikka - tr * k2 * ikka * a20 - kdeg * ikka
            - a2 * ikka * ikba
            + t1 * ikka_ikba
            - a3 * ikka * ikba_nfkb
            + t2 * ikka_ikba_nfkb;
        dx[2] = k3 * ikka + tr * k2 * ikka * a20 - kdeg * ikki;
        dx[3] = a2 * ikka * ikba - t1 * ikka_ikba;
        dx[4] = a3 * ikka * ikba_nfkb - t2 * ikka_ikba_nfkb;
        dx[5] = c6a * ikba_nfkb - a1 * nfkb * ikba + t2 * ikka_ikba_nfkb - i1 * nfkb;
        dx[6] = i1 * kv * nfkb - a1 * ikban * nfkbn;
        dx[7] = c4 * a20t - c5 * a20;
        dx[8] = c2 + c1 * nfkbn - c3 * a20t;
        dx[9] = -a2 * ikka * ikba - a1 * ikba * nfkb + c4a * ikbat - c5a * ikba - i1a * ikba
            + e1a * ikban;
        dx[10] = -a1 * ikban * nfkbn + i1a * kv * ikba - e1a * kv * ikban;
        dx[11] = c2a + c1a * nfkbn - c3a * ikbat;
        dx[12] = a1 * ikba * nfkb - c6a * ikba_nfkb - a3 * ikka * ikba_nfkb + e2a * ikban_nfkbn;
        dx[13] = a1 * ikban * nfkbn - e2a * kv * ikban_nfkbn;
        dx[14] = c2c + c1c * nfkbn - c3c * cgent;
    }

    fn initial_state(&self, _theta: &[f64], x0: &mut [f64]) {
        x0.copy_from_slice(&self.x0);
    }

    fn observe(&self, _t: f64, x: &[f64], _theta: &[f64], y: &mut [f64]) {
        let obs = nfkb_observe(x);
        y.copy_from_slice(&obs);
    }
}

/// The six measured outputs: (NFkBn, IkBa + IkBaNFkB, A20t,
/// IKKn + IKKa + IKKi, IKKa, IkBat).
pub fn nfkb_observe(x: &[f64]) -> [f64; 6] {
    [x[6], x[9] + x[12], x[8], x[0] + x[1] + x[2], x[1], x[11]]
}

pub(super) fn spec() -> ModelSpec {
    let bounds = TRUE_PARAMS
        .iter()
        .map(|&v| {
            if v == 0.0 {
                ParamBounds::fixed(0.0)
            } else {
                ParamBounds::log(v / 50.0, v * 50.0)
            }
        })
        .collect();
    let model = OdeModel::new(
        "nfkb",
        15,
        6,
        NFKB_PARAM_NAMES.iter().map(|s| s.to_string()).collect(),
        bounds,
        Arc::new(Nfkb {
            tr: 1.0,
            x0: RESTING_STATE,
        }),
    )
    .expect("static model definition");
    ModelSpec {
        model,
        true_params: Some(TRUE_PARAMS.to_vec()),
        default_x0: RESTING_STATE.to_vec(),
        default_horizon: (0.0, 3600.0),
        default_n: 13,
    }
}
