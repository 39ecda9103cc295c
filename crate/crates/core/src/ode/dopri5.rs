//! Dormand–Prince 5(4) with PI step control and the order-4 continuous
//! extension (Hairer, Nørsett & Wanner, *Solving ODEs I*, II.5–II.6).

use ndarray::Array2;

use super::IntegratorConfig;
use crate::error::{Error, Result};

const C2: f64 = 0.2;
const C3: f64 = 0.3;
const C4: f64 = 0.8;
const C5: f64 = 8.0 / 9.0;

const A21: f64 = 0.2;
const A31: f64 = 3.0 / 40.0;
const A32: f64 = 9.0 / 40.0;
const A41: f64 = 44.0 / 45.0;
const A42: f64 = -56.0 / 15.0;
const A43: f64 = 32.0 / 9.0;
const A51: f64 = 19372.0 / 6561.0;
const A52: f64 = -25360.0 / 2187.0;
const A53: f64 = 64448.0 / 6561.0;
const A54: f64 = -212.0 / 729.0;
const A61: f64 = 9017.0 / 3168.0;
const A62: f64 = -355.0 / 33.0;
const A63: f64 = 46732.0 / 5247.0;
const A64: f64 = 49.0 / 176.0;
const A65: f64 = -5103.0 / 18656.0;
const A71: f64 = 35.0 / 384.0;
const A73: f64 = 500.0 / 1113.0;
const A74: f64 = 125.0 / 192.0;
const A75: f64 = -2187.0 / 6784.0;
const A76: f64 = 11.0 / 84.0;

const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;

const D1: f64 = -12715105075.0 / 11282082432.0;
const D3: f64 = 87487479700.0 / 32700410799.0;
const D4: f64 = -10690763975.0 / 1880347072.0;
const D5: f64 = 701980252875.0 / 199316789632.0;
const D6: f64 = -1453857185.0 / 822651844.0;
const D7: f64 = 69997945.0 / 29380423.0;

// PI controller constants.
const SAFETY: f64 = 0.9;
const BETA: f64 = 0.04;
const FAC_MIN: f64 = 0.2;
const FAC_MAX: f64 = 10.0;

/// Work buffers for one integration.
pub struct Dopri5<'a> {
    n: usize,
    cfg: &'a IntegratorConfig,
    k: [Vec<f64>; 7],
    tmp: Vec<f64>,
    x_new: Vec<f64>,
    dense: [Vec<f64>; 5],
}

impl<'a> Dopri5<'a> {
    pub fn new(n: usize, cfg: &'a IntegratorConfig) -> Self {
        let v = || vec![0.0; n];
        Self {
            n,
            cfg,
            k: [v(), v(), v(), v(), v(), v(), v()],
            tmp: v(),
            x_new: v(),
            dense: [v(), v(), v(), v(), v()],
        }
    }

    fn scale(&self, a: f64, b: f64) -> f64 {
        self.cfg.abs_tol + self.cfg.rel_tol * a.abs().max(b.abs())
    }

    fn initial_step<F>(&mut self, f: &mut F, t0: f64, x0: &[f64], h_max: f64) -> f64
    where
        F: FnMut(f64, &[f64], &mut [f64]),
    {
        let n = self.n as f64;
        let (mut dnf, mut dny) = (0.0, 0.0);
        for i in 0..self.n {
            let sk = self.scale(x0[i], x0[i]);
            dnf += (self.k[0][i] / sk).powi(2);
            dny += (x0[i] / sk).powi(2);
        }
        let mut h = if dnf <= 1e-10 || dny <= 1e-10 {
            1e-6
        } else {
            (dny / dnf).sqrt() * 0.01
        };
        h = h.min(h_max);
        for i in 0..self.n {
            self.tmp[i] = x0[i] + h * self.k[0][i];
        }
        f(t0 + h, &self.tmp, &mut self.k[1]);
        let mut der2 = 0.0;
        for i in 0..self.n {
            let sk = self.scale(x0[i], x0[i]);
            der2 += ((self.k[1][i] - self.k[0][i]) / sk).powi(2);
        }
        let der2 = (der2 / n).sqrt() / h;
        let der12 = der2.abs().max((dnf / n).sqrt());
        let h1 = if der12 <= 1e-15 {
            (h * 1e-3).max(1e-6)
        } else {
            (0.01 / der12).powf(0.2)
        };
        (100.0 * h).min(h1).min(h_max)
    }

    /// Integrate from `grid[0]` with state `x0` and return the state at every
    /// grid point (rows follow `grid`).
    pub fn solve<F>(mut self, mut f: F, x0: &[f64], grid: &[f64]) -> Result<Array2<f64>>
    where
        F: FnMut(f64, &[f64], &mut [f64]),
    {
        let n = self.n;
        let mut out = Array2::zeros((grid.len(), n));
        if x0.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFiniteState { t: grid[0] });
        }
        out.row_mut(0)
            .iter_mut()
            .zip(x0)
            .for_each(|(o, &v)| *o = v);
        if grid.len() == 1 {
            return Ok(out);
        }

        let t_end = grid[grid.len() - 1];
        let mut t = grid[0];
        let mut x = x0.to_vec();
        let span = t_end - t;
        f(t, &x, &mut self.k[0]);
        let mut h = match self.cfg.initial_step {
            Some(h0) => h0.min(span),
            None => self.initial_step(&mut f, t, &x, span),
        };
        let mut fac_old: f64 = 1e-4;
        let mut next_out = 1;
        let mut steps = 0usize;
        let mut rejected_last = false;

        while next_out < grid.len() {
            if steps >= self.cfg.max_steps {
                return Err(Error::StepLimitExceeded {
                    t,
                    max_steps: self.cfg.max_steps,
                });
            }
            steps += 1;
            if t + 1.01 * h >= t_end {
                h = t_end - t;
            }
            if h <= 16.0 * f64::EPSILON * t.abs().max(span.abs()) {
                return Err(Error::NonFiniteState { t });
            }

            self.stages(&mut f, t, &x, h);
            let err = self.error_norm(&x, h);

            if !err.is_finite() {
                h *= 0.1;
                rejected_last = true;
                continue;
            }

            let fac11 = err.powf(0.2 - BETA * 0.75);
            if err <= 1.0 {
                let t_new = if h == t_end - t { t_end } else { t + h };
                if self.x_new.iter().any(|v| !v.is_finite()) {
                    return Err(Error::NonFiniteState { t: t_new });
                }
                self.build_dense(&x, h);
                while next_out < grid.len() && grid[next_out] <= t_new {
                    let tg = grid[next_out];
                    let mut row = out.row_mut(next_out);
                    if tg == t_new {
                        row.iter_mut()
                            .zip(&self.x_new)
                            .for_each(|(o, &v)| *o = v);
                    } else {
                        let s = (tg - t) / h;
                        let s1 = 1.0 - s;
                        for (i, o) in row.iter_mut().enumerate() {
                            let d = &self.dense;
                            *o = d[0][i]
                                + s * (d[1][i] + s1 * (d[2][i] + s * (d[3][i] + s1 * d[4][i])));
                        }
                    }
                    next_out += 1;
                }
                let mut fac = fac11 / fac_old.powf(BETA);
                fac = (fac / SAFETY).clamp(1.0 / FAC_MAX, 1.0 / FAC_MIN);
                fac_old = err.max(1e-4);
                let mut h_new = h / fac;
                if rejected_last {
                    h_new = h_new.min(h);
                }
                rejected_last = false;
                t = t_new;
                std::mem::swap(&mut x, &mut self.x_new);
                self.k.swap(0, 6);
                h = h_new;
            } else {
                h /= (fac11 / SAFETY).min(1.0 / FAC_MIN);
                rejected_last = true;
            }
        }
        Ok(out)
    }

    fn stages<F>(&mut self, f: &mut F, t: f64, x: &[f64], h: f64)
    where
        F: FnMut(f64, &[f64], &mut [f64]),
    {
        let n = self.n;
        let [k1, k2, k3, k4, k5, k6, k7] = &mut self.k;
        let tmp = &mut self.tmp;
        for i in 0..n {
            tmp[i] = x[i] + h * A21 * k1[i];
        }
        f(t + C2 * h, tmp, k2);
        for i in 0..n {
            tmp[i] = x[i] + h * (A31 * k1[i] + A32 * k2[i]);
        }
        f(t + C3 * h, tmp, k3);
        for i in 0..n {
            tmp[i] = x[i] + h * (A41 * k1[i] + A42 * k2[i] + A43 * k3[i]);
        }
        f(t + C4 * h, tmp, k4);
        for i in 0..n {
            tmp[i] = x[i] + h * (A51 * k1[i] + A52 * k2[i] + A53 * k3[i] + A54 * k4[i]);
        }
        f(t + C5 * h, tmp, k5);
        for i in 0..n {
            tmp[i] = x[i]
                + h * (A61 * k1[i] + A62 * k2[i] + A63 * k3[i] + A64 * k4[i] + A65 * k5[i]);
        }
        f(t + h, tmp, k6);
        let x_new = &mut self.x_new;
        for i in 0..n {
            x_new[i] = x[i]
                + h * (A71 * k1[i] + A73 * k3[i] + A74 * k4[i] + A75 * k5[i] + A76 * k6[i]);
        }
        f(t + h, x_new, k7);
    }

    fn error_norm(&self, x: &[f64], h: f64) -> f64 {
        let k = &self.k;
        let mut acc = 0.0;
        for i in 0..self.n {
            let e = h
                * (E1 * k[0][i] + E3 * k[2][i] + E4 * k[3][i] + E5 * k[4][i] + E6 * k[5][i]
                    + E7 * k[6][i]);
            acc += (e / self.scale(x[i], self.x_new[i])).powi(2);
        }
        (acc / self.n as f64).sqrt()
    }

    fn build_dense(&mut self, x: &[f64], h: f64) {
        let k = &self.k;
        for i in 0..self.n {
            let diff = self.x_new[i] - x[i];
            let bspl = h * k[0][i] - diff;
            self.dense[0][i] = x[i];
            self.dense[1][i] = diff;
            self.dense[2][i] = bspl;
            self.dense[3][i] = diff - h * k[6][i] - bspl;
            self.dense[4][i] = h
                * (D1 * k[0][i] + D3 * k[2][i] + D4 * k[3][i] + D5 * k[4][i] + D6 * k[5][i]
                    + D7 * k[6][i]);
        }
    }
}
