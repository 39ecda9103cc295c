//! Nelder–Mead on the unit cube with reflective bounds.
//!
//! Trial points that leave `[0, 1]^d` are mirrored back across the violated
//! face. Expansion, contraction and shrink coefficients follow the
//! dimension-adaptive choice of Gao & Han (2012), which behaves better than
//! the classic constants beyond a handful of dimensions.

#[derive(Debug, Clone, Copy)]
pub struct NmConfig {
    pub max_iters: usize,
    /// Stop when `f_worst - f_best <= tol · (|f_best| + tol)`.
    pub tol: f64,
    pub initial_step: f64,
    /// Fresh simplices built around the incumbent after convergence.
    pub max_restarts: usize,
}

impl Default for NmConfig {
    fn default() -> Self {
        Self {
            max_iters: 400,
            tol: 1e-10,
            initial_step: 0.1,
            max_restarts: 2,
        }
    }
}

#[derive(Debug, Clone)]
pub struct NmResult {
    pub x: Vec<f64>,
    pub f: f64,
    pub evals: usize,
    pub iters: usize,
    pub converged: bool,
}

// A simplex is treated as collapsed when its mean edge length
// (|det E|^(1/d)) is this small relative to its diameter, or when the
// diameter itself vanishes. A raw volume threshold would fire early in
// high dimension.
const COLLAPSE_SHAPE: f64 = 1e-8;
const COLLAPSE_DIAMETER: f64 = 1e-14;

fn reflect_into_unit(u: &mut [f64]) {
    for v in u.iter_mut() {
        for _ in 0..4 {
            if *v < 0.0 {
                *v = -*v;
            } else if *v > 1.0 {
                *v = 2.0 - *v;
            } else {
                break;
            }
        }
        *v = v.clamp(0.0, 1.0);
    }
}

#[cfg(test)]
/// |det| of the edge matrix divided by d!.
fn simplex_volume(simplex: &[Vec<f64>]) -> f64 {
    let d = simplex.len() - 1;
    let fact: f64 = (1..=d).map(|i| i as f64).product();
    edge_det(simplex) / fact
}

fn collapsed(simplex: &[Vec<f64>]) -> bool {
    let d = simplex.len() - 1;
    let diam = diameter(simplex);
    diam < COLLAPSE_DIAMETER || edge_det(simplex).powf(1.0 / d as f64) < COLLAPSE_SHAPE * diam
}

fn edge_det(simplex: &[Vec<f64>]) -> f64 {
    let d = simplex.len() - 1;
    let mut m: Vec<Vec<f64>> = simplex[1..]
        .iter()
        .map(|p| p.iter().zip(&simplex[0]).map(|(a, b)| a - b).collect())
        .collect();
    let mut det = 1.0;
    for c in 0..d {
        let piv = (c..d)
            .max_by(|&a, &b| m[a][c].abs().total_cmp(&m[b][c].abs()))
            .expect("non-empty range");
        if m[piv][c] == 0.0 {
            return 0.0;
        }
        m.swap(c, piv);
        det *= m[c][c];
        for r in (c + 1)..d {
            let factor = m[r][c] / m[c][c];
            for k in c..d {
                m[r][k] -= factor * m[c][k];
            }
        }
    }
    det.abs()
}

fn diameter(simplex: &[Vec<f64>]) -> f64 {
    simplex[1..]
        .iter()
        .flat_map(|p| p.iter().zip(&simplex[0]).map(|(a, b)| (a - b).abs()))
        .fold(0.0, f64::max)
}

struct Counter<F> {
    f: F,
    evals: usize,
}

impl<F: FnMut(&[f64]) -> f64> Counter<F> {
    fn eval(&mut self, x: &[f64]) -> f64 {
        self.evals += 1;
        let v = (self.f)(x);
        if v.is_nan() {
            f64::INFINITY
        } else {
            v
        }
    }
}

fn build_simplex<F: FnMut(&[f64]) -> f64>(
    obj: &mut Counter<F>,
    center: &[f64],
    f_center: f64,
    step: f64,
) -> (Vec<Vec<f64>>, Vec<f64>) {
    let d = center.len();
    let mut pts = vec![center.to_vec()];
    let mut vals = vec![f_center];
    for i in 0..d {
        let mut p = center.to_vec();
        p[i] = if center[i] + step <= 1.0 {
            center[i] + step
        } else {
            center[i] - step
        };
        vals.push(obj.eval(&p));
        pts.push(p);
    }
    (pts, vals)
}

/// Minimize `f` over `[0, 1]^d` starting from `x0`.
pub fn minimize<F>(f: F, x0: &[f64], cfg: &NmConfig) -> NmResult
where
    F: FnMut(&[f64]) -> f64,
{
    let d = x0.len();
    let mut obj = Counter { f, evals: 0 };
    let mut start = x0.to_vec();
    reflect_into_unit(&mut start);
    let f_start = obj.eval(&start);
    if d == 0 {
        return NmResult {
            x: start,
            f: f_start,
            evals: obj.evals,
            iters: 0,
            converged: true,
        };
    }

    let dn = d as f64;
    let (rho, chi, gamma, sigma) = if d <= 2 {
        (1.0, 2.0, 0.5, 0.5)
    } else {
        (1.0, 1.0 + 2.0 / dn, 0.75 - 1.0 / (2.0 * dn), 1.0 - 1.0 / dn)
    };

    let (mut pts, mut vals) = build_simplex(&mut obj, &start, f_start, cfg.initial_step);
    let mut iters = 0;
    let mut restarts = 0;
    let mut converged = false;
    let mut best_before_restart = f64::INFINITY;
    let mut order: Vec<usize> = (0..=d).collect();
    let mut centroid = vec![0.0; d];
    let mut trial = vec![0.0; d];

    loop {
        order.sort_by(|&a, &b| vals[a].total_cmp(&vals[b]));
        pts = order.iter().map(|&i| pts[i].clone()).collect();
        vals = order.iter().map(|&i| vals[i]).collect();
        order.iter_mut().enumerate().for_each(|(i, o)| *o = i);

        let (f_best, f_worst) = (vals[0], vals[d]);
        if f_best == f64::INFINITY {
            // Nothing finite to move towards; shrinking would only burn
            // evaluations where the cost is undefined.
            break;
        }
        let flat = f_best.is_finite() && f_worst - f_best <= cfg.tol * (f_best.abs() + cfg.tol);
        if flat || (collapsed(&pts) && f_best.is_finite()) {
            let stalled = best_before_restart - f_best <= cfg.tol * (f_best.abs() + cfg.tol);
            if restarts >= cfg.max_restarts || stalled || iters >= cfg.max_iters {
                converged = true;
                break;
            }
            restarts += 1;
            best_before_restart = f_best;
            let step = cfg.initial_step * 0.5f64.powi(restarts as i32);
            let center = pts[0].clone();
            let built = build_simplex(&mut obj, &center, f_best, step);
            pts = built.0;
            vals = built.1;
            continue;
        }
        if iters >= cfg.max_iters {
            break;
        }
        iters += 1;

        centroid.iter_mut().for_each(|c| *c = 0.0);
        for p in &pts[..d] {
            for (c, v) in centroid.iter_mut().zip(p) {
                *c += v / dn;
            }
        }
        let worst = pts[d].clone();
        let along = |trial: &mut Vec<f64>, coef: f64| {
            for i in 0..d {
                trial[i] = centroid[i] + coef * (centroid[i] - worst[i]);
            }
            reflect_into_unit(trial);
        };

        along(&mut trial, rho);
        let xr = trial.clone();
        let fr = obj.eval(&xr);

        if fr < vals[0] {
            along(&mut trial, rho * chi);
            let fe = obj.eval(&trial);
            if fe < fr {
                pts[d] = trial.clone();
                vals[d] = fe;
            } else {
                pts[d] = xr;
                vals[d] = fr;
            }
            continue;
        }
        if fr < vals[d - 1] {
            pts[d] = xr;
            vals[d] = fr;
            continue;
        }
        let (coef, threshold) = if fr < vals[d] {
            (rho * gamma, fr)
        } else {
            (-gamma, vals[d])
        };
        along(&mut trial, coef);
        let fc = obj.eval(&trial);
        if fc < threshold || (coef > 0.0 && fc <= threshold) {
            pts[d] = trial.clone();
            vals[d] = fc;
            continue;
        }
        // Shrink towards the best vertex.
        let best = pts[0].clone();
        for i in 1..=d {
            for j in 0..d {
                pts[i][j] = best[j] + sigma * (pts[i][j] - best[j]);
            }
            vals[i] = obj.eval(&pts[i]);
        }
    }

    let (bi, _) = vals
        .iter()
        .enumerate()
        .min_by(|a, b| a.1.total_cmp(b.1))
        .expect("non-empty simplex");
    NmResult {
        x: pts[bi].clone(),
        f: vals[bi],
        evals: obj.evals,
        iters,
        converged,
    }
}
