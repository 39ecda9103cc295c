//! Prediction regions from a leave-one-out ensemble.

mod quantile;

use std::fmt;
use std::str::FromStr;

use ndarray::{Array2, Array3};
use serde::{Deserialize, Serialize};

use crate::data::Dataset;
use crate::estimate::{GridPredictions, LooEnsemble};
use crate::{Error, Result};

pub use quantile::{empirical_quantile, median, quantile_with_rule, QuantileRule, Tail};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Cuqdyn1,
    Cuqdyn2,
    JackknifePlus,
}

impl Method {
    pub fn as_str(&self) -> &'static str {
        match self {
            Method::Cuqdyn1 => "cuqdyn1",
            Method::Cuqdyn2 => "cuqdyn2",
            Method::JackknifePlus => "jackknife_plus",
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Method {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "cuqdyn1" => Ok(Method::Cuqdyn1),
            "cuqdyn2" => Ok(Method::Cuqdyn2),
            "jackknife_plus" | "jackknife+" => Ok(Method::JackknifePlus),
            _ => Err(Error::InvalidConfig(format!("unknown method `{s}`"))),
        }
    }
}

/// How standardized residuals are grouped before taking the quantile.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Pooling {
    #[default]
    Global,
    PerCoordinate,
}

impl fmt::Display for Pooling {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Pooling::Global => "global",
            Pooling::PerCoordinate => "per_coordinate",
        })
    }
}

impl FromStr for Pooling {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "global" => Ok(Pooling::Global),
            "per_coordinate" => Ok(Pooling::PerCoordinate),
            _ => Err(Error::InvalidConfig(format!("unknown pooling `{s}`"))),
        }
    }
}

/// Per-coordinate bounds on a time grid.
#[derive(Debug, Clone, PartialEq)]
pub struct PredictionRegion {
    pub times: Vec<f64>,
    /// `|times| × n_y`
    pub lpb: Array2<f64>,
    pub upb: Array2<f64>,
    /// Median prediction for CUQDyn2, full-fit prediction otherwise.
    pub center: Array2<f64>,
    pub alpha: f64,
    pub method: Method,
}

impl PredictionRegion {
    pub fn n_y(&self) -> usize {
        self.lpb.ncols()
    }

    /// Raise negative lower bounds to zero.
    pub fn clip_nonnegative(&mut self) {
        self.lpb.mapv_inplace(|v| v.max(0.0));
        self.upb.mapv_inplace(|v| v.max(0.0));
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CalibrationSummary {
    pub sigma: Vec<f64>,
    /// One quantile per coordinate; identical entries under global pooling.
    pub q: Vec<f64>,
    pub n_cal: usize,
    /// Coordinates whose residuals are all zero.
    pub degenerate: Vec<bool>,
    pub pooling: Pooling,
}

/// Region-construction settings shared by both algorithms.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RegionOptions {
    pub alpha: f64,
    pub rule: QuantileRule,
    pub pooling: Pooling,
}

impl RegionOptions {
    pub fn new(alpha: f64) -> Self {
        Self {
            alpha,
            rule: QuantileRule::Conformal,
            pooling: Pooling::Global,
        }
    }
}

fn check_alpha(alpha: f64) -> Result<()> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::InvalidConfig(format!("alpha must lie in (0, 1), got {alpha}")));
    }
    Ok(())
}

fn check_parts(preds: &Array3<f64>, times: &[f64], residuals: &Array2<f64>, initial: &[f64]) -> Result<()> {
    let (m, nt, ny) = preds.dim();
    if nt != times.len() || residuals.dim() != (m, ny) || initial.len() != ny {
        return Err(Error::DimensionMismatch(format!(
            "predictions {:?}, {} times, residuals {:?}, {} initial values",
            preds.dim(),
            times.len(),
            residuals.dim(),
            initial.len()
        )));
    }
    if m == 0 {
        return Err(Error::EmptySample);
    }
    Ok(())
}

/// Coordinate-wise jackknife+ on explicit predictions.
///
/// `preds[j, i, k]` is model `j` at `times[i]`; `residuals[j, k]` is that
/// model's held-out residual. Rows at `t0` are pinned to `initial`.
pub fn cuqdyn1_from_parts(
    preds: &Array3<f64>,
    residuals: &Array2<f64>,
    times: &[f64],
    t0: f64,
    initial: &[f64],
    center: &Array2<f64>,
    alpha: f64,
    rule: QuantileRule,
) -> Result<PredictionRegion> {
    check_alpha(alpha)?;
    check_parts(preds, times, residuals, initial)?;
    let (m, nt, ny) = preds.dim();
    let mut lpb = Array2::zeros((nt, ny));
    let mut upb = Array2::zeros((nt, ny));
    let mut center = center.clone();
    let mut lo = vec![0.0; m];
    let mut hi = vec![0.0; m];
    for i in 0..nt {
        for k in 0..ny {
            if times[i] == t0 {
                lpb[[i, k]] = initial[k];
                upb[[i, k]] = initial[k];
                center[[i, k]] = initial[k];
                continue;
            }
            for j in 0..m {
                lo[j] = preds[[j, i, k]] - residuals[[j, k]];
                hi[j] = preds[[j, i, k]] + residuals[[j, k]];
            }
            lpb[[i, k]] = quantile_with_rule(&lo, alpha, Tail::Lower, rule)?;
            upb[[i, k]] = quantile_with_rule(&hi, 1.0 - alpha, Tail::Upper, rule)?;
        }
    }
    Ok(PredictionRegion {
        times: times.to_vec(),
        lpb,
        upb,
        center,
        alpha,
        method: Method::Cuqdyn1,
    })
}

/// Residual scale and calibration quantile of the standardized residuals.
pub fn calibrate(residuals: &Array2<f64>, alpha: f64, pooling: Pooling, rule: QuantileRule) -> Result<CalibrationSummary> {
    check_alpha(alpha)?;
    let (m, ny) = residuals.dim();
    if m == 0 {
        return Err(Error::EmptySample);
    }
    let sigma: Vec<f64> = (0..ny)
        .map(|k| (residuals.column(k).iter().map(|e| e * e).sum::<f64>() / m as f64).sqrt())
        .collect();
    let degenerate: Vec<bool> = sigma.iter().map(|s| !(*s > 0.0 && s.is_finite())).collect();
    let z = |k: usize| residuals.column(k).iter().map(|e| e / sigma[k]).collect::<Vec<f64>>();
    let q = match pooling {
        Pooling::Global => {
            let pooled: Vec<f64> = (0..ny).filter(|&k| !degenerate[k]).flat_map(z).collect();
            let q = if pooled.is_empty() {
                0.0
            } else {
                quantile_with_rule(&pooled, 1.0 - alpha, Tail::Upper, rule)?
            };
            vec![q; ny]
        }
        Pooling::PerCoordinate => (0..ny)
            .map(|k| {
                if degenerate[k] {
                    Ok(0.0)
                } else {
                    quantile_with_rule(&z(k), 1.0 - alpha, Tail::Upper, rule)
                }
            })
            .collect::<Result<_>>()?,
    };
    Ok(CalibrationSummary {
        sigma,
        q,
        n_cal: m,
        degenerate,
        pooling,
    })
}

/// Median ensemble prediction widened by a calibrated multiple of the
/// residual scale.
pub fn cuqdyn2_from_parts(
    preds: &Array3<f64>,
    residuals: &Array2<f64>,
    times: &[f64],
    t0: f64,
    initial: &[f64],
    opts: &RegionOptions,
) -> Result<(PredictionRegion, CalibrationSummary)> {
    check_parts(preds, times, residuals, initial)?;
    let cal = calibrate(residuals, opts.alpha, opts.pooling, opts.rule)?;
    let (_, nt, ny) = preds.dim();
    let mut lpb = Array2::zeros((nt, ny));
    let mut upb = Array2::zeros((nt, ny));
    let mut center = Array2::zeros((nt, ny));
    for i in 0..nt {
        for k in 0..ny {
            if times[i] == t0 {
                lpb[[i, k]] = initial[k];
                upb[[i, k]] = initial[k];
                center[[i, k]] = initial[k];
                continue;
            }
            let med = median(&preds.slice(ndarray::s![.., i, k]).to_vec())?;
            let w = if cal.degenerate[k] { 0.0 } else { cal.q[k] * cal.sigma[k] };
            center[[i, k]] = med;
            lpb[[i, k]] = med - w;
            upb[[i, k]] = med + w;
        }
    }
    let region = PredictionRegion {
        times: times.to_vec(),
        lpb,
        upb,
        center,
        alpha: opts.alpha,
        method: Method::Cuqdyn2,
    };
    Ok((region, cal))
}

/// CUQDyn1 region on `grid` with the default quantile rule.
pub fn cuqdyn1(ens: &LooEnsemble, grid: &[f64], alpha: f64) -> Result<PredictionRegion> {
    cuqdyn1_with(ens, grid, &RegionOptions::new(alpha))
}

pub fn cuqdyn1_with(ens: &LooEnsemble, grid: &[f64], opts: &RegionOptions) -> Result<PredictionRegion> {
    check_alpha(opts.alpha)?;
    let p: GridPredictions = ens.predict(grid)?;
    cuqdyn1_from_parts(&p.per_model, &ens.e, &p.times, ens.t0(), &ens.initial, &p.full, opts.alpha, opts.rule)
}

/// CUQDyn2 region on `grid`.
pub fn cuqdyn2(
    ens: &LooEnsemble,
    grid: &[f64],
    alpha: f64,
    pooling: Pooling,
) -> Result<(PredictionRegion, CalibrationSummary)> {
    cuqdyn2_with(
        ens,
        grid,
        &RegionOptions {
            pooling,
            ..RegionOptions::new(alpha)
        },
    )
}

pub fn cuqdyn2_with(
    ens: &LooEnsemble,
    grid: &[f64],
    opts: &RegionOptions,
) -> Result<(PredictionRegion, CalibrationSummary)> {
    check_alpha(opts.alpha)?;
    let p = ens.predict(grid)?;
    cuqdyn2_from_parts(&p.per_model, &ens.e, &p.times, ens.t0(), &ens.initial, opts)
}

/// Jackknife+ for a single observable; identical to [`cuqdyn1`] apart from
/// the method tag.
pub fn jackknife_plus(ens: &LooEnsemble, grid: &[f64], alpha: f64) -> Result<PredictionRegion> {
    jackknife_plus_with(ens, grid, &RegionOptions::new(alpha))
}

pub fn jackknife_plus_with(ens: &LooEnsemble, grid: &[f64], opts: &RegionOptions) -> Result<PredictionRegion> {
    if ens.n_y() != 1 {
        return Err(Error::NotUnivariate(ens.n_y()));
    }
    let mut r = cuqdyn1_with(ens, grid, opts)?;
    r.method = Method::JackknifePlus;
    Ok(r)
}

/// Dispatch on `method`. The summary is only produced by CUQDyn2.
pub fn build_region(
    ens: &LooEnsemble,
    grid: &[f64],
    method: Method,
    opts: &RegionOptions,
) -> Result<(PredictionRegion, Option<CalibrationSummary>)> {
    match method {
        Method::Cuqdyn1 => Ok((cuqdyn1_with(ens, grid, opts)?, None)),
        Method::JackknifePlus => Ok((jackknife_plus_with(ens, grid, opts)?, None)),
        Method::Cuqdyn2 => {
            let (r, c) = cuqdyn2_with(ens, grid, opts)?;
            Ok((r, Some(c)))
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoverageSummary {
    pub overall: f64,
    pub per_coordinate: Vec<f64>,
    pub mean_width: f64,
    /// Non-initial time points evaluated.
    pub n_points: usize,
}

fn same_time(a: f64, b: f64) -> bool {
    (a - b).abs() <= 1e-9 * a.abs().max(b.abs()).max(1.0)
}

/// Fraction of `truth` values inside `region`, skipping the initial row.
pub fn coverage_eval(region: &PredictionRegion, truth: &Dataset) -> Result<CoverageSummary> {
    if region.times.len() != truth.n_rows() || region.n_y() != truth.n_y() {
        return Err(Error::GridMismatch(format!(
            "region is {}×{}, truth is {}×{}",
            region.times.len(),
            region.n_y(),
            truth.n_rows(),
            truth.n_y()
        )));
    }
    if let Some((a, b)) = region.times.iter().zip(&truth.times).find(|(a, b)| !same_time(**a, **b)) {
        return Err(Error::GridMismatch(format!("region time {a} vs truth time {b}")));
    }
    let (nt, ny) = (truth.n_rows(), truth.n_y());
    let mut hits = vec![0usize; ny];
    let mut width = 0.0;
    for i in 1..nt {
        for k in 0..ny {
            let v = truth.y[[i, k]];
            if region.lpb[[i, k]] <= v && v <= region.upb[[i, k]] {
                hits[k] += 1;
            }
            width += region.upb[[i, k]] - region.lpb[[i, k]];
        }
    }
    let n = nt - 1;
    let per_coordinate: Vec<f64> = hits.iter().map(|&h| h as f64 / n as f64).collect();
    Ok(CoverageSummary {
        overall: hits.iter().sum::<usize>() as f64 / (n * ny) as f64,
        per_coordinate,
        mean_width: width / (n * ny) as f64,
        n_points: n,
    })
}
