//! Leave-one-out refits and their predictions.

use ndarray::{Array2, Array3};
use rayon::prelude::*;

use super::{check_dims, fit_rows, FitResult, OptimizerConfig};
use crate::data::Dataset;
use crate::ode::{check_grid, integrate, IntegratorConfig, OdeModel};
use crate::{Error, Result};

/// Models fitted with one observation held out, and their residual on it.
///
/// Model `j` is fitted without dataset row `j + 1`; the initial row is
/// never held out.
#[derive(Debug, Clone)]
pub struct LooEnsemble {
    pub model: OdeModel,
    pub integrator: IntegratorConfig,
    /// Dataset grid, `times[0] = t0`.
    pub times: Vec<f64>,
    /// Observed values at `t0`.
    pub initial: Vec<f64>,
    pub fits: Vec<FitResult>,
    /// `n_cal × |times| × n_y`
    pub g: Array3<f64>,
    /// `n_cal × n_y`, absolute held-out residuals.
    pub e: Array2<f64>,
    pub full_fit: FitResult,
    /// `|times| × n_y`, full-fit prediction.
    pub full_pred: Array2<f64>,
}

/// Ensemble predictions on an arbitrary grid.
#[derive(Debug, Clone, PartialEq)]
pub struct GridPredictions {
    pub times: Vec<f64>,
    /// `n_cal × |times| × n_y`
    pub per_model: Array3<f64>,
    /// `|times| × n_y`
    pub full: Array2<f64>,
}

fn predict_all(
    model: &OdeModel,
    thetas: &[&[f64]],
    grid: &[f64],
    integrator: &IntegratorConfig,
) -> Result<Vec<Array2<f64>>> {
    thetas
        .par_iter()
        .map(|th| integrate(model, th, grid, integrator).map(|t| t.observables))
        .collect()
}

impl LooEnsemble {
    /// Build an ensemble from already fitted models; `fits[j]` must have
    /// been fitted without row `j + 1`.
    pub fn from_fits(
        model: &OdeModel,
        dataset: &Dataset,
        fits: Vec<FitResult>,
        full_fit: FitResult,
        integrator: &IntegratorConfig,
    ) -> Result<Self> {
        check_dims(dataset, model)?;
        let n_cal = dataset.n_cal();
        if fits.len() != n_cal {
            return Err(Error::DimensionMismatch(format!(
                "{} fits for {} calibration rows",
                fits.len(),
                n_cal
            )));
        }
        let mut thetas: Vec<&[f64]> = fits.iter().map(|f| f.theta_hat.as_slice()).collect();
        thetas.push(&full_fit.theta_hat);
        let mut preds = predict_all(model, &thetas, &dataset.times, integrator)?;
        let full_pred = preds.pop().expect("full fit prediction");

        let (n_rows, n_y) = (dataset.n_rows(), dataset.n_y());
        let mut g = Array3::zeros((n_cal, n_rows, n_y));
        let mut e = Array2::zeros((n_cal, n_y));
        for (j, p) in preds.iter().enumerate() {
            g.index_axis_mut(ndarray::Axis(0), j).assign(p);
            for k in 0..n_y {
                e[[j, k]] = (dataset.y[[j + 1, k]] - p[[j + 1, k]]).abs();
            }
        }
        Ok(Self {
            model: model.clone(),
            integrator: *integrator,
            times: dataset.times.clone(),
            initial: dataset.y.row(0).to_vec(),
            fits,
            g,
            e,
            full_fit,
            full_pred,
        })
    }

    pub fn n_cal(&self) -> usize {
        self.fits.len()
    }

    pub fn n_y(&self) -> usize {
        self.e.ncols()
    }

    pub fn t0(&self) -> f64 {
        self.times[0]
    }

    /// Evaluate every model on `grid`. A grid that starts after `t0` is
    /// integrated from `t0` and `t0` is dropped from the output again.
    pub fn predict(&self, grid: &[f64]) -> Result<GridPredictions> {
        check_grid(grid)?;
        if grid[0] < self.t0() {
            return Err(Error::InvalidGrid(format!(
                "grid starts at {} before the initial time {}",
                grid[0],
                self.t0()
            )));
        }
        if grid == self.times.as_slice() {
            return Ok(GridPredictions {
                times: grid.to_vec(),
                per_model: self.g.clone(),
                full: self.full_pred.clone(),
            });
        }
        let prepend = grid[0] > self.t0();
        let mut full_grid = Vec::with_capacity(grid.len() + 1);
        if prepend {
            full_grid.push(self.t0());
        }
        full_grid.extend_from_slice(grid);
        let skip = usize::from(prepend);

        let mut thetas: Vec<&[f64]> = self.fits.iter().map(|f| f.theta_hat.as_slice()).collect();
        thetas.push(&self.full_fit.theta_hat);
        let mut preds = predict_all(&self.model, &thetas, &full_grid, &self.integrator)?;
        let full = preds.pop().expect("full fit prediction");
        let mut per_model = Array3::zeros((self.n_cal(), grid.len(), self.n_y()));
        for (j, p) in preds.iter().enumerate() {
            per_model
                .index_axis_mut(ndarray::Axis(0), j)
                .assign(&p.slice(ndarray::s![skip.., ..]));
        }
        Ok(GridPredictions {
            times: grid.to_vec(),
            per_model,
            full: full.slice(ndarray::s![skip.., ..]).to_owned(),
        })
    }
}

/// Fit the full dataset and every leave-one-out subset. Fits run in
/// parallel; the fit without row `i` is seeded with `cfg.seed ^ i`.
pub fn loo_fit(dataset: &Dataset, model: &OdeModel, cfg: &OptimizerConfig) -> Result<LooEnsemble> {
    check_dims(dataset, model)?;
    cfg.validate(model)?;
    let n = dataset.n_rows();
    if dataset.n_cal() < 3 {
        return Err(Error::InvalidDataset(format!(
            "leave-one-out needs at least 3 calibration rows, got {}",
            dataset.n_cal()
        )));
    }
    let all: Vec<usize> = (1..n).collect();
    let results: Vec<Option<FitResult>> = (0..n)
        .into_par_iter()
        .map(|i| {
            let rows: Vec<usize> = all.iter().copied().filter(|&r| r != i).collect();
            fit_rows(dataset, model, cfg, &rows, cfg.seed ^ i as u64)
        })
        .collect();
    let mut fits = Vec::with_capacity(n - 1);
    let mut full = None;
    for (i, r) in results.into_iter().enumerate() {
        let r = r.ok_or(Error::AllStartsFailed {
            index: (i > 0).then_some(i),
        })?;
        if i == 0 {
            full = Some(r);
        } else {
            fits.push(r);
        }
    }
    LooEnsemble::from_fits(model, dataset, fits, full.expect("full fit"), &cfg.integrator)
}
