//! The benchmark scenario grids.

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::output::{create_dir, write_json};
use super::{run_experiment, CellSummary, ExperimentConfig, SCHEMA_VERSION};
use crate::conformal::Method;
use crate::seed;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Suite {
    Logistic,
    LotkaVolterra,
    AlphaPinene,
    Nfkb,
}

impl Suite {
    pub fn model(&self) -> &'static str {
        match self {
            Suite::Logistic => "logistic",
            Suite::LotkaVolterra => "lotka_volterra",
            Suite::AlphaPinene => "alpha_pinene",
            Suite::Nfkb => "nfkb",
        }
    }
}

impl fmt::Display for Suite {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.model())
    }
}

impl FromStr for Suite {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "logistic" => Ok(Suite::Logistic),
            "lotka_volterra" => Ok(Suite::LotkaVolterra),
            "alpha_pinene" => Ok(Suite::AlphaPinene),
            "nfkb" => Ok(Suite::Nfkb),
            _ => Err(Error::InvalidConfig(format!("unknown suite `{s}`"))),
        }
    }
}

const NOISE_LEVELS: [f64; 4] = [0.0, 0.01, 0.05, 0.10];
const FULL_REPLICATES: usize = 50;
pub const NFKB_REPLICATES: usize = 5;
const NFKB_NOISE: f64 = 0.10;
const NFKB_POINTS: usize = 13;

/// `round(base · scale)`, at least one.
pub fn replicates_for_scale(base: usize, scale: f64) -> usize {
    ((base as f64 * scale).round() as usize).max(1)
}

/// One experiment per grid cell, seeded from `template.master_seed` and
/// the cell's position. `template` supplies every setting the grid does not
/// fix (optimizer budget, pooling, truth mode, ...).
pub fn benchmark_grid_cells(
    suite: Suite,
    scale: f64,
    nfkb_replicates: usize,
    template: &ExperimentConfig,
) -> Result<Vec<ExperimentConfig>> {
    if !(scale > 0.0 && scale.is_finite()) {
        return Err(Error::InvalidConfig(format!("scale must be positive, got {scale}")));
    }
    let sizes: &[usize] = match suite {
        Suite::Logistic | Suite::AlphaPinene => &[10, 20, 50, 100],
        Suite::LotkaVolterra => &[30, 60, 120],
        Suite::Nfkb => &[NFKB_POINTS],
    };
    let noises: &[f64] = match suite {
        Suite::Nfkb => &[NFKB_NOISE],
        _ => &NOISE_LEVELS,
    };
    let reps = match suite {
        Suite::Nfkb => replicates_for_scale(nfkb_replicates, scale),
        _ => replicates_for_scale(FULL_REPLICATES, scale),
    };
    let mut methods = vec![Method::Cuqdyn1, Method::Cuqdyn2];
    if suite == Suite::Logistic {
        methods.push(Method::JackknifePlus);
    }
    let mut cells = Vec::new();
    for &n in sizes {
        for &eps in noises {
            let pct = (eps * 100.0).round() as u64;
            cells.push(ExperimentConfig {
                model: suite.model().into(),
                n_points: n,
                noise_pct: eps,
                n_replicates: reps,
                alphas: vec![0.05, 0.1, 0.5],
                methods: methods.clone(),
                master_seed: seed::derive(&[template.master_seed, n as u64, pct]),
                output_dir: None,
                ..template.clone()
            });
        }
    }
    Ok(cells)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridCell {
    pub n_points: usize,
    pub noise_pct: f64,
    pub n_replicates: usize,
    pub n_excluded: usize,
    /// Relative to the grid's output directory.
    pub report: PathBuf,
    pub summaries: Vec<CellSummary>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridReport {
    pub schema_version: u32,
    pub suite: Suite,
    pub scale: f64,
    pub master_seed: u64,
    pub cells: Vec<GridCell>,
}

fn cell_dir(cfg: &ExperimentConfig) -> String {
    format!("n{:03}_eps{:02}", cfg.n_points, (cfg.noise_pct * 100.0).round() as u64)
}

/// Run every cell of `suite` under `out/<suite>/` and write
/// `grid_summary.json` there. Cells run one after another; replicates
/// inside a cell run in parallel.
pub fn run_benchmark_grid(
    suite: Suite,
    scale: f64,
    nfkb_replicates: usize,
    template: &ExperimentConfig,
    out: &Path,
) -> Result<GridReport> {
    let cells = benchmark_grid_cells(suite, scale, nfkb_replicates, template)?;
    for c in &cells {
        c.validate()?;
    }
    let root = out.join(suite.model());
    create_dir(&root)?;
    let mut done = Vec::with_capacity(cells.len());
    for mut cfg in cells {
        let rel = PathBuf::from(cell_dir(&cfg));
        cfg.output_dir = Some(root.join(&rel));
        log::info!("{suite}: n = {}, noise = {}", cfg.n_points, cfg.noise_pct);
        let outcome = run_experiment(&cfg)?;
        done.push(GridCell {
            n_points: cfg.n_points,
            noise_pct: cfg.noise_pct,
            n_replicates: outcome.report.n_replicates,
            n_excluded: outcome.report.n_excluded,
            report: rel.join("report.json"),
            summaries: outcome.report.summaries,
        });
    }
    let report = GridReport {
        schema_version: SCHEMA_VERSION,
        suite,
        scale,
        master_seed: template.master_seed,
        cells: done,
    };
    write_json(&root.join("grid_summary.json"), &report)?;
    Ok(report)
}
