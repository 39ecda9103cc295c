//! Seeded Monte-Carlo coverage experiments.
//!
//! One replicate simulates a dataset, fits the leave-one-out ensemble,
//! builds a region for every requested `(alpha, method)` pair and scores it
//! against an independent draw at the same times. Replicates are
//! independent and run in parallel; everything written to the report is a
//! function of the configuration alone. Wall-clock timings go to a separate
//! run log.

mod grid;
pub mod output;

use std::path::{Path, PathBuf};
use std::time::{Instant, SystemTime, UNIX_EPOCH};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::conformal::{
    build_region, coverage_eval, CalibrationSummary, CoverageSummary, Method, Pooling, QuantileRule,
    RegionOptions,
};
use crate::data::{
    apply_transform, fresh_observations, invert_transform_bounds, nominal_observables, simulate_replicate,
    Dataset, DatasetMeta, NoiseSpec, Transform,
};
use crate::estimate::{loo_fit, ObjectiveKind, OptimizerConfig, SigmaSpec};
use crate::models::{registry_get, ModelSpec};
use crate::ode::IntegratorConfig;
use crate::seed::{self, stream};
use crate::{Error, Result};

pub use grid::{benchmark_grid_cells, replicates_for_scale, run_benchmark_grid, GridCell, GridReport, Suite, NFKB_REPLICATES};
use output::{create_dir, write_json, write_region_tables};

pub const SCHEMA_VERSION: u32 = 1;

const ALPHA_CONVENTION: &str =
    "lower bound at quantile alpha, upper bound at 1 - alpha; nominal two-sided coverage 1 - 2 alpha";

/// What the regions are scored against.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TruthMode {
    /// A fresh noisy draw at the observed times.
    #[default]
    Noisy,
    /// The noise-free trajectory.
    Noiseless,
}

/// A coverage experiment. Loaded from a flat TOML file; unknown keys are
/// rejected.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub model: String,
    /// Sample times after `t0`; `0` picks the model default.
    pub n_points: usize,
    /// Noise as a fraction of the mean observable (`0.05` is 5 %).
    pub noise_pct: f64,
    pub n_replicates: usize,
    pub alphas: Vec<f64>,
    pub methods: Vec<Method>,
    pub pooling: Pooling,
    pub quantile_rule: QuantileRule,
    /// `identity`, `log` or `box_cox:<lambda>[,<lambda>...]`.
    pub transform: String,
    pub truth: TruthMode,
    pub clip_nonnegative: bool,
    pub master_seed: u64,
    pub output_dir: Option<PathBuf>,
    /// Number of leading replicates whose regions are written as CSV.
    pub region_replicates: usize,
    pub n_starts: usize,
    pub max_local_iters: usize,
    pub local_tol: f64,
    pub objective: ObjectiveKind,
    pub rel_tol: f64,
    pub abs_tol: f64,
    pub max_steps: usize,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        let opt = OptimizerConfig::default();
        Self {
            model: "logistic".into(),
            n_points: 0,
            noise_pct: 0.05,
            n_replicates: 1,
            alphas: vec![0.05],
            methods: vec![Method::Cuqdyn1],
            pooling: Pooling::Global,
            quantile_rule: QuantileRule::Conformal,
            transform: "identity".into(),
            truth: TruthMode::Noisy,
            clip_nonnegative: false,
            master_seed: 0,
            output_dir: None,
            region_replicates: 1,
            n_starts: opt.n_starts,
            max_local_iters: opt.max_local_iters,
            local_tol: opt.local_tol,
            objective: opt.objective,
            rel_tol: opt.integrator.rel_tol,
            abs_tol: opt.integrator.abs_tol,
            max_steps: opt.integrator.max_steps,
        }
    }
}

impl ExperimentConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::InvalidConfig(e.to_string()))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml_str(&text)
    }

    pub fn model_spec(&self) -> Result<ModelSpec> {
        registry_get(&self.model)
    }

    pub fn transform(&self) -> Result<Transform> {
        self.transform.parse()
    }

    pub fn points(&self, spec: &ModelSpec) -> usize {
        if self.n_points == 0 {
            spec.default_n
        } else {
            self.n_points
        }
    }

    pub fn optimizer(&self, seed: u64) -> OptimizerConfig {
        OptimizerConfig {
            n_starts: self.n_starts,
            max_local_iters: self.max_local_iters,
            local_tol: self.local_tol,
            seed,
            objective: self.objective,
            sigma: SigmaSpec::Estimate,
            initial_points: Vec::new(),
            integrator: IntegratorConfig {
                rel_tol: self.rel_tol,
                abs_tol: self.abs_tol,
                max_steps: self.max_steps,
                initial_step: None,
            },
        }
    }

    pub fn region_options(&self, alpha: f64) -> RegionOptions {
        RegionOptions {
            alpha,
            rule: self.quantile_rule,
            pooling: self.pooling,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let spec = self.model_spec()?;
        if self.n_replicates == 0 {
            return Err(Error::InvalidConfig("n_replicates must be at least 1".into()));
        }
        if self.alphas.is_empty() || self.alphas.iter().any(|a| !(*a > 0.0 && *a < 1.0)) {
            return Err(Error::InvalidConfig("alphas must be non-empty and inside (0, 1)".into()));
        }
        if self.methods.is_empty() {
            return Err(Error::InvalidConfig("at least one method is required".into()));
        }
        if self.methods.contains(&Method::JackknifePlus) && spec.model.n_y != 1 {
            return Err(Error::NotUnivariate(spec.model.n_y));
        }
        if !(self.noise_pct >= 0.0 && self.noise_pct.is_finite()) {
            return Err(Error::InvalidConfig("noise_pct must be a non-negative fraction".into()));
        }
        if self.points(&spec) < 3 {
            return Err(Error::InvalidConfig("n_points must be at least 3".into()));
        }
        if spec.true_params.is_none() {
            return Err(Error::InvalidConfig(format!(
                "model `{}` has no data-generating parameters",
                self.model
            )));
        }
        self.transform()?.validate(spec.model.n_y)?;
        self.optimizer(0).validate(&spec.model)
    }
}

/// Coverage of one region.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegionScore {
    pub alpha: f64,
    pub method: Method,
    pub coverage: CoverageSummary,
    pub calibration: Option<CalibrationSummary>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReplicateRecord {
    pub index: usize,
    /// Failure message; the replicate is excluded from the summaries.
    pub error: Option<String>,
    pub theta_hat: Option<Vec<f64>>,
    pub scores: Vec<RegionScore>,
}

impl ReplicateRecord {
    pub fn failed(&self) -> bool {
        self.error.is_some()
    }
}

/// Coverage distribution over replicates for one `(alpha, method)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellSummary {
    pub alpha: f64,
    pub method: Method,
    pub nominal_coverage: f64,
    /// Successful replicates, in replicate order.
    pub coverage: Vec<f64>,
    pub mean: f64,
    pub min: f64,
    pub q25: f64,
    pub median: f64,
    pub q75: f64,
    pub max: f64,
    pub mean_width: f64,
    pub per_coordinate_mean: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoverageReport {
    pub schema_version: u32,
    pub alpha_convention: String,
    pub config: ExperimentConfig,
    pub n_replicates: usize,
    pub n_excluded: usize,
    pub summaries: Vec<CellSummary>,
    pub replicates: Vec<ReplicateRecord>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct StageTimes {
    pub simulate: f64,
    pub fit: f64,
    pub region: f64,
}

/// Wall-clock information, kept out of the report so reports stay
/// reproducible.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct RunLog {
    pub started_unix: u64,
    pub total_seconds: f64,
    pub replicates: Vec<StageTimes>,
}

#[derive(Debug, Clone)]
pub struct ExperimentOutcome {
    pub report: CoverageReport,
    pub log: RunLog,
}

/// Linear-interpolation quantile of sorted data.
fn interp_quantile(sorted: &[f64], p: f64) -> f64 {
    if sorted.is_empty() {
        return f64::NAN;
    }
    let h = p * (sorted.len() - 1) as f64;
    let lo = h.floor() as usize;
    let hi = h.ceil() as usize;
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

fn mean(v: &[f64]) -> f64 {
    if v.is_empty() {
        f64::NAN
    } else {
        v.iter().sum::<f64>() / v.len() as f64
    }
}

/// Summarize replicate records. Failed replicates are counted in
/// `n_excluded` and left out of every statistic.
pub fn aggregate(config: &ExperimentConfig, mut records: Vec<ReplicateRecord>) -> CoverageReport {
    records.sort_by_key(|r| r.index);
    let n_excluded = records.iter().filter(|r| r.failed()).count();
    let mut summaries = Vec::new();
    for &alpha in &config.alphas {
        for &method in &config.methods {
            let scores: Vec<&RegionScore> = records
                .iter()
                .filter(|r| !r.failed())
                .flat_map(|r| r.scores.iter().find(|s| s.alpha == alpha && s.method == method))
                .collect();
            let coverage: Vec<f64> = scores.iter().map(|s| s.coverage.overall).collect();
            let mut sorted = coverage.clone();
            sorted.sort_by(f64::total_cmp);
            let widths: Vec<f64> = scores.iter().map(|s| s.coverage.mean_width).collect();
            let n_y = scores.first().map_or(0, |s| s.coverage.per_coordinate.len());
            let per_coordinate_mean = (0..n_y)
                .map(|k| mean(&scores.iter().map(|s| s.coverage.per_coordinate[k]).collect::<Vec<_>>()))
                .collect();
            summaries.push(CellSummary {
                alpha,
                method,
                nominal_coverage: 1.0 - 2.0 * alpha,
                mean: mean(&coverage),
                min: sorted.first().copied().unwrap_or(f64::NAN),
                q25: interp_quantile(&sorted, 0.25),
                median: interp_quantile(&sorted, 0.5),
                q75: interp_quantile(&sorted, 0.75),
                max: sorted.last().copied().unwrap_or(f64::NAN),
                mean_width: mean(&widths),
                per_coordinate_mean,
                coverage,
            });
        }
    }
    // Where the artifacts went is not part of the result.
    let config = ExperimentConfig {
        output_dir: None,
        ..config.clone()
    };
    CoverageReport {
        schema_version: SCHEMA_VERSION,
        alpha_convention: ALPHA_CONVENTION.into(),
        config,
        n_replicates: records.len(),
        n_excluded,
        summaries,
        replicates: records,
    }
}

fn alpha_tag(alpha: f64) -> String {
    format!("a{alpha}")
}

struct Replicate<'a> {
    cfg: &'a ExperimentConfig,
    spec: &'a ModelSpec,
    transform: &'a Transform,
    grid: &'a [f64],
    nominal: &'a ndarray::Array2<f64>,
}

impl Replicate<'_> {
    fn run(&self, index: usize, region_dir: Option<&Path>) -> (ReplicateRecord, StageTimes) {
        let mut times = StageTimes::default();
        let mut record = ReplicateRecord {
            index,
            error: None,
            theta_hat: None,
            scores: Vec::new(),
        };
        if let Err(e) = self.try_run(index, region_dir, &mut record, &mut times) {
            log::warn!("replicate {index} failed: {e}");
            record.error = Some(e.to_string());
            record.scores.clear();
        }
        (record, times)
    }

    fn try_run(
        &self,
        index: usize,
        region_dir: Option<&Path>,
        record: &mut ReplicateRecord,
        times: &mut StageTimes,
    ) -> Result<()> {
        let cfg = self.cfg;
        let clock = Instant::now();
        let noise = NoiseSpec {
            epsilon: cfg.noise_pct,
            seed: cfg.master_seed,
        };
        let data = simulate_replicate(self.spec, self.grid, &noise, index as u64)?;
        let truth = match cfg.truth {
            TruthMode::Noisy => fresh_observations(self.spec, self.grid, &noise, index as u64)?,
            TruthMode::Noiseless => Dataset::new(
                self.grid.to_vec(),
                self.nominal.clone(),
                DatasetMeta {
                    model: Some(cfg.model.clone()),
                    ..DatasetMeta::default()
                },
            )?,
        };
        times.simulate = clock.elapsed().as_secs_f64();

        let clock = Instant::now();
        let fit_data = apply_transform(&data, self.transform)?;
        let fit_model = self.transform.wrap_model(&self.spec.model);
        let opt = cfg.optimizer(seed::derive(&[cfg.master_seed, stream::REPLICATE, index as u64]));
        let ens = loo_fit(&fit_data, &fit_model, &opt)?;
        record.theta_hat = Some(ens.full_fit.theta_hat.clone());
        times.fit = clock.elapsed().as_secs_f64();

        let clock = Instant::now();
        if let Some(dir) = region_dir {
            create_dir(dir)?;
            crate::data::csv::write_csv(&data, dir.join(format!("rep{index:03}_data.csv")))?;
        }
        for &alpha in &cfg.alphas {
            for &method in &cfg.methods {
                let (region, calibration) = build_region(&ens, self.grid, method, &cfg.region_options(alpha))?;
                let mut region = invert_transform_bounds(&region, self.transform);
                if cfg.clip_nonnegative {
                    region.clip_nonnegative();
                }
                if let Some(dir) = region_dir {
                    let stem = format!("rep{index:03}_{method}_{}", alpha_tag(alpha));
                    write_region_tables(dir, &stem, &region, Some(&data), Some(self.nominal))?;
                }
                record.scores.push(RegionScore {
                    alpha,
                    method,
                    coverage: coverage_eval(&region, &truth)?,
                    calibration,
                });
            }
        }
        times.region = clock.elapsed().as_secs_f64();
        Ok(())
    }
}

/// Run every replicate of `cfg` and, if `cfg.output_dir` is set, write
/// `report.json`, `run_log.json` and region tables under it.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<ExperimentOutcome> {
    cfg.validate()?;
    let started = Instant::now();
    let started_unix = SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map_or(0, |d| d.as_secs());
    let spec = cfg.model_spec()?;
    let transform = cfg.transform()?;
    let grid = spec.uniform_grid(cfg.points(&spec));
    let nominal = nominal_observables(&spec, &grid, &cfg.optimizer(0).integrator)?;
    let region_dir = cfg.output_dir.as_ref().map(|d| d.join("regions"));
    if let Some(dir) = &cfg.output_dir {
        create_dir(dir)?;
    }
    let rep = Replicate {
        cfg,
        spec: &spec,
        transform: &transform,
        grid: &grid,
        nominal: &nominal,
    };
    let results: Vec<(ReplicateRecord, StageTimes)> = (0..cfg.n_replicates)
        .into_par_iter()
        .map(|i| {
            let dir = region_dir.as_deref().filter(|_| i < cfg.region_replicates);
            rep.run(i, dir)
        })
        .collect();
    let (records, stage_times): (Vec<_>, Vec<_>) = results.into_iter().unzip();
    let report = aggregate(cfg, records);
    let log = RunLog {
        started_unix,
        total_seconds: started.elapsed().as_secs_f64(),
        replicates: stage_times,
    };
    if let Some(dir) = &cfg.output_dir {
        write_json(&dir.join("report.json"), &report)?;
        write_json(&dir.join("run_log.json"), &log)?;
    }
    Ok(ExperimentOutcome { report, log })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn record(index: usize, cov: Option<f64>) -> ReplicateRecord {
        ReplicateRecord {
            index,
            error: cov.is_none().then(|| "boom".to_string()),
            theta_hat: None,
            scores: cov
                .map(|c| RegionScore {
                    alpha: 0.05,
                    method: Method::Cuqdyn1,
                    coverage: CoverageSummary {
                        overall: c,
                        per_coordinate: vec![c],
                        mean_width: 1.0,
                        n_points: 10,
                    },
                    calibration: None,
                })
                .into_iter()
                .collect(),
        }
    }

    #[test]
    fn aggregate_excludes_failures() {
        let cfg = ExperimentConfig::default();
        let recs = vec![record(2, Some(0.7)), record(0, Some(0.9)), record(1, None), record(3, Some(1.0))];
        let rep = aggregate(&cfg, recs);
        assert_eq!(rep.n_replicates, 4);
        assert_eq!(rep.n_excluded, 1);
        let s = &rep.summaries[0];
        assert_eq!(s.coverage, vec![0.9, 0.7, 1.0]);
        assert!((s.mean - (0.9 + 0.7 + 1.0) / 3.0).abs() < 1e-12);
        assert_eq!((s.min, s.median, s.max), (0.7, 0.9, 1.0));
        assert!((s.q25 - 0.8).abs() < 1e-12);
    }

    #[test]
    fn config_parsing() {
        let cfg = ExperimentConfig::from_toml_str(
            "model = \"lotka_volterra\"\nn_points = 30\nnoise_pct = 0.1\nmethods = [\"cuqdyn1\", \"cuqdyn2\"]\npooling = \"per_coordinate\"\n",
        )
        .unwrap();
        assert_eq!(cfg.model, "lotka_volterra");
        assert_eq!(cfg.methods, vec![Method::Cuqdyn1, Method::Cuqdyn2]);
        assert_eq!(cfg.pooling, Pooling::PerCoordinate);
        assert_eq!(cfg.n_starts, 20);
        cfg.validate().unwrap();
        assert!(ExperimentConfig::from_toml_str("modle = \"logistic\"").is_err());
    }

    #[test]
    fn invalid_configs() {
        let bad = [
            ExperimentConfig { n_replicates: 0, ..Default::default() },
            ExperimentConfig { alphas: vec![0.0], ..Default::default() },
            ExperimentConfig { alphas: vec![], ..Default::default() },
            ExperimentConfig { model: "nope".into(), ..Default::default() },
            ExperimentConfig {
                model: "lotka_volterra".into(),
                methods: vec![Method::JackknifePlus],
                ..Default::default()
            },
            ExperimentConfig { transform: "sqrt".into(), ..Default::default() },
            ExperimentConfig { n_points: 2, ..Default::default() },
        ];
        for c in bad {
            let e = c.validate().unwrap_err();
            assert!(e.is_config_error(), "{e}");
        }
    }

    #[test]
    fn noiseless_data_is_always_covered() {
        let cfg = ExperimentConfig {
            n_points: 8,
            noise_pct: 0.0,
            n_starts: 4,
            alphas: vec![0.05, 0.25],
            methods: vec![Method::Cuqdyn1, Method::Cuqdyn2, Method::JackknifePlus],
            ..Default::default()
        };
        let out = run_experiment(&cfg).unwrap();
        assert_eq!(out.report.n_excluded, 0);
        for s in &out.report.summaries {
            assert_eq!(s.coverage, vec![1.0], "{:?} {}", s.method, s.alpha);
        }
    }
}
