use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use cuqdyn::conformal::{build_region, CalibrationSummary, Method, Pooling, QuantileRule, RegionOptions};
use cuqdyn::data::{self, invert_transform_bounds, simulate_replicate, Dataset, NoiseSpec, Transform};
use cuqdyn::estimate::{fit, loo_fit, ObjectiveKind, OptimizerConfig};
use cuqdyn::harness::output::write_region_tables;
use cuqdyn::harness::{run_experiment, run_benchmark_grid, ExperimentConfig, Suite, TruthMode, NFKB_REPLICATES};
use cuqdyn::models::{alpha_pinene_real_dataset, registry_get, ModelSpec};
use cuqdyn::{Error, Result};

#[derive(Parser)]
#[command(name = "cuqdyn", version, about = "Conformal prediction regions for ODE models")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate a noisy dataset at the model's true parameters.
    Simulate(SimulateArgs),
    /// Fit model parameters to a dataset.
    Fit(FitArgs),
    /// Build a prediction region from one dataset.
    Region(RegionArgs),
    /// Monte-Carlo coverage experiment.
    Coverage(CoverageArgs),
    /// Run a benchmark scenario grid.
    PaperGrid(GridArgs),
}

#[derive(Args)]
struct DataArgs {
    #[arg(long, default_value = "logistic")]
    model: String,
    /// Dataset CSV (`t,y1,...`); simulated when absent.
    #[arg(long)]
    data: Option<PathBuf>,
    /// Use the bundled measured dataset (alpha_pinene only).
    #[arg(long, conflicts_with = "data")]
    real_data: bool,
    /// Sample times after t0 when simulating.
    #[arg(long)]
    n_points: Option<usize>,
    /// Noise fraction when simulating (0.1 is 10 %).
    #[arg(long, default_value_t = 0.1)]
    noise: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Args)]
struct OptimizerArgs {
    #[arg(long)]
    n_starts: Option<usize>,
    #[arg(long)]
    max_local_iters: Option<usize>,
    #[arg(long, value_parser = parse_objective)]
    objective: Option<ObjectiveKind>,
}

#[derive(Args)]
struct SimulateArgs {
    #[arg(long, default_value = "logistic")]
    model: String,
    #[arg(long)]
    n_points: Option<usize>,
    #[arg(long, default_value_t = 0.1)]
    noise: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 0)]
    replicate: u64,
    /// Output CSV; stdout when absent.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct FitArgs {
    #[command(flatten)]
    data: DataArgs,
    #[command(flatten)]
    opt: OptimizerArgs,
    #[arg(long, default_value = "identity")]
    transform: String,
    /// Also run the leave-one-out refits.
    #[arg(long)]
    loo: bool,
    /// Output JSON; stdout when absent.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct RegionArgs {
    #[command(flatten)]
    data: DataArgs,
    #[command(flatten)]
    opt: OptimizerArgs,
    #[arg(long, default_value = "cuqdyn1", value_parser = parse_method)]
    method: Method,
    /// Raw alpha: lower bound at quantile alpha, upper at 1 - alpha.
    #[arg(long, conflicts_with = "level")]
    alpha: Option<f64>,
    /// Two-sided level, e.g. 95 or 0.95; alpha = (1 - level) / 2.
    #[arg(long)]
    level: Option<f64>,
    #[arg(long, default_value = "global", value_parser = parse_pooling)]
    pooling: Pooling,
    #[arg(long, default_value = "identity")]
    transform: String,
    /// Use the plain ceil(level * m) quantile instead of the conformal one.
    #[arg(long)]
    plain_quantile: bool,
    /// Evaluate on this many equispaced points after t0 instead of the data times.
    #[arg(long)]
    grid_points: Option<usize>,
    #[arg(long)]
    clip_nonnegative: bool,
    /// Leave the x_nom column empty.
    #[arg(long)]
    no_nominal: bool,
    #[arg(long, default_value = "region")]
    out: PathBuf,
}

#[derive(Args)]
struct CoverageArgs {
    /// TOML experiment file; flags override its values.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    model: Option<String>,
    #[arg(long)]
    n_points: Option<usize>,
    #[arg(long)]
    noise: Option<f64>,
    #[arg(long)]
    replicates: Option<usize>,
    #[arg(long = "alpha")]
    alphas: Vec<f64>,
    #[arg(long = "method", value_parser = parse_method)]
    methods: Vec<Method>,
    #[arg(long, value_parser = parse_pooling)]
    pooling: Option<Pooling>,
    #[arg(long)]
    transform: Option<String>,
    #[arg(long, value_parser = parse_truth)]
    truth: Option<TruthMode>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    clip_nonnegative: bool,
    #[command(flatten)]
    opt: OptimizerArgs,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct GridArgs {
    #[arg(long, value_parser = parse_suite)]
    suite: Suite,
    #[arg(long, default_value_t = 1.0)]
    scale: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = NFKB_REPLICATES)]
    nfkb_replicates: usize,
    /// TOML file with settings shared by every cell.
    #[arg(long)]
    config: Option<PathBuf>,
    #[command(flatten)]
    opt: OptimizerArgs,
    #[arg(long, default_value = "results")]
    out: PathBuf,
}

fn parse_method(s: &str) -> std::result::Result<Method, String> {
    s.parse().map_err(|e: Error| e.to_string())
}

fn parse_pooling(s: &str) -> std::result::Result<Pooling, String> {
    s.parse().map_err(|e: Error| e.to_string())
}

fn parse_suite(s: &str) -> std::result::Result<Suite, String> {
    s.parse().map_err(|e: Error| e.to_string())
}

fn parse_objective(s: &str) -> std::result::Result<ObjectiveKind, String> {
    match s {
        "sse" => Ok(ObjectiveKind::Sse),
        "gaussian_nll" => Ok(ObjectiveKind::GaussianNll),
        _ => Err(format!("unknown objective `{s}`")),
    }
}

fn parse_truth(s: &str) -> std::result::Result<TruthMode, String> {
    match s {
        "noisy" => Ok(TruthMode::Noisy),
        "noiseless" => Ok(TruthMode::Noiseless),
        _ => Err(format!("unknown truth mode `{s}`")),
    }
}

impl OptimizerArgs {
    fn apply(&self, cfg: &mut OptimizerConfig) {
        if let Some(n) = self.n_starts {
            cfg.n_starts = n;
        }
        if let Some(n) = self.max_local_iters {
            cfg.max_local_iters = n;
        }
        if let Some(o) = self.objective {
            cfg.objective = o;
        }
    }

    fn apply_experiment(&self, cfg: &mut ExperimentConfig) {
        if let Some(n) = self.n_starts {
            cfg.n_starts = n;
        }
        if let Some(n) = self.max_local_iters {
            cfg.max_local_iters = n;
        }
        if let Some(o) = self.objective {
            cfg.objective = o;
        }
    }
}

/// Dataset plus the model with its initial state taken from the data when
/// the data were not simulated here.
struct Loaded {
    spec: ModelSpec,
    data: Dataset,
    simulated: bool,
}

fn load(args: &DataArgs) -> Result<Loaded> {
    let spec = registry_get(&args.model)?;
    let external = if args.real_data {
        if args.model != "alpha_pinene" {
            return Err(Error::InvalidConfig(format!(
                "no bundled measurements for model `{}`",
                args.model
            )));
        }
        Some(alpha_pinene_real_dataset())
    } else if let Some(p) = &args.data {
        Some(data::csv::read_csv(p)?)
    } else {
        None
    };
    match external {
        Some(d) => {
            let spec = if spec.model.n_x == spec.model.n_y {
                spec.anchored_to(&d)?
            } else {
                spec
            };
            Ok(Loaded {
                spec,
                data: d,
                simulated: false,
            })
        }
        None => {
            let grid = spec.uniform_grid(args.n_points.unwrap_or(spec.default_n));
            let noise = NoiseSpec {
                epsilon: args.noise,
                seed: args.seed,
            };
            let d = simulate_replicate(&spec, &grid, &noise, 0)?;
            Ok(Loaded {
                spec,
                data: d,
                simulated: true,
            })
        }
    }
}

fn emit(out: Option<&Path>, text: &str) -> Result<()> {
    match out {
        Some(p) => std::fs::write(p, text).map_err(|e| Error::Io {
            path: p.to_path_buf(),
            source: e,
        }),
        None => {
            let mut so = std::io::stdout().lock();
            so.write_all(text.as_bytes()).map_err(|e| Error::Io {
                path: "<stdout>".into(),
                source: e,
            })
        }
    }
}

fn simulate(a: &SimulateArgs) -> Result<()> {
    let spec = registry_get(&a.model)?;
    let grid = spec.uniform_grid(a.n_points.unwrap_or(spec.default_n));
    let noise = NoiseSpec {
        epsilon: a.noise,
        seed: a.seed,
    };
    let d = simulate_replicate(&spec, &grid, &noise, a.replicate)?;
    emit(a.out.as_deref(), &data::csv::format_dataset(&d))
}

#[derive(Serialize)]
struct FitOutput {
    model: String,
    param_names: Vec<String>,
    full_fit: cuqdyn::estimate::FitResult,
    loo_fits: Option<Vec<cuqdyn::estimate::FitResult>>,
    loo_residuals: Option<Vec<Vec<f64>>>,
}

fn run_fit(a: &FitArgs) -> Result<()> {
    let loaded = load(&a.data)?;
    let h: Transform = a.transform.parse()?;
    let data = data::apply_transform(&loaded.data, &h)?;
    let model = h.wrap_model(&loaded.spec.model);
    let mut cfg = OptimizerConfig {
        seed: a.data.seed,
        ..OptimizerConfig::default()
    };
    a.opt.apply(&mut cfg);
    let out = if a.loo {
        let ens = loo_fit(&data, &model, &cfg)?;
        FitOutput {
            model: loaded.spec.name().into(),
            param_names: model.param_names.clone(),
            full_fit: ens.full_fit.clone(),
            loo_residuals: Some(ens.e.outer_iter().map(|r| r.to_vec()).collect()),
            loo_fits: Some(ens.fits),
        }
    } else {
        FitOutput {
            model: loaded.spec.name().into(),
            param_names: model.param_names.clone(),
            full_fit: fit(&data, &model, &cfg)?,
            loo_fits: None,
            loo_residuals: None,
        }
    };
    let mut text = serde_json::to_string_pretty(&out)?;
    text.push('\n');
    emit(a.out.as_deref(), &text)
}

#[derive(Serialize)]
struct RegionMeta {
    schema_version: u32,
    model: String,
    method: Method,
    alpha: f64,
    /// Nominal two-sided coverage `1 - 2 alpha`.
    level: f64,
    alpha_convention: &'static str,
    pooling: Pooling,
    quantile_rule: QuantileRule,
    transform: String,
    n_cal: usize,
    calibration: Option<CalibrationSummary>,
    param_names: Vec<String>,
    theta_hat: Vec<f64>,
    files: Vec<PathBuf>,
}

fn resolve_alpha(alpha: Option<f64>, level: Option<f64>) -> Result<f64> {
    let a = match (alpha, level) {
        (Some(a), _) => a,
        (None, Some(l)) => {
            let l = if l > 1.0 { l / 100.0 } else { l };
            ((1.0 - l) / 2.0 * 1e12).round() / 1e12
        }
        (None, None) => 0.05,
    };
    if !(a > 0.0 && a < 1.0) {
        return Err(Error::InvalidConfig(format!("alpha {a} outside (0, 1)")));
    }
    Ok(a)
}

fn run_region(a: &RegionArgs) -> Result<()> {
    let alpha = resolve_alpha(a.alpha, a.level)?;
    let loaded = load(&a.data)?;
    let h: Transform = a.transform.parse()?;
    h.validate(loaded.spec.model.n_y)?;
    let fit_data = data::apply_transform(&loaded.data, &h)?;
    let model = h.wrap_model(&loaded.spec.model);
    let mut cfg = OptimizerConfig {
        seed: a.data.seed,
        ..OptimizerConfig::default()
    };
    a.opt.apply(&mut cfg);
    let ens = loo_fit(&fit_data, &model, &cfg)?;

    let grid: Vec<f64> = match a.grid_points {
        Some(n) => {
            let (t0, t1) = (loaded.data.t0(), *loaded.data.times.last().expect("non-empty"));
            (0..=n)
                .map(|i| if i == n { t1 } else { t0 + (t1 - t0) * i as f64 / n as f64 })
                .collect()
        }
        None => loaded.data.times.clone(),
    };
    let opts = RegionOptions {
        alpha,
        rule: if a.plain_quantile {
            QuantileRule::Plain
        } else {
            QuantileRule::Conformal
        },
        pooling: a.pooling,
    };
    let (region, calibration) = build_region(&ens, &grid, a.method, &opts)?;
    let mut region = invert_transform_bounds(&region, &h);
    if a.clip_nonnegative {
        region.clip_nonnegative();
    }
    let nominal = match (&loaded.spec.true_params, a.no_nominal || !loaded.simulated) {
        (Some(_), false) => Some(data::nominal_observables(&loaded.spec, &grid, &cfg.integrator)?),
        _ => None,
    };
    let files = write_region_tables(
        &a.out,
        &format!("region_{}", a.method),
        &region,
        Some(&loaded.data),
        nominal.as_ref(),
    )?;
    let meta = RegionMeta {
        schema_version: cuqdyn::harness::SCHEMA_VERSION,
        model: loaded.spec.name().into(),
        method: a.method,
        alpha,
        level: 1.0 - 2.0 * alpha,
        alpha_convention: "lower bound at quantile alpha, upper at 1 - alpha",
        pooling: a.pooling,
        quantile_rule: opts.rule,
        transform: h.to_string(),
        n_cal: ens.n_cal(),
        calibration,
        param_names: model.param_names.clone(),
        theta_hat: ens.full_fit.theta_hat.clone(),
        files: files.iter().filter_map(|p| p.file_name().map(PathBuf::from)).collect(),
    };
    let mut text = serde_json::to_string_pretty(&meta)?;
    text.push('\n');
    emit(Some(&a.out.join(format!("region_{}.json", a.method))), &text)?;
    data::csv::write_csv(&loaded.data, a.out.join("data.csv"))?;
    println!("wrote {} tables to {}", files.len() / 2, a.out.display());
    Ok(())
}

fn run_coverage(a: &CoverageArgs) -> Result<()> {
    let mut cfg = match &a.config {
        Some(p) => ExperimentConfig::load(p)?,
        None => ExperimentConfig::default(),
    };
    if let Some(m) = &a.model {
        cfg.model = m.clone();
    }
    if let Some(n) = a.n_points {
        cfg.n_points = n;
    }
    if let Some(e) = a.noise {
        cfg.noise_pct = e;
    }
    if let Some(r) = a.replicates {
        cfg.n_replicates = r;
    }
    if !a.alphas.is_empty() {
        cfg.alphas = a.alphas.clone();
    }
    if !a.methods.is_empty() {
        cfg.methods = a.methods.clone();
    }
    if let Some(p) = a.pooling {
        cfg.pooling = p;
    }
    if let Some(t) = &a.transform {
        cfg.transform = t.clone();
    }
    if let Some(t) = a.truth {
        cfg.truth = t;
    }
    if let Some(s) = a.seed {
        cfg.master_seed = s;
    }
    if a.clip_nonnegative {
        cfg.clip_nonnegative = true;
    }
    if let Some(o) = &a.out {
        cfg.output_dir = Some(o.clone());
    }
    a.opt.apply_experiment(&mut cfg);
    let outcome = run_experiment(&cfg)?;
    let r = &outcome.report;
    println!(
        "{} n={} noise={} replicates={} excluded={}",
        cfg.model, r.config.n_points, cfg.noise_pct, r.n_replicates, r.n_excluded
    );
    println!("{:<15} {:>6} {:>8} {:>8} {:>8} {:>8} {:>11}", "method", "alpha", "nominal", "mean", "q25", "q75", "mean_width");
    for s in &r.summaries {
        println!(
            "{:<15} {:>6} {:>8.3} {:>8.3} {:>8.3} {:>8.3} {:>11.4e}",
            s.method.as_str(),
            s.alpha,
            s.nominal_coverage,
            s.mean,
            s.q25,
            s.q75,
            s.mean_width
        );
    }
    Ok(())
}

fn run_grid(a: &GridArgs) -> Result<()> {
    let mut template = match &a.config {
        Some(p) => ExperimentConfig::load(p)?,
        None => ExperimentConfig::default(),
    };
    template.master_seed = a.seed;
    a.opt.apply_experiment(&mut template);
    let report = run_benchmark_grid(a.suite, a.scale, a.nfkb_replicates, &template, &a.out)?;
    for c in &report.cells {
        let first = c.summaries.first();
        println!(
            "{} n={:>3} noise={:>4} replicates={} excluded={} mean coverage ({} alpha={}) {:.3}",
            report.suite,
            c.n_points,
            c.noise_pct,
            c.n_replicates,
            c.n_excluded,
            first.map_or("-", |s| s.method.as_str()),
            first.map_or(f64::NAN, |s| s.alpha),
            first.map_or(f64::NAN, |s| s.mean),
        );
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let result = match &cli.command {
        Command::Simulate(a) => simulate(a),
        Command::Fit(a) => run_fit(a),
        Command::Region(a) => run_region(a),
        Command::Coverage(a) => run_coverage(a),
        Command::PaperGrid(a) => run_grid(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_config_error() { 1 } else { 2 })
        }
    }
}
