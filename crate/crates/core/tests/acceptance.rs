//! One test per acceptance criterion. Each prints a single
//! `PASS`/`FAIL` line to stdout (bypassing the test-output capture) and then
//! asserts.

use std::io::Write;
use std::path::Path;
use std::time::{Duration, Instant};

use cuqdyn::conformal::{
    cuqdyn1, cuqdyn2, cuqdyn2_from_parts, Pooling, QuantileRule, RegionOptions,
};
use cuqdyn::data::{simulate_dataset, simulate_replicate, Dataset, NoiseSpec};
use cuqdyn::estimate::{fit, loo_fit, FitResult, LooEnsemble, OptimizerConfig};
use cuqdyn::harness::{run_experiment, ExperimentConfig};
use cuqdyn::models::{alpha_pinene_real_dataset, registry_get};
use cuqdyn::ode::{integrate, logistic_closed_form, IntegratorConfig};
use cuqdyn::conformal::Method;
use ndarray::{Array2, Array3};
use rand::{Rng, SeedableRng};

fn verdict(id: &str, pass: bool, detail: &str) {
    let line = format!("{} criterion {id}: {detail}\n", if pass { "PASS" } else { "FAIL" });
    let mut out = std::io::stdout().lock();
    let _ = out.write_all(line.as_bytes());
    let _ = out.flush();
    assert!(pass, "criterion {id} failed: {detail}");
}

fn within(x: f64, target: f64, rel: f64) -> bool {
    ((x - target) / target).abs() <= rel
}

#[test]
fn c1_integrator_accuracy() {
    let clock = Instant::now();
    let spec = registry_get("logistic").unwrap();
    let grid: Vec<f64> = (0..=1000).map(|i| i as f64 * 0.1).collect();
    let traj = integrate(&spec.model, &[0.1, 100.0], &grid, &IntegratorConfig::default()).unwrap();
    let logistic_err = grid
        .iter()
        .enumerate()
        .map(|(i, &t)| {
            let exact = logistic_closed_form(t, 0.1, 100.0, 10.0);
            ((traj.states[[i, 0]] - exact) / exact).abs()
        })
        .fold(0.0, f64::max);

    let ap = registry_get("alpha_pinene").unwrap();
    let grid = ap.uniform_grid(200);
    let traj = integrate(&ap.model, ap.true_params.as_ref().unwrap(), &grid, &IntegratorConfig::default()).unwrap();
    let mass0: f64 = traj.states.row(0).sum();
    let drift = traj
        .states
        .outer_iter()
        .map(|r| ((r.sum() - mass0) / mass0).abs())
        .fold(0.0, f64::max);
    let elapsed = clock.elapsed();
    verdict(
        "1",
        logistic_err <= 1e-6 && drift <= 1e-6 && elapsed < Duration::from_secs(1),
        &format!("logistic max rel err {logistic_err:.2e} (<= 1e-6), alpha-pinene mass drift {drift:.2e} (<= 1e-6), {elapsed:.2?} (< 1 s)"),
    );
}

#[test]
fn c2_nominal_anchors() {
    let clock = Instant::now();
    let cfg = IntegratorConfig::default();
    let lg = registry_get("logistic").unwrap();
    let x10 = integrate(&lg.model, &[0.1, 100.0], &[0.0, 10.0], &cfg).unwrap().states[[1, 0]];
    let lv = registry_get("lotka_volterra").unwrap();
    let tr = integrate(&lv.model, lv.true_params.as_ref().unwrap(), &[0.0, 1.0, 6.0], &cfg).unwrap();
    let (x1, x2) = (tr.states[[1, 0]], tr.states[[2, 1]]);
    let elapsed = clock.elapsed();
    verdict(
        "2",
        within(x10, 23.20, 0.005) && within(x1, 15.10, 0.005) && within(x2, 37.02, 0.005) && elapsed < Duration::from_secs(1),
        &format!("logistic x(10) = {x10:.4} vs 23.20, LV x1(1) = {x1:.4} vs 15.10, LV x2(6) = {x2:.4} vs 37.02 (0.5 %), {elapsed:.2?}"),
    );
}

#[test]
fn c3_noiseless_recovery() {
    let clock = Instant::now();
    let mut worst: Vec<String> = Vec::new();
    let mut ok = true;
    for (name, n) in [("logistic", 20), ("lotka_volterra", 30), ("alpha_pinene", 20)] {
        let spec = registry_get(name).unwrap();
        let grid = spec.uniform_grid(n);
        let d = simulate_dataset(&spec, &grid, &NoiseSpec { epsilon: 0.0, seed: 0 }).unwrap();
        let r = fit(&d, &spec.model, &OptimizerConfig::default()).unwrap();
        let truth = spec.true_params.unwrap();
        let rel = r
            .theta_hat
            .iter()
            .zip(&truth)
            .map(|(a, b)| ((a - b) / b).abs())
            .fold(0.0, f64::max);
        ok &= rel <= 1e-2;
        worst.push(format!("{name} {rel:.1e}"));
    }
    let elapsed = clock.elapsed();
    verdict(
        "3",
        ok && elapsed < Duration::from_secs(120),
        &format!("max relative parameter error: {} (<= 1e-2), {elapsed:.1?} (< 2 min)", worst.join(", ")),
    );
}

#[test]
fn c4_theorem_coverage() {
    let clock = Instant::now();
    let alpha = 0.1;
    let base = ExperimentConfig {
        model: "logistic".into(),
        n_points: 20,
        noise_pct: 0.05,
        n_replicates: 50,
        alphas: vec![alpha],
        methods: vec![Method::Cuqdyn1, Method::Cuqdyn2],
        pooling: Pooling::Global,
        master_seed: 2024,
        ..Default::default()
    };
    let small = run_experiment(&base).unwrap().report;
    let nominal = 1.0 - 2.0 * alpha;
    let mut ok = small.n_excluded == 0;
    let mut parts = Vec::new();
    for s in &small.summaries {
        // Binomial standard error over every scored (time, replicate) pair.
        let trials = (s.coverage.len() * base.n_points) as f64;
        let se = (nominal * (1.0 - nominal) / trials).sqrt();
        let floor = nominal - 3.0 * se;
        ok &= s.mean >= floor;
        parts.push(format!("n=20 {} mean {:.3} (>= {:.3})", s.method, s.mean, floor));
    }

    let large = run_experiment(&ExperimentConfig {
        n_points: 100,
        methods: vec![Method::Cuqdyn1],
        ..base.clone()
    })
    .unwrap()
    .report;
    let s = &large.summaries[0];
    let iqr = s.q75 - s.q25;
    ok &= large.n_excluded == 0 && iqr <= 0.15;
    parts.push(format!("n=100 cuqdyn1 mean {:.3}, IQR {:.3} (<= 0.15)", s.mean, iqr));
    let elapsed = clock.elapsed();
    ok &= elapsed < Duration::from_secs(20 * 60);
    parts.push(format!("{elapsed:.0?} (< 20 min)"));
    verdict("4", ok, &parts.join("; "));
}

/// Straight-line jackknife+ on explicit arrays. Ranks come from integer
/// arithmetic on `alpha = pct / 100` and the bound is found by counting,
/// not by sorting.
fn jackknife_plus_oracle(g: &Array3<f64>, e: &Array2<f64>, pct: usize) -> (Array2<f64>, Array2<f64>) {
    let (n, nt, ny) = g.dim();
    let k_lo = ((pct * (n + 1)) / 100).clamp(1, n);
    let k_hi = ((100 - pct) * (n + 1)).div_ceil(100).clamp(1, n);
    let kth = |vals: &[f64], k: usize| -> f64 {
        for &c in vals {
            let below = vals.iter().filter(|&&v| v < c).count();
            let at_or_below = vals.iter().filter(|&&v| v <= c).count();
            if below < k && k <= at_or_below {
                return c;
            }
        }
        unreachable!()
    };
    let mut lo = Array2::zeros((nt, ny));
    let mut hi = Array2::zeros((nt, ny));
    for t in 0..nt {
        for k in 0..ny {
            let down: Vec<f64> = (0..n).map(|j| g[[j, t, k]] - e[[j, k]]).collect();
            let up: Vec<f64> = (0..n).map(|j| g[[j, t, k]] + e[[j, k]]).collect();
            lo[[t, k]] = kth(&down, k_lo);
            hi[[t, k]] = kth(&up, k_hi);
        }
    }
    (lo, hi)
}

#[test]
fn c5_jackknife_plus_equivalence() {
    let clock = Instant::now();
    let spec = registry_get("logistic").unwrap();
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(5);
    let mut max_diff: f64 = 0.0;
    for case in 0..20 {
        let n = rng.random_range(5..30);
        let grid = spec.uniform_grid(n);
        let d = simulate_dataset(&spec, &grid, &NoiseSpec { epsilon: 0.1, seed: case }).unwrap();
        let fits: Vec<FitResult> = (0..n)
            .map(|_| FitResult::external(vec![rng.random_range(0.07..0.13), rng.random_range(85.0..115.0)]))
            .collect();
        let ens = LooEnsemble::from_fits(
            &spec.model,
            &d,
            fits,
            FitResult::external(vec![0.1, 100.0]),
            &IntegratorConfig::default(),
        )
        .unwrap();
        let pct = [5, 10, 20, 25][case as usize % 4];
        let region = cuqdyn1(&ens, &d.times, pct as f64 / 100.0).unwrap();
        let (lo, hi) = jackknife_plus_oracle(&ens.g, &ens.e, pct);
        // Row 0 is the known initial value, not a jackknife+ bound.
        for t in 1..d.n_rows() {
            max_diff = max_diff
                .max((region.lpb[[t, 0]] - lo[[t, 0]]).abs())
                .max((region.upb[[t, 0]] - hi[[t, 0]]).abs());
        }
    }
    let elapsed = clock.elapsed();
    verdict(
        "5",
        max_diff <= 1e-12 && elapsed < Duration::from_secs(10),
        &format!("20 random ensembles, max |cuqdyn1 - oracle| = {max_diff:.1e} (<= 1e-12), {elapsed:.2?} (< 10 s)"),
    );
}

#[test]
fn c6_reference_bounds_ballpark() {
    let spec = registry_get("logistic").unwrap();
    let grid = spec.uniform_grid(10);
    let d = simulate_replicate(&spec, &grid, &NoiseSpec { epsilon: 0.1, seed: 0 }, 0).unwrap();
    let ens = loo_fit(&d, &spec.model, &OptimizerConfig::default()).unwrap();
    let r = cuqdyn1(&ens, &d.times, 0.05).unwrap();
    let checks = [
        ("logistic t=50 LPB", r.lpb[[5, 0]], 78.16, 0.15),
        ("logistic t=50 UPB", r.upb[[5, 0]], 114.9, 0.15),
        ("logistic t=100 LPB", r.lpb[[10, 0]], 80.81, 0.15),
        ("logistic t=100 UPB", r.upb[[10, 0]], 118.5, 0.15),
    ];

    let real = alpha_pinene_real_dataset();
    let ap = registry_get("alpha_pinene").unwrap().anchored_to(&real).unwrap();
    let ens = loo_fit(&real, &ap.model, &OptimizerConfig::default()).unwrap();
    let (r2, _) = cuqdyn2(&ens, &real.times, 0.05, Pooling::Global).unwrap();
    let row = real.times.iter().position(|&t| t == 7800.0).unwrap();
    let more = [
        ("alpha-pinene y3 t=7800 LPB", r2.lpb[[row, 2]], 4.869, 0.20),
        ("alpha-pinene y3 t=7800 UPB", r2.upb[[row, 2]], 8.411, 0.20),
    ];
    let mut ok = true;
    let mut parts = Vec::new();
    for (label, got, want, tol) in checks.iter().chain(&more) {
        let good = within(*got, *want, *tol);
        ok &= good;
        parts.push(format!("{label} {got:.4} vs {want} ({:+.1} %)", 100.0 * (got / want - 1.0)));
    }
    verdict("6", ok, &parts.join("; "));
}

#[test]
fn c7_cuqdyn2_structure() {
    let clock = Instant::now();
    let spec = registry_get("lotka_volterra").unwrap();
    let grid = spec.uniform_grid(12);
    let d: Dataset = simulate_dataset(&spec, &grid, &NoiseSpec { epsilon: 0.1, seed: 3 }).unwrap();
    let truth = spec.true_params.clone().unwrap();
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
    let fits = (0..12)
        .map(|_| FitResult::external(truth.iter().map(|v| v * rng.random_range(0.97..1.03)).collect()))
        .collect();
    let ens = LooEnsemble::from_fits(&spec.model, &d, fits, FitResult::external(truth), &IntegratorConfig::default()).unwrap();
    let fine: Vec<f64> = (0..=300).map(|i| i as f64 * 0.1).collect();
    let (r, _) = cuqdyn2(&ens, &fine, 0.1, Pooling::Global).unwrap();
    let asym = ndarray::Zip::from(&r.lpb)
        .and(&r.upb)
        .and(&r.center)
        .fold(0.0f64, |m, &l, &u, &c| m.max(((u - c) - (c - l)).abs()));

    let preds = Array3::from_shape_fn((6, 3, 2), |(j, i, k)| (j * j) as f64 + i as f64 - k as f64);
    let zero = Array2::zeros((6, 2));
    let (rz, cz) = cuqdyn2_from_parts(&preds, &zero, &[0.0, 1.0, 2.0], 0.0, &[0.0, 0.0], &RegionOptions::new(0.1)).unwrap();
    let degenerate_ok = cz.degenerate == vec![true, true] && rz.lpb == rz.upb;

    let c = 0.37;
    let equal = Array2::from_elem((6, 2), c);
    let opts = RegionOptions {
        pooling: Pooling::PerCoordinate,
        rule: QuantileRule::Conformal,
        ..RegionOptions::new(0.1)
    };
    let (re, ce) = cuqdyn2_from_parts(&preds, &equal, &[0.0, 1.0, 2.0], 0.0, &[0.0, 0.0], &opts).unwrap();
    let mut equal_ok = ce.q == vec![1.0, 1.0] && ce.sigma == vec![c, c];
    for i in 1..3 {
        for k in 0..2 {
            let col: Vec<f64> = (0..6).map(|j| preds[[j, i, k]]).collect();
            let med = 0.5 * (col[2] + col[3]);
            equal_ok &= re.lpb[[i, k]] == med - c && re.upb[[i, k]] == med + c;
        }
    }
    let elapsed = clock.elapsed();
    verdict(
        "7",
        asym <= 1e-10 && degenerate_ok && equal_ok && elapsed < Duration::from_secs(5),
        &format!(
            "max asymmetry {asym:.1e} (<= 1e-10), degenerate flagged zero width: {degenerate_ok}, equal residuals give median +/- c: {equal_ok}, {elapsed:.2?} (< 5 s)"
        ),
    );
}

#[test]
fn c8_nfkb_smoke() {
    let clock = Instant::now();
    let spec = registry_get("nfkb").unwrap();
    let grid = spec.uniform_grid(spec.default_n);
    let d = simulate_dataset(&spec, &grid, &NoiseSpec { epsilon: 0.1, seed: 0 }).unwrap();
    let ens = loo_fit(&d, &spec.model, &OptimizerConfig::default()).unwrap();
    let r1 = cuqdyn1(&ens, &d.times, 0.05).unwrap();
    let (r2, _) = cuqdyn2(&ens, &d.times, 0.05, Pooling::Global).unwrap();
    let sane = |lpb: &Array2<f64>, upb: &Array2<f64>| {
        lpb.ncols() == 6
            && lpb.iter().chain(upb.iter()).all(|v| v.is_finite())
            && lpb.iter().zip(upb.iter()).all(|(l, u)| l <= u)
    };
    let elapsed = clock.elapsed();
    verdict(
        "8",
        sane(&r1.lpb, &r1.upb) && sane(&r2.lpb, &r2.upb) && elapsed < Duration::from_secs(30 * 60),
        &format!(
            "{} rows x 6 observables, finite ordered bounds for cuqdyn1 and cuqdyn2, {elapsed:.0?} (< 30 min)",
            d.n_rows()
        ),
    );
}

fn collect_files(root: &Path, out: &mut Vec<std::path::PathBuf>) {
    for entry in std::fs::read_dir(root).unwrap() {
        let p = entry.unwrap().path();
        if p.is_dir() {
            collect_files(&p, out);
        } else if p.file_name().is_some_and(|n| n != "run_log.json") {
            out.push(p);
        }
    }
}

#[test]
fn c9_determinism() {
    let bin = env!("CARGO_BIN_EXE_cuqdyn");
    let dirs = [tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap()];
    for d in &dirs {
        let status = std::process::Command::new(bin)
            .args(["paper-grid", "--suite", "logistic", "--scale", "0.05", "--seed", "11", "--out"])
            .arg(d.path())
            .stdout(std::process::Stdio::null())
            .status()
            .unwrap();
        assert!(status.success());
    }
    let mut a = Vec::new();
    let mut b = Vec::new();
    collect_files(dirs[0].path(), &mut a);
    collect_files(dirs[1].path(), &mut b);
    let rel = |v: &Vec<std::path::PathBuf>, root: &Path| {
        let mut r: Vec<_> = v.iter().map(|p| p.strip_prefix(root).unwrap().to_path_buf()).collect();
        r.sort();
        r
    };
    let (ra, rb) = (rel(&a, dirs[0].path()), rel(&b, dirs[1].path()));
    let mut identical = ra == rb && !ra.is_empty();
    if identical {
        for p in &ra {
            identical &= std::fs::read(dirs[0].path().join(p)).unwrap() == std::fs::read(dirs[1].path().join(p)).unwrap();
        }
    }
    verdict(
        "9",
        identical,
        &format!("two paper-grid runs, {} artifacts each, byte-identical: {identical}", ra.len()),
    );
}
