//! Acceptance criteria AC1-AC10, one PASS/FAIL line each.
//!
//! Runs as a plain binary (`harness = false`); exits nonzero if any
//! criterion fails.

mod common;

use std::path::Path;
use std::process::Command;
use std::time::{Duration, Instant};

use lgl::correlation::WorkingCorrelation;
use lgl::dataset::LaggedDesign;
use lgl::fista::{lipschitz_upper, SmoothLoss};
use lgl::penalty::prox_row_groups;
use lgl::prelude::*;
use ndarray::Array2;
use rand::Rng;

type Outcome = std::result::Result<String, String>;

const FIXTURE_SEED: u64 = 1;
const HOLDOUT: usize = 5;
const TAU: usize = 4;
/// Overall strength relative to the all-zero weights, and lag/feature balance.
const CV_SCALES: [f64; 3] = [1e-4, 1e-3, 1e-2];
const CV_RATIOS: [f64; 5] = [1.0, 1.1, 1.2, 1.3, 1.5];

fn fixture_config(seed: u64) -> SimConfig {
    // d=50, T=30, m=100, zero rows 1-38, zero columns {2,5}, AR1 0.64, N(0,1)
    SimConfig {
        seed,
        ..SimConfig::scaled(50, 30, 100)
    }
}

struct Split {
    train: LongitudinalDataset,
    train_design: LaggedDesign,
    test_design: LaggedDesign,
}

fn split(ds: &LongitudinalDataset, tau: usize) -> Split {
    let (train, test) = split_temporal(ds, HOLDOUT, tau).unwrap();
    Split {
        train_design: build_lagged(&train, tau, false).unwrap(),
        test_design: build_lagged(&test, tau, false).unwrap(),
        train,
    }
}

fn score(result: &FitResult, design: &LaggedDesign, metric: Metric) -> f64 {
    let p = predict(result, design).unwrap();
    metric.score(p.view(), design.outcomes()).unwrap()
}

/// Position of the selected cell, as (scale, ratio), so that other seeds can
/// reuse it relative to their own zeroing weights.
struct Tuned {
    result: FitResult,
    scale: f64,
    ratio: f64,
    test_score: f64,
}

fn tune(
    ds: &LongitudinalDataset,
    family: Family,
    metric: Metric,
) -> Tuned {
    let s = split(ds, TAU);
    let mut spec = CvSpec::scale_ratio_grid(&s.train, TAU, family, false, &CV_SCALES, &CV_RATIOS).unwrap();
    spec.metric = metric;
    let cv = grid_cv(&s.train, TAU, family, CorrelationStructure::Ar1, &spec).unwrap();
    let cells = spec.grid_cells();
    let k = cells.iter().position(|&c| c == (cv.lambda1, cv.lambda2)).unwrap();
    let (scale, ratio) = (CV_SCALES[k / CV_RATIOS.len()], CV_RATIOS[k % CV_RATIOS.len()]);
    let result = fit(
        &s.train_design,
        family,
        CorrelationStructure::Ar1,
        &FitConfig::new(cv.lambda1, cv.lambda2),
    )
    .unwrap();
    let test_score = score(&result, &s.test_design, metric);
    Tuned { result, scale, ratio, test_score }
}

/// The unpenalized longitudinal comparator: lambda = 0 with only the current
/// time point (tau = 0), same working structure.
fn unpenalized(ds: &LongitudinalDataset, family: Family, metric: Metric) -> f64 {
    let s = split(ds, 0);
    let r = fit(&s.train_design, family, CorrelationStructure::Ar1, &FitConfig::new(0.0, 0.0)).unwrap();
    score(&r, &s.test_design, metric)
}

/// Same lag window as the penalized fit, lambda = 0 (reported only).
fn unpenalized_same_tau(ds: &LongitudinalDataset, family: Family, metric: Metric) -> f64 {
    let s = split(ds, TAU);
    let r = fit(&s.train_design, family, CorrelationStructure::Ar1, &FitConfig::new(0.0, 0.0)).unwrap();
    score(&r, &s.test_design, metric)
}

struct Regression {
    tuned: Tuned,
    elapsed: Duration,
}

fn ac1(reg: &Regression) -> Outcome {
    let ds = generate_regression(&fixture_config(FIXTURE_SEED)).unwrap().dataset;
    let lgl = reg.tuned.test_score;
    let base = unpenalized(&ds, Family::Gaussian, Metric::Nmse);
    let same_tau = unpenalized_same_tau(&ds, Family::Gaussian, Metric::Nmse);
    let detail = format!(
        "LGL nMSE {lgl:.3e} (scale {}, ratio {}), unpenalized tau=0 nMSE {base:.4} ({:.0}x), \
         unpenalized tau=4 nMSE {same_tau:.3e} (info), {:.1}s",
        reg.tuned.scale,
        reg.tuned.ratio,
        base / lgl,
        reg.elapsed.as_secs_f64()
    );
    if lgl <= 0.05 && base >= 5.0 * lgl && reg.elapsed <= Duration::from_secs(300) {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn ac2(reg: &Regression) -> Outcome {
    let r = &reg.tuned.result;
    let v = &r.coefficients.v;
    let u = &r.coefficients.u;
    let col: Vec<f64> = v.columns().into_iter().map(|c| c.dot(&c).sqrt()).collect();
    let max_col = col.iter().cloned().fold(0.0, f64::max);
    let lags_ok = max_col > 0.0 && [1, 4].iter().all(|&c| col[c] < 1e-3 * max_col);
    let support = selected_support(r, 1e-3);
    let zero_rows = 38;
    let false_rows = support.features.iter().filter(|&&i| i < zero_rows).count();
    let unselected = 1.0 - false_rows as f64 / zero_rows as f64;
    let hits = support.features.iter().filter(|&&i| i >= zero_rows).count();
    let recall = hits as f64 / (u.nrows() - zero_rows) as f64;
    let detail = format!(
        "lags {:?}, V col norms rel. to max [{}], zero rows unselected {:.0}%, recall {recall:.2}",
        support.lags,
        col.iter().map(|c| format!("{:.1e}", c / max_col)).collect::<Vec<_>>().join(", "),
        100.0 * unselected
    );
    if lags_ok && unselected >= 0.8 && recall >= 0.8 {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn ac3() -> Outcome {
    let start = Instant::now();
    let ds = generate_classification(&fixture_config(FIXTURE_SEED)).unwrap().dataset;
    let tuned = tune(&ds, Family::Bernoulli, Metric::Auc);
    let base = unpenalized(&ds, Family::Bernoulli, Metric::Auc);
    let same_tau = unpenalized_same_tau(&ds, Family::Bernoulli, Metric::Auc);
    let detail = format!(
        "LGL AUC {:.4} (scale {}, ratio {}), unpenalized tau=0 AUC {base:.4}, unpenalized tau=4 AUC {same_tau:.4} (info), {:.1}s",
        tuned.test_score,
        tuned.scale,
        tuned.ratio,
        start.elapsed().as_secs_f64()
    );
    if tuned.test_score >= 0.90 && tuned.test_score - base >= 0.10 {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn ac4(reg: &Regression) -> Outcome {
    let mut alphas = vec![reg.tuned.result.working.alpha];
    for seed in FIXTURE_SEED + 1..FIXTURE_SEED + 5 {
        let ds = generate_regression(&fixture_config(seed)).unwrap().dataset;
        let s = split(&ds, TAU);
        let (m1, m2) = lgl::fista::lambda_max(&s.train_design, Family::Gaussian).unwrap();
        let cfg = FitConfig::new(reg.tuned.scale * m1, reg.tuned.ratio * reg.tuned.scale * m2);
        alphas.push(fit(&s.train_design, Family::Gaussian, CorrelationStructure::Ar1, &cfg).unwrap().working.alpha);
    }
    let mean = alphas.iter().sum::<f64>() / alphas.len() as f64;
    let detail = format!("mean alpha {mean:.4} over seeds, per seed {alphas:.4?}");
    if (0.54..=0.74).contains(&mean) {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn ac5() -> Outcome {
    let start = Instant::now();
    let cfg = SimConfig {
        seed: 5,
        tau: 2,
        zero_lag_columns: vec![2],
        ..SimConfig::scaled(10, 12, 20)
    };
    let ds = generate_regression(&cfg).unwrap().dataset;
    let design = build_lagged(&ds, 2, false).unwrap();
    assert_eq!(design.n_examples(), 10);
    let working = WorkingCorrelation::identity(10);
    let mut inner = InnerConfig::with_lambdas(0.5, 0.5);
    inner.step_mode = StepMode::Fixed;
    inner.restart = false;
    inner.max_iterations = 2000;
    inner.tolerance = f64::MIN_POSITIVE;
    let r = inner_solve(&design, Family::Gaussian, &working, &inner).unwrap();
    if r.iterations() < 500 {
        return Err(format!("stopped after {} iterations", r.iterations()));
    }
    let l = lipschitz_upper(&design, Family::Gaussian, &working).unwrap();
    let f_star = r.final_objective();
    let radius = r.u.iter().chain(r.v.iter()).map(|x| x * x).sum::<f64>();
    let mut worst: f64 = 0.0;
    for k in 10..=500 {
        let gap = r.trace[k - 1].objective - f_star;
        if gap < -1e-9 * f_star.abs() {
            return Err(format!("objective at iteration {k} below the final value"));
        }
        let bound = 2.0 * l * radius / ((k + 1) as f64).powi(2);
        worst = worst.max(gap / bound);
    }
    let elapsed = start.elapsed();
    let detail = format!("max gap/bound over k in [10,500] = {worst:.3e}, {:.2}s", elapsed.as_secs_f64());
    if worst <= 1.0 && elapsed <= Duration::from_secs(30) {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn ac6() -> Outcome {
    let start = Instant::now();
    let mut rng = common::rng(606);
    let mut worst: f64 = 0.0;
    let mut cases = Vec::new();
    for s in [
        CorrelationStructure::Independent,
        CorrelationStructure::Exchangeable,
        CorrelationStructure::TriDiagonal,
        CorrelationStructure::Ar1,
    ] {
        cases.push((Family::Gaussian, s, 0.4));
    }
    cases.push((Family::Bernoulli, CorrelationStructure::Independent, 0.0));
    cases.push((Family::Poisson, CorrelationStructure::Independent, 0.0));
    for (case, &(family, structure, alpha)) in cases.iter().enumerate() {
        let design = common::random_design(60 + case as u64, 3, 2, 6, 5, family);
        let working = WorkingCorrelation::new(structure, alpha, 0.8, 5).unwrap();
        let loss = SmoothLoss::new(&design, family, &working).unwrap();
        for _ in 0..20 {
            let u = common::normal_matrix(&mut rng, 3, 3, 0.3);
            let v = common::normal_matrix(&mut rng, 3, 3, 0.3);
            let (g, _) = lgl::fista::gradient(&design, family, &working, &u, &v).unwrap();
            let fd = common::fd_gradient(&loss, &(&u + &v), 1e-5);
            let rel = (&g - &fd).iter().map(|x| x * x).sum::<f64>().sqrt()
                / g.iter().map(|x| x * x).sum::<f64>().sqrt().max(1e-12);
            worst = worst.max(rel);
        }
    }
    let elapsed = start.elapsed();
    let detail = format!("max relative error {worst:.2e} over 6 cases x 20 points, {:.2}s", elapsed.as_secs_f64());
    if worst <= 1e-5 && elapsed <= Duration::from_secs(30) {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn ac7() -> Outcome {
    let mut rng = common::rng(707);
    let mut worst: f64 = 0.0;
    for _ in 0..1000 {
        let rows = rng.random_range(1..6);
        let cols = rng.random_range(1..6);
        let sd = rng.random_range(0.1..3.0);
        let p = common::normal_matrix(&mut rng, rows, cols, sd);
        let theta = rng.random_range(0.0..4.0);
        let x = prox_row_groups(p.view(), theta);
        worst = worst.max(common::prox_rows_residual(p.view(), x.view(), theta));
        // column groups are the transposed problem
        let xc = lgl::penalty::prox_col_groups(p.view(), theta);
        worst = worst.max(common::prox_rows_residual(p.t(), xc.t(), theta));
    }
    // 1-D search along the direction of p for 1 x 2 inputs
    let mut grid_err: f64 = 0.0;
    for _ in 0..200 {
        let p = common::normal_matrix(&mut rng, 1, 2, 1.5);
        let theta = rng.random_range(0.0..2.0);
        let pn = p.iter().map(|x| x * x).sum::<f64>().sqrt();
        let step = 1e-4;
        let best = (0..=((pn + 1.0) / step) as usize)
            .map(|i| i as f64 * step)
            .map(|s| (s, 0.5 * (s - pn).powi(2) + theta * s))
            .min_by(|a, b| a.1.total_cmp(&b.1))
            .unwrap()
            .0;
        let expected: Array2<f64> = &p * (best / pn);
        let got = prox_row_groups(p.view(), theta);
        grid_err = grid_err.max((&got - &expected).iter().fold(0.0f64, |m, x| m.max(x.abs())));
    }
    let detail = format!("max optimality residual {worst:.2e} over 1000 pairs, 1x2 grid disagreement {grid_err:.2e}");
    if worst <= 1e-10 && grid_err <= 1e-4 {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn ac8() -> Outcome {
    let design = common::random_design(808, 4, 2, 12, 6, Family::Gaussian);
    let mut cfg = FitConfig::new(0.0, 0.0);
    cfg.inner.tolerance = 1e-12;
    cfg.inner.max_iterations = 100_000;
    let r = fit(&design, Family::Gaussian, CorrelationStructure::Independent, &cfg).unwrap();
    let ours = predict(&r, &design).unwrap();
    let ols = common::ols_predictions(&design);
    let ols_gap = (&ours - &ols).iter().fold(0.0f64, |m, x| m.max(x.abs()));

    let small = common::random_design(809, 3, 1, 5, 4, Family::Gaussian);
    let working = WorkingCorrelation::identity(4);
    let (l1, l2) = (0.5, 0.8);
    let fast = inner_solve(&small, Family::Gaussian, &working, &InnerConfig::with_lambdas(l1, l2)).unwrap();
    let (_, _, slow) = common::ista(&small, Family::Gaussian, &working, l1, l2, 100_000);
    let obj_gap = (fast.final_objective() - slow).abs();
    let detail = format!(
        "lambda=0 vs least squares max |diff| {ols_gap:.2e}; accelerated vs 1e5-step proximal objective gap {obj_gap:.2e} ({} iterations)",
        fast.iterations()
    );
    if ols_gap <= 1e-6 && obj_gap <= 1e-6 {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn ac9() -> Outcome {
    let start = Instant::now();
    let sizes = [50usize, 100, 200, 400];
    let mut means = Vec::new();
    let mut truth = None;
    for &m in &sizes {
        let mut total = 0.0;
        for seed in 0..10u64 {
            let cfg = SimConfig {
                seed: 900 + seed,
                coefficient_seed: Some(9),
                tau: 2,
                zero_lag_columns: vec![2],
                ..SimConfig::scaled(10, 12, m)
            };
            let sim = generate_regression(&cfg).unwrap();
            let w_true = sim.w();
            if let Some(t) = &truth {
                assert_eq!(t, &w_true);
            }
            truth = Some(w_true.clone());
            let design = build_lagged(&sim.dataset, 2, false).unwrap();
            // lambda_m = o(sqrt(m))
            let lambda = 2.0 * (m as f64).powf(0.25);
            let r = fit(&design, Family::Gaussian, CorrelationStructure::Ar1, &FitConfig::new(lambda, lambda)).unwrap();
            total += (&r.w() - &w_true).iter().map(|x| x * x).sum::<f64>().sqrt();
        }
        means.push(total / 10.0);
    }
    let elapsed = start.elapsed();
    let decreasing = means.windows(2).all(|w| w[1] < w[0]);
    let detail = format!(
        "mean ||W - W*||_F for m = {sizes:?}: [{}], {:.1}s",
        means.iter().map(|x| format!("{x:.4}")).collect::<Vec<_>>().join(", "),
        elapsed.as_secs_f64()
    );
    if decreasing && elapsed <= Duration::from_secs(600) {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn run_cli(dir: &Path, args: &[&str]) -> std::result::Result<(), String> {
    let out = Command::new(env!("CARGO_BIN_EXE_lgl"))
        .current_dir(dir)
        .args(args)
        .output()
        .map_err(|e| e.to_string())?;
    if out.status.success() {
        Ok(())
    } else {
        Err(format!("{args:?}: {}", String::from_utf8_lossy(&out.stderr).trim()))
    }
}

fn pipeline(dir: &Path) -> std::result::Result<Vec<(String, Vec<u8>)>, String> {
    run_cli(dir, &[
        "simulate", "--output", "data.csv", "--features", "8", "--times", "12", "--subjects", "30",
        "--tau", "2", "--seed", "42",
    ])?;
    run_cli(dir, &[
        "fit", "--input", "data.csv", "--output", "model.json", "--tau", "2", "--structure", "ar1",
        "--lambda1", "5", "--lambda2", "5", "--holdout", "3", "--seed", "42",
    ])?;
    run_cli(dir, &["predict", "--model", "model.json", "--input", "data.csv", "--output", "pred.csv", "--holdout", "3"])?;
    run_cli(dir, &["evaluate", "--predictions", "pred.csv", "--input", "data.csv", "--output", "metrics.json"])?;
    ["data.truth.json", "model.json", "pred.csv", "metrics.json"]
        .iter()
        .map(|f| std::fs::read(dir.join(f)).map(|b| (f.to_string(), b)).map_err(|e| e.to_string()))
        .collect()
}

fn ac10() -> Outcome {
    let a = tempfile::tempdir().map_err(|e| e.to_string())?;
    let b = tempfile::tempdir().map_err(|e| e.to_string())?;
    let first = pipeline(a.path())?;
    let second = pipeline(b.path())?;
    let differing: Vec<&str> = first
        .iter()
        .zip(&second)
        .filter(|(x, y)| x.1 != y.1)
        .map(|(x, _)| x.0.as_str())
        .collect();
    let metrics: serde_json::Value = serde_json::from_slice(&first[3].1).map_err(|e| e.to_string())?;
    let detail = format!("outputs compared: 4, differing: {differing:?}, holdout nMSE {}", metrics["value"]);
    if differing.is_empty() {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn main() {
    // `cargo test` passes harness flags such as `--nocapture`; a name filter
    // that matches none of the criteria skips the suite.
    let filter: Vec<String> = std::env::args().skip(1).filter(|a| !a.starts_with('-')).collect();
    if !filter.is_empty() && !filter.iter().any(|f| "acceptance".contains(f.as_str()) || f.starts_with("AC")) {
        return;
    }
    let wanted = |name: &str| filter.is_empty() || filter.iter().any(|f| f == name || "acceptance".contains(f.as_str()));

    let start = Instant::now();
    let regression = std::cell::OnceCell::new();
    let fixture = || {
        regression.get_or_init(|| {
            let t = Instant::now();
            let ds = generate_regression(&fixture_config(FIXTURE_SEED)).unwrap().dataset;
            let tuned = tune(&ds, Family::Gaussian, Metric::Nmse);
            Regression { tuned, elapsed: t.elapsed() }
        })
    };

    type Criterion<'a> = (&'a str, &'a str, Box<dyn Fn() -> Outcome + 'a>);
    let criteria: Vec<Criterion> = vec![
        ("AC1", "synthetic regression", Box::new(|| ac1(fixture()))),
        ("AC2", "support recovery", Box::new(|| ac2(fixture()))),
        ("AC3", "synthetic classification", Box::new(ac3)),
        ("AC4", "correlation recovery", Box::new(|| ac4(fixture()))),
        ("AC5", "convergence envelope", Box::new(ac5)),
        ("AC6", "gradient correctness", Box::new(ac6)),
        ("AC7", "prox oracle", Box::new(ac7)),
        ("AC8", "oracle equivalence", Box::new(ac8)),
        ("AC9", "consistency trend", Box::new(ac9)),
        ("AC10", "determinism", Box::new(ac10)),
    ];
    let mut failures = 0;
    for (name, title, check) in criteria.iter().filter(|c| wanted(c.0)) {
        match check() {
            Ok(d) => println!("{name} PASS {title}: {d}"),
            Err(d) => {
                failures += 1;
                println!("{name} FAIL {title}: {d}");
            }
        }
    }
    println!("acceptance: {failures} failing, {:.1}s total", start.elapsed().as_secs_f64());
    if failures > 0 {
        std::process::exit(1);
    }
}
