//! Command-line front end.
//!
//! Subcommands: `simulate`, `fit`, `predict`, `evaluate`, `cv`. Every option
//! may also come from a JSON file given with `--config`; keys are the long flag
//! names with `_` for `-`, unknown keys are rejected and file values override
//! flags. Exit codes: 0 success, 1 usage error, 2 data error, 3 numerical
//! failure. Failures print one `error[<class>]: <reason>` line to stderr.

use std::collections::HashMap;
use std::ffi::OsString;
use std::fs::File;
use std::io::{BufReader, Write};
use std::path::{Path, PathBuf};
use std::str::FromStr;

use clap::{Args, Parser, Subcommand};
use ndarray::Array1;
use serde::{Deserialize, Serialize};

use crate::alternation::{fit, predict, FitConfig, FitResult};
use crate::correlation::CorrelationStructure;
use crate::dataset::{build_lagged, load_csv, split_temporal, CsvSchema, LaggedDesign, LongitudinalDataset};
use crate::error::{Error, ErrorClass, Result};
use crate::evalcv::{grid_cv, log_grid, CvSpec, Metric};
use crate::families::Family;
use crate::fista::lambda_max;
use crate::simulate::{generate_classification, generate_regression, SimConfig};

#[derive(Debug, Parser)]
#[command(name = "lgl", version, about = "Sparse longitudinal GLMs with joint feature and lag selection")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Generate a synthetic dataset (CSV) and its true coefficients (JSON).
    Simulate(RunConfig),
    /// Fit a model: writes the model JSON, an iteration trace and a coefficient heatmap table.
    Fit(RunConfig),
    /// Predict on the mean scale: writes subject_id,time,prediction.
    Predict(RunConfig),
    /// Score predictions against the outcomes of a dataset.
    Evaluate(RunConfig),
    /// Cross-validate a (lambda1, lambda2) grid, then refit the best cell.
    Cv(RunConfig),
}

/// Options shared by all subcommands; each subcommand reads the ones it needs.
#[derive(Debug, Clone, Default, PartialEq, Args, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    /// JSON file with option values; overrides flags.
    #[arg(long)]
    #[serde(skip)]
    pub config: Option<PathBuf>,
    /// Input dataset CSV.
    #[arg(long)]
    #[serde(skip_serializing)]
    pub input: Option<PathBuf>,
    /// Output file; sibling outputs share its stem.
    #[arg(long)]
    #[serde(skip_serializing)]
    pub output: Option<PathBuf>,
    /// Model JSON (predict).
    #[arg(long)]
    #[serde(skip_serializing)]
    pub model: Option<PathBuf>,
    /// Predictions CSV (evaluate).
    #[arg(long)]
    #[serde(skip_serializing)]
    pub predictions: Option<PathBuf>,
    /// gaussian | bernoulli | poisson
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub family: Option<String>,
    /// independent | exchangeable | tridiagonal | ar1
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub structure: Option<String>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub tau: Option<usize>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub lambda1: Option<f64>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub lambda2: Option<f64>,
    /// Trailing time points held out; fit/cv use the rest, predict uses the holdout.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub holdout: Option<usize>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub folds: Option<usize>,
    /// Points per weight for the default log grid, or explicit lists `a,b,c:x,y`.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub grid: Option<String>,
    /// Add the lagged outcome as an extra feature row.
    #[arg(long, num_args = 0..=1, default_missing_value = "true")]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub include_lagged_outcome: Option<bool>,
    /// nmse | auc (evaluate, cv); defaults from the family.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub metric: Option<String>,
    /// Simulation: number of features.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub features: Option<usize>,
    /// Simulation: time points per subject.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub times: Option<usize>,
    /// Simulation: number of subjects.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub subjects: Option<usize>,
    /// Simulation: true correlation parameter.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub alpha: Option<f64>,
    /// Simulation: residual standard deviation.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub residual_sd: Option<f64>,
    /// Solver settings (config file only).
    #[arg(skip)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub fit: Option<FitConfig>,
    /// Simulation settings (config file only); top-level keys override it.
    #[arg(skip)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sim: Option<SimConfig>,
    /// Progress messages on stderr.
    #[arg(long)]
    #[serde(skip)]
    pub verbose: bool,
}

macro_rules! overlay {
    ($base:expr, $top:expr, $($field:ident),*) => {
        $( if $top.$field.is_some() { $base.$field = $top.$field.clone(); } )*
    };
}

impl RunConfig {
    /// Load the `--config` file, if any, over the flag values.
    fn resolve_file(mut self) -> Result<Self> {
        if let Some(path) = self.config.clone() {
            let text = std::fs::read_to_string(&path)
                .map_err(|e| Error::InvalidConfig(format!("--config {}: {e}", path.display())))?;
            let file: RunConfig = serde_json::from_str(&text)
                .map_err(|e| Error::InvalidConfig(format!("--config {}: {e}", path.display())))?;
            overlay!(
                self, file, input, output, model, predictions, family, structure, tau, lambda1, lambda2,
                holdout, seed, folds, grid, include_lagged_outcome, metric, features, times, subjects, alpha,
                residual_sd, fit, sim
            );
        }
        Ok(self)
    }

    fn path(&self, value: &Option<PathBuf>, flag: &str) -> Result<PathBuf> {
        value
            .clone()
            .ok_or_else(|| Error::InvalidConfig(format!("{flag} is required")))
    }

    fn family(&mut self, default: Family) -> Result<Family> {
        let f = parse_named("--family", self.family.as_deref(), default)?;
        self.family = Some(f.to_string());
        Ok(f)
    }

    fn structure(&mut self, default: CorrelationStructure) -> Result<CorrelationStructure> {
        let s = parse_named("--structure", self.structure.as_deref(), default)?;
        self.structure = Some(s.to_string());
        Ok(s)
    }

    fn tau(&mut self, default: usize) -> usize {
        *self.tau.get_or_insert(default)
    }

    fn lagged_outcome(&mut self) -> bool {
        *self.include_lagged_outcome.get_or_insert(false)
    }

    fn fit_config(&mut self) -> Result<FitConfig> {
        let mut cfg = self.fit.clone().unwrap_or_default();
        cfg.inner.lambda1 = *self.lambda1.get_or_insert(cfg.inner.lambda1);
        cfg.inner.lambda2 = *self.lambda2.get_or_insert(cfg.inner.lambda2);
        cfg.validate()
            .map_err(|e| Error::InvalidConfig(format!("--lambda1/--lambda2/fit: {e}")))?;
        self.fit = Some(cfg.clone());
        Ok(cfg)
    }

    fn log(&self, msg: &str) {
        if self.verbose {
            eprintln!("{msg}");
        }
    }
}

fn parse_named<T: FromStr<Err = Error>>(flag: &str, value: Option<&str>, default: T) -> Result<T> {
    match value {
        None => Ok(default),
        Some(v) => v.parse().map_err(|e: Error| Error::InvalidConfig(format!("{flag}: {e}"))),
    }
}

/// `path/stem.ext` -> `path/stem.<suffix>`.
fn sibling(path: &Path, suffix: &str) -> PathBuf {
    let stem = path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    path.with_file_name(format!("{stem}.{suffix}"))
}

/// Write through a temporary file in the target directory, then rename.
fn write_atomic(path: &Path, write: impl FnOnce(&mut File) -> Result<()>) -> Result<()> {
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(dir)?;
    write(tmp.as_file_mut())?;
    tmp.as_file_mut().flush()?;
    tmp.persist(path).map_err(|e| Error::Io(e.error))?;
    Ok(())
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    write_atomic(path, |f| {
        f.write_all(text.as_bytes())?;
        f.write_all(b"\n")?;
        Ok(())
    })
}

fn read_dataset(path: &Path) -> Result<LongitudinalDataset> {
    load_csv(BufReader::new(File::open(path)?), &CsvSchema::default())
}

fn echo(run: &RunConfig) -> Result<serde_json::Value> {
    Ok(serde_json::to_value(run)?)
}

/// Training portion under `--holdout`, or everything.
fn training_part(run: &RunConfig, ds: LongitudinalDataset, tau: usize) -> Result<LongitudinalDataset> {
    match run.holdout {
        Some(h) => Ok(split_temporal(&ds, h, tau)?.0),
        None => Ok(ds),
    }
}

fn simulate_cmd(mut run: RunConfig) -> Result<()> {
    let output = run.path(&run.output, "--output")?;
    let family = run.family(Family::Gaussian)?;
    let mut cfg = run.sim.clone().unwrap_or_default();
    if let Some(d) = run.features {
        cfg.n_features = d;
        if run.sim.is_none() {
            cfg.zero_feature_rows = SimConfig::scaled(d, cfg.n_times, cfg.n_subjects).zero_feature_rows;
        }
    }
    cfg.n_times = run.times.unwrap_or(cfg.n_times);
    cfg.n_subjects = run.subjects.unwrap_or(cfg.n_subjects);
    cfg.tau = run.tau.unwrap_or(cfg.tau);
    if run.sim.is_none() {
        let last = cfg.tau + 1;
        cfg.zero_lag_columns.retain(|&c| c <= last);
    }
    cfg.structure = parse_named("--structure", run.structure.as_deref(), cfg.structure)?;
    cfg.alpha = run.alpha.unwrap_or(cfg.alpha);
    cfg.residual_sd = run.residual_sd.unwrap_or(cfg.residual_sd);
    cfg.seed = run.seed.unwrap_or(cfg.seed);
    cfg.validate()?;
    run.sim = Some(cfg.clone());
    run.log(&format!("simulating {} subjects x {} times x {} features", cfg.n_subjects, cfg.n_times, cfg.n_features));
    let sim = match family {
        Family::Bernoulli => generate_classification(&cfg)?,
        _ => generate_regression(&cfg)?,
    };
    write_atomic(&output, |f| sim.dataset.write_csv(f))?;
    let mut truth: serde_json::Value = serde_json::from_str(&sim.truth_json()?)?;
    truth["run"] = echo(&run)?;
    write_text(&sibling(&output, "truth.json"), &serde_json::to_string_pretty(&truth)?)
}

fn fit_cmd(mut run: RunConfig) -> Result<()> {
    let input = run.path(&run.input, "--input")?;
    let output = run.path(&run.output, "--output")?;
    let family = run.family(Family::Gaussian)?;
    let structure = run.structure(CorrelationStructure::Ar1)?;
    let tau = run.tau(0);
    let lagged = run.lagged_outcome();
    let cfg = run.fit_config()?;
    let ds = read_dataset(&input)?;
    let names = ds.feature_names().to_vec();
    let train = training_part(&run, ds, tau)?;
    let design = build_lagged(&train, tau, lagged)?;
    run.log(&format!("fitting {} examples x {} parameters", design.n_total(), design.n_params()));
    let mut result = fit(&design, family, structure, &cfg)?;
    result.seed = run.seed;
    result.feature_names = Some(feature_names(names, lagged));
    write_fit_outputs(&output, &result, &run)
}

fn feature_names(mut names: Vec<String>, lagged: bool) -> Vec<String> {
    if lagged {
        names.push("lagged_outcome".into());
    }
    names
}

fn write_fit_outputs(output: &Path, result: &FitResult, run: &RunConfig) -> Result<()> {
    let mut json: serde_json::Value = serde_json::from_str(&result.to_json()?)?;
    json["run"] = echo(run)?;
    write_text(output, &serde_json::to_string_pretty(&json)?)?;
    write_atomic(&sibling(output, "trace.csv"), |f| result.write_trace_csv(f))?;
    write_atomic(&sibling(output, "heatmap.csv"), |f| result.write_heatmap_csv(f))
}

fn read_model(path: &Path) -> Result<FitResult> {
    let mut json: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(path)?)?;
    if let Some(obj) = json.as_object_mut() {
        obj.remove("run");
    }
    FitResult::from_json(&json.to_string())
}

fn prediction_design(run: &RunConfig, model: &FitResult, ds: &LongitudinalDataset) -> Result<LaggedDesign> {
    let part = match run.holdout {
        Some(h) => split_temporal(ds, h, model.tau)?.1,
        None => ds.clone(),
    };
    build_lagged(&part, model.tau, model.include_lagged_outcome)
}

fn predict_cmd(run: RunConfig) -> Result<()> {
    let model_path = run.path(&run.model, "--model")?;
    let input = run.path(&run.input, "--input")?;
    let output = run.path(&run.output, "--output")?;
    let model = read_model(&model_path)?;
    let ds = read_dataset(&input)?;
    let design = prediction_design(&run, &model, &ds)?;
    let pred = predict(&model, &design)?;
    write_atomic(&output, |f| {
        let mut w = csv::Writer::from_writer(f);
        w.write_record(["subject_id", "time", "prediction"])?;
        let n = design.n_examples();
        for (k, p) in pred.iter().enumerate() {
            w.write_record([
                design.subject_ids()[k / n].clone(),
                design.times()[k].to_string(),
                p.to_string(),
            ])?;
        }
        w.flush()?;
        Ok(())
    })
}

#[derive(Deserialize)]
struct PredictionRow {
    subject_id: String,
    time: i64,
    prediction: f64,
}

#[derive(Serialize)]
struct Metrics {
    metric: Metric,
    value: f64,
    n: usize,
    run: serde_json::Value,
}

fn evaluate_cmd(mut run: RunConfig) -> Result<()> {
    let preds_path = run.path(&run.predictions, "--predictions")?;
    let input = run.path(&run.input, "--input")?;
    let family = run.family(Family::Gaussian)?;
    let metric = parse_named("--metric", run.metric.as_deref(), Metric::for_family(family))?;
    run.metric = Some(metric.to_string());
    let ds = read_dataset(&input)?;
    let actual: HashMap<(&str, i64), f64> = ds
        .subjects()
        .iter()
        .flat_map(|s| {
            s.outcomes
                .iter()
                .enumerate()
                .map(move |(t, &y)| ((s.id.as_str(), s.start_time + t as i64), y))
        })
        .collect();
    let mut reader = csv::Reader::from_reader(BufReader::new(File::open(&preds_path)?));
    let (mut p, mut y) = (Vec::new(), Vec::new());
    for row in reader.deserialize() {
        let row: PredictionRow = row?;
        let value = actual.get(&(row.subject_id.as_str(), row.time)).ok_or_else(|| {
            Error::InvalidData(format!("no outcome for subject {} at time {}", row.subject_id, row.time))
        })?;
        p.push(row.prediction);
        y.push(*value);
    }
    let value = metric.score(Array1::from(p).view(), Array1::from(y.clone()).view())?;
    let text = serde_json::to_string_pretty(&Metrics { metric, value, n: y.len(), run: echo(&run)? })?;
    match &run.output {
        Some(path) => write_text(path, &text),
        None => {
            println!("{text}");
            Ok(())
        }
    }
}

fn parse_grid(text: &str) -> Result<Option<(Vec<f64>, Vec<f64>)>> {
    let bad = || Error::InvalidConfig(format!("--grid: expected a point count or 'a,b:c,d', got '{text}'"));
    if let Ok(points) = text.trim().parse::<usize>() {
        return if points == 0 { Err(bad()) } else { Ok(None) };
    }
    let (l1, l2) = text.split_once(':').ok_or_else(bad)?;
    let list = |s: &str| -> Result<Vec<f64>> {
        s.split(',').map(|v| v.trim().parse::<f64>().map_err(|_| bad())).collect()
    };
    Ok(Some((list(l1)?, list(l2)?)))
}

fn cv_cmd(mut run: RunConfig) -> Result<()> {
    let input = run.path(&run.input, "--input")?;
    let output = run.path(&run.output, "--output")?;
    let family = run.family(Family::Gaussian)?;
    let structure = run.structure(CorrelationStructure::Ar1)?;
    let tau = run.tau(0);
    let lagged = run.lagged_outcome();
    let template = run.fit_config()?;
    let metric = parse_named("--metric", run.metric.as_deref(), Metric::for_family(family))?;
    run.metric = Some(metric.to_string());
    let grid = run.grid.get_or_insert_with(|| "5".into()).clone();
    let ds = read_dataset(&input)?;
    let names = ds.feature_names().to_vec();
    let train = training_part(&run, ds, tau)?;
    let (g1, g2) = match parse_grid(&grid)? {
        Some(lists) => lists,
        None => {
            let points: usize = grid.trim().parse().expect("checked by parse_grid");
            let (m1, m2) = lambda_max(&build_lagged(&train, tau, lagged)?, family)?;
            (log_grid(m1, points, 1e-3), log_grid(m2, points, 1e-3))
        }
    };
    let spec = CvSpec {
        lambda1_grid: g1,
        lambda2_grid: g2,
        folds: *run.folds.get_or_insert(3),
        metric,
        seed: *run.seed.get_or_insert(0),
        fit: template.clone(),
        include_lagged_outcome: lagged,
        cells: None,
    };
    run.log(&format!(
        "cross-validating {} cells x {} folds",
        spec.lambda1_grid.len() * spec.lambda2_grid.len(),
        spec.folds
    ));
    let cv = grid_cv(&train, tau, family, structure, &spec)?;
    write_atomic(&output, |f| cv.write_csv(f))?;

    let mut cfg = template;
    cfg.inner.lambda1 = cv.lambda1;
    cfg.inner.lambda2 = cv.lambda2;
    let design = build_lagged(&train, tau, lagged)?;
    let mut result = fit(&design, family, structure, &cfg)?;
    result.seed = run.seed;
    result.feature_names = Some(feature_names(names, lagged));
    write_fit_outputs(&sibling(&output, "best.json"), &result, &run)
}

fn dispatch(command: Command) -> Result<()> {
    match command {
        Command::Simulate(r) => simulate_cmd(r.resolve_file()?),
        Command::Fit(r) => fit_cmd(r.resolve_file()?),
        Command::Predict(r) => predict_cmd(r.resolve_file()?),
        Command::Evaluate(r) => evaluate_cmd(r.resolve_file()?),
        Command::Cv(r) => cv_cmd(r.resolve_file()?),
    }
}

/// Exit code for an error.
pub fn exit_code(err: &Error) -> i32 {
    match err.class() {
        ErrorClass::Usage => 1,
        ErrorClass::Data => 2,
        ErrorClass::Numerical => 3,
    }
}

fn one_line(msg: &str) -> String {
    msg.split_whitespace().collect::<Vec<_>>().join(" ")
}

/// Parse `args` (including the program name), run, and return the exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                print!("{e}");
                return 0;
            }
            let first = e.to_string().lines().next().unwrap_or("invalid arguments").to_string();
            eprintln!("error[usage]: {}", one_line(first.trim_start_matches("error: ")));
            return 1;
        }
    };
    match dispatch(cli.command) {
        Ok(()) => 0,
        Err(e) => {
            let class = match e.class() {
                ErrorClass::Usage => "usage",
                ErrorClass::Data => "data",
                ErrorClass::Numerical => "numerical",
            };
            eprintln!("error[{class}]: {}", one_line(&e.to_string()));
            exit_code(&e)
        }
    }
}
