//! Outer alternation between the penalized inner solve and working
//! correlation re-estimation, plus prediction and support extraction.

use ndarray::{Array1, Array2};
use serde::{Deserialize, Serialize};

use crate::correlation::{estimate_alpha, estimate_phi, pearson_residuals, CorrelationStructure, WorkingCorrelation};
use crate::dataset::LaggedDesign;
use crate::error::{Error, Result};
use crate::families::Family;
use crate::fista::{inner_solve_from, InnerConfig, TraceEntry};
use crate::linalg::frobenius;
use crate::penalty::CoefficientPair;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FitConfig {
    pub inner: InnerConfig,
    pub max_outer: usize,
    pub alpha_tolerance: f64,
    pub coef_tolerance: f64,
}

impl Default for FitConfig {
    fn default() -> Self {
        Self {
            inner: InnerConfig::default(),
            max_outer: 25,
            alpha_tolerance: 1e-4,
            coef_tolerance: 1e-4,
        }
    }
}

impl FitConfig {
    pub fn new(lambda1: f64, lambda2: f64) -> Self {
        Self {
            inner: InnerConfig::with_lambdas(lambda1, lambda2),
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.inner.validate()?;
        if self.max_outer == 0 {
            return Err(Error::InvalidConfig("max_outer must be positive".into()));
        }
        if !(self.alpha_tolerance > 0.0 && self.coef_tolerance > 0.0) {
            return Err(Error::InvalidConfig("outer tolerances must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FitStatus {
    Converged,
    MaxOuterReached,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FitResult {
    pub coefficients: CoefficientPair,
    /// Correlation estimated from the final coefficients.
    pub working: WorkingCorrelation,
    pub family: Family,
    pub structure: CorrelationStructure,
    pub tau: usize,
    pub include_lagged_outcome: bool,
    pub outer_iterations: usize,
    /// Final monitored objective of each outer round.
    pub trace: Vec<f64>,
    /// Full inner trace of each outer round.
    pub inner_traces: Vec<Vec<TraceEntry>>,
    pub status: FitStatus,
    pub config: FitConfig,
    pub seed: Option<u64>,
    pub feature_names: Option<Vec<String>>,
}

impl FitResult {
    pub fn w(&self) -> Array2<f64> {
        self.coefficients.w()
    }
}

/// Alternate inner solves with re-estimation of `phi` and `alpha`, starting
/// from `R = I`, `phi = 1`. Stops once `|d alpha| < alpha_tolerance` and the
/// relative change of `W` is below `coef_tolerance`, or after `max_outer`
/// rounds. The independent structure does a single pass (scale only).
///
/// The inner problem is always solved at unit dispersion: the estimated
/// `phi` is reported and normalizes `alpha`, but does not reweight the loss
/// against the fixed penalty weights.
pub fn fit(
    design: &LaggedDesign,
    family: Family,
    structure: CorrelationStructure,
    config: &FitConfig,
) -> Result<FitResult> {
    config.validate()?;
    let n = design.n_examples();
    let n_total = design.n_total();
    let n_params = design.n_params();
    if n_total <= n_params {
        return Err(Error::OverParameterized {
            examples: n_total,
            params: n_params,
        });
    }
    let mut working = WorkingCorrelation::identity(n);
    let mut previous_w: Option<Array2<f64>> = None;
    let mut trace = Vec::new();
    let mut inner_traces = Vec::new();
    let mut coefficients = None;
    let mut status = FitStatus::MaxOuterReached;

    for _ in 0..config.max_outer {
        let unit = WorkingCorrelation { phi: 1.0, ..working.clone() };
        let start = coefficients.as_ref().map(|c: &CoefficientPair| (&c.u, &c.v));
        let inner = inner_solve_from(design, family, &unit, &config.inner, start)?;
        trace.push(inner.final_objective());
        let w = &inner.u + &inner.v;
        inner_traces.push(inner.trace);

        let gamma = pearson_residuals(design, &w, family, 1.0)?;
        let phi = estimate_phi(&gamma, n_total, n_params)?;
        let alpha = estimate_alpha(&gamma, structure, n_total, n_params, phi)?;
        let alpha_change = (alpha - working.alpha).abs();
        let coef_change = previous_w
            .as_ref()
            .map(|p| frobenius(&(&w - p)) / (1.0 + frobenius(&w)))
            .unwrap_or(f64::INFINITY);
        working = WorkingCorrelation::new(structure, alpha, phi, n)?;
        coefficients = Some(CoefficientPair {
            u: inner.u,
            v: inner.v,
            lambda1: config.inner.lambda1,
            lambda2: config.inner.lambda2,
        });
        if structure == CorrelationStructure::Independent
            || (alpha_change < config.alpha_tolerance && coef_change < config.coef_tolerance)
        {
            status = FitStatus::Converged;
            break;
        }
        previous_w = Some(w);
    }

    Ok(FitResult {
        coefficients: coefficients.expect("at least one outer round"),
        working,
        family,
        structure,
        tau: design.tau(),
        include_lagged_outcome: design.include_lagged_outcome(),
        outer_iterations: trace.len(),
        trace,
        inner_traces,
        status,
        config: config.clone(),
        seed: None,
        feature_names: None,
    })
}

/// Mean-scale predictions `g^{-1}(tr(X^T W))` for every stacked example.
pub fn predict(result: &FitResult, design: &LaggedDesign) -> Result<Array1<f64>> {
    if design.tau() != result.tau || design.include_lagged_outcome() != result.include_lagged_outcome {
        return Err(Error::ShapeMismatch(format!(
            "model uses tau={} (lagged outcome {}), design uses tau={} (lagged outcome {})",
            result.tau,
            result.include_lagged_outcome,
            design.tau(),
            design.include_lagged_outcome()
        )));
    }
    let eta = design.linear_predictor(&result.w())?;
    Ok(result.family.mean(eta.view()))
}

/// Selected feature rows of `U` and lag columns of `V` (0-based; column `k`
/// is lag `k`).
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Support {
    pub features: Vec<usize>,
    pub lags: Vec<usize>,
}

fn selected(norms: Vec<f64>, rel_tol: f64) -> Vec<usize> {
    let max = norms.iter().cloned().fold(0.0, f64::max);
    norms
        .iter()
        .enumerate()
        .filter(|(_, &n)| n > 0.0 && n > rel_tol * max)
        .map(|(i, _)| i)
        .collect()
}

/// A group is selected iff its norm exceeds `rel_tol` times the largest group
/// norm of its matrix. Exact zeros are never selected.
pub fn selected_support(result: &FitResult, rel_tol: f64) -> Support {
    let u = &result.coefficients.u;
    let v = &result.coefficients.v;
    Support {
        features: selected(u.rows().into_iter().map(|r| r.dot(&r).sqrt()).collect(), rel_tol),
        lags: selected(v.columns().into_iter().map(|c| c.dot(&c).sqrt()).collect(), rel_tol),
    }
}

/// Serialized form of a [`FitResult`]. Matrices are row-major with shape
/// `[rows, cols]` = `[features, tau + 1]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FitResultJson {
    pub family: Family,
    pub structure: CorrelationStructure,
    pub tau: usize,
    pub include_lagged_outcome: bool,
    pub shape: [usize; 2],
    pub examples_per_subject: usize,
    pub u: Vec<f64>,
    pub v: Vec<f64>,
    pub lambda1: f64,
    pub lambda2: f64,
    pub alpha: f64,
    pub phi: f64,
    pub outer_iterations: usize,
    pub status: FitStatus,
    pub trace: Vec<f64>,
    pub config: FitConfig,
    pub seed: Option<u64>,
    pub feature_names: Option<Vec<String>>,
}

impl From<&FitResult> for FitResultJson {
    fn from(r: &FitResult) -> Self {
        Self {
            family: r.family,
            structure: r.structure,
            tau: r.tau,
            include_lagged_outcome: r.include_lagged_outcome,
            shape: [r.coefficients.u.nrows(), r.coefficients.u.ncols()],
            examples_per_subject: r.working.n(),
            u: r.coefficients.u.iter().copied().collect(),
            v: r.coefficients.v.iter().copied().collect(),
            lambda1: r.coefficients.lambda1,
            lambda2: r.coefficients.lambda2,
            alpha: r.working.alpha,
            phi: r.working.phi,
            outer_iterations: r.outer_iterations,
            status: r.status,
            trace: r.trace.clone(),
            config: r.config.clone(),
            seed: r.seed,
            feature_names: r.feature_names.clone(),
        }
    }
}

impl TryFrom<FitResultJson> for FitResult {
    type Error = Error;

    fn try_from(j: FitResultJson) -> Result<Self> {
        let [rows, cols] = j.shape;
        if cols != j.tau + 1 {
            return Err(Error::ShapeMismatch(format!("{cols} columns for tau={}", j.tau)));
        }
        let matrix = |v: Vec<f64>| {
            Array2::from_shape_vec((rows, cols), v).map_err(|e| Error::ShapeMismatch(e.to_string()))
        };
        let working = WorkingCorrelation::new(j.structure, j.alpha, j.phi, j.examples_per_subject)?;
        Ok(Self {
            coefficients: CoefficientPair {
                u: matrix(j.u)?,
                v: matrix(j.v)?,
                lambda1: j.lambda1,
                lambda2: j.lambda2,
            },
            working,
            family: j.family,
            structure: j.structure,
            tau: j.tau,
            include_lagged_outcome: j.include_lagged_outcome,
            outer_iterations: j.outer_iterations,
            trace: j.trace,
            inner_traces: Vec::new(),
            status: j.status,
            config: j.config,
            seed: j.seed,
            feature_names: j.feature_names,
        })
    }
}

impl FitResult {
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(&FitResultJson::from(self))?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let j: FitResultJson = serde_json::from_str(text)?;
        j.try_into()
    }

    /// All inner traces as CSV: `round,iteration,objective,step`.
    pub fn write_trace_csv<W: std::io::Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(["round", "iteration", "objective", "step"])?;
        for (round, trace) in self.inner_traces.iter().enumerate() {
            for e in trace {
                w.write_record([
                    (round + 1).to_string(),
                    e.iteration.to_string(),
                    e.objective.to_string(),
                    e.step.to_string(),
                ])?;
            }
        }
        w.flush()?;
        Ok(())
    }

    /// Plot-ready coefficient table: `feature,lag,abs_w,abs_u,abs_v`.
    pub fn write_heatmap_csv<W: std::io::Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(["feature", "lag", "abs_w", "abs_u", "abs_v"])?;
        let u = &self.coefficients.u;
        let v = &self.coefficients.v;
        for ((r, c), uu) in u.indexed_iter() {
            let name = self
                .feature_names
                .as_ref()
                .and_then(|n| n.get(r).cloned())
                .unwrap_or_else(|| format!("x{}", r + 1));
            let vv = v[[r, c]];
            w.write_record([
                name,
                c.to_string(),
                (uu + vv).abs().to_string(),
                uu.abs().to_string(),
                vv.abs().to_string(),
            ])?;
        }
        w.flush()?;
        Ok(())
    }
}
