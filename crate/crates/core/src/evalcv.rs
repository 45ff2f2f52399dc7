//! Evaluation metrics and subject-wise k-fold cross-validation over a
//! `(lambda1, lambda2)` grid.

use std::cmp::Ordering;
use std::fmt;
use std::str::FromStr;

use ndarray::ArrayView1;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::alternation::{fit, predict, FitConfig};
use crate::correlation::CorrelationStructure;
use crate::dataset::{build_lagged, LongitudinalDataset};
use crate::error::{Error, Result};
use crate::families::Family;
use crate::fista::lambda_max;

/// Mean squared error divided by the population variance of `actuals`.
pub fn nmse(predictions: ArrayView1<f64>, actuals: ArrayView1<f64>) -> Result<f64> {
    let n = actuals.len();
    if n < 2 || predictions.len() != n {
        return Err(Error::ShapeMismatch(format!(
            "nmse needs two or more paired values, got {} predictions and {n} actuals",
            predictions.len()
        )));
    }
    let mean = actuals.sum() / n as f64;
    let var = actuals.iter().map(|y| (y - mean).powi(2)).sum::<f64>() / n as f64;
    if !(var > 0.0) {
        return Err(Error::ZeroVariance);
    }
    let mse = predictions
        .iter()
        .zip(actuals)
        .map(|(p, y)| (p - y).powi(2))
        .sum::<f64>()
        / n as f64;
    Ok(mse / var)
}

/// Mann-Whitney AUC: `P(s+ > s-) + P(s+ = s-) / 2`, using midranks.
pub fn auc(scores: ArrayView1<f64>, labels: ArrayView1<f64>) -> Result<f64> {
    if scores.len() != labels.len() {
        return Err(Error::ShapeMismatch("scores and labels differ in length".into()));
    }
    if scores.iter().any(|s| s.is_nan()) {
        return Err(Error::NonFinite("NaN score".into()));
    }
    let mut idx: Vec<usize> = (0..scores.len()).collect();
    idx.sort_by(|&a, &b| scores[a].total_cmp(&scores[b]));
    let mut rank_sum_pos = 0.0;
    let mut i = 0;
    while i < idx.len() {
        let mut j = i;
        while j + 1 < idx.len() && scores[idx[j + 1]] == scores[idx[i]] {
            j += 1;
        }
        let midrank = (i + j) as f64 / 2.0 + 1.0;
        rank_sum_pos += idx[i..=j].iter().filter(|&&k| labels[k] > 0.5).count() as f64 * midrank;
        i = j + 1;
    }
    let n_pos = labels.iter().filter(|&&l| l > 0.5).count() as f64;
    let n_neg = labels.len() as f64 - n_pos;
    if n_pos == 0.0 || n_neg == 0.0 {
        return Err(Error::SingleClass);
    }
    Ok((rank_sum_pos - n_pos * (n_pos + 1.0) / 2.0) / (n_pos * n_neg))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Metric {
    Nmse,
    Auc,
}

impl Metric {
    pub fn for_family(family: Family) -> Self {
        match family {
            Family::Bernoulli => Metric::Auc,
            _ => Metric::Nmse,
        }
    }

    pub fn score(self, predictions: ArrayView1<f64>, actuals: ArrayView1<f64>) -> Result<f64> {
        match self {
            Metric::Nmse => nmse(predictions, actuals),
            Metric::Auc => auc(predictions, actuals),
        }
    }

    /// `Less` when `a` is the better score.
    fn compare(self, a: f64, b: f64) -> Ordering {
        match self {
            Metric::Nmse => a.total_cmp(&b),
            Metric::Auc => b.total_cmp(&a),
        }
    }
}

impl fmt::Display for Metric {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Metric::Nmse => "nmse",
            Metric::Auc => "auc",
        })
    }
}

impl FromStr for Metric {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "nmse" => Ok(Metric::Nmse),
            "auc" => Ok(Metric::Auc),
            _ => Err(Error::UnknownName { kind: "metric", value: s.into() }),
        }
    }
}

/// `count` log-spaced values from `ratio * max` to `max`.
pub fn log_grid(max: f64, count: usize, ratio: f64) -> Vec<f64> {
    match count {
        0 => vec![],
        1 => vec![max],
        _ => (0..count)
            .map(|i| max * ratio.powf(1.0 - i as f64 / (count - 1) as f64))
            .collect(),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CvSpec {
    pub lambda1_grid: Vec<f64>,
    pub lambda2_grid: Vec<f64>,
    pub folds: usize,
    pub metric: Metric,
    pub seed: u64,
    /// Template for every cell; its penalty weights are overwritten.
    #[serde(default)]
    pub fit: FitConfig,
    #[serde(default)]
    pub include_lagged_outcome: bool,
    /// Explicit `(lambda1, lambda2)` cells; when set, used instead of the
    /// cross product of the two grids.
    #[serde(default)]
    pub cells: Option<Vec<(f64, f64)>>,
}

impl CvSpec {
    pub fn new(lambda1_grid: Vec<f64>, lambda2_grid: Vec<f64>, metric: Metric) -> Self {
        Self {
            lambda1_grid,
            lambda2_grid,
            folds: 3,
            metric,
            seed: 0,
            fit: FitConfig::default(),
            include_lagged_outcome: false,
            cells: None,
        }
    }

    /// Cells `(s * max1, r * s * max2)` for every scale `s` and ratio `r`,
    /// where `(max1, max2)` are the weights that zero everything at the first
    /// step. Ratios move the fit along the feature/lag trade-off at fixed
    /// overall strength.
    pub fn scale_ratio_grid(
        train: &LongitudinalDataset,
        tau: usize,
        family: Family,
        include_lagged_outcome: bool,
        scales: &[f64],
        ratios: &[f64],
    ) -> Result<Self> {
        let design = build_lagged(train, tau, include_lagged_outcome)?;
        let (max1, max2) = lambda_max(&design, family)?;
        let cells: Vec<(f64, f64)> = scales
            .iter()
            .flat_map(|&s| ratios.iter().map(move |&r| (s * max1, r * s * max2)))
            .collect();
        let mut spec = Self::new(
            cells.iter().map(|c| c.0).collect(),
            cells.iter().map(|c| c.1).collect(),
            Metric::for_family(family),
        );
        spec.include_lagged_outcome = include_lagged_outcome;
        spec.cells = Some(cells);
        Ok(spec)
    }

    /// The `(lambda1, lambda2)` cells searched.
    pub fn grid_cells(&self) -> Vec<(f64, f64)> {
        match &self.cells {
            Some(c) => c.clone(),
            None => self
                .lambda1_grid
                .iter()
                .flat_map(|&l1| self.lambda2_grid.iter().map(move |&l2| (l1, l2)))
                .collect(),
        }
    }

    /// `points` log-spaced values per weight from `1e-3 * lambda_max` to
    /// `lambda_max`, where `lambda_max` zeroes every group at the first step
    /// from zero.
    pub fn default_grid(
        train: &LongitudinalDataset,
        tau: usize,
        family: Family,
        include_lagged_outcome: bool,
        points: usize,
    ) -> Result<Self> {
        let design = build_lagged(train, tau, include_lagged_outcome)?;
        let (max1, max2) = lambda_max(&design, family)?;
        let mut spec = Self::new(
            log_grid(max1, points, 1e-3),
            log_grid(max2, points, 1e-3),
            Metric::for_family(family),
        );
        spec.include_lagged_outcome = include_lagged_outcome;
        Ok(spec)
    }

    pub fn validate(&self, n_subjects: usize) -> Result<()> {
        let cells = self.grid_cells();
        if cells.is_empty() {
            return Err(Error::InvalidConfig("empty lambda grid".into()));
        }
        if cells
            .iter()
            .any(|&(a, b)| !(a >= 0.0 && a.is_finite() && b >= 0.0 && b.is_finite()))
        {
            return Err(Error::InvalidConfig("grid values must be finite and nonnegative".into()));
        }
        if self.folds < 2 || self.folds > n_subjects {
            return Err(Error::InvalidConfig(format!(
                "folds must lie in [2, {n_subjects}], got {}",
                self.folds
            )));
        }
        Ok(())
    }

    /// Fold index of every subject (in dataset order): a seeded shuffle dealt
    /// round-robin.
    pub fn fold_assignment(&self, n_subjects: usize) -> Vec<usize> {
        let mut order: Vec<usize> = (0..n_subjects).collect();
        order.shuffle(&mut ChaCha8Rng::seed_from_u64(self.seed));
        let mut folds = vec![0; n_subjects];
        for (pos, &subject) in order.iter().enumerate() {
            folds[subject] = pos % self.folds;
        }
        folds
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CvCell {
    pub lambda1: f64,
    pub lambda2: f64,
    /// `None` where the fit or the score failed.
    pub fold_scores: Vec<Option<f64>>,
}

impl CvCell {
    /// Mean over folds, `None` if any fold failed.
    pub fn mean(&self) -> Option<f64> {
        let scores: Option<Vec<f64>> = self.fold_scores.iter().copied().collect();
        scores.map(|s| s.iter().sum::<f64>() / s.len() as f64)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CvResult {
    pub lambda1: f64,
    pub lambda2: f64,
    pub metric: Metric,
    pub cells: Vec<CvCell>,
}

impl CvResult {
    /// Report rows `lambda1,lambda2,fold,metric`; failed folds are `NaN`.
    pub fn write_csv<W: std::io::Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(["lambda1", "lambda2", "fold", &self.metric.to_string()])?;
        for c in &self.cells {
            for (k, s) in c.fold_scores.iter().enumerate() {
                w.write_record([
                    c.lambda1.to_string(),
                    c.lambda2.to_string(),
                    (k + 1).to_string(),
                    s.unwrap_or(f64::NAN).to_string(),
                ])?;
            }
        }
        w.flush()?;
        Ok(())
    }
}

fn score_fold(
    train: &LongitudinalDataset,
    test: &LongitudinalDataset,
    tau: usize,
    family: Family,
    structure: CorrelationStructure,
    config: &FitConfig,
    spec: &CvSpec,
) -> Result<f64> {
    let train_design = build_lagged(train, tau, spec.include_lagged_outcome)?;
    let test_design = build_lagged(test, tau, spec.include_lagged_outcome)?;
    let model = fit(&train_design, family, structure, config)?;
    let pred = predict(&model, &test_design)?;
    let score = spec.metric.score(pred.view(), test_design.outcomes())?;
    if score.is_finite() {
        Ok(score)
    } else {
        Err(Error::NonFinite("cross-validation score".into()))
    }
}

/// Score every grid cell on every fold and pick the best mean score. Ties go
/// to the larger `lambda1 + lambda2`.
pub fn grid_cv(
    train: &LongitudinalDataset,
    tau: usize,
    family: Family,
    structure: CorrelationStructure,
    spec: &CvSpec,
) -> Result<CvResult> {
    let m = train.n_subjects();
    spec.validate(m)?;
    let assignment = spec.fold_assignment(m);
    let splits: Vec<(LongitudinalDataset, LongitudinalDataset)> = (0..spec.folds)
        .map(|k| {
            let (held, kept): (Vec<usize>, Vec<usize>) = (0..m).partition(|&i| assignment[i] == k);
            Ok((train.select_subjects(&kept)?, train.select_subjects(&held)?))
        })
        .collect::<Result<_>>()?;

    let lambdas = spec.grid_cells();
    let jobs: Vec<(usize, usize)> = (0..lambdas.len())
        .flat_map(|c| (0..spec.folds).map(move |k| (c, k)))
        .collect();
    let scores: Vec<Option<f64>> = jobs
        .par_iter()
        .map(|&(c, k)| {
            let mut config = spec.fit.clone();
            config.inner.lambda1 = lambdas[c].0;
            config.inner.lambda2 = lambdas[c].1;
            let (fit_part, test_part) = &splits[k];
            score_fold(fit_part, test_part, tau, family, structure, &config, spec).ok()
        })
        .collect();

    let cells: Vec<CvCell> = lambdas
        .iter()
        .enumerate()
        .map(|(c, &(lambda1, lambda2))| CvCell {
            lambda1,
            lambda2,
            fold_scores: scores[c * spec.folds..(c + 1) * spec.folds].to_vec(),
        })
        .collect();

    let best = cells
        .iter()
        .filter_map(|c| c.mean().map(|s| (c, s)))
        .min_by(|(a, sa), (b, sb)| {
            spec.metric
                .compare(*sa, *sb)
                .then_with(|| (b.lambda1 + b.lambda2).total_cmp(&(a.lambda1 + a.lambda2)))
        })
        .ok_or(Error::AllCellsFailed)?;
    Ok(CvResult {
        lambda1: best.0.lambda1,
        lambda2: best.0.lambda2,
        metric: spec.metric,
        cells,
    })
}
