//! Synthetic longitudinal data with known sparse `U` and `V`.
//!
//! Randomness comes from `ChaCha8Rng` seeded with `seed`: stream 0 draws the
//! coefficients, stream `i + 1` draws subject `i` (features, then residuals,
//! then labels). Datasets are therefore reproducible across platforms and
//! independent of generation order.

use nalgebra::SymmetricEigen;
use ndarray::{Array1, Array2};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::correlation::{build_r, CorrelationStructure};
use crate::dataset::{LongitudinalDataset, SubjectSeries};
use crate::error::{Error, Result};
use crate::families::Family;
use crate::linalg::{from_nalgebra, to_nalgebra};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SimConfig {
    pub n_features: usize,
    pub n_times: usize,
    pub n_subjects: usize,
    pub tau: usize,
    pub feature_sd: f64,
    pub coef_sd: f64,
    /// 1-based rows of `U` forced to zero.
    pub zero_feature_rows: Vec<usize>,
    /// 1-based columns of `V` forced to zero.
    pub zero_lag_columns: Vec<usize>,
    pub structure: CorrelationStructure,
    pub alpha: f64,
    pub residual_sd: f64,
    pub seed: u64,
    /// Seed for the coefficients only; defaults to `seed`. Fixing it keeps
    /// the true `W` while the data vary with `seed`.
    pub coefficient_seed: Option<u64>,
}

impl Default for SimConfig {
    fn default() -> Self {
        Self {
            n_features: 200,
            n_times: 30,
            n_subjects: 400,
            tau: 4,
            feature_sd: 4.0,
            coef_sd: 7.0,
            zero_feature_rows: (1..=150).collect(),
            zero_lag_columns: vec![2, 5],
            structure: CorrelationStructure::Ar1,
            alpha: 0.64,
            residual_sd: 1.0,
            seed: 0,
            coefficient_seed: None,
        }
    }
}

impl SimConfig {
    /// Default protocol shrunk to `d` features, `T` times and `m` subjects.
    /// The first `ceil(3d / 4)` feature rows are zeroed (150 of 200, 38 of 50).
    pub fn scaled(n_features: usize, n_times: usize, n_subjects: usize) -> Self {
        Self {
            n_features,
            n_times,
            n_subjects,
            zero_feature_rows: (1..=(3 * n_features).div_ceil(4)).collect(),
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidConfig(msg));
        if self.n_features == 0 || self.n_subjects == 0 {
            return bad("need at least one feature and one subject".into());
        }
        if self.n_times < self.tau + 2 {
            return bad(format!("T={} too short for tau={}", self.n_times, self.tau));
        }
        if let Some(r) = self.zero_feature_rows.iter().find(|&&r| r == 0 || r > self.n_features) {
            return bad(format!("zero feature row {r} outside [1, {}]", self.n_features));
        }
        if let Some(c) = self.zero_lag_columns.iter().find(|&&c| c == 0 || c > self.tau + 1) {
            return bad(format!("zero lag column {c} outside [1, {}]", self.tau + 1));
        }
        if !(self.residual_sd > 0.0 && self.residual_sd.is_finite()) {
            return bad("residual_sd must be positive".into());
        }
        if !(self.feature_sd >= 0.0 && self.coef_sd >= 0.0) {
            return bad("standard deviations must be nonnegative".into());
        }
        Ok(())
    }

    fn stream(&self, index: u64) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(index);
        rng
    }
}

/// A generated dataset together with the coefficients that produced it.
#[derive(Debug, Clone, PartialEq)]
pub struct Simulated {
    pub dataset: LongitudinalDataset,
    pub u: Array2<f64>,
    pub v: Array2<f64>,
    pub config: SimConfig,
    pub family: Family,
}

#[derive(Serialize)]
struct Truth<'a> {
    family: Family,
    shape: [usize; 2],
    u: Vec<f64>,
    v: Vec<f64>,
    structure: CorrelationStructure,
    alpha: f64,
    seed: u64,
    config: &'a SimConfig,
}

impl Simulated {
    pub fn w(&self) -> Array2<f64> {
        &self.u + &self.v
    }

    /// Sidecar JSON with the true `U`, `V` (row-major), `alpha`, config and seed.
    pub fn truth_json(&self) -> Result<String> {
        let truth = Truth {
            family: self.family,
            shape: [self.u.nrows(), self.u.ncols()],
            u: self.u.iter().copied().collect(),
            v: self.v.iter().copied().collect(),
            structure: self.config.structure,
            alpha: self.config.alpha,
            seed: self.config.seed,
            config: &self.config,
        };
        Ok(serde_json::to_string_pretty(&truth)?)
    }
}

fn normal(rng: &mut ChaCha8Rng, sd: f64) -> f64 {
    sd * rng.sample::<f64, _>(StandardNormal)
}

fn coefficients(cfg: &SimConfig) -> (Array2<f64>, Array2<f64>) {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.coefficient_seed.unwrap_or(cfg.seed));
    rng.set_stream(0);
    let shape = (cfg.n_features, cfg.tau + 1);
    let mut u = Array2::from_shape_simple_fn(shape, || normal(&mut rng, cfg.coef_sd));
    let mut v = Array2::from_shape_simple_fn(shape, || normal(&mut rng, cfg.coef_sd));
    for &r in &cfg.zero_feature_rows {
        u.row_mut(r - 1).fill(0.0);
    }
    for &c in &cfg.zero_lag_columns {
        v.column_mut(c - 1).fill(0.0);
    }
    (u, v)
}

/// Symmetric square root of `R(alpha)` for `T` time points.
fn residual_factor(cfg: &SimConfig) -> Result<Array2<f64>> {
    let r = build_r(cfg.structure, cfg.alpha, cfg.n_times)?;
    let eig = SymmetricEigen::new(to_nalgebra(&r));
    let sqrt_vals = eig.eigenvalues.map(|l| l.max(0.0).sqrt());
    let root = &eig.eigenvectors * nalgebra::DMatrix::from_diagonal(&sqrt_vals) * eig.eigenvectors.transpose();
    Ok(from_nalgebra(&root))
}

/// Outcome `y_t = sum_j x_{t-j} . w_j + s_t`; lags before the first time point
/// are dropped.
fn regression_subject(
    cfg: &SimConfig,
    w: &Array2<f64>,
    factor: &Array2<f64>,
    rng: &mut ChaCha8Rng,
) -> (Array2<f64>, Array1<f64>) {
    let (d, big_t) = (cfg.n_features, cfg.n_times);
    let x = Array2::from_shape_simple_fn((d, big_t), || normal(rng, cfg.feature_sd));
    let z = Array1::from_shape_simple_fn(big_t, || normal(rng, 1.0));
    let s = factor.dot(&z) * cfg.residual_sd;
    let y = Array1::from_shape_fn(big_t, |t| {
        let signal: f64 = (0..=cfg.tau.min(t)).map(|j| x.column(t - j).dot(&w.column(j))).sum();
        signal + s[t]
    });
    (x, y)
}

fn generate(cfg: &SimConfig, family: Family) -> Result<Simulated> {
    cfg.validate()?;
    if family == Family::Poisson {
        return Err(Error::InvalidConfig("poisson outcomes are not simulated".into()));
    }
    let (u, v) = coefficients(cfg);
    let w = &u + &v;
    let factor = residual_factor(cfg)?;
    let subjects: Vec<SubjectSeries> = (0..cfg.n_subjects)
        .into_par_iter()
        .map(|i| {
            let mut rng = cfg.stream(i as u64 + 1);
            let (features, y) = regression_subject(cfg, &w, &factor, &mut rng);
            let outcomes = match family {
                Family::Bernoulli => y.mapv(|eta| {
                    let mu = Family::Bernoulli.mean_scalar(eta);
                    if rng.random::<f64>() < mu { 1.0 } else { 0.0 }
                }),
                _ => y,
            };
            SubjectSeries {
                id: (i + 1).to_string(),
                start_time: 1,
                features,
                outcomes,
            }
        })
        .collect();
    let names = (1..=cfg.n_features).map(|k| format!("x{k}")).collect();
    Ok(Simulated {
        dataset: LongitudinalDataset::new(subjects, names)?,
        u,
        v,
        config: cfg.clone(),
        family,
    })
}

/// Gaussian outcomes with residual covariance `residual_sd^2 R(alpha)`.
pub fn generate_regression(cfg: &SimConfig) -> Result<Simulated> {
    generate(cfg, Family::Gaussian)
}

/// Binary outcomes `Bernoulli(logistic(y))` where `y` is the regression
/// outcome including its noise.
pub fn generate_classification(cfg: &SimConfig) -> Result<Simulated> {
    generate(cfg, Family::Bernoulli)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::alternation::{predict, FitConfig, FitResult, FitStatus};
    use crate::correlation::WorkingCorrelation;
    use crate::dataset::build_lagged;
    use crate::penalty::CoefficientPair;

    fn small() -> SimConfig {
        SimConfig {
            seed: 11,
            ..SimConfig::scaled(8, 10, 20)
        }
    }

    #[test]
    fn defaults_follow_protocol() {
        let c = SimConfig::default();
        assert_eq!((c.n_features, c.n_times, c.n_subjects, c.tau), (200, 30, 400, 4));
        assert_eq!(c.zero_feature_rows, (1..=150).collect::<Vec<_>>());
        assert_eq!(c.zero_lag_columns, vec![2, 5]);
        assert_eq!((c.feature_sd, c.coef_sd, c.alpha), (4.0, 7.0, 0.64));
        c.validate().unwrap();
    }

    #[test]
    fn invalid_configs() {
        let mut c = small();
        c.zero_lag_columns = vec![6];
        assert!(c.validate().is_err());
        let mut c = small();
        c.zero_feature_rows = vec![0];
        assert!(c.validate().is_err());
        let mut c = small();
        c.residual_sd = 0.0;
        assert!(c.validate().is_err());
    }

    #[test]
    fn deterministic_and_masked() {
        let a = generate_regression(&small()).unwrap();
        let b = generate_regression(&small()).unwrap();
        assert_eq!(a, b);
        for r in 0..6 {
            // ceil(3 * 8 / 4) = 6 zero rows
            assert!(a.u.row(r).iter().all(|&x| x == 0.0));
        }
        for c in [1, 4] {
            assert!(a.v.column(c).iter().all(|&x| x == 0.0));
        }
        let mut fixed = small();
        fixed.coefficient_seed = Some(11);
        fixed.seed = 99;
        let c = generate_regression(&fixed).unwrap();
        assert_eq!((&c.u, &c.v), (&a.u, &a.v));
        assert_ne!(c.dataset, a.dataset);
        let mut other = small();
        other.seed = 12;
        assert_ne!(generate_regression(&other).unwrap().dataset, a.dataset);
        let l1 = generate_classification(&small()).unwrap();
        assert_eq!(l1, generate_classification(&small()).unwrap());
        assert!(l1.dataset.subjects().iter().all(|s| s.outcomes.iter().all(|&y| y == 0.0 || y == 1.0)));
    }

    #[test]
    fn near_noiseless_outcome_is_reproduced_by_true_w() {
        let mut cfg = small();
        cfg.residual_sd = 1e-12;
        let sim = generate_regression(&cfg).unwrap();
        let design = build_lagged(&sim.dataset, cfg.tau, false).unwrap();
        let truth = FitResult {
            coefficients: CoefficientPair { u: sim.u.clone(), v: sim.v.clone(), lambda1: 0.0, lambda2: 0.0 },
            working: WorkingCorrelation::identity(design.n_examples()),
            family: Family::Gaussian,
            structure: CorrelationStructure::Independent,
            tau: cfg.tau,
            include_lagged_outcome: false,
            outer_iterations: 0,
            trace: vec![],
            inner_traces: vec![],
            status: FitStatus::Converged,
            config: FitConfig::default(),
            seed: None,
            feature_names: None,
        };
        let pred = predict(&truth, &design).unwrap();
        for (p, y) in pred.iter().zip(design.outcomes()) {
            assert!((p - y).abs() < 1e-8 * (1.0 + y.abs()), "{p} vs {y}");
        }
    }

    #[test]
    fn ar1_residual_lag_one_autocorrelation() {
        // zero signal leaves only residuals
        let cfg = SimConfig {
            coef_sd: 0.0,
            seed: 5,
            ..SimConfig::scaled(1, 30, 400)
        };
        let sim = generate_regression(&cfg).unwrap();
        let (mut num, mut den) = (0.0, 0.0);
        for s in sim.dataset.subjects() {
            let y = &s.outcomes;
            for t in 0..y.len() {
                den += y[t] * y[t];
                if t > 0 {
                    num += y[t] * y[t - 1];
                }
            }
        }
        let rho = num / den * 30.0 / 29.0;
        assert!((rho - 0.64).abs() < 0.05, "lag-1 autocorrelation {rho}");
    }

    #[test]
    fn outcome_variance_grows_with_noise() {
        let var = |sd: f64| {
            let cfg = SimConfig { residual_sd: sd, ..small() };
            let sim = generate_regression(&cfg).unwrap();
            let y: Vec<f64> = sim.dataset.subjects().iter().flat_map(|s| s.outcomes.to_vec()).collect();
            let mean = y.iter().sum::<f64>() / y.len() as f64;
            y.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / y.len() as f64
        };
        let (a, b, c) = (var(1.0), var(2.0), var(3.0));
        assert!(a < b && b < c, "{a} {b} {c}");
    }

    #[test]
    fn zero_eta_labels_are_fair_coins() {
        let cfg = SimConfig {
            coef_sd: 0.0,
            residual_sd: 1e-300,
            seed: 3,
            ..SimConfig::scaled(1, 100, 1000)
        };
        let sim = generate_classification(&cfg).unwrap();
        let labels: Vec<f64> = sim.dataset.subjects().iter().flat_map(|s| s.outcomes.to_vec()).collect();
        let mean = labels.iter().sum::<f64>() / labels.len() as f64;
        assert_eq!(labels.len(), 100_000);
        assert!((0.495..=0.505).contains(&mean), "{mean}");
    }

    #[test]
    fn poisson_not_simulated() {
        assert!(generate(&small(), Family::Poisson).is_err());
    }
}
