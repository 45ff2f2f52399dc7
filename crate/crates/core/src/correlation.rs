//! Working correlation structures and their moment estimators.
//!
//! The subject covariance is `Sigma = A^{1/2} R(alpha) A^{1/2} / phi` with
//! `A = diag(var(mu_t))`. Note that `phi` divides: it is a precision-like
//! scale, estimated as `(N - p) / sum(gamma^2)`.

use std::fmt;
use std::str::FromStr;

use ndarray::{Array1, Array2, ArrayView1, Axis};
use serde::{Deserialize, Serialize};

use crate::dataset::LaggedDesign;
use crate::error::{Error, Result};
use crate::families::Family;
use crate::linalg::{cholesky_jittered, spd_inverse};

/// Smallest scale allowed, keeps `Sigma` invertible.
pub const PHI_FLOOR: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CorrelationStructure {
    Independent,
    Exchangeable,
    #[serde(rename = "tridiagonal")]
    TriDiagonal,
    Ar1,
}

impl CorrelationStructure {
    pub fn name(self) -> &'static str {
        match self {
            CorrelationStructure::Independent => "independent",
            CorrelationStructure::Exchangeable => "exchangeable",
            CorrelationStructure::TriDiagonal => "tridiagonal",
            CorrelationStructure::Ar1 => "ar1",
        }
    }

    /// Clip an estimated `alpha` into the valid region for size `n`.
    pub fn clip_alpha(self, alpha: f64, n: usize) -> f64 {
        match self {
            CorrelationStructure::Independent => 0.0,
            CorrelationStructure::Ar1 => alpha.clamp(-0.99, 0.99),
            CorrelationStructure::TriDiagonal => {
                let pd = 1.0 / (2.0 * (std::f64::consts::PI / (n as f64 + 1.0)).cos());
                let bound = 0.99f64.min(pd * (1.0 - 1e-6));
                alpha.clamp(-bound, bound)
            }
            CorrelationStructure::Exchangeable => {
                let lower = if n > 1 { -1.0 / (n as f64 - 1.0) + 1e-6 } else { -1.0 + 1e-6 };
                alpha.clamp(lower, 1.0 - 1e-6)
            }
        }
    }
}

impl fmt::Display for CorrelationStructure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for CorrelationStructure {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "independent" => Ok(CorrelationStructure::Independent),
            "exchangeable" => Ok(CorrelationStructure::Exchangeable),
            "tridiagonal" => Ok(CorrelationStructure::TriDiagonal),
            "ar1" => Ok(CorrelationStructure::Ar1),
            _ => Err(Error::UnknownName {
                kind: "structure",
                value: s.to_string(),
            }),
        }
    }
}

/// `n x n` correlation matrix `R(alpha)`.
pub fn build_r(structure: CorrelationStructure, alpha: f64, n: usize) -> Result<Array2<f64>> {
    use CorrelationStructure::*;
    if structure != Independent && !(alpha.abs() < 1.0) {
        return Err(Error::InvalidConfig(format!("|alpha| must be < 1, got {alpha}")));
    }
    if structure == Exchangeable && n > 1 && alpha <= -1.0 / (n as f64 - 1.0) {
        return Err(Error::InvalidConfig(format!(
            "exchangeable alpha {alpha} must exceed -1/(n-1) for n={n}"
        )));
    }
    let r = Array2::from_shape_fn((n, n), |(j, k)| {
        let lag = j.abs_diff(k);
        match (structure, lag) {
            (_, 0) => 1.0,
            (Independent, _) => 0.0,
            (Exchangeable, _) => alpha,
            (TriDiagonal, 1) => alpha,
            (TriDiagonal, _) => 0.0,
            (Ar1, l) => alpha.powi(l as i32),
        }
    });
    cholesky_jittered(&r)?;
    Ok(r)
}

/// A realized working correlation for `n` examples per subject.
#[derive(Debug, Clone, PartialEq)]
pub struct WorkingCorrelation {
    pub structure: CorrelationStructure,
    pub alpha: f64,
    pub phi: f64,
    pub r: Array2<f64>,
    pub r_inv: Array2<f64>,
}

impl WorkingCorrelation {
    pub fn new(structure: CorrelationStructure, alpha: f64, phi: f64, n: usize) -> Result<Self> {
        if !(phi > 0.0) || !phi.is_finite() {
            return Err(Error::InvalidConfig(format!("phi must be positive, got {phi}")));
        }
        let alpha = if structure == CorrelationStructure::Independent { 0.0 } else { alpha };
        let r = build_r(structure, alpha, n)?;
        let r_inv = spd_inverse(&r)?;
        Ok(Self {
            structure,
            alpha,
            phi: phi.max(PHI_FLOOR),
            r,
            r_inv,
        })
    }

    /// `R = I`, `phi = 1`.
    pub fn identity(n: usize) -> Self {
        Self {
            structure: CorrelationStructure::Independent,
            alpha: 0.0,
            phi: 1.0,
            r: Array2::eye(n),
            r_inv: Array2::eye(n),
        }
    }

    pub fn n(&self) -> usize {
        self.r.nrows()
    }

    /// True when `R` is the identity matrix.
    pub fn is_identity(&self) -> bool {
        self.structure == CorrelationStructure::Independent || self.alpha == 0.0
    }
}

/// Pearson residuals, one row per subject.
#[derive(Debug, Clone, PartialEq)]
pub struct PearsonResiduals {
    pub values: Array2<f64>,
}

impl PearsonResiduals {
    pub fn n_subjects(&self) -> usize {
        self.values.nrows()
    }

    pub fn n_examples(&self) -> usize {
        self.values.ncols()
    }

    pub fn sum_of_squares(&self) -> f64 {
        self.values.iter().map(|g| g * g).sum()
    }
}

/// `gamma_t = (y_t - mu_t) / sqrt(var(mu_t) / phi)` at coefficients `w`.
pub fn pearson_residuals(
    design: &LaggedDesign,
    w: &Array2<f64>,
    family: Family,
    phi: f64,
) -> Result<PearsonResiduals> {
    let eta = design.linear_predictor(w)?;
    let mu = family.mean(eta.view());
    let y = design.outcomes();
    let n = design.n_examples();
    let mut values = Array2::zeros((design.n_subjects(), n));
    for (k, g) in values.iter_mut().enumerate() {
        if !mu[k].is_finite() {
            return Err(Error::NonFinite(format!("fitted mean at example {k}")));
        }
        let var = family
            .variance_scalar(mu[k])
            .ok()
            .map(|v| v / phi)
            .filter(|v| *v > 0.0 && v.is_finite())
            .ok_or(Error::DegenerateVariance {
                subject: k / n,
                index: k % n,
            })?;
        *g = (y[k] - mu[k]) / var.sqrt();
    }
    Ok(PearsonResiduals { values })
}

/// `phi = (N - p) / sum gamma^2`.
pub fn estimate_phi(gamma: &PearsonResiduals, n_total: usize, n_params: usize) -> Result<f64> {
    if n_total <= n_params {
        return Err(Error::OverParameterized {
            examples: n_total,
            params: n_params,
        });
    }
    let ss = gamma.sum_of_squares();
    if !(ss > 0.0) {
        return Err(Error::ZeroResiduals);
    }
    Ok(((n_total - n_params) as f64 / ss).max(PHI_FLOOR))
}

/// Unstructured moment matrix `r_jk = sum_i gamma_ij gamma_ik / (N - p)`.
pub fn moment_matrix(gamma: &PearsonResiduals, n_total: usize, n_params: usize) -> Result<Array2<f64>> {
    if n_total <= n_params {
        return Err(Error::OverParameterized {
            examples: n_total,
            params: n_params,
        });
    }
    Ok(gamma.values.t().dot(&gamma.values) / (n_total - n_params) as f64)
}

/// Structure-specific `alpha` from the moment matrix.
///
/// The moment matrix is brought to correlation scale by `n * phi` (its mean
/// diagonal is `1 / (n phi)`), then the relevant band is averaged:
/// all off-diagonals for exchangeable, the first off-diagonal for
/// tri-diagonal and AR(1). The result is clipped into the valid region.
pub fn estimate_alpha(
    gamma: &PearsonResiduals,
    structure: CorrelationStructure,
    n_total: usize,
    n_params: usize,
    phi: f64,
) -> Result<f64> {
    let n = gamma.n_examples();
    if structure == CorrelationStructure::Independent {
        return Ok(0.0);
    }
    if n < 2 {
        return Err(Error::InvalidConfig("alpha estimation needs n >= 2".into()));
    }
    let corr = moment_matrix(gamma, n_total, n_params)? * (n as f64 * phi);
    let band = |max_lag: usize| {
        let mut sum = 0.0;
        let mut count = 0usize;
        for j in 0..n {
            for k in 0..n {
                let lag = j.abs_diff(k);
                if lag >= 1 && lag <= max_lag {
                    sum += corr[[j, k]];
                    count += 1;
                }
            }
        }
        sum / count as f64
    };
    let raw = match structure {
        CorrelationStructure::Exchangeable => band(n),
        _ => band(1),
    };
    if !raw.is_finite() {
        return Err(Error::NonFinite("alpha estimate".into()));
    }
    Ok(structure.clip_alpha(raw, n))
}

/// `Sigma = A^{1/2} R A^{1/2} / phi` and its inverse.
pub fn build_sigma(
    family: Family,
    mu: ArrayView1<f64>,
    r: &Array2<f64>,
    phi: f64,
) -> Result<(Array2<f64>, Array2<f64>)> {
    if r.nrows() != mu.len() || r.ncols() != mu.len() {
        return Err(Error::ShapeMismatch(format!("R is {:?} for {} means", r.dim(), mu.len())));
    }
    let sd: Array1<f64> = family.variance(mu)?.mapv(f64::sqrt);
    let phi = phi.max(PHI_FLOOR);
    let col = sd.view().insert_axis(Axis(1));
    let row = sd.view().insert_axis(Axis(0));
    let sigma = &(&col * r) * &row / phi;
    let inv = spd_inverse(&sigma)?;
    Ok((sigma, inv))
}
