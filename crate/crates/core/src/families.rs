//! Exponential families with canonical links.

use std::fmt;
use std::str::FromStr;

use ndarray::{Array1, ArrayView1, Zip};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Linear predictors are clamped to this magnitude before exponentiation.
/// Outside the clamp the cumulant continues linearly, so its derivative (the
/// mean) saturates.
pub const ETA_CLAMP: f64 = 30.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Family {
    Gaussian,
    Bernoulli,
    Poisson,
}

impl Family {
    pub fn name(self) -> &'static str {
        match self {
            Family::Gaussian => "gaussian",
            Family::Bernoulli => "bernoulli",
            Family::Poisson => "poisson",
        }
    }

    /// Inverse canonical link `g^{-1}(eta)`.
    pub fn mean_scalar(self, eta: f64) -> f64 {
        match self {
            Family::Gaussian => eta,
            Family::Bernoulli => logistic(eta.clamp(-ETA_CLAMP, ETA_CLAMP)),
            Family::Poisson => eta.clamp(-ETA_CLAMP, ETA_CLAMP).exp(),
        }
    }

    pub fn mean(self, eta: ArrayView1<f64>) -> Array1<f64> {
        eta.mapv(|e| self.mean_scalar(e))
    }

    /// Variance function `var(mu)`.
    pub fn variance_scalar(self, mu: f64) -> Result<f64> {
        match self {
            Family::Gaussian => Ok(1.0),
            Family::Bernoulli if mu > 0.0 && mu < 1.0 => Ok(mu * (1.0 - mu)),
            Family::Poisson if mu > 0.0 => Ok(mu),
            _ => Err(Error::VarianceDomain { family: self.name(), mu }),
        }
    }

    pub fn variance(self, mu: ArrayView1<f64>) -> Result<Array1<f64>> {
        mu.iter().map(|&m| self.variance_scalar(m)).collect()
    }

    /// Cumulant `b(eta)`, with `b'(eta) = mean(eta)`.
    pub fn cumulant(self, eta: f64) -> f64 {
        match self {
            Family::Gaussian => 0.5 * eta * eta,
            Family::Bernoulli | Family::Poisson => {
                let c = eta.clamp(-ETA_CLAMP, ETA_CLAMP);
                let inner = match self {
                    Family::Bernoulli => softplus(c),
                    _ => c.exp(),
                };
                inner + self.mean_scalar(c) * (eta - c)
            }
        }
    }

    /// `y * g(y) - b(g(y))`, the saturated-model term, with `0 log 0 = 0`.
    pub(crate) fn saturated(self, y: f64) -> Result<f64> {
        match self {
            Family::Gaussian => Ok(0.5 * y * y),
            Family::Bernoulli if (0.0..=1.0).contains(&y) => Ok(xlogx(y) + xlogx(1.0 - y)),
            Family::Poisson if y >= 0.0 => Ok(xlogx(y) - y),
            _ => Err(Error::InvalidData(format!("outcome {y} outside the {} support", self.name()))),
        }
    }

    /// `2 (y (eta~ - eta) - b(eta~) + b(eta))`, one observation, unit scale.
    pub fn unit_deviance(self, y: f64, eta: f64) -> Result<f64> {
        let d = 2.0 * (self.saturated(y)? - y * eta + self.cumulant(eta));
        Ok(d.max(0.0))
    }
}

impl fmt::Display for Family {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Family {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "gaussian" => Ok(Family::Gaussian),
            "bernoulli" => Ok(Family::Bernoulli),
            "poisson" => Ok(Family::Poisson),
            _ => Err(Error::UnknownName {
                kind: "family",
                value: s.to_string(),
            }),
        }
    }
}

fn logistic(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

fn softplus(x: f64) -> f64 {
    if x > 0.0 {
        x + (-x).exp().ln_1p()
    } else {
        x.exp().ln_1p()
    }
}

fn xlogx(x: f64) -> f64 {
    if x == 0.0 {
        0.0
    } else {
        x * x.ln()
    }
}

pub fn mean(family: Family, eta: ArrayView1<f64>) -> Array1<f64> {
    family.mean(eta)
}

pub fn variance(family: Family, mu: ArrayView1<f64>) -> Result<Array1<f64>> {
    family.variance(mu)
}

/// Deviance under independence, `sum_t unit_deviance / phi`.
pub fn independence_deviance(family: Family, y: ArrayView1<f64>, eta: ArrayView1<f64>, phi: f64) -> Result<f64> {
    if y.len() != eta.len() {
        return Err(Error::ShapeMismatch(format!("{} outcomes vs {} predictors", y.len(), eta.len())));
    }
    let mut total = 0.0;
    let mut err = None;
    Zip::from(&y).and(&eta).for_each(|&y, &e| match family.unit_deviance(y, e) {
        Ok(d) => total += d,
        Err(e) => err = err.take().or(Some(e)),
    });
    match err {
        Some(e) => Err(e),
        None => Ok(total / phi),
    }
}
