//! Row- and column-grouped `l_{1,2}` norms and their proximal maps.
//!
//! Rows of `U` are features, columns of `V` are lags. Killed groups are
//! stored as exact zeros.

use ndarray::{Array2, ArrayView2, Axis};
use serde::{Deserialize, Serialize};

/// The additive decomposition `W = U + V` with its penalty weights.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoefficientPair {
    pub u: Array2<f64>,
    pub v: Array2<f64>,
    pub lambda1: f64,
    pub lambda2: f64,
}

impl CoefficientPair {
    pub fn zeros(rows: usize, cols: usize, lambda1: f64, lambda2: f64) -> Self {
        Self {
            u: Array2::zeros((rows, cols)),
            v: Array2::zeros((rows, cols)),
            lambda1,
            lambda2,
        }
    }

    pub fn w(&self) -> Array2<f64> {
        &self.u + &self.v
    }

    /// `lambda1 ||U||_{1,2} + lambda2 ||V^T||_{1,2}`.
    pub fn penalty(&self) -> f64 {
        penalty_value(self.u.view(), self.v.view(), self.lambda1, self.lambda2)
    }
}

pub fn penalty_value(u: ArrayView2<f64>, v: ArrayView2<f64>, lambda1: f64, lambda2: f64) -> f64 {
    lambda1 * norm_12_rows(u) + lambda2 * norm_12_cols(v)
}

/// Sum of row Euclidean norms.
pub fn norm_12_rows(m: ArrayView2<f64>) -> f64 {
    m.rows().into_iter().map(|r| r.dot(&r).sqrt()).sum()
}

/// Sum of column Euclidean norms, i.e. `||M^T||_{1,2}`.
pub fn norm_12_cols(m: ArrayView2<f64>) -> f64 {
    norm_12_rows(m.t())
}

/// Minimizer of `1/2 ||M - P||_F^2 + theta ||M||_{1,2}`: every row is scaled by
/// `max(0, 1 - theta / ||p_row||)`. Rows with `||p_row|| <= theta` become exact zeros.
pub fn prox_row_groups(p: ArrayView2<f64>, theta: f64) -> Array2<f64> {
    debug_assert!(theta >= 0.0);
    let mut out = p.to_owned();
    for mut row in out.axis_iter_mut(Axis(0)) {
        let norm = row.dot(&row).sqrt();
        if norm <= theta || norm == 0.0 {
            row.fill(0.0);
        } else {
            row *= 1.0 - theta / norm;
        }
    }
    out
}

/// Column-group version of [`prox_row_groups`].
pub fn prox_col_groups(p: ArrayView2<f64>, theta: f64) -> Array2<f64> {
    prox_row_groups(p.t(), theta).reversed_axes()
}
