use nalgebra::{Cholesky, DMatrix, Dyn};
use ndarray::Array2;

use crate::error::{Error, Result};

pub(crate) fn to_nalgebra(a: &Array2<f64>) -> DMatrix<f64> {
    DMatrix::from_fn(a.nrows(), a.ncols(), |i, j| a[[i, j]])
}

pub(crate) fn from_nalgebra(a: &DMatrix<f64>) -> Array2<f64> {
    Array2::from_shape_fn((a.nrows(), a.ncols()), |(i, j)| a[(i, j)])
}

/// Cholesky factor of a symmetric matrix. On failure retries with `eps * I`
/// added, `eps` running 1e-8, 1e-7, ..., 1e-4.
pub(crate) fn cholesky_jittered(a: &Array2<f64>) -> Result<Cholesky<f64, Dyn>> {
    let base = to_nalgebra(a);
    if let Some(c) = Cholesky::new(base.clone()) {
        return Ok(c);
    }
    let n = base.nrows();
    let mut eps = 1e-8;
    while eps <= 1e-4 * (1.0 + 1e-12) {
        if let Some(c) = Cholesky::new(&base + DMatrix::identity(n, n) * eps) {
            return Ok(c);
        }
        eps *= 10.0;
    }
    Err(Error::NotPositiveDefinite(format!(
        "{n}x{n} matrix failed Cholesky with jitter up to 1e-4"
    )))
}

/// Inverse of a symmetric positive definite matrix through its Cholesky factor.
pub(crate) fn spd_inverse(a: &Array2<f64>) -> Result<Array2<f64>> {
    let inv = from_nalgebra(&cholesky_jittered(a)?.inverse());
    // symmetrize rounding noise
    Ok(Array2::from_shape_fn(inv.dim(), |(i, j)| 0.5 * (inv[[i, j]] + inv[[j, i]])))
}

pub(crate) fn frobenius(a: &Array2<f64>) -> f64 {
    a.iter().map(|x| x * x).sum::<f64>().sqrt()
}
