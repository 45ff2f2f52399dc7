//! Independent reference computations shared by the integration tests.
#![allow(dead_code)]

use lgl::correlation::WorkingCorrelation;
use lgl::dataset::{vectorize, LaggedDesign};
use lgl::families::Family;
use lgl::fista::{lipschitz_upper, SmoothLoss};
use lgl::penalty::{penalty_value, prox_col_groups, prox_row_groups};
use nalgebra::{DMatrix, DVector};
use ndarray::{Array1, Array2, ArrayView2};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn normal_matrix(rng: &mut ChaCha8Rng, rows: usize, cols: usize, sd: f64) -> Array2<f64> {
    Array2::from_shape_simple_fn((rows, cols), || sd * rng.sample::<f64, _>(StandardNormal))
}

/// Random stacked design with outcomes drawn from `family` at a random `W`.
pub fn random_design(
    seed: u64,
    d: usize,
    tau: usize,
    m: usize,
    n: usize,
    family: Family,
) -> LaggedDesign {
    let mut r = rng(seed);
    let p = d * (tau + 1);
    let rows = normal_matrix(&mut r, m * n, p, 1.0);
    let w = normal_matrix(&mut r, d, tau + 1, 0.3);
    let eta = rows.dot(&vectorize(&w));
    let y = Array1::from_iter(eta.iter().map(|&e| match family {
        Family::Gaussian => e + r.sample::<f64, _>(StandardNormal),
        Family::Bernoulli => {
            if r.random::<f64>() < 1.0 / (1.0 + (-e).exp()) {
                1.0
            } else {
                0.0
            }
        }
        Family::Poisson => {
            // inverse-CDF draw, fine for the small means used here
            let mu = e.exp();
            let (mut k, mut p, mut cdf) = (0.0, (-mu).exp(), (-mu).exp());
            let u: f64 = r.random();
            while u > cdf && k < 200.0 {
                k += 1.0;
                p *= mu / k;
                cdf += p;
            }
            k
        }
    }));
    LaggedDesign::from_rows(rows, y, d, tau, n).unwrap()
}

/// Ordinary least squares fitted values through the normal equations.
pub fn ols_predictions(design: &LaggedDesign) -> Array1<f64> {
    let z = design.rows();
    let zm = DMatrix::from_fn(z.nrows(), z.ncols(), |i, j| z[[i, j]]);
    let y = DVector::from_iterator(z.nrows(), design.outcomes().iter().copied());
    let beta = (zm.transpose() * &zm).cholesky().unwrap().solve(&(zm.transpose() * y));
    let fitted = &zm * beta;
    Array1::from_iter(fitted.iter().copied())
}

/// Central finite-difference gradient of the monitored loss with respect to `W`.
pub fn fd_gradient(loss: &SmoothLoss<'_>, w: &Array2<f64>, h: f64) -> Array2<f64> {
    let mut g = Array2::zeros(w.dim());
    for idx in ndarray::indices(w.dim()) {
        let step = h * (1.0 + w[idx].abs());
        let mut plus = w.clone();
        plus[idx] += step;
        let mut minus = w.clone();
        minus[idx] -= step;
        g[idx] = (loss.value(&plus).unwrap() - loss.value(&minus).unwrap()) / (2.0 * step);
    }
    g
}

/// Plain proximal gradient with the fixed step `1 / L~`, from zero.
pub fn ista(
    design: &LaggedDesign,
    family: Family,
    working: &WorkingCorrelation,
    lambda1: f64,
    lambda2: f64,
    iterations: usize,
) -> (Array2<f64>, Array2<f64>, f64) {
    let loss = SmoothLoss::new(design, family, working).unwrap();
    let l = lipschitz_upper(design, family, working).unwrap();
    let shape = (design.n_features(), design.tau() + 1);
    let mut u = Array2::zeros(shape);
    let mut v = Array2::zeros(shape);
    for _ in 0..iterations {
        let (gu, gv) = lgl::fista::gradient(design, family, working, &u, &v).unwrap();
        u = prox_row_groups((&u - &(gu / l)).view(), lambda1 / l);
        v = prox_col_groups((&v - &(gv / l)).view(), lambda2 / l);
    }
    let f = loss.value(&(&u + &v)).unwrap() + penalty_value(u.view(), v.view(), lambda1, lambda2);
    (u, v, f)
}

/// Largest violation of the optimality condition of the row-group prox:
/// `x_r = p_r - theta x_r / ||x_r||` when `x_r != 0`, `||p_r|| <= theta` otherwise.
pub fn prox_rows_residual(p: ArrayView2<f64>, x: ArrayView2<f64>, theta: f64) -> f64 {
    let mut worst: f64 = 0.0;
    for (pr, xr) in p.rows().into_iter().zip(x.rows()) {
        let xn = xr.dot(&xr).sqrt();
        let r = if xn == 0.0 {
            (pr.dot(&pr).sqrt() - theta).max(0.0)
        } else {
            let res = &xr - &pr + &(&xr * (theta / xn));
            res.dot(&res).sqrt()
        };
        worst = worst.max(r);
    }
    worst
}
