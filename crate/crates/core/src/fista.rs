//! Accelerated proximal gradient for fixed working correlation.
//!
//! The smooth part of the objective depends on `U` and `V` only through
//! `W = U + V`, so both partial gradients are the same matrix: the negated
//! GEE estimating function `-reshape(sum_i D_i^T Sigma_i^{-1} s_i)`.
//!
//! What is monitored as the objective depends on the model:
//!
//! * Gaussian: `1/2 sum_i s_i^T Sigma_i^{-1} s_i`, exact.
//! * Bernoulli/Poisson with `R = I`: half the independence deviance at
//!   dispersion `1/phi`, exact.
//! * Bernoulli/Poisson with `R != I`: the estimating function is not the
//!   gradient of any scalar, so the trace reports the Pearson statistic
//!   `1/2 sum_i s_i^T Sigma_i^{-1} s_i` and backtracking uses the same statistic
//!   with `Sigma` frozen at the extrapolated point (whose gradient there is the
//!   estimating function).

use ndarray::{Array1, Array2, ArrayView1, ArrayView2, Zip};
use serde::{Deserialize, Serialize};

use crate::correlation::WorkingCorrelation;
use crate::dataset::{unvectorize, LaggedDesign};
use crate::error::{Error, Result};
use crate::families::Family;
use crate::linalg::frobenius;
use crate::penalty::{penalty_value, prox_col_groups, prox_row_groups};

const MAX_DOUBLINGS: usize = 60;
const POWER_STEPS: usize = 200;
const POWER_TOL: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum StepMode {
    /// `L_k = L~` for every iteration.
    Fixed,
    /// Start from `L~`, multiply by the growth factor until the quadratic
    /// model majorizes the loss at the candidate.
    Backtracking,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct InnerConfig {
    pub lambda1: f64,
    pub lambda2: f64,
    pub max_iterations: usize,
    pub tolerance: f64,
    pub step_mode: StepMode,
    pub growth: f64,
    /// Reset the momentum whenever the step direction opposes the momentum
    /// direction (gradient restart scheme).
    pub restart: bool,
}

impl Default for InnerConfig {
    fn default() -> Self {
        Self {
            lambda1: 0.0,
            lambda2: 0.0,
            max_iterations: 2000,
            tolerance: 1e-6,
            step_mode: StepMode::Backtracking,
            growth: 2.0,
            restart: true,
        }
    }
}

impl InnerConfig {
    pub fn with_lambdas(lambda1: f64, lambda2: f64) -> Self {
        Self {
            lambda1,
            lambda2,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.lambda1 >= 0.0 && self.lambda2 >= 0.0) {
            return Err(Error::InvalidConfig("penalty weights must be nonnegative".into()));
        }
        if !(self.tolerance > 0.0) {
            return Err(Error::InvalidConfig("tolerance must be positive".into()));
        }
        if !(self.growth > 1.0) {
            return Err(Error::InvalidConfig("backtracking growth factor must exceed 1".into()));
        }
        if self.max_iterations == 0 {
            return Err(Error::InvalidConfig("max_iterations must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum LossKind {
    Quadratic,
    Deviance,
    Quasi,
}

/// Smooth part of the objective for a fixed working correlation.
#[derive(Debug, Clone)]
pub struct SmoothLoss<'a> {
    design: &'a LaggedDesign,
    family: Family,
    working: &'a WorkingCorrelation,
    kind: LossKind,
    saturated: f64,
}

/// Loss value, gradient and (for the quasi case) frozen standard deviations at
/// the point the quadratic model is built around.
#[derive(Debug, Clone)]
pub struct Anchor {
    pub value: f64,
    pub gradient: Array2<f64>,
    frozen_sd: Option<Array1<f64>>,
}

impl<'a> SmoothLoss<'a> {
    pub fn new(design: &'a LaggedDesign, family: Family, working: &'a WorkingCorrelation) -> Result<Self> {
        if working.n() != design.n_examples() {
            return Err(Error::ShapeMismatch(format!(
                "working correlation is {}x{}, design has {} examples per subject",
                working.n(),
                working.n(),
                design.n_examples()
            )));
        }
        let kind = match (family, working.is_identity()) {
            (Family::Gaussian, _) => LossKind::Quadratic,
            (_, true) => LossKind::Deviance,
            (_, false) => LossKind::Quasi,
        };
        let saturated = if kind == LossKind::Deviance {
            // sum of y g(y) - b(g(y)); constant in W, keeps the deviance >= 0
            let mut total = 0.0;
            for &y in design.outcomes() {
                total += family.saturated(y)?;
            }
            total
        } else {
            0.0
        };
        Ok(Self {
            design,
            family,
            working,
            kind,
            saturated,
        })
    }

    /// Whether the monitored value is a true loss whose gradient is the one returned by [`Self::anchor`].
    pub fn is_exact(&self) -> bool {
        self.kind != LossKind::Quasi
    }

    pub fn design(&self) -> &LaggedDesign {
        self.design
    }

    fn shape(&self) -> (usize, usize) {
        (self.design.n_features(), self.design.tau() + 1)
    }

    fn residuals(&self, w: &Array2<f64>) -> Result<(Array1<f64>, Array1<f64>)> {
        let eta = self.design.linear_predictor(w)?;
        let mu = self.family.mean(eta.view());
        if mu.iter().any(|m| !m.is_finite()) {
            return Err(Error::NonFinite("fitted mean".into()));
        }
        let s = &self.design.outcomes() - &mu;
        Ok((eta, s))
    }

    /// `S R^{-1}` with the stacked vector viewed as `m x n`.
    fn apply_rinv(&self, s: ArrayView1<f64>) -> Array1<f64> {
        if self.working.is_identity() {
            return s.to_owned();
        }
        let m = self.design.n_subjects();
        let n = self.design.n_examples();
        let mat = s.into_shape_with_order((m, n)).expect("stacked residuals");
        let out = mat.dot(&self.working.r_inv);
        Array1::from_iter(out)
    }

    fn quadratic_form(&self, scaled: &Array1<f64>) -> (f64, Array1<f64>) {
        let r = self.apply_rinv(scaled.view()) * self.working.phi;
        (0.5 * scaled.dot(&r), r)
    }

    fn standard_deviations(&self, eta: &Array1<f64>) -> Result<Array1<f64>> {
        let n = self.design.n_examples();
        let mut sd = Array1::zeros(eta.len());
        for (k, (sd, &e)) in sd.iter_mut().zip(eta).enumerate() {
            let v = self
                .family
                .variance_scalar(self.family.mean_scalar(e))
                .ok()
                .filter(|v| *v > 0.0 && v.is_finite())
                .ok_or(Error::DegenerateVariance {
                    subject: k / n,
                    index: k % n,
                })?;
            *sd = v.sqrt();
        }
        Ok(sd)
    }

    fn to_matrix(&self, v: ArrayView1<f64>) -> Array2<f64> {
        let (r, c) = self.shape();
        unvectorize(v, r, c)
    }

    /// Monitored loss at `W`.
    pub fn value(&self, w: &Array2<f64>) -> Result<f64> {
        let (eta, s) = self.residuals(w)?;
        match self.kind {
            LossKind::Quadratic => Ok(self.quadratic_form(&s).0),
            LossKind::Deviance => Ok(self.deviance_value(&eta)),
            LossKind::Quasi => {
                let sd = self.standard_deviations(&eta)?;
                Ok(self.quadratic_form(&(&s / &sd)).0)
            }
        }
    }

    fn deviance_value(&self, eta: &Array1<f64>) -> f64 {
        let mut total = self.saturated;
        Zip::from(eta).and(&self.design.outcomes()).for_each(|&e, &y| {
            total += self.family.cumulant(e) - y * e;
        });
        (self.working.phi * total).max(0.0)
    }

    /// Value and gradient with respect to `W` at `W`.
    pub fn anchor(&self, w: &Array2<f64>) -> Result<Anchor> {
        let (eta, s) = self.residuals(w)?;
        let (value, weighted, frozen_sd) = match self.kind {
            LossKind::Quadratic => {
                let (value, r) = self.quadratic_form(&s);
                (value, r, None)
            }
            LossKind::Deviance => (self.deviance_value(&eta), s * self.working.phi, None),
            LossKind::Quasi => {
                let sd = self.standard_deviations(&eta)?;
                let (value, r) = self.quadratic_form(&(&s / &sd));
                (value, r * &sd, Some(sd))
            }
        };
        let grad = self.design.rows().t().dot(&weighted).mapv(|g| -g);
        if grad.iter().any(|g| !g.is_finite()) {
            return Err(Error::NonFinite("gradient".into()));
        }
        Ok(Anchor {
            value,
            gradient: self.to_matrix(grad.view()),
            frozen_sd,
        })
    }

    /// Loss at `W` as seen by the quadratic model built at `anchor`. Equals
    /// [`Self::value`] for exact losses.
    pub fn anchored_value(&self, anchor: &Anchor, w: &Array2<f64>) -> Result<f64> {
        match &anchor.frozen_sd {
            None => self.value(w),
            Some(sd) => {
                let (_, s) = self.residuals(w)?;
                Ok(self.quadratic_form(&(&s / sd)).0)
            }
        }
    }

    /// Upper bound on the Lipschitz modulus of the joint `(U, V)` gradient:
    /// twice the largest eigenvalue of the `W`-space curvature at `W = 0`,
    /// found by power iteration.
    pub fn lipschitz_upper(&self) -> Result<f64> {
        let z = self.design.rows();
        if z.iter().all(|&x| x == 0.0) {
            return Err(Error::DegenerateDesign);
        }
        let a0 = self.family.variance_scalar(self.family.mean_scalar(0.0))?;
        let scale = self.working.phi * a0;
        let hv = |v: &Array1<f64>| -> Array1<f64> {
            let zv = z.dot(v);
            let r = self.apply_rinv(zv.view());
            z.t().dot(&r) * scale
        };
        let p = z.ncols();
        let mut v = Array1::from_elem(p, 1.0 / (p as f64).sqrt());
        let mut rho = 0.0;
        let mut residual = f64::INFINITY;
        for _ in 0..POWER_STEPS {
            let hvv = hv(&v);
            let new_rho = v.dot(&hvv);
            residual = (&hvv - &(&v * new_rho)).dot(&(&hvv - &(&v * new_rho))).sqrt();
            let norm = hvv.dot(&hvv).sqrt();
            if norm == 0.0 {
                break;
            }
            let converged = (new_rho - rho).abs() <= POWER_TOL * new_rho.abs();
            rho = new_rho;
            v = hvv / norm;
            if converged {
                break;
            }
        }
        if rho == 0.0 {
            return Err(Error::DegenerateDesign);
        }
        Ok((2.0 * (rho + residual)).max(1e-8))
    }
}

/// Partial gradients with respect to `U` and `V` at `(U~, V~)`. They coincide.
pub fn gradient(
    design: &LaggedDesign,
    family: Family,
    working: &WorkingCorrelation,
    u: &Array2<f64>,
    v: &Array2<f64>,
) -> Result<(Array2<f64>, Array2<f64>)> {
    let loss = SmoothLoss::new(design, family, working)?;
    let g = loss.anchor(&(u + v))?.gradient;
    Ok((g.clone(), g))
}

pub fn lipschitz_upper(design: &LaggedDesign, family: Family, working: &WorkingCorrelation) -> Result<f64> {
    SmoothLoss::new(design, family, working)?.lipschitz_upper()
}

/// Smallest `(lambda1, lambda2)` that zero every row of `U` / column of `V` at
/// the first proximal step from zero, under `R = I`, `phi = 1`.
pub fn lambda_max(design: &LaggedDesign, family: Family) -> Result<(f64, f64)> {
    let working = WorkingCorrelation::identity(design.n_examples());
    let loss = SmoothLoss::new(design, family, &working)?;
    let g = loss.anchor(&Array2::zeros(loss.shape()))?.gradient;
    let row = g.rows().into_iter().map(|r| r.dot(&r).sqrt()).fold(0.0, f64::max);
    let col = g.columns().into_iter().map(|c| c.dot(&c).sqrt()).fold(0.0, f64::max);
    Ok((row, col))
}

#[derive(Debug, Clone, PartialEq)]
pub struct InnerState {
    pub u: Array2<f64>,
    pub v: Array2<f64>,
    pub u_prev: Array2<f64>,
    pub v_prev: Array2<f64>,
    pub u_tilde: Array2<f64>,
    pub v_tilde: Array2<f64>,
    pub t: f64,
    pub lipschitz: f64,
    pub k: usize,
}

impl InnerState {
    /// `U_0 = U~_1 = 0`, `V_0 = V~_1 = 0`, `t_1 = 1`.
    pub fn new(rows: usize, cols: usize, lipschitz: f64) -> Self {
        let z = Array2::zeros((rows, cols));
        Self {
            u: z.clone(),
            v: z.clone(),
            u_prev: z.clone(),
            v_prev: z.clone(),
            u_tilde: z.clone(),
            v_tilde: z,
            t: 1.0,
            lipschitz,
            k: 1,
        }
    }
}

/// `t_{k+1} = (1 + sqrt(1 + 4 t_k^2)) / 2`.
pub fn next_momentum(t: f64) -> f64 {
    0.5 * (1.0 + (1.0 + 4.0 * t * t).sqrt())
}

/// One accelerated step at the state's current `L`: proximal updates of `U`
/// (row groups) and `V` (column groups) from the extrapolated point, then the
/// momentum update and the next extrapolation.
pub fn fista_step(state: &InnerState, grad_u: &Array2<f64>, grad_v: &Array2<f64>, config: &InnerConfig) -> InnerState {
    let l = state.lipschitz;
    let pu = &state.u_tilde - &(grad_u / l);
    let pv = &state.v_tilde - &(grad_v / l);
    let u = prox_row_groups(pu.view(), config.lambda1 / l);
    let v = prox_col_groups(pv.view(), config.lambda2 / l);
    let t_next = next_momentum(state.t);
    let beta = (state.t - 1.0) / t_next;
    let u_tilde = &u + &((&u - &state.u) * beta);
    let v_tilde = &v + &((&v - &state.v) * beta);
    InnerState {
        u_prev: state.u.clone(),
        v_prev: state.v.clone(),
        u,
        v,
        u_tilde,
        v_tilde,
        t: t_next,
        lipschitz: l,
        k: state.k + 1,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TraceEntry {
    pub iteration: usize,
    pub objective: f64,
    pub step: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct InnerResult {
    pub u: Array2<f64>,
    pub v: Array2<f64>,
    pub trace: Vec<TraceEntry>,
    pub converged: bool,
    pub initial_lipschitz: f64,
}

impl InnerResult {
    pub fn iterations(&self) -> usize {
        self.trace.len()
    }

    pub fn final_objective(&self) -> f64 {
        self.trace.last().map(|e| e.objective).unwrap_or(f64::NAN)
    }
}

/// Iterate from `U_0 = V_0 = 0` until the relative iterate change
/// `max(||dU||, ||dV||) / (1 + ||U|| + ||V||)` drops below the tolerance.
pub fn inner_solve(
    design: &LaggedDesign,
    family: Family,
    working: &WorkingCorrelation,
    config: &InnerConfig,
) -> Result<InnerResult> {
    inner_solve_from(design, family, working, config, None)
}

/// [`inner_solve`] started from `(U_0, V_0) = start` instead of zero.
pub fn inner_solve_from(
    design: &LaggedDesign,
    family: Family,
    working: &WorkingCorrelation,
    config: &InnerConfig,
    start: Option<(&Array2<f64>, &Array2<f64>)>,
) -> Result<InnerResult> {
    config.validate()?;
    let loss = SmoothLoss::new(design, family, working)?;
    let l0 = loss.lipschitz_upper()?;
    // no global Lipschitz constant for Poisson
    let mode = if family == Family::Poisson {
        StepMode::Backtracking
    } else {
        config.step_mode
    };
    let (rows, cols) = loss.shape();
    let mut state = InnerState::new(rows, cols, l0);
    if let Some((u0, v0)) = start {
        if u0.dim() != (rows, cols) || v0.dim() != (rows, cols) {
            return Err(Error::ShapeMismatch("warm start shape differs from the design".into()));
        }
        state.u = u0.clone();
        state.v = v0.clone();
        state.u_prev = u0.clone();
        state.v_prev = v0.clone();
        state.u_tilde = u0.clone();
        state.v_tilde = v0.clone();
    }
    let mut trace = Vec::new();
    let mut converged = false;
    for iteration in 1..=config.max_iterations {
        let w_tilde = &state.u_tilde + &state.v_tilde;
        let anchor = loss.anchor(&w_tilde)?;
        let g = &anchor.gradient;
        let mut doublings = 0;
        let (next, candidate_value) = loop {
            let cand = fista_step(&state, g, g, config);
            let w = &cand.u + &cand.v;
            let value = loss.anchored_value(&anchor, &w)?;
            if mode == StepMode::Fixed {
                break (cand, value);
            }
            let du = &cand.u - &state.u_tilde;
            let dv = &cand.v - &state.v_tilde;
            let model = anchor.value
                + (g * &(&du + &dv)).sum()
                + 0.5 * state.lipschitz * (du.iter().map(|x| x * x).sum::<f64>() + dv.iter().map(|x| x * x).sum::<f64>());
            if value <= model + 1e-12 * model.abs().max(1.0) {
                break (cand, value);
            }
            doublings += 1;
            if doublings > MAX_DOUBLINGS {
                return Err(Error::NoValidStep(MAX_DOUBLINGS));
            }
            state.lipschitz *= config.growth;
        };
        let (u_from, v_from) = (state.u_tilde.clone(), state.v_tilde.clone());
        state = next;
        if config.restart {
            let along = ((&u_from - &state.u) * (&state.u - &state.u_prev)).sum()
                + ((&v_from - &state.v) * (&state.v - &state.v_prev)).sum();
            if along > 0.0 {
                state.t = 1.0;
                state.u_tilde = state.u.clone();
                state.v_tilde = state.v.clone();
            }
        }
        let smooth = if loss.is_exact() {
            candidate_value
        } else {
            loss.value(&(&state.u + &state.v))?
        };
        let objective = smooth + penalty_value(state.u.view(), state.v.view(), config.lambda1, config.lambda2);
        if !objective.is_finite() {
            return Err(Error::NonFinite(format!("objective at iteration {iteration}")));
        }
        trace.push(TraceEntry {
            iteration,
            objective,
            step: state.lipschitz,
        });
        let change = frobenius(&(&state.u - &state.u_prev)).max(frobenius(&(&state.v - &state.v_prev)));
        let scale = 1.0 + frobenius(&state.u) + frobenius(&state.v);
        if change / scale < config.tolerance {
            converged = true;
            break;
        }
    }
    Ok(InnerResult {
        u: state.u,
        v: state.v,
        trace,
        converged,
        initial_lipschitz: l0,
    })
}

/// Full objective `loss(U + V) + penalties`.
pub fn objective(
    loss: &SmoothLoss<'_>,
    u: ArrayView2<f64>,
    v: ArrayView2<f64>,
    lambda1: f64,
    lambda2: f64,
) -> Result<f64> {
    Ok(loss.value(&(&u + &v))? + penalty_value(u, v, lambda1, lambda2))
}

/// Write a trace as CSV with header `iteration,objective,step`.
pub fn write_trace_csv<W: std::io::Write>(trace: &[TraceEntry], writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["iteration", "objective", "step"])?;
    for e in trace {
        w.write_record([e.iteration.to_string(), e.objective.to_string(), e.step.to_string()])?;
    }
    w.flush()?;
    Ok(())
}
