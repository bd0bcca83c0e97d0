//! Proximal gradient solver with backtracking for `min_x G(x) + λ₂‖x‖₁`,
//! where `G` is a strongly convex quadratic surrogate.

use crate::error::{check_dim, check_finite, Error, Result};
use crate::prox::{masked_l1_norm, shrink_masked, PenaltyMask};
use crate::surrogate::QuadraticModel;
use crate::ParamVector;

/// Steps shorter than this abort the backtracking loop.
pub const MIN_STEP: f64 = 1e-16;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SubproblemConfig {
    pub max_iter: usize,
    pub abstol: f64,
    /// Step length tried first at every outer iteration.
    pub step_init: f64,
    /// Backtracking shrink factor in `(0, 1)`.
    pub beta: f64,
}

impl Default for SubproblemConfig {
    fn default() -> Self {
        Self { max_iter: 100, abstol: 1e-5, step_init: 1.0, beta: 0.5 }
    }
}

impl SubproblemConfig {
    pub fn validate(&self) -> Result<()> {
        if self.max_iter == 0 {
            return Err(Error::InvalidParameter("subproblem max_iter must be >= 1".into()));
        }
        if !(self.abstol > 0.0) {
            return Err(Error::InvalidParameter("subproblem abstol must be > 0".into()));
        }
        if !(self.step_init > 0.0 && self.step_init.is_finite()) {
            return Err(Error::InvalidParameter("subproblem initial step must be > 0".into()));
        }
        if !(self.beta > 0.0 && self.beta < 1.0) {
            return Err(Error::InvalidParameter("backtracking factor must be in (0, 1)".into()));
        }
        Ok(())
    }

    /// Same settings with a single outer iteration.
    pub fn inexact(self) -> Self {
        Self { max_iter: 1, ..self }
    }
}

/// Result of a subproblem solve.
#[derive(Debug, Clone)]
pub struct LassoSolution {
    pub x: ParamVector,
    /// `G(x) + λ₂‖x‖₁` at the returned point.
    pub objective: f64,
    pub iterations: usize,
    /// Whether the `abstol` test fired before `max_iter` was reached.
    pub converged: bool,
    /// Step length accepted in the last outer iteration.
    pub last_step: f64,
}

/// Minimizes `model(x) + lambda2 · ‖x‖₁` (L1 on `mask` coordinates) from
/// `x_start` by proximal gradient steps.
///
/// Each outer iteration restarts the step at `config.step_init` and halves
/// it (by `config.beta`) until the quadratic upper-bound test passes. The
/// loop stops after `max_iter` iterations or once two successive objective
/// values differ by less than `abstol`.
pub fn solve_lasso(
    model: &dyn QuadraticModel,
    lambda2: f64,
    x_start: &ParamVector,
    config: &SubproblemConfig,
    mask: &PenaltyMask,
) -> Result<LassoSolution> {
    config.validate()?;
    check_dim(model.dim(), x_start.len())?;
    check_dim(model.dim(), mask.len())?;
    check_finite(x_start.as_slice())?;

    let objective = |v: f64, x: &ParamVector| v + lambda2 * masked_l1_norm(x, mask);
    let mut x = x_start.clone();
    let (mut gx, mut grad) = model.value_grad(&x);
    let mut f_prev = objective(gx, &x);
    let mut step = config.step_init;
    let mut converged = false;
    let mut iterations = 0;

    for i in 1..=config.max_iter {
        iterations = i;
        if !gx.is_finite() || grad.iter().any(|g| !g.is_finite()) {
            return Err(Error::SurrogateDiverged);
        }
        step = config.step_init;
        let (z, gz, grad_z) = loop {
            let mut z = &x - &grad * step;
            shrink_masked(&mut z, step * lambda2, mask);
            let d = &z - &x;
            let (gz, grad_z) = model.value_grad(&z);
            if gz <= gx + grad.dot(&d) + d.norm_squared() / (2.0 * step) {
                break (z, gz, grad_z);
            }
            step *= config.beta;
            if step < MIN_STEP {
                return Err(Error::StepUnderflow(step));
            }
        };
        let f = objective(gz, &z);
        x = z;
        gx = gz;
        grad = grad_z;
        if i > 1 && (f - f_prev).abs() < config.abstol {
            f_prev = f;
            converged = true;
            break;
        }
        f_prev = f;
    }

    Ok(LassoSolution { x, objective: f_prev, iterations, converged, last_step: step })
}

/// One backtracked proximal gradient step (`max_iter = 1`).
pub fn solve_lasso_inexact(
    model: &dyn QuadraticModel,
    lambda2: f64,
    x_start: &ParamVector,
    config: &SubproblemConfig,
    mask: &PenaltyMask,
) -> Result<LassoSolution> {
    solve_lasso(model, lambda2, x_start, &config.inexact(), mask)
}
