use rand_chacha::ChaCha8Rng;

use crate::error::{check_dim, Error, Result};
use crate::objectives::Problem;
use crate::optimizers::{ensure_finite, sample_batch, Optimizer, StepContext};
use crate::prox::shrink_masked;
use crate::ParamVector;

#[derive(Debug, Clone)]
struct GradientTable {
    stored: Vec<ParamVector>,
    sum: ParamVector,
}

/// Proximal stochastic average gradient.
///
/// Keeps the last gradient seen for every mini-batch and steps along their
/// mean: `x ← S_{λ₂/L}[x − ȳ/L]`. The table is filled with `∇g_i(x0)` on
/// the first step (one gradient per batch).
pub struct ProxSag {
    x: ParamVector,
    lipschitz: f64,
    table: Option<GradientTable>,
    grad_evals: u64,
}

impl ProxSag {
    pub fn new(x0: ParamVector, lipschitz: f64) -> Result<Self> {
        if !(lipschitz > 0.0 && lipschitz.is_finite()) {
            return Err(Error::InvalidParameter(format!("lipschitz must be > 0, got {lipschitz}")));
        }
        Ok(Self { x: x0, lipschitz, table: None, grad_evals: 0 })
    }

    pub fn lipschitz(&self) -> f64 {
        self.lipschitz
    }

    /// Fills the table with gradients at the current iterate.
    pub fn initialize(&mut self, problem: &Problem) -> Result<()> {
        check_dim(problem.dim(), self.x.len())?;
        let mut sum = ParamVector::zeros(self.x.len());
        let mut stored = Vec::with_capacity(problem.component_count());
        for c in problem.components() {
            let g = c.gradient(&self.x)?;
            sum += &g;
            stored.push(g);
        }
        self.grad_evals += stored.len() as u64;
        self.table = Some(GradientTable { stored, sum });
        Ok(())
    }

    /// Stored per-batch gradients (empty before the first step).
    pub fn stored_gradients(&self) -> &[ParamVector] {
        self.table.as_ref().map_or(&[], |t| &t.stored)
    }

    /// Running mean of the stored gradients.
    pub fn average(&self) -> Option<ParamVector> {
        self.table.as_ref().map(|t| &t.sum / t.stored.len() as f64)
    }

    /// One step on a given mini-batch.
    pub fn step_on(&mut self, problem: &Problem, batch: usize) -> Result<()> {
        if self.table.is_none() {
            self.initialize(problem)?;
        }
        let grad = problem.component(batch).gradient(&self.x)?;
        self.grad_evals += 1;
        let table = self.table.as_mut().expect("initialized above");
        table.sum += &grad - &table.stored[batch];
        table.stored[batch] = grad;

        let n = table.stored.len() as f64;
        let inv_l = 1.0 / self.lipschitz;
        let mut z = &self.x - &table.sum * (inv_l / n);
        shrink_masked(&mut z, problem.regularizer().lambda2 * inv_l, problem.mask());
        ensure_finite(&z, "ProxSAG iterate")?;
        self.x = z;
        Ok(())
    }
}

impl Optimizer for ProxSag {
    fn step(&mut self, problem: &Problem, _ctx: StepContext, rng: &mut ChaCha8Rng) -> Result<()> {
        let batch = sample_batch(rng, problem.component_count());
        self.step_on(problem, batch)
    }

    fn x(&self) -> &ParamVector {
        &self.x
    }

    fn grad_evals(&self) -> u64 {
        self.grad_evals
    }
}
