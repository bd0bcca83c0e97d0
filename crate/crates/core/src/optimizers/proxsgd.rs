use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::objectives::Problem;
use crate::optimizers::{ensure_finite, sample_batch, Optimizer, StepContext};
use crate::prox::shrink_masked;
use crate::ParamVector;

/// Proximal SGD with a constant step: `x ← S_{ηλ₂}[x − η ∇g_i(x)]`.
pub struct ProxSgd {
    x: ParamVector,
    eta: f64,
    grad_evals: u64,
}

impl ProxSgd {
    pub fn new(x0: ParamVector, eta: f64) -> Result<Self> {
        if !(eta > 0.0 && eta.is_finite()) {
            return Err(Error::InvalidParameter(format!("eta must be > 0, got {eta}")));
        }
        Ok(Self { x: x0, eta, grad_evals: 0 })
    }

    pub fn eta(&self) -> f64 {
        self.eta
    }

    /// One step on a given mini-batch.
    pub fn step_on(&mut self, problem: &Problem, batch: usize) -> Result<()> {
        let grad = problem.component(batch).gradient(&self.x)?;
        self.grad_evals += 1;
        let mut z = &self.x - grad * self.eta;
        shrink_masked(&mut z, self.eta * problem.regularizer().lambda2, problem.mask());
        ensure_finite(&z, "ProxSGD iterate")?;
        self.x = z;
        Ok(())
    }
}

impl Optimizer for ProxSgd {
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
