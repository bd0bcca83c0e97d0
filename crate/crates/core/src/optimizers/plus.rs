use rand_chacha::ChaCha8Rng;

use crate::error::Result;
use crate::objectives::Problem;
use crate::optimizers::{Diagnostics, Optimizer, ProxSag, Proxtone, ProxtoneConfig, StepContext};
use crate::ParamVector;

/// PROXTONE with single-iteration subproblem solves for the first
/// `switch_epoch` epochs, ProxSAG afterwards.
///
/// The ProxSAG gradient table is filled at the switch iterate, which costs
/// one extra pass of mini-batch gradients.
pub struct ProxtonePlus {
    proxtone: Proxtone,
    sag: Option<ProxSag>,
    switch_epoch: Option<usize>,
    lipschitz: f64,
}

impl ProxtonePlus {
    pub fn new(
        problem: &Problem,
        x0: ParamVector,
        config: ProxtoneConfig,
        switch_epoch: Option<usize>,
        lipschitz: f64,
    ) -> Result<Self> {
        // validate the SAG parameters up front
        ProxSag::new(x0.clone(), lipschitz)?;
        Ok(Self { proxtone: Proxtone::new(problem, x0, config, true)?, sag: None, switch_epoch, lipschitz })
    }

    pub fn switched(&self) -> bool {
        self.sag.is_some()
    }
}

impl Optimizer for ProxtonePlus {
    fn step(&mut self, problem: &Problem, ctx: StepContext, rng: &mut ChaCha8Rng) -> Result<()> {
        let use_proxtone = self.switch_epoch.is_none_or(|n| ctx.epoch < n);
        if use_proxtone && self.sag.is_none() {
            return self.proxtone.step(problem, ctx, rng);
        }
        if self.sag.is_none() {
            let mut sag = ProxSag::new(self.proxtone.x().clone(), self.lipschitz)?;
            sag.initialize(problem)?;
            self.sag = Some(sag);
        }
        self.sag.as_mut().expect("set above").step(problem, ctx, rng)
    }

    fn x(&self) -> &ParamVector {
        match &self.sag {
            Some(s) => s.x(),
            None => self.proxtone.x(),
        }
    }

    fn grad_evals(&self) -> u64 {
        self.proxtone.grad_evals() + self.sag.as_ref().map_or(0, |s| s.grad_evals())
    }

    fn diagnostics(&self) -> Diagnostics {
        self.proxtone.diagnostics()
    }
}
