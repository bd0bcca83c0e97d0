//! Smooth components `g_i` of the composite objective and the problem bundle
//! that ties them to a regularizer and a penalty mask.

mod logistic;
mod mlp;
mod quadratic;

use std::sync::Arc;

use rayon::prelude::*;

pub use logistic::LogisticComponent;
pub use mlp::{MlpArchitecture, MlpComponent};
pub use quadratic::QuadraticComponent;

use crate::datasets::{LabeledDataset, MiniBatchPartition, MulticlassDataset};
use crate::error::{check_dim, Error, Result};
use crate::prox::{masked_l1_norm, PenaltyMask, RegularizerConfig};
use crate::ParamVector;

/// Value/gradient oracle for one mini-batch loss `g_i`.
pub trait SmoothComponent: Send + Sync {
    fn dim(&self) -> usize;

    fn value_grad(&self, x: &ParamVector) -> Result<(f64, ParamVector)>;

    fn value(&self, x: &ParamVector) -> Result<f64> {
        Ok(self.value_grad(x)?.0)
    }

    fn gradient(&self, x: &ParamVector) -> Result<ParamVector> {
        Ok(self.value_grad(x)?.1)
    }

    /// Upper bound on the gradient's Lipschitz constant, when one is cheap to get.
    fn lipschitz_bound(&self) -> Option<f64> {
        None
    }
}

/// `(1/n) Σ g_i(x) + λ₂ ‖x‖₁`, the L1 term restricted to `mask`.
///
/// Component values are evaluated in parallel and summed in index order, so
/// the result does not depend on thread scheduling.
pub fn full_objective<C: AsRef<dyn SmoothComponent> + Sync>(
    components: &[C],
    reg: &RegularizerConfig,
    mask: &PenaltyMask,
    x: &ParamVector,
) -> Result<f64> {
    if components.is_empty() {
        return Err(Error::EmptyComponents);
    }
    check_dim(mask.len(), x.len())?;
    let values: Vec<Result<f64>> = components.par_iter().map(|c| c.as_ref().value(x)).collect();
    let mut sum = 0.0;
    for v in values {
        sum += v?;
    }
    Ok(sum / components.len() as f64 + reg.lambda2 * masked_l1_norm(x, mask))
}

/// Everything an optimizer needs: components, regularizer, penalty mask and a
/// starting point.
pub struct Problem {
    components: Vec<Box<dyn SmoothComponent>>,
    reg: RegularizerConfig,
    mask: PenaltyMask,
    initial: ParamVector,
}

impl Problem {
    pub fn new(
        components: Vec<Box<dyn SmoothComponent>>,
        reg: RegularizerConfig,
        mask: PenaltyMask,
        initial: ParamVector,
    ) -> Result<Self> {
        let first = components.first().ok_or(Error::EmptyComponents)?;
        let dim = first.dim();
        for c in &components {
            check_dim(dim, c.dim())?;
        }
        check_dim(dim, mask.len())?;
        check_dim(dim, initial.len())?;
        Ok(Self { components, reg, mask, initial })
    }

    /// Regularized logistic regression, one component per mini-batch,
    /// starting from the origin.
    pub fn logistic(
        data: Arc<LabeledDataset>,
        partition: &MiniBatchPartition,
        reg: RegularizerConfig,
    ) -> Result<Self> {
        let dim = data.dim();
        let components = partition
            .batches()
            .iter()
            .map(|b| {
                Box::new(LogisticComponent::new(data.clone(), b.clone(), reg.lambda1))
                    as Box<dyn SmoothComponent>
            })
            .collect();
        Self::new(components, reg, PenaltyMask::all(dim), ParamVector::zeros(dim))
    }

    /// Sigmoid MLP with softmax output. Biases are excluded from the L1
    /// penalty; weights start from a seeded random draw.
    pub fn mlp(
        data: Arc<MulticlassDataset>,
        arch: MlpArchitecture,
        partition: &MiniBatchPartition,
        reg: RegularizerConfig,
        init_seed: u64,
    ) -> Result<Self> {
        let components = partition
            .batches()
            .iter()
            .map(|b| {
                MlpComponent::new(data.clone(), b.clone(), arch, reg.lambda1)
                    .map(|c| Box::new(c) as Box<dyn SmoothComponent>)
            })
            .collect::<Result<Vec<_>>>()?;
        Self::new(components, reg, arch.penalty_mask(), arch.initial_point(init_seed))
    }

    pub fn dim(&self) -> usize {
        self.initial.len()
    }

    pub fn component_count(&self) -> usize {
        self.components.len()
    }

    pub fn component(&self, i: usize) -> &dyn SmoothComponent {
        self.components[i].as_ref()
    }

    pub fn components(&self) -> &[Box<dyn SmoothComponent>] {
        &self.components
    }

    pub fn regularizer(&self) -> &RegularizerConfig {
        &self.reg
    }

    pub fn mask(&self) -> &PenaltyMask {
        &self.mask
    }

    pub fn initial_point(&self) -> &ParamVector {
        &self.initial
    }

    pub fn objective(&self, x: &ParamVector) -> Result<f64> {
        full_objective(&self.components, &self.reg, &self.mask, x)
    }

    /// Largest per-component Lipschitz bound, if every component provides one.
    pub fn lipschitz_estimate(&self) -> Option<f64> {
        self.components
            .iter()
            .map(|c| c.lipschitz_bound())
            .try_fold(0.0f64, |acc, l| l.map(|l| acc.max(l)))
    }
}
