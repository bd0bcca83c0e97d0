//! The piecewise-quadratic global surrogate `G(x) = (1/n) Σ g_i^k(x)`.
//!
//! Each component model is a quadratic anchored where its mini-batch was last
//! sampled, matching the true value and gradient there. Components are stored
//! in expanded form `α_i + β_iᵀx + ½ xᵀH_i x` so that the aggregate
//! `A + Bᵀx + ½ xᵀH x` can be refreshed in place when one component changes.

mod subspace;

use nalgebra::DMatrix;

pub use subspace::{SharedSubspace, SubspaceSurrogate, DEFAULT_EPS_EXPAND, DEFAULT_GAMMA};

use crate::error::{check_dim, Result};
use crate::hessian::HessianApprox;
use crate::objectives::SmoothComponent;
use crate::ParamVector;

/// A strongly convex quadratic that the lasso subproblem solver can minimize.
pub trait QuadraticModel {
    fn dim(&self) -> usize;

    fn value(&self, x: &ParamVector) -> f64;

    fn gradient(&self, x: &ParamVector) -> ParamVector;

    fn value_grad(&self, x: &ParamVector) -> (f64, ParamVector) {
        (self.value(x), self.gradient(x))
    }
}

/// One mini-batch model `g_i^k`.
#[derive(Debug, Clone)]
pub struct ComponentModel {
    anchor: ParamVector,
    anchor_value: f64,
    anchor_grad: ParamVector,
    alpha: f64,
    beta: ParamVector,
    hessian: HessianApprox,
}

impl ComponentModel {
    pub fn new(anchor: ParamVector, value: f64, grad: ParamVector, hessian: HessianApprox) -> Result<Self> {
        check_dim(anchor.len(), grad.len())?;
        check_dim(anchor.len(), hessian.dim())?;
        let h_anchor = hessian.mul_vec(&anchor);
        let beta = &grad - &h_anchor;
        let alpha = value - grad.dot(&anchor) + 0.5 * anchor.dot(&h_anchor);
        Ok(Self { anchor, anchor_value: value, anchor_grad: grad, alpha, beta, hessian })
    }

    pub fn anchor(&self) -> &ParamVector {
        &self.anchor
    }

    pub fn anchor_value(&self) -> f64 {
        self.anchor_value
    }

    pub fn anchor_grad(&self) -> &ParamVector {
        &self.anchor_grad
    }

    pub fn hessian(&self) -> &HessianApprox {
        &self.hessian
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn beta(&self) -> &ParamVector {
        &self.beta
    }

    pub fn value(&self, x: &ParamVector) -> f64 {
        self.alpha + self.beta.dot(x) + 0.5 * self.hessian.quad_form(x)
    }

    pub fn gradient(&self, x: &ParamVector) -> ParamVector {
        &self.beta + self.hessian.mul_vec(x)
    }
}

/// Unnormalized sums `Σα_i`, `Σβ_i`, `ΣH_i` over all components. Scaled
/// identities are accumulated separately from dense parts.
#[derive(Debug, Clone, PartialEq)]
pub struct AggregateSums {
    pub alpha: f64,
    pub beta: ParamVector,
    pub scale: f64,
    pub dense: Option<DMatrix<f64>>,
}

impl AggregateSums {
    fn zeros(dim: usize) -> Self {
        Self { alpha: 0.0, beta: ParamVector::zeros(dim), scale: 0.0, dense: None }
    }

    fn add(&mut self, c: &ComponentModel, sign: f64) {
        self.alpha += sign * c.alpha;
        self.beta.axpy(sign, &c.beta, 1.0);
        match &c.hessian {
            HessianApprox::ScaledIdentity { scale, .. } => self.scale += sign * scale,
            HessianApprox::Dense(m) => {
                let p = m.nrows();
                let dense = self.dense.get_or_insert_with(|| DMatrix::zeros(p, p));
                dense.zip_apply(m, |acc, v| *acc += sign * v);
            }
        }
    }

    /// Largest relative deviation from `other` across all stored quantities.
    pub fn relative_error(&self, other: &Self) -> f64 {
        let rel = |a: f64, b: f64, scale: f64| (a - b).abs() / scale.max(1e-300);
        let beta_scale = other.beta.amax().max(1.0);
        let mut err = rel(self.alpha, other.alpha, other.alpha.abs().max(1.0))
            .max((&self.beta - &other.beta).amax() / beta_scale);
        let to_dense = |s: &Self| {
            let p = s.beta.len();
            let mut m = DMatrix::identity(p, p) * s.scale;
            if let Some(d) = &s.dense {
                m += d;
            }
            m
        };
        let (a, b) = (to_dense(self), to_dense(other));
        err = err.max((&a - &b).amax() / b.amax().max(1.0));
        err
    }
}

/// Full-space surrogate with one [`ComponentModel`] per mini-batch.
#[derive(Debug, Clone)]
pub struct QuadraticSurrogate {
    components: Vec<ComponentModel>,
    sums: AggregateSums,
}

impl QuadraticSurrogate {
    /// Anchors every component at `x0` with the given Hessians.
    pub fn init<C: AsRef<dyn SmoothComponent>>(
        components: &[C],
        x0: &ParamVector,
        hessians: Vec<HessianApprox>,
    ) -> Result<Self> {
        check_dim(components.len(), hessians.len())?;
        let models = components
            .iter()
            .zip(hessians)
            .map(|(c, h)| {
                let (value, grad) = c.as_ref().value_grad(x0)?;
                ComponentModel::new(x0.clone(), value, grad, h)
            })
            .collect::<Result<Vec<_>>>()?;
        Self::from_models(models)
    }

    pub fn from_models(models: Vec<ComponentModel>) -> Result<Self> {
        let first = models.first().ok_or(crate::Error::EmptyComponents)?;
        let dim = first.anchor.len();
        for m in &models {
            check_dim(dim, m.anchor.len())?;
        }
        let mut sums = AggregateSums::zeros(dim);
        for m in &models {
            sums.add(m, 1.0);
        }
        Ok(Self { components: models, sums })
    }

    pub fn component_count(&self) -> usize {
        self.components.len()
    }

    pub fn component(&self, i: usize) -> &ComponentModel {
        &self.components[i]
    }

    pub fn sums(&self) -> &AggregateSums {
        &self.sums
    }

    /// Sums recomputed from the stored components.
    pub fn sums_from_scratch(&self) -> AggregateSums {
        let mut sums = AggregateSums::zeros(self.sums.beta.len());
        for m in &self.components {
            sums.add(m, 1.0);
        }
        sums
    }

    /// Re-anchors component `batch` at `x_new`, leaving all others untouched,
    /// and patches the aggregate by removing the old contribution and adding
    /// the new one.
    pub fn replace_component(
        &mut self,
        batch: usize,
        x_new: &ParamVector,
        value_new: f64,
        grad_new: &ParamVector,
        hessian_new: HessianApprox,
    ) -> Result<()> {
        let dim = self.sums.beta.len();
        check_dim(dim, x_new.len())?;
        let model = ComponentModel::new(x_new.clone(), value_new, grad_new.clone(), hessian_new)?;
        self.sums.add(&self.components[batch], -1.0);
        self.sums.add(&model, 1.0);
        self.components[batch] = model;
        Ok(())
    }

    /// `(1/n) Σ g_i^k(x)` evaluated component by component.
    pub fn mean_of_components(&self, x: &ParamVector) -> f64 {
        self.components.iter().map(|c| c.value(x)).sum::<f64>() / self.components.len() as f64
    }

    fn hess_mul(&self, x: &ParamVector) -> ParamVector {
        let mut hx = x * self.sums.scale;
        if let Some(d) = &self.sums.dense {
            hx.gemv(1.0, d, x, 1.0);
        }
        hx / self.components.len() as f64
    }
}

impl QuadraticModel for QuadraticSurrogate {
    fn dim(&self) -> usize {
        self.sums.beta.len()
    }

    fn value(&self, x: &ParamVector) -> f64 {
        self.value_grad(x).0
    }

    fn gradient(&self, x: &ParamVector) -> ParamVector {
        let n = self.components.len() as f64;
        self.hess_mul(x) + &self.sums.beta / n
    }

    fn value_grad(&self, x: &ParamVector) -> (f64, ParamVector) {
        let n = self.components.len() as f64;
        let hx = self.hess_mul(x);
        let value = self.sums.alpha / n + self.sums.beta.dot(x) / n + 0.5 * x.dot(&hx);
        (value, hx + &self.sums.beta / n)
    }
}

/// Either surrogate representation, as held by an optimizer.
#[derive(Debug, Clone)]
pub enum Surrogate {
    Full(QuadraticSurrogate),
    Subspace(SubspaceSurrogate),
}

impl QuadraticModel for Surrogate {
    fn dim(&self) -> usize {
        match self {
            Self::Full(s) => s.dim(),
            Self::Subspace(s) => s.dim(),
        }
    }

    fn value(&self, x: &ParamVector) -> f64 {
        match self {
            Self::Full(s) => s.value(x),
            Self::Subspace(s) => s.value(x),
        }
    }

    fn gradient(&self, x: &ParamVector) -> ParamVector {
        match self {
            Self::Full(s) => s.gradient(x),
            Self::Subspace(s) => s.gradient(x),
        }
    }

    fn value_grad(&self, x: &ParamVector) -> (f64, ParamVector) {
        match self {
            Self::Full(s) => s.value_grad(x),
            Self::Subspace(s) => s.value_grad(x),
        }
    }
}
