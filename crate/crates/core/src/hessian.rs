//! Per-mini-batch curvature histories and the Hessian approximations rebuilt
//! from them.

use std::collections::VecDeque;

use nalgebra::DMatrix;

use crate::error::{check_dim, Error, Result};
use crate::ParamVector;

/// Default number of `(s, y)` pairs kept per mini-batch.
pub const DEFAULT_MAX_HISTORY: usize = 20;

/// Largest dimension for which dense per-batch Hessians are allowed.
pub const DEFAULT_DENSE_CAP: usize = 2000;

#[derive(Debug, Clone)]
struct BatchHistory {
    // newest pair at the front
    pairs: VecDeque<(ParamVector, ParamVector)>,
    last_x: Option<ParamVector>,
    last_grad: Option<ParamVector>,
}

/// Ring buffers of position differences `s` and gradient differences `y`,
/// one per mini-batch, plus the last point and gradient at which each batch
/// was sampled.
#[derive(Debug, Clone)]
pub struct CurvatureHistory {
    dim: usize,
    max_history: usize,
    batches: Vec<BatchHistory>,
}

impl CurvatureHistory {
    pub fn new(batch_count: usize, dim: usize, max_history: usize) -> Result<Self> {
        if max_history == 0 {
            return Err(Error::InvalidParameter("max_history must be >= 1".into()));
        }
        let empty = BatchHistory { pairs: VecDeque::with_capacity(max_history), last_x: None, last_grad: None };
        Ok(Self { dim, max_history, batches: vec![empty; batch_count] })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn max_history(&self) -> usize {
        self.max_history
    }

    pub fn batch_count(&self) -> usize {
        self.batches.len()
    }

    /// Sets the reference point for a batch without recording a pair.
    pub fn init_batch(&mut self, batch: usize, x: &ParamVector, grad: &ParamVector) -> Result<()> {
        check_dim(self.dim, x.len())?;
        check_dim(self.dim, grad.len())?;
        let h = &mut self.batches[batch];
        h.last_x = Some(x.clone());
        h.last_grad = Some(grad.clone());
        Ok(())
    }

    /// Pushes `s = x_new - last_x`, `y = grad_new - last_grad` as the newest
    /// pair (evicting the oldest when full) and moves the reference point.
    pub fn record_observation(
        &mut self,
        batch: usize,
        x_new: &ParamVector,
        grad_new: &ParamVector,
    ) -> Result<()> {
        check_dim(self.dim, x_new.len())?;
        check_dim(self.dim, grad_new.len())?;
        let max = self.max_history;
        let h = &mut self.batches[batch];
        let (Some(last_x), Some(last_grad)) = (h.last_x.as_mut(), h.last_grad.as_mut()) else {
            return Err(Error::InvalidParameter(format!("batch {batch} has no reference point")));
        };
        let s = x_new - &*last_x;
        let y = grad_new - &*last_grad;
        last_x.copy_from(x_new);
        last_grad.copy_from(grad_new);
        if h.pairs.len() == max {
            h.pairs.pop_back();
        }
        h.pairs.push_front((s, y));
        Ok(())
    }

    pub fn len(&self, batch: usize) -> usize {
        self.batches[batch].pairs.len()
    }

    pub fn is_empty(&self, batch: usize) -> bool {
        self.batches[batch].pairs.is_empty()
    }

    /// Stored pairs, newest first.
    pub fn pairs_newest_first(&self, batch: usize) -> impl Iterator<Item = (&ParamVector, &ParamVector)> {
        self.batches[batch].pairs.iter().map(|(s, y)| (s, y))
    }

    /// Stored pairs, oldest first (the order the rebuild applies them).
    pub fn pairs_oldest_first(&self, batch: usize) -> impl Iterator<Item = (&ParamVector, &ParamVector)> {
        self.batches[batch].pairs.iter().rev().map(|(s, y)| (s, y))
    }

    pub fn last_x(&self, batch: usize) -> Option<&ParamVector> {
        self.batches[batch].last_x.as_ref()
    }

    pub fn last_grad(&self, batch: usize) -> Option<&ParamVector> {
        self.batches[batch].last_grad.as_ref()
    }
}

/// Symmetric positive-definite Hessian approximation for one mini-batch.
#[derive(Debug, Clone, PartialEq)]
pub enum HessianApprox {
    /// `scale · I`
    ScaledIdentity { dim: usize, scale: f64 },
    Dense(DMatrix<f64>),
}

impl HessianApprox {
    pub fn identity(dim: usize) -> Self {
        Self::ScaledIdentity { dim, scale: 1.0 }
    }

    pub fn dim(&self) -> usize {
        match self {
            Self::ScaledIdentity { dim, .. } => *dim,
            Self::Dense(m) => m.nrows(),
        }
    }

    pub fn mul_vec(&self, v: &ParamVector) -> ParamVector {
        match self {
            Self::ScaledIdentity { scale, .. } => v * *scale,
            Self::Dense(m) => m * v,
        }
    }

    /// `vᵀ H v`
    pub fn quad_form(&self, v: &ParamVector) -> f64 {
        match self {
            Self::ScaledIdentity { scale, .. } => scale * v.norm_squared(),
            Self::Dense(m) => v.dot(&(m * v)),
        }
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        match self {
            Self::ScaledIdentity { dim, scale } => DMatrix::identity(*dim, *dim) * *scale,
            Self::Dense(m) => m.clone(),
        }
    }
}

/// Outcome counters of one rebuild.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct RebuildStats {
    pub accepted: usize,
    /// Pairs with `yᵀs <= 0`, left out of the update.
    pub skipped: usize,
}

/// Applies BFGS updates `B ← B − B s sᵀ B / (sᵀ B s) + y yᵀ / (yᵀ s)` to
/// `init` for each pair in iteration order, skipping any pair with
/// `yᵀ s <= 0`.
pub fn bfgs_apply<'a>(
    mut b: DMatrix<f64>,
    pairs: impl IntoIterator<Item = (&'a ParamVector, &'a ParamVector)>,
) -> (DMatrix<f64>, RebuildStats) {
    let mut stats = RebuildStats::default();
    for (s, y) in pairs {
        let ys = y.dot(s);
        if !(ys > 0.0) {
            stats.skipped += 1;
            continue;
        }
        let bs = &b * s;
        let sbs = s.dot(&bs);
        if !(sbs > 0.0) {
            // only reachable once B has lost definiteness to rounding
            stats.skipped += 1;
            continue;
        }
        b.ger(-1.0 / sbs, &bs, &bs, 1.0);
        b.ger(1.0 / ys, y, y, 1.0);
        stats.accepted += 1;
    }
    if stats.accepted > 0 {
        b = (&b + b.transpose()) * 0.5;
    }
    (b, stats)
}

/// Rebuilds the dense Hessian approximation of `batch` from the identity,
/// applying the stored pairs oldest to newest.
pub fn bfgs_rebuild(history: &CurvatureHistory, batch: usize) -> (HessianApprox, RebuildStats) {
    let p = history.dim();
    if history.is_empty(batch) {
        return (HessianApprox::identity(p), RebuildStats::default());
    }
    let (b, stats) = bfgs_apply(DMatrix::identity(p, p), history.pairs_oldest_first(batch));
    (HessianApprox::Dense(b), stats)
}

/// `scale · I`.
pub fn constant_diagonal(dim: usize, scale: f64) -> Result<HessianApprox> {
    if !(scale > 0.0 && scale.is_finite()) {
        return Err(Error::InvalidParameter(format!("diagonal scale must be > 0, got {scale}")));
    }
    Ok(HessianApprox::ScaledIdentity { dim, scale })
}
