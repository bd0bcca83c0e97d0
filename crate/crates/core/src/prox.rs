//! Soft-thresholding and the L1/L2 regularizer algebra shared by every optimizer.

use crate::error::{check_finite, Error, Result};
use crate::ParamVector;

/// Regularization weights of the composite objective.
///
/// `lambda1` multiplies the squared L2 norm and is folded into the smooth
/// components; `lambda2` multiplies the L1 norm and is handled by the prox.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RegularizerConfig {
    pub lambda1: f64,
    pub lambda2: f64,
}

impl RegularizerConfig {
    pub fn new(lambda1: f64, lambda2: f64) -> Result<Self> {
        if !(lambda1 >= 0.0 && lambda1.is_finite()) {
            return Err(Error::InvalidParameter(format!("lambda1 must be >= 0, got {lambda1}")));
        }
        if !(lambda2 >= 0.0 && lambda2.is_finite()) {
            return Err(Error::InvalidParameter(format!("lambda2 must be >= 0, got {lambda2}")));
        }
        Ok(Self { lambda1, lambda2 })
    }
}

impl Default for RegularizerConfig {
    fn default() -> Self {
        Self { lambda1: 1e-4, lambda2: 1e-4 }
    }
}

/// Coordinates subject to the L1 penalty (`true` = penalized).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PenaltyMask(Vec<bool>);

impl PenaltyMask {
    /// Every coordinate penalized.
    pub fn all(dim: usize) -> Self {
        Self(vec![true; dim])
    }

    pub fn from_vec(mask: Vec<bool>) -> Self {
        Self(mask)
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    #[inline]
    pub fn is_penalized(&self, j: usize) -> bool {
        self.0[j]
    }

    pub fn penalized_count(&self) -> usize {
        self.0.iter().filter(|&&b| b).count()
    }

    pub fn as_slice(&self) -> &[bool] {
        &self.0
    }
}

/// Scalar soft-threshold `S_eps[v]`. Values inside the band return exactly `0.0`.
#[inline]
pub fn shrink(v: f64, eps: f64) -> f64 {
    if v > eps {
        v - eps
    } else if v < -eps {
        v + eps
    } else {
        0.0
    }
}

/// Elementwise soft-thresholding operator.
pub fn soft_threshold(x: &ParamVector, eps: f64) -> Result<ParamVector> {
    if !(eps >= 0.0) {
        return Err(Error::InvalidParameter(format!("threshold must be >= 0, got {eps}")));
    }
    check_finite(x.as_slice())?;
    Ok(x.map(|v| shrink(v, eps)))
}

/// In-place soft-thresholding restricted to the penalized coordinates.
/// Unpenalized coordinates are left untouched.
pub fn shrink_masked(x: &mut ParamVector, eps: f64, mask: &PenaltyMask) {
    debug_assert_eq!(x.len(), mask.len());
    for (v, &pen) in x.iter_mut().zip(mask.as_slice()) {
        if pen {
            *v = shrink(*v, eps);
        }
    }
}

pub fn l1_norm(x: &ParamVector) -> Result<f64> {
    check_finite(x.as_slice())?;
    Ok(x.iter().map(|v| v.abs()).sum())
}

/// L1 norm over the penalized coordinates only.
pub fn masked_l1_norm(x: &ParamVector, mask: &PenaltyMask) -> f64 {
    x.iter()
        .zip(mask.as_slice())
        .filter(|(_, &pen)| pen)
        .map(|(v, _)| v.abs())
        .sum()
}

/// Number of components with `|x_j| > tau`. `tau = 0` counts exact nonzeros.
pub fn nnz(x: &ParamVector, tau: f64) -> usize {
    x.iter().filter(|v| v.abs() > tau).count()
}

/// Number of penalized coordinates that are exactly zero.
pub fn masked_zero_count(x: &ParamVector, mask: &PenaltyMask) -> usize {
    x.iter()
        .zip(mask.as_slice())
        .filter(|(v, &pen)| pen && **v == 0.0)
        .count()
}
