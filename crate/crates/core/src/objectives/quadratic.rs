use nalgebra::DMatrix;

use crate::error::{check_dim, Error, Result};
use crate::objectives::SmoothComponent;
use crate::ParamVector;

/// `½ xᵀ A x + bᵀx + c` with symmetric `A`. Handy as an exactly-known
/// component in tests and demonstrations.
#[derive(Debug, Clone)]
pub struct QuadraticComponent {
    hessian: DMatrix<f64>,
    linear: ParamVector,
    constant: f64,
}

impl QuadraticComponent {
    pub fn new(hessian: DMatrix<f64>, linear: ParamVector, constant: f64) -> Result<Self> {
        if !hessian.is_square() {
            return Err(Error::InvalidParameter("hessian must be square".into()));
        }
        check_dim(hessian.nrows(), linear.len())?;
        Ok(Self { hessian, linear, constant })
    }

    /// `½ (x - center)ᵀ A (x - center)`.
    pub fn centered(hessian: DMatrix<f64>, center: &ParamVector) -> Result<Self> {
        let linear = -(&hessian * center);
        let constant = 0.5 * center.dot(&(&hessian * center));
        Self::new(hessian, linear, constant)
    }

    pub fn hessian(&self) -> &DMatrix<f64> {
        &self.hessian
    }
}

impl SmoothComponent for QuadraticComponent {
    fn dim(&self) -> usize {
        self.linear.len()
    }

    fn value_grad(&self, x: &ParamVector) -> Result<(f64, ParamVector)> {
        check_dim(self.dim(), x.len())?;
        let ax = &self.hessian * x;
        let value = 0.5 * x.dot(&ax) + self.linear.dot(x) + self.constant;
        Ok((value, ax + &self.linear))
    }

    fn lipschitz_bound(&self) -> Option<f64> {
        Some(self.hessian.clone().symmetric_eigenvalues().amax())
    }
}
