use std::sync::Arc;

use crate::datasets::LabeledDataset;
use crate::error::{check_dim, Result};
use crate::objectives::SmoothComponent;
use crate::ParamVector;

/// `log(1 + exp(-z))` without overflow.
#[inline]
fn log1p_exp_neg(z: f64) -> f64 {
    if z > 0.0 {
        (-z).exp().ln_1p()
    } else {
        -z + z.exp().ln_1p()
    }
}

/// `σ(-z) = 1 / (1 + exp(z))`, stable for both signs.
#[inline]
fn sigmoid_neg(z: f64) -> f64 {
    if z > 0.0 {
        let e = (-z).exp();
        e / (1.0 + e)
    } else {
        1.0 / (1.0 + z.exp())
    }
}

/// Mean logistic loss over a batch plus `λ₁‖x‖²`.
pub struct LogisticComponent {
    data: Arc<LabeledDataset>,
    batch: Vec<usize>,
    lambda1: f64,
}

impl LogisticComponent {
    pub fn new(data: Arc<LabeledDataset>, batch: Vec<usize>, lambda1: f64) -> Self {
        Self { data, batch, lambda1 }
    }

    pub fn batch(&self) -> &[usize] {
        &self.batch
    }

    fn margin(&self, i: usize, x: &ParamVector) -> f64 {
        let row = self.data.row(i);
        self.data.label(i) * row.iter().zip(x.iter()).map(|(a, w)| a * w).sum::<f64>()
    }
}

impl SmoothComponent for LogisticComponent {
    fn dim(&self) -> usize {
        self.data.dim()
    }

    fn value(&self, x: &ParamVector) -> Result<f64> {
        check_dim(self.dim(), x.len())?;
        let loss: f64 = self.batch.iter().map(|&i| log1p_exp_neg(self.margin(i, x))).sum();
        Ok(loss / self.batch.len() as f64 + self.lambda1 * x.norm_squared())
    }

    fn value_grad(&self, x: &ParamVector) -> Result<(f64, ParamVector)> {
        check_dim(self.dim(), x.len())?;
        let scale = 1.0 / self.batch.len() as f64;
        let mut grad = ParamVector::zeros(x.len());
        let mut loss = 0.0;
        for &i in &self.batch {
            let z = self.margin(i, x);
            loss += log1p_exp_neg(z);
            let coef = -self.data.label(i) * sigmoid_neg(z) * scale;
            for (g, a) in grad.iter_mut().zip(self.data.row(i)) {
                *g += coef * a;
            }
        }
        grad.axpy(2.0 * self.lambda1, x, 1.0);
        Ok((loss * scale + self.lambda1 * x.norm_squared(), grad))
    }

    /// `0.25 · λ_max(AᵀA / |batch|) + 2λ₁`, with the top eigenvalue from a
    /// fixed-start power iteration.
    fn lipschitz_bound(&self) -> Option<f64> {
        let p = self.dim();
        let m = self.batch.len() as f64;
        let mut v = ParamVector::from_element(p, 1.0 / (p as f64).sqrt());
        let mut lambda = 0.0;
        for _ in 0..100 {
            let mut w = ParamVector::zeros(p);
            for &i in &self.batch {
                let row = self.data.row(i);
                let dot: f64 = row.iter().zip(v.iter()).map(|(a, b)| a * b).sum();
                for (wj, a) in w.iter_mut().zip(row) {
                    *wj += dot * a / m;
                }
            }
            let norm = w.norm();
            if norm == 0.0 {
                break;
            }
            let next = norm;
            v = w / norm;
            if (next - lambda).abs() <= 1e-10 * next {
                lambda = next;
                break;
            }
            lambda = next;
        }
        // power iteration approaches λ_max from below
        Some(0.25 * lambda * 1.01 + 2.0 * self.lambda1)
    }
}
