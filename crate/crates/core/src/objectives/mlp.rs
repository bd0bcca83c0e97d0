use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::datasets::MulticlassDataset;
use crate::error::{check_dim, Error, Result};
use crate::objectives::SmoothComponent;
use crate::prox::PenaltyMask;
use crate::ParamVector;

/// Two-layer perceptron shape: `inputs → hidden (sigmoid) → classes (softmax)`.
///
/// Parameters are flattened as `[W1 | b1 | W2 | b2]`, with `W1` stored
/// row-major as `hidden × inputs` and `W2` as `classes × hidden`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct MlpArchitecture {
    pub inputs: usize,
    pub hidden: usize,
    pub classes: usize,
}

impl Default for MlpArchitecture {
    fn default() -> Self {
        Self { inputs: 64, hidden: 32, classes: 10 }
    }
}

impl MlpArchitecture {
    pub fn new(inputs: usize, hidden: usize, classes: usize) -> Result<Self> {
        if inputs == 0 || hidden == 0 || classes < 2 {
            return Err(Error::InvalidParameter(format!(
                "invalid MLP shape {inputs}-{hidden}-{classes}"
            )));
        }
        Ok(Self { inputs, hidden, classes })
    }

    pub fn dim(&self) -> usize {
        self.inputs * self.hidden + self.hidden + self.hidden * self.classes + self.classes
    }

    fn w1(&self) -> usize {
        0
    }

    fn b1(&self) -> usize {
        self.inputs * self.hidden
    }

    fn w2(&self) -> usize {
        self.b1() + self.hidden
    }

    fn b2(&self) -> usize {
        self.w2() + self.hidden * self.classes
    }

    /// `true` on weight coordinates, `false` on biases.
    pub fn penalty_mask(&self) -> PenaltyMask {
        let mut mask = vec![true; self.dim()];
        mask[self.b1()..self.w2()].fill(false);
        mask[self.b2()..].fill(false);
        PenaltyMask::from_vec(mask)
    }

    /// Uniform Glorot-style weights, zero biases.
    pub fn initial_point(&self, seed: u64) -> ParamVector {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut x = ParamVector::zeros(self.dim());
        let r1 = (6.0 / (self.inputs + self.hidden) as f64).sqrt();
        for v in x.as_mut_slice()[self.w1()..self.b1()].iter_mut() {
            *v = rng.random_range(-r1..r1);
        }
        let r2 = (6.0 / (self.hidden + self.classes) as f64).sqrt();
        for v in x.as_mut_slice()[self.w2()..self.b2()].iter_mut() {
            *v = rng.random_range(-r2..r2);
        }
        x
    }
}

/// Mean softmax cross-entropy of the MLP over a batch plus `λ₁` times the
/// squared L2 norm of the weights (biases excluded).
pub struct MlpComponent {
    data: Arc<MulticlassDataset>,
    batch: Vec<usize>,
    arch: MlpArchitecture,
    lambda1: f64,
}

impl MlpComponent {
    pub fn new(
        data: Arc<MulticlassDataset>,
        batch: Vec<usize>,
        arch: MlpArchitecture,
        lambda1: f64,
    ) -> Result<Self> {
        check_dim(arch.inputs, data.dim())?;
        if data.num_classes() != arch.classes {
            return Err(Error::InvalidParameter(format!(
                "dataset has {} classes, architecture {}",
                data.num_classes(),
                arch.classes
            )));
        }
        Ok(Self { data, batch, arch, lambda1 })
    }

    fn weight_penalty(&self, x: &ParamVector) -> f64 {
        let a = &self.arch;
        let s = x.as_slice();
        let w1: f64 = s[a.w1()..a.b1()].iter().map(|v| v * v).sum();
        let w2: f64 = s[a.w2()..a.b2()].iter().map(|v| v * v).sum();
        self.lambda1 * (w1 + w2)
    }

    fn evaluate(&self, x: &ParamVector, want_grad: bool) -> Result<(f64, Option<ParamVector>)> {
        check_dim(self.arch.dim(), x.len())?;
        let a = self.arch;
        let s = x.as_slice();
        let (w1, b1) = (&s[a.w1()..a.b1()], &s[a.b1()..a.w2()]);
        let (w2, b2) = (&s[a.w2()..a.b2()], &s[a.b2()..]);

        let mut grad = want_grad.then(|| ParamVector::zeros(x.len()));
        let mut hidden = vec![0.0; a.hidden];
        let mut logits = vec![0.0; a.classes];
        let mut delta_h = vec![0.0; a.hidden];
        let scale = 1.0 / self.batch.len() as f64;
        let mut loss = 0.0;

        for &i in &self.batch {
            let input = self.data.row(i);
            let target = self.data.class(i);
            for (j, h) in hidden.iter_mut().enumerate() {
                let row = &w1[j * a.inputs..(j + 1) * a.inputs];
                let z: f64 = row.iter().zip(input).map(|(w, v)| w * v).sum::<f64>() + b1[j];
                *h = 1.0 / (1.0 + (-z).exp());
            }
            for (c, l) in logits.iter_mut().enumerate() {
                let row = &w2[c * a.hidden..(c + 1) * a.hidden];
                *l = row.iter().zip(&hidden).map(|(w, h)| w * h).sum::<f64>() + b2[c];
            }
            let max = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let sum_exp: f64 = logits.iter().map(|l| (l - max).exp()).sum();
            let lse = max + sum_exp.ln();
            let sample_loss = lse - logits[target];
            if !sample_loss.is_finite() {
                return Err(Error::Diverged(format!("non-finite MLP activation on sample {i}")));
            }
            loss += sample_loss;

            let Some(g) = grad.as_mut() else { continue };
            let g = g.as_mut_slice();
            delta_h.fill(0.0);
            for c in 0..a.classes {
                let mut d = (logits[c] - lse).exp();
                if c == target {
                    d -= 1.0;
                }
                d *= scale;
                g[a.b2() + c] += d;
                let w2_row = &w2[c * a.hidden..(c + 1) * a.hidden];
                let gw2_row = &mut g[a.w2() + c * a.hidden..a.w2() + (c + 1) * a.hidden];
                for j in 0..a.hidden {
                    gw2_row[j] += d * hidden[j];
                    delta_h[j] += d * w2_row[j];
                }
            }
            for j in 0..a.hidden {
                let d = delta_h[j] * hidden[j] * (1.0 - hidden[j]);
                g[a.b1() + j] += d;
                let gw1_row = &mut g[a.w1() + j * a.inputs..a.w1() + (j + 1) * a.inputs];
                for (gw, v) in gw1_row.iter_mut().zip(input) {
                    *gw += d * v;
                }
            }
        }

        if let Some(g) = grad.as_mut() {
            let gs = g.as_mut_slice();
            for k in (a.w1()..a.b1()).chain(a.w2()..a.b2()) {
                gs[k] += 2.0 * self.lambda1 * s[k];
            }
        }
        Ok((loss * scale + self.weight_penalty(x), grad))
    }
}

impl SmoothComponent for MlpComponent {
    fn dim(&self) -> usize {
        self.arch.dim()
    }

    fn value(&self, x: &ParamVector) -> Result<f64> {
        Ok(self.evaluate(x, false)?.0)
    }

    fn value_grad(&self, x: &ParamVector) -> Result<(f64, ParamVector)> {
        let (v, g) = self.evaluate(x, true)?;
        Ok((v, g.expect("gradient requested")))
    }
}
