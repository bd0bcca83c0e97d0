//! Test-side oracles, written independently of the library code they check.

#![allow(dead_code)]

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use proxtone::datasets::{LabeledDataset, MiniBatchPartition};

pub fn gaussian_vec(rng: &mut ChaCha8Rng, p: usize, scale: f64) -> DVector<f64> {
    DVector::from_fn(p, |_, _| scale * rng.sample::<f64, _>(StandardNormal))
}

/// `Q diag(λ) Qᵀ` with eigenvalues uniform in `[lo, hi]`.
pub fn random_spd(rng: &mut ChaCha8Rng, p: usize, lo: f64, hi: f64) -> DMatrix<f64> {
    let g = DMatrix::from_fn(p, p, |_, _| rng.sample::<f64, _>(StandardNormal));
    let q = g.qr().q();
    let d = DVector::from_fn(p, |_, _| rng.random_range(lo..=hi));
    let m = &q * DMatrix::from_diagonal(&d) * q.transpose();
    (&m + m.transpose()) * 0.5
}

fn shrink(v: f64, t: f64) -> f64 {
    if v > t {
        v - t
    } else if v < -t {
        v + t
    } else {
        0.0
    }
}

/// `½xᵀAx + bᵀx + c + λ Σ_{mask} |x_j|`.
pub fn quad_lasso_objective(a: &DMatrix<f64>, b: &DVector<f64>, c: f64, lambda: f64, mask: &[bool], x: &DVector<f64>) -> f64 {
    let l1: f64 = x.iter().zip(mask).filter(|(_, &m)| m).map(|(v, _)| v.abs()).sum();
    0.5 * x.dot(&(a * x)) + b.dot(x) + c + lambda * l1
}

/// Cyclic coordinate descent for the quadratic lasso; stops when no
/// coordinate moves by more than `tol`.
pub fn cd_lasso(a: &DMatrix<f64>, b: &DVector<f64>, lambda: f64, mask: &[bool], x0: &DVector<f64>, tol: f64) -> DVector<f64> {
    let p = b.len();
    let mut x = x0.clone();
    let mut ax = a * &x;
    for _ in 0..1_000_000 {
        let mut moved = 0.0f64;
        for j in 0..p {
            let ajj = a[(j, j)];
            let rest = ax[j] - ajj * x[j] + b[j];
            let t = if mask[j] { lambda } else { 0.0 };
            let new = shrink(-rest, t) / ajj;
            let delta = new - x[j];
            if delta != 0.0 {
                ax.axpy(delta, &a.column(j), 1.0);
                x[j] = new;
                moved = moved.max(delta.abs());
            }
        }
        if moved <= tol {
            break;
        }
    }
    x
}

/// Central differences with a per-coordinate step.
pub fn central_diff(f: impl Fn(&DVector<f64>) -> f64, x: &DVector<f64>, h: f64) -> DVector<f64> {
    let mut g = DVector::zeros(x.len());
    let mut xp = x.clone();
    for j in 0..x.len() {
        let step = h * x[j].abs().max(1.0);
        xp[j] = x[j] + step;
        let fp = f(&xp);
        xp[j] = x[j] - step;
        let fm = f(&xp);
        xp[j] = x[j];
        g[j] = (fp - fm) / (2.0 * step);
    }
    g
}

/// `‖a − b‖ / max(‖a‖, ‖b‖, tiny)`.
pub fn rel_err(a: &DVector<f64>, b: &DVector<f64>) -> f64 {
    (a - b).norm() / a.norm().max(b.norm()).max(1e-300)
}

/// Minimizer of `½(z − a)² + ε|z|` found by bisection on the monotone
/// optimality condition `0 ∈ z − a + ε ∂|z|`.
pub fn prox_by_bisection(a: f64, eps: f64) -> f64 {
    if a.abs() <= eps {
        return 0.0;
    }
    // the root lies strictly on the side of `a`, where ∂|z| = sign(a)
    let sign = a.signum();
    let phi = |z: f64| z - a + eps * sign;
    let (mut lo, mut hi) = if sign > 0.0 { (0.0, a) } else { (a, 0.0) };
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if phi(mid) < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// Regularized logistic objective written from scratch: per-batch mean
/// losses averaged over batches, plus `λ₁‖x‖² + λ₂‖x‖₁`.
pub struct LogisticOracle {
    rows: Vec<DVector<f64>>,
    labels: Vec<f64>,
    weights: Vec<f64>,
    lambda1: f64,
    lambda2: f64,
}

impl LogisticOracle {
    pub fn new(data: &LabeledDataset, part: &MiniBatchPartition, lambda1: f64, lambda2: f64) -> Self {
        let n = part.batch_count() as f64;
        let mut rows = Vec::new();
        let mut labels = Vec::new();
        let mut weights = Vec::new();
        for batch in part.batches() {
            for &i in batch {
                rows.push(DVector::from_column_slice(data.row(i)));
                labels.push(data.label(i));
                weights.push(1.0 / (n * batch.len() as f64));
            }
        }
        Self { rows, labels, weights, lambda1, lambda2 }
    }

    fn smooth(&self, x: &DVector<f64>) -> (f64, DVector<f64>, DMatrix<f64>) {
        let p = x.len();
        let mut f = self.lambda1 * x.norm_squared();
        let mut g = x * (2.0 * self.lambda1);
        let mut h = DMatrix::identity(p, p) * (2.0 * self.lambda1);
        for ((a, &b), &w) in self.rows.iter().zip(&self.labels).zip(&self.weights) {
            let z = b * a.dot(x);
            // log(1 + e^{-z}) and σ(-z)
            let loss = if z > 0.0 { (-z).exp().ln_1p() } else { -z + z.exp().ln_1p() };
            let s = 1.0 / (1.0 + z.exp());
            f += w * loss;
            g.axpy(-w * b * s, a, 1.0);
            h.ger(w * s * (1.0 - s), a, a, 1.0);
        }
        (f, g, h)
    }

    pub fn objective(&self, x: &DVector<f64>) -> f64 {
        self.smooth(x).0 + self.lambda2 * x.iter().map(|v| v.abs()).sum::<f64>()
    }

    /// Proximal Newton with exact Hessians and coordinate-descent inner
    /// solves. Returns `(x*, f*)`.
    pub fn solve(&self, p: usize) -> (DVector<f64>, f64) {
        let mask = vec![true; p];
        let mut x = DVector::zeros(p);
        let mut fx = self.objective(&x);
        for _ in 0..100 {
            let (_, g, h) = self.smooth(&x);
            let b = &g - &h * &x;
            let z = cd_lasso(&h, &b, self.lambda2, &mask, &x, 1e-14);
            let d = &z - &x;
            if d.amax() < 1e-13 {
                break;
            }
            let l1 = |v: &DVector<f64>| v.iter().map(|c| c.abs()).sum::<f64>();
            let decrease = g.dot(&d) + self.lambda2 * (l1(&z) - l1(&x));
            let mut t = 1.0;
            loop {
                let cand = &x + &d * t;
                let fc = self.objective(&cand);
                if fc <= fx + 0.25 * t * decrease || t < 1e-10 {
                    x = cand;
                    fx = fc;
                    break;
                }
                t *= 0.5;
            }
        }
        (x, fx)
    }
}

/// Least-squares slope of `ys` against `xs`.
pub fn slope(xs: &[f64], ys: &[f64]) -> f64 {
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    sxy / sxx
}
