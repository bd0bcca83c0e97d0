//! Surrogate restricted to a shared adaptive low-dimensional subspace.
//!
//! Every component Hessian has the form `H_i = Q C_i Qᵀ + γ (I − QQᵀ)` where
//! `Q` is an orthonormal `p × q` basis shared by all components, `C_i` is a
//! `q × q` symmetric positive-definite core and `γ > 0` damps the orthogonal
//! complement. Products with `H_i` cost `O(pq)`, and the lasso subproblem is
//! still solved in the original coordinates so the L1 geometry is preserved.

use nalgebra::DMatrix;

use crate::error::{check_dim, Error, Result};
use crate::hessian::{bfgs_apply, CurvatureHistory, RebuildStats};
use crate::surrogate::QuadraticModel;
use crate::ParamVector;

pub const DEFAULT_EPS_EXPAND: f64 = 1e-8;
pub const DEFAULT_GAMMA: f64 = 1e-4;

// residual floor below which a vector counts as dependent even with eps_expand = 0
const DEPENDENCE_FLOOR: f64 = 1e-12;

/// Orthonormal basis that grows with new observations up to `q_max` columns.
#[derive(Debug, Clone)]
pub struct SharedSubspace {
    dim: usize,
    columns: Vec<ParamVector>,
    q_max: usize,
    eps_expand: f64,
    gamma: f64,
}

impl SharedSubspace {
    pub fn new(dim: usize, q_max: usize, eps_expand: f64, gamma: f64) -> Result<Self> {
        if q_max == 0 {
            return Err(Error::InvalidParameter("subspace capacity must be >= 1".into()));
        }
        if !(eps_expand >= 0.0) {
            return Err(Error::InvalidParameter("eps_expand must be >= 0".into()));
        }
        if !(gamma > 0.0) {
            return Err(Error::InvalidParameter("gamma must be > 0".into()));
        }
        Ok(Self { dim, columns: Vec::new(), q_max, eps_expand, gamma })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn rank(&self) -> usize {
        self.columns.len()
    }

    pub fn capacity(&self) -> usize {
        self.q_max
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    pub fn columns(&self) -> &[ParamVector] {
        &self.columns
    }

    pub fn basis_matrix(&self) -> DMatrix<f64> {
        if self.columns.is_empty() {
            return DMatrix::zeros(self.dim, 0);
        }
        DMatrix::from_columns(&self.columns)
    }

    pub fn is_full(&self) -> bool {
        self.columns.len() >= self.q_max.min(self.dim)
    }

    /// `Qᵀ v`
    pub fn coords(&self, v: &ParamVector) -> ParamVector {
        ParamVector::from_iterator(self.columns.len(), self.columns.iter().map(|q| q.dot(v)))
    }

    /// `Q c`
    pub fn lift(&self, c: &ParamVector) -> ParamVector {
        let mut out = ParamVector::zeros(self.dim);
        for (q, &ci) in self.columns.iter().zip(c.iter()) {
            out.axpy(ci, q, 1.0);
        }
        out
    }

    fn residual(&self, v: &ParamVector) -> ParamVector {
        // two passes of classical Gram-Schmidt
        let mut r = v.clone();
        for _ in 0..2 {
            for q in &self.columns {
                let d = q.dot(&r);
                r.axpy(-d, q, 1.0);
            }
        }
        r
    }

    fn expansion_threshold(&self, v: &ParamVector) -> f64 {
        self.eps_expand.max(DEPENDENCE_FLOOR) * v.norm().max(1.0)
    }

    /// Appends the normalized residual of `v` when it is large enough and the
    /// basis has room. Returns whether a column was added.
    pub fn project_expand(&mut self, v: &ParamVector) -> Result<bool> {
        check_dim(self.dim, v.len())?;
        if self.is_full() {
            return Ok(false);
        }
        let r = self.residual(v);
        let norm = r.norm();
        if norm > self.expansion_threshold(v) && norm.is_finite() {
            self.columns.push(r / norm);
            return Ok(true);
        }
        Ok(false)
    }

    /// Whether `v` would need a new column to be represented.
    pub fn needs_expansion(&self, v: &ParamVector) -> bool {
        self.residual(v).norm() > self.expansion_threshold(v)
    }

    /// Replaces the basis by the orthonormalized `keep` vectors, in order,
    /// dropping near-dependent ones and stopping at capacity.
    pub fn collapse(&mut self, keep: &[ParamVector]) -> Result<()> {
        self.columns.clear();
        for v in keep {
            check_dim(self.dim, v.len())?;
            if self.is_full() {
                break;
            }
            self.project_expand(v)?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
struct SubComponent {
    anchor: ParamVector,
    value: f64,
    grad: ParamVector,
    core: DMatrix<f64>,
    alpha: f64,
    beta: ParamVector,
}

/// Subspace counterpart of [`super::QuadraticSurrogate`].
#[derive(Debug, Clone)]
pub struct SubspaceSurrogate {
    subspace: SharedSubspace,
    components: Vec<SubComponent>,
    sum_alpha: f64,
    sum_beta: ParamVector,
    sum_core: DMatrix<f64>,
}

impl SubspaceSurrogate {
    /// All components anchored at `x0` with cores equal to the identity on
    /// the current basis. The basis is first expanded with `x0` and every
    /// anchor gradient.
    pub fn init(
        mut subspace: SharedSubspace,
        x0: &ParamVector,
        values: &[f64],
        grads: &[ParamVector],
    ) -> Result<Self> {
        check_dim(values.len(), grads.len())?;
        if values.is_empty() {
            return Err(Error::EmptyComponents);
        }
        subspace.project_expand(x0)?;
        for g in grads {
            subspace.project_expand(g)?;
        }
        let q = subspace.rank();
        let components = values
            .iter()
            .zip(grads)
            .map(|(&value, grad)| SubComponent {
                anchor: x0.clone(),
                value,
                grad: grad.clone(),
                core: DMatrix::identity(q, q),
                alpha: 0.0,
                beta: ParamVector::zeros(0),
            })
            .collect();
        let mut sur = Self {
            sum_beta: ParamVector::zeros(subspace.dim()),
            sum_core: DMatrix::zeros(q, q),
            subspace,
            components,
            sum_alpha: 0.0,
        };
        sur.refresh_all();
        Ok(sur)
    }

    pub fn subspace(&self) -> &SharedSubspace {
        &self.subspace
    }

    pub fn component_count(&self) -> usize {
        self.components.len()
    }

    pub fn anchor(&self, i: usize) -> &ParamVector {
        &self.components[i].anchor
    }

    pub fn core(&self, i: usize) -> &DMatrix<f64> {
        &self.components[i].core
    }

    /// `H_i v` for one component.
    fn component_hess_mul(&self, core: &DMatrix<f64>, v: &ParamVector) -> ParamVector {
        let c = self.subspace.coords(v);
        let gamma = self.subspace.gamma();
        let lifted = self.subspace.lift(&(core * &c - &c * gamma));
        lifted + v * gamma
    }

    fn expanded_terms(&self, comp: &SubComponent) -> (f64, ParamVector) {
        let h_anchor = self.component_hess_mul(&comp.core, &comp.anchor);
        let beta = &comp.grad - &h_anchor;
        let alpha = comp.value - comp.grad.dot(&comp.anchor) + 0.5 * comp.anchor.dot(&h_anchor);
        (alpha, beta)
    }

    fn refresh_all(&mut self) {
        let terms: Vec<_> = self.components.iter().map(|c| self.expanded_terms(c)).collect();
        for (comp, (alpha, beta)) in self.components.iter_mut().zip(terms) {
            comp.alpha = alpha;
            comp.beta = beta;
        }
        let q = self.subspace.rank();
        self.sum_alpha = self.components.iter().map(|c| c.alpha).sum();
        self.sum_beta = ParamVector::zeros(self.subspace.dim());
        self.sum_core = DMatrix::zeros(q, q);
        for c in &self.components {
            self.sum_beta += &c.beta;
            self.sum_core += &c.core;
        }
    }

    /// Adds a basis direction for `v` if needed. Cores are padded with `γ` on
    /// the new diagonal entry, which leaves every `H_i` unchanged. Returns
    /// `false` when `v` is not representable and the basis is at capacity.
    pub fn expand(&mut self, v: &ParamVector) -> Result<bool> {
        if !self.subspace.needs_expansion(v) {
            return Ok(true);
        }
        if !self.subspace.project_expand(v)? {
            return Ok(false);
        }
        let gamma = self.subspace.gamma();
        let pad = |m: &DMatrix<f64>, diag: f64| {
            let q = m.nrows();
            let mut out = DMatrix::zeros(q + 1, q + 1);
            out.view_mut((0, 0), (q, q)).copy_from(m);
            out[(q, q)] = diag;
            out
        };
        for c in &mut self.components {
            c.core = pad(&c.core, gamma);
        }
        let n = self.components.len() as f64;
        self.sum_core = pad(&self.sum_core, n * gamma);
        Ok(true)
    }

    /// Rebuilds the basis from `keep` and re-expresses every core in it as
    /// `RᵀC R + γ(I − RᵀR)` with `R = Q_oldᵀ Q_new`. Expanded terms and
    /// aggregates are recomputed from the stored anchors.
    pub fn collapse(&mut self, keep: &[ParamVector]) -> Result<()> {
        let old = self.subspace.basis_matrix();
        self.subspace.collapse(keep)?;
        let new = self.subspace.basis_matrix();
        let r = old.transpose() * &new;
        let q = new.ncols();
        let complement = DMatrix::identity(q, q) - r.transpose() * &r;
        let gamma = self.subspace.gamma();
        for c in &mut self.components {
            let core = r.transpose() * &c.core * &r + &complement * gamma;
            c.core = (&core + core.transpose()) * 0.5;
        }
        self.refresh_all();
        Ok(())
    }

    /// BFGS rebuild of a core from the projected history of `batch`,
    /// starting from the identity on the current basis.
    pub fn rebuild_core(&self, history: &CurvatureHistory, batch: usize) -> (DMatrix<f64>, RebuildStats) {
        let q = self.subspace.rank();
        let projected: Vec<(ParamVector, ParamVector)> = history
            .pairs_oldest_first(batch)
            .map(|(s, y)| (self.subspace.coords(s), self.subspace.coords(y)))
            .collect();
        bfgs_apply(DMatrix::identity(q, q), projected.iter().map(|(s, y)| (s, y)))
    }

    /// Re-anchors component `batch` at `x_new` with a new core.
    pub fn replace_component(
        &mut self,
        batch: usize,
        x_new: &ParamVector,
        value_new: f64,
        grad_new: &ParamVector,
        core: DMatrix<f64>,
    ) -> Result<()> {
        check_dim(self.subspace.dim(), x_new.len())?;
        check_dim(self.subspace.rank(), core.nrows())?;
        let mut comp = SubComponent {
            anchor: x_new.clone(),
            value: value_new,
            grad: grad_new.clone(),
            core,
            alpha: 0.0,
            beta: ParamVector::zeros(0),
        };
        let (alpha, beta) = self.expanded_terms(&comp);
        comp.alpha = alpha;
        comp.beta = beta;
        let old = &self.components[batch];
        self.sum_alpha += comp.alpha - old.alpha;
        self.sum_beta += &comp.beta - &old.beta;
        self.sum_core += &comp.core - &old.core;
        self.components[batch] = comp;
        Ok(())
    }

    /// `(1/n) Σ g_i^k(x)` evaluated component by component.
    pub fn mean_of_components(&self, x: &ParamVector) -> f64 {
        let total: f64 = self
            .components
            .iter()
            .map(|c| c.alpha + c.beta.dot(x) + 0.5 * x.dot(&self.component_hess_mul(&c.core, x)))
            .sum();
        total / self.components.len() as f64
    }

    /// Dense aggregate Hessian (for tests on small instances).
    pub fn dense_hessian(&self) -> DMatrix<f64> {
        let n = self.components.len() as f64;
        let q = self.subspace.basis_matrix();
        let p = self.subspace.dim();
        let gamma = self.subspace.gamma();
        let qqt = &q * q.transpose();
        &q * (&self.sum_core / n) * q.transpose() + (DMatrix::identity(p, p) - qqt) * gamma
    }

    fn hess_mul(&self, x: &ParamVector) -> ParamVector {
        let n = self.components.len() as f64;
        let c = self.subspace.coords(x);
        let gamma = self.subspace.gamma();
        let inner = &self.sum_core * &c / n - &c * gamma;
        self.subspace.lift(&inner) + x * gamma
    }
}

impl QuadraticModel for SubspaceSurrogate {
    fn dim(&self) -> usize {
        self.subspace.dim()
    }

    fn value(&self, x: &ParamVector) -> f64 {
        self.value_grad(x).0
    }

    fn gradient(&self, x: &ParamVector) -> ParamVector {
        let n = self.components.len() as f64;
        self.hess_mul(x) + &self.sum_beta / n
    }

    fn value_grad(&self, x: &ParamVector) -> (f64, ParamVector) {
        let n = self.components.len() as f64;
        let hx = self.hess_mul(x);
        let value = (self.sum_alpha + self.sum_beta.dot(x)) / n + 0.5 * x.dot(&hx);
        (value, hx + &self.sum_beta / n)
    }
}
