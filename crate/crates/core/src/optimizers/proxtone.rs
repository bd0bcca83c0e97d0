use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::hessian::{
    bfgs_rebuild, constant_diagonal, CurvatureHistory, HessianApprox, DEFAULT_DENSE_CAP, DEFAULT_MAX_HISTORY,
};
use crate::objectives::Problem;
use crate::optimizers::{ensure_finite, sample_batch, Diagnostics, Optimizer, StepContext};
use crate::subproblem::{solve_lasso, SubproblemConfig};
use crate::surrogate::{
    QuadraticModel, QuadraticSurrogate, SharedSubspace, SubspaceSurrogate, Surrogate, DEFAULT_EPS_EXPAND,
    DEFAULT_GAMMA,
};
use crate::ParamVector;

/// How per-batch Hessians are formed.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum HessianMode {
    /// Rebuilt from the batch's curvature history by BFGS.
    Lbfgs,
    /// Constant `scale · I`.
    Diagonal(f64),
}

/// Shared low-dimensional subspace settings.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SubspaceConfig {
    /// Basis capacity, at least `2n + 2` (or `p`); `None` means `3n + 10`.
    pub q_max: Option<usize>,
    pub eps_expand: f64,
    pub gamma: f64,
}

impl Default for SubspaceConfig {
    fn default() -> Self {
        Self { q_max: None, eps_expand: DEFAULT_EPS_EXPAND, gamma: DEFAULT_GAMMA }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ProxtoneConfig {
    pub hessian: HessianMode,
    pub max_history: usize,
    pub subproblem: SubproblemConfig,
    pub subspace: Option<SubspaceConfig>,
    /// Largest dimension allowed for dense full-space Hessians.
    pub dense_cap: usize,
}

impl Default for ProxtoneConfig {
    fn default() -> Self {
        Self {
            hessian: HessianMode::Lbfgs,
            max_history: DEFAULT_MAX_HISTORY,
            subproblem: SubproblemConfig::default(),
            subspace: None,
            dense_cap: DEFAULT_DENSE_CAP,
        }
    }
}

impl ProxtoneConfig {
    pub(crate) fn describe(&self) -> String {
        let hessian = match self.hessian {
            HessianMode::Lbfgs => "lbfgs".to_string(),
            HessianMode::Diagonal(s) => format!("diagonal:{s}"),
        };
        let subspace = self
            .subspace
            .map_or("off".to_string(), |s| s.q_max.map_or("auto".to_string(), |q| q.to_string()));
        format!(
            "hessian={hessian} max_history={} sub_max_iter={} sub_abstol={} subspace={subspace}",
            self.max_history, self.subproblem.max_iter, self.subproblem.abstol
        )
    }

    fn validate(&self, dim: usize, batches: usize) -> Result<()> {
        self.subproblem.validate()?;
        if self.max_history == 0 {
            return Err(Error::InvalidParameter("max_history must be >= 1".into()));
        }
        if let HessianMode::Diagonal(s) = self.hessian {
            constant_diagonal(1, s)?;
        }
        if self.subspace.is_none() && self.hessian == HessianMode::Lbfgs && dim > self.dense_cap {
            return Err(Error::InvalidParameter(format!(
                "dimension {dim} exceeds the dense Hessian cap {}; enable subspace mode",
                self.dense_cap
            )));
        }
        // a collapse keeps the iterate, the surrogate gradient and every
        // batch's reference point and gradient; a smaller basis would leave
        // parts of the gradient on the weakly curved complement
        if let Some(q) = self.subspace.and_then(|s| s.q_max) {
            let needed = (2 * batches + 2).min(dim);
            if q < needed {
                return Err(Error::InvalidParameter(format!(
                    "subspace capacity {q} is below {needed} (2 per batch + 2)"
                )));
            }
        }
        Ok(())
    }
}

struct State {
    surrogate: Surrogate,
    history: CurvatureHistory,
}

/// Proximal stochastic Newton-type method.
///
/// Each step minimizes the L1-regularized surrogate `G(x) + λ₂‖x‖₁` from the
/// current iterate, samples one mini-batch, records its curvature pair,
/// rebuilds that batch's Hessian and re-anchors its quadratic model at the
/// new iterate. The surrogate is built from gradients at the initial point
/// on the first step.
pub struct Proxtone {
    config: ProxtoneConfig,
    inexact: bool,
    x: ParamVector,
    initial_hessians: Option<Vec<HessianApprox>>,
    state: Option<State>,
    grad_evals: u64,
    diagnostics: Diagnostics,
}

impl Proxtone {
    pub fn new(problem: &Problem, x0: ParamVector, config: ProxtoneConfig, inexact: bool) -> Result<Self> {
        config.validate(problem.dim(), problem.component_count())?;
        Ok(Self {
            config,
            inexact,
            x: x0,
            initial_hessians: None,
            state: None,
            grad_evals: 0,
            diagnostics: Diagnostics::default(),
        })
    }

    /// Uses the given per-batch Hessians for the initial surrogate instead
    /// of the configured mode (full-space only).
    pub fn with_initial_hessians(mut self, hessians: Vec<HessianApprox>) -> Result<Self> {
        if self.config.subspace.is_some() {
            return Err(Error::InvalidParameter("initial Hessians are not supported in subspace mode".into()));
        }
        self.initial_hessians = Some(hessians);
        Ok(self)
    }

    pub fn surrogate(&self) -> Option<&Surrogate> {
        self.state.as_ref().map(|s| &s.surrogate)
    }

    pub fn history(&self) -> Option<&CurvatureHistory> {
        self.state.as_ref().map(|s| &s.history)
    }

    fn fresh_hessian(&self, dim: usize) -> Result<HessianApprox> {
        match self.config.hessian {
            HessianMode::Lbfgs => Ok(HessianApprox::identity(dim)),
            HessianMode::Diagonal(scale) => constant_diagonal(dim, scale),
        }
    }

    fn initialize(&mut self, problem: &Problem) -> Result<()> {
        let n = problem.component_count();
        let p = problem.dim();
        let mut history = CurvatureHistory::new(n, p, self.config.max_history)?;
        let mut values = Vec::with_capacity(n);
        let mut grads = Vec::with_capacity(n);
        for (i, c) in problem.components().iter().enumerate() {
            let (v, g) = c.value_grad(&self.x)?;
            history.init_batch(i, &self.x, &g)?;
            values.push(v);
            grads.push(g);
        }
        self.grad_evals += n as u64;

        let surrogate = match self.config.subspace {
            None => {
                let hessians = match self.initial_hessians.take() {
                    Some(h) => h,
                    None => (0..n).map(|_| self.fresh_hessian(p)).collect::<Result<_>>()?,
                };
                if hessians.len() != n {
                    return Err(Error::DimensionMismatch { expected: n, got: hessians.len() });
                }
                let models = values
                    .into_iter()
                    .zip(grads)
                    .zip(hessians)
                    .map(|((v, g), h)| crate::surrogate::ComponentModel::new(self.x.clone(), v, g, h))
                    .collect::<Result<Vec<_>>>()?;
                Surrogate::Full(QuadraticSurrogate::from_models(models)?)
            }
            Some(sub) => {
                let q_max = sub.q_max.unwrap_or(3 * n + 10);
                let basis = SharedSubspace::new(p, q_max, sub.eps_expand, sub.gamma)?;
                let mut s = SubspaceSurrogate::init(basis, &self.x, &values, &grads)?;
                if let HessianMode::Diagonal(scale) = self.config.hessian {
                    let q = s.subspace().rank();
                    for (i, g) in grads.iter().enumerate() {
                        let core = nalgebra::DMatrix::identity(q, q) * scale;
                        s.replace_component(i, &self.x, values[i], g, core)?;
                    }
                }
                Surrogate::Subspace(s)
            }
        };
        self.state = Some(State { surrogate, history });
        Ok(())
    }

    /// One step with a given mini-batch.
    pub fn step_on(&mut self, problem: &Problem, batch: usize) -> Result<()> {
        self.solve(problem)?;
        self.refresh(problem, batch)
    }

    /// Minimizes the current surrogate plus L1 from `x` and moves there.
    fn solve(&mut self, problem: &Problem) -> Result<()> {
        if self.state.is_none() {
            self.initialize(problem)?;
        }
        let state = self.state.as_ref().expect("initialized above");
        let mut sub = self.config.subproblem;
        if self.inexact {
            sub = sub.inexact();
        }
        let sol = solve_lasso(&state.surrogate, problem.regularizer().lambda2, &self.x, &sub, problem.mask())?;
        self.diagnostics.subproblem_solves += 1;
        if sub.max_iter > 1 && !sol.converged {
            self.diagnostics.unconverged_solves += 1;
        }
        ensure_finite(&sol.x, "PROXTONE iterate")?;
        self.x = sol.x;
        Ok(())
    }

    /// Samples-independent half of the step: observe batch `i` at the new
    /// iterate and replace its quadratic model.
    fn refresh(&mut self, problem: &Problem, batch: usize) -> Result<()> {
        let (value, grad) = problem.component(batch).value_grad(&self.x)?;
        self.grad_evals += 1;
        ensure_finite(&grad, "mini-batch gradient")?;
        let hessian_mode = self.config.hessian;
        let fresh = match hessian_mode {
            HessianMode::Diagonal(_) => Some(self.fresh_hessian(self.x.len())?),
            HessianMode::Lbfgs => None,
        };
        let state = self.state.as_mut().expect("initialized in solve");
        state.history.record_observation(batch, &self.x, &grad)?;

        match &mut state.surrogate {
            Surrogate::Full(s) => {
                let hessian = match fresh {
                    Some(h) => h,
                    None => {
                        let (h, stats) = bfgs_rebuild(&state.history, batch);
                        self.diagnostics.accepted_pairs += stats.accepted as u64;
                        self.diagnostics.skipped_pairs += stats.skipped as u64;
                        h
                    }
                };
                s.replace_component(batch, &self.x, value, &grad, hessian)?;
                debug_assert!({
                    let m = s.component(batch);
                    (m.gradient(&self.x) - &grad).amax() <= 1e-8 * grad.amax().max(1.0)
                });
            }
            Surrogate::Subspace(s) => {
                for v in [&self.x, &grad] {
                    if !s.expand(v)? {
                        let mut keep = vec![self.x.clone(), s.gradient(&self.x)];
                        for i in 0..problem.component_count() {
                            keep.extend(state.history.last_x(i).cloned());
                            keep.extend(state.history.last_grad(i).cloned());
                        }
                        s.collapse(&keep)?;
                        self.diagnostics.subspace_collapses += 1;
                        s.expand(v)?;
                    }
                }
                let core = match hessian_mode {
                    HessianMode::Diagonal(scale) => {
                        let q = s.subspace().rank();
                        nalgebra::DMatrix::identity(q, q) * scale
                    }
                    HessianMode::Lbfgs => {
                        let (core, stats) = s.rebuild_core(&state.history, batch);
                        self.diagnostics.accepted_pairs += stats.accepted as u64;
                        self.diagnostics.skipped_pairs += stats.skipped as u64;
                        core
                    }
                };
                s.replace_component(batch, &self.x, value, &grad, core)?;
            }
        }
        Ok(())
    }
}

impl Optimizer for Proxtone {
    fn step(&mut self, problem: &Problem, _ctx: StepContext, rng: &mut ChaCha8Rng) -> Result<()> {
        self.solve(problem)?;
        let batch = sample_batch(rng, problem.component_count());
        self.refresh(problem, batch)
    }

    fn x(&self) -> &ParamVector {
        &self.x
    }

    fn grad_evals(&self) -> u64 {
        self.grad_evals
    }

    fn diagnostics(&self) -> Diagnostics {
        self.diagnostics
    }
}
