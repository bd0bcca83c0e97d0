//! Experiment runner: builds a problem from a config, runs one or more
//! optimizers on it and summarizes the traces.

pub mod cli;
pub mod trace;

use std::fmt;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use rayon::prelude::*;

pub use trace::{CsvTraceWriter, NullSink, RunTrace, TraceMeta, TraceRow, TraceSink};

use crate::datasets::{load_libsvm, partition, synth_digits, synth_logistic, LabelMap};
use crate::error::{Error, Result};
use crate::hessian::{DEFAULT_DENSE_CAP, DEFAULT_MAX_HISTORY};
use crate::objectives::{MlpArchitecture, Problem};
use crate::optimizers::{
    run, HessianMode, OptimizerKind, OptimizerSpec, ProxtoneConfig, RunOutcome, SubspaceConfig, ETA_GRID,
};
use crate::prox::RegularizerConfig;
use crate::subproblem::SubproblemConfig;

/// Switch epoch used by PROXTONE⁺ when none is given.
pub const DEFAULT_SWITCH_EPOCH: usize = 5;

/// Magnitude below which subspace-mode coordinates count as zero.
pub const SUBSPACE_NNZ_TAU: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ObjectiveKind {
    Logistic,
    Mlp,
}

#[derive(Debug, Clone, PartialEq)]
pub enum DatasetSource {
    /// LIBSVM file with labels mapped to ±1 (two classes for the MLP).
    File { path: PathBuf, label_map: LabelMap },
    /// Sparse-truth logistic data, see [`synth_logistic`].
    Synthetic { p: usize, m: usize, sparsity: f64 },
    /// Prototype-plus-noise images, see [`synth_digits`].
    Digits { dim: usize, classes: usize, m: usize, noise: f64 },
}

/// Everything needed to reproduce one run.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub optimizer: OptimizerKind,
    pub objective: ObjectiveKind,
    pub dataset: DatasetSource,
    pub batches: usize,
    pub reg: RegularizerConfig,
    pub epochs: usize,
    /// Drives data synthesis, partitioning, MLP initialization and sampling
    /// (each on its own stream).
    pub seed: u64,
    pub hessian: HessianMode,
    pub max_history: usize,
    pub subproblem: SubproblemConfig,
    pub subspace: Option<SubspaceConfig>,
    /// ProxSGD step; `None` searches [`ETA_GRID`].
    pub eta: Option<f64>,
    /// ProxSAG / PROXTONE⁺ step `1/L`; `None` uses the problem's estimate.
    pub lipschitz: Option<f64>,
    pub switch_epoch: Option<usize>,
    /// Hidden units of the MLP.
    pub hidden: usize,
    pub nnz_tau: Option<f64>,
    pub trace: Option<PathBuf>,
    /// Objective threshold reported in the summary.
    pub target: Option<f64>,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            optimizer: OptimizerKind::Proxtone,
            objective: ObjectiveKind::Logistic,
            dataset: DatasetSource::Synthetic { p: 50, m: 1000, sparsity: 0.2 },
            batches: 10,
            reg: RegularizerConfig::default(),
            epochs: 50,
            seed: 7,
            hessian: HessianMode::Lbfgs,
            max_history: DEFAULT_MAX_HISTORY,
            subproblem: SubproblemConfig::default(),
            subspace: None,
            eta: None,
            lipschitz: None,
            switch_epoch: None,
            hidden: 32,
            nnz_tau: None,
            trace: None,
            target: None,
        }
    }
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        if self.batches == 0 {
            return Err(Error::InvalidParameter("batches must be >= 1".into()));
        }
        if self.epochs == 0 {
            return Err(Error::InvalidParameter("epochs must be >= 1".into()));
        }
        if self.max_history == 0 {
            return Err(Error::InvalidParameter("max_history must be >= 1".into()));
        }
        self.subproblem.validate()?;
        RegularizerConfig::new(self.reg.lambda1, self.reg.lambda2)?;
        if let Some(eta) = self.eta {
            if !(eta > 0.0 && eta.is_finite()) {
                return Err(Error::InvalidParameter(format!("eta must be > 0, got {eta}")));
            }
        }
        if let Some(l) = self.lipschitz {
            if !(l > 0.0 && l.is_finite()) {
                return Err(Error::InvalidParameter(format!("lipschitz must be > 0, got {l}")));
            }
        }
        if let Some(tau) = self.nnz_tau {
            if !(tau >= 0.0) {
                return Err(Error::InvalidParameter(format!("nnz tau must be >= 0, got {tau}")));
            }
        }
        match &self.dataset {
            DatasetSource::Synthetic { p, m, sparsity } => {
                if *p == 0 || *m == 0 || !(0.0..=1.0).contains(sparsity) {
                    return Err(Error::InvalidParameter("synthetic spec needs p, m >= 1 and sparsity in [0, 1]".into()));
                }
                if self.objective == ObjectiveKind::Mlp {
                    return Err(Error::InvalidParameter("the MLP objective needs digits or file data".into()));
                }
            }
            DatasetSource::Digits { .. } if self.objective == ObjectiveKind::Logistic => {
                return Err(Error::InvalidParameter("digits data needs the MLP objective".into()));
            }
            _ => {}
        }
        if self.objective == ObjectiveKind::Mlp && self.hidden == 0 {
            return Err(Error::InvalidParameter("hidden must be >= 1".into()));
        }
        Ok(())
    }

    /// Loads or synthesizes the data and assembles the problem.
    pub fn build_problem(&self) -> Result<Problem> {
        self.validate()?;
        match self.objective {
            ObjectiveKind::Logistic => {
                let data = match &self.dataset {
                    DatasetSource::File { path, label_map } => load_libsvm(path, label_map)?,
                    DatasetSource::Synthetic { p, m, sparsity } => synth_logistic(*p, *m, *sparsity, self.seed)?,
                    DatasetSource::Digits { .. } => unreachable!("rejected by validate"),
                };
                let part = partition(data.sample_count(), self.batches, self.seed)?;
                Problem::logistic(Arc::new(data), &part, self.reg)
            }
            ObjectiveKind::Mlp => {
                let data = match &self.dataset {
                    DatasetSource::File { path, label_map } => load_libsvm(path, label_map)?.to_multiclass(),
                    DatasetSource::Digits { dim, classes, m, noise } => {
                        synth_digits(*dim, *classes, *m, *noise, self.seed)?
                    }
                    DatasetSource::Synthetic { .. } => unreachable!("rejected by validate"),
                };
                let arch = MlpArchitecture::new(data.dim(), self.hidden, data.num_classes())?;
                let part = partition(data.sample_count(), self.batches, self.seed)?;
                Problem::mlp(Arc::new(data), arch, &part, self.reg, self.seed)
            }
        }
    }

    fn proxtone_config(&self) -> ProxtoneConfig {
        ProxtoneConfig {
            hessian: self.hessian,
            max_history: self.max_history,
            subproblem: self.subproblem,
            subspace: self.subspace,
            dense_cap: DEFAULT_DENSE_CAP,
        }
    }

    fn lipschitz_for(&self, problem: &Problem) -> Result<f64> {
        self.lipschitz.or_else(|| problem.lipschitz_estimate()).ok_or_else(|| {
            Error::InvalidParameter("this objective has no Lipschitz estimate; pass --lipschitz".into())
        })
    }

    /// The optimizer this config describes. ProxSGD without an explicit η
    /// gets the first grid value; [`run_experiment`] searches the grid.
    pub fn optimizer_spec(&self, problem: &Problem) -> Result<OptimizerSpec> {
        Ok(match self.optimizer {
            OptimizerKind::Proxtone => OptimizerSpec::Proxtone { config: self.proxtone_config(), inexact: false },
            OptimizerKind::ProxtonePlus => OptimizerSpec::ProxtonePlus {
                config: self.proxtone_config(),
                switch_epoch: Some(self.switch_epoch.unwrap_or(DEFAULT_SWITCH_EPOCH)),
                lipschitz: self.lipschitz_for(problem)?,
            },
            OptimizerKind::ProxSgd => OptimizerSpec::ProxSgd { eta: self.eta.unwrap_or(ETA_GRID[0]) },
            OptimizerKind::ProxSag => OptimizerSpec::ProxSag { lipschitz: self.lipschitz_for(problem)? },
        })
    }

    pub fn nnz_tau(&self) -> f64 {
        self.nnz_tau.unwrap_or(if self.subspace.is_some() { SUBSPACE_NNZ_TAU } else { 0.0 })
    }

    /// Same config with another optimizer.
    pub fn with_optimizer(&self, optimizer: OptimizerKind) -> Self {
        Self { optimizer, ..self.clone() }
    }
}

/// Final-state numbers derived from a trace alone.
#[derive(Debug, Clone, PartialEq)]
pub struct Summary {
    pub optimizer: String,
    pub epochs: usize,
    pub final_objective: f64,
    pub final_nnz: usize,
    pub final_sparsity_pct: f64,
    pub grad_evals: u64,
    pub wall_seconds: f64,
    pub target: Option<f64>,
    pub epochs_to_target: Option<usize>,
    pub aborted: Option<String>,
}

impl Summary {
    pub fn from_trace(trace: &RunTrace, target: Option<f64>) -> Result<Self> {
        let last = trace.last().ok_or_else(|| Error::InvalidParameter("empty trace".into()))?;
        Ok(Self {
            optimizer: trace.meta.optimizer.clone(),
            epochs: last.epoch,
            final_objective: last.objective,
            final_nnz: last.nnz,
            final_sparsity_pct: last.sparsity_pct,
            grad_evals: last.grad_evals,
            wall_seconds: last.wall_seconds,
            target,
            epochs_to_target: target.and_then(|t| trace.epochs_to(t)),
            aborted: trace.aborted().map(str::to_string),
        })
    }
}

impl fmt::Display for Summary {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "optimizer        {}", self.optimizer)?;
        writeln!(f, "epochs           {}", self.epochs)?;
        writeln!(f, "final objective  {:.12}", self.final_objective)?;
        writeln!(f, "final nnz        {} ({:.2}%)", self.final_nnz, self.final_sparsity_pct)?;
        writeln!(f, "grad evals       {}", self.grad_evals)?;
        writeln!(f, "wall seconds     {:.3}", self.wall_seconds)?;
        if let Some(t) = self.target {
            match self.epochs_to_target {
                Some(e) => writeln!(f, "epochs to {t:e}  {e}")?,
                None => writeln!(f, "epochs to {t:e}  not reached")?,
            }
        }
        if let Some(reason) = &self.aborted {
            writeln!(f, "ABORTED          {reason}")?;
        }
        Ok(())
    }
}

/// One finished experiment.
#[derive(Debug, Clone)]
pub struct Experiment {
    pub outcome: RunOutcome,
    pub summary: Summary,
    pub spec: OptimizerSpec,
    /// `(η, final objective)` for every grid point tried, if a search ran.
    pub eta_search: Vec<(f64, f64)>,
}

/// Picks ProxSGD's η from [`ETA_GRID`] by lowest final objective. Diverged
/// runs rank last.
pub fn best_eta(problem: &Problem, epochs: usize, seed: u64, nnz_tau: f64) -> Result<(f64, Vec<(f64, f64)>)> {
    let results: Vec<(f64, f64)> = ETA_GRID
        .par_iter()
        .map(|&eta| {
            let out = run(&OptimizerSpec::ProxSgd { eta }, problem, epochs, seed, nnz_tau, &mut NullSink)?;
            let fin = out.trace.last().map_or(f64::INFINITY, |r| r.objective);
            let score = if out.is_aborted() || !fin.is_finite() { f64::INFINITY } else { fin };
            Ok((eta, score))
        })
        .collect::<Result<_>>()?;
    let best = results
        .iter()
        .copied()
        .min_by(|a, b| a.1.total_cmp(&b.1))
        .map(|(eta, _)| eta)
        .expect("grid is non-empty");
    Ok((best, results))
}

/// Runs one experiment on an already-built problem, streaming its trace to
/// `config.trace` when set.
pub fn run_on(config: &ExperimentConfig, problem: &Problem) -> Result<Experiment> {
    let tau = config.nnz_tau();
    let mut eta_search = Vec::new();
    let mut spec = config.optimizer_spec(problem)?;
    if config.optimizer == OptimizerKind::ProxSgd && config.eta.is_none() {
        let (eta, results) = best_eta(problem, config.epochs, config.seed, tau)?;
        log::info!("ProxSGD eta grid: {results:?}, chose {eta}");
        spec = OptimizerSpec::ProxSgd { eta };
        eta_search = results;
    }
    let outcome = match &config.trace {
        Some(path) => {
            let mut sink = CsvTraceWriter::create(path)?;
            run(&spec, problem, config.epochs, config.seed, tau, &mut sink)?
        }
        None => run(&spec, problem, config.epochs, config.seed, tau, &mut NullSink)?,
    };
    let summary = Summary::from_trace(&outcome.trace, config.target)?;
    Ok(Experiment { outcome, summary, spec, eta_search })
}

/// Builds the problem and runs one experiment.
pub fn run_experiment(config: &ExperimentConfig) -> Result<Experiment> {
    let problem = config.build_problem()?;
    run_on(config, &problem)
}

/// `base` with `-name` appended to the file stem.
pub fn suffixed_path(base: &Path, name: &str) -> PathBuf {
    let stem = base.file_stem().map_or_else(|| "trace".into(), |s| s.to_string_lossy().into_owned());
    let file = match base.extension() {
        Some(ext) => format!("{stem}-{name}.{}", ext.to_string_lossy()),
        None => format!("{stem}-{name}"),
    };
    base.with_file_name(file)
}

/// Runs every optimizer on the problem of `base` in parallel. Each run
/// gets its own trace file (`<trace>-<optimizer>.csv`) when `base.trace`
/// is set.
pub fn sweep(base: &ExperimentConfig, kinds: &[OptimizerKind]) -> Result<Vec<Experiment>> {
    let problem = base.build_problem()?;
    let configs: Vec<ExperimentConfig> = kinds
        .iter()
        .map(|&k| {
            let mut c = base.with_optimizer(k);
            c.trace = base.trace.as_deref().map(|p| suffixed_path(p, k.name()));
            c
        })
        .collect();
    configs.par_iter().map(|c| run_on(c, &problem)).collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct ComparisonRow {
    pub name: String,
    pub final_objective: f64,
    pub epochs_to_gap: Option<usize>,
    /// `epochs_to_gap / reference epochs_to_gap` (reference = first row).
    pub ratio: Option<f64>,
}

/// Epochs-to-gap for several runs on one problem, against a shared `f*`.
#[derive(Debug, Clone, PartialEq)]
pub struct ComparisonTable {
    pub f_star: f64,
    pub gap_target: f64,
    pub rows: Vec<ComparisonRow>,
}

impl ComparisonTable {
    pub fn row(&self, name: &str) -> Option<&ComparisonRow> {
        self.rows.iter().find(|r| r.name == name)
    }

    /// `epochs_to_gap(a) / epochs_to_gap(b)`, when both reached the gap.
    pub fn ratio(&self, a: &str, b: &str) -> Option<f64> {
        let ea = self.row(a)?.epochs_to_gap?;
        let eb = self.row(b)?.epochs_to_gap?;
        Some(epoch_ratio(ea, eb))
    }
}

fn epoch_ratio(a: usize, b: usize) -> f64 {
    if a == b {
        1.0
    } else {
        a as f64 / b as f64
    }
}

impl fmt::Display for ComparisonTable {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "f* = {:.12}   gap target = {:e}", self.f_star, self.gap_target)?;
        writeln!(f, "{:<16} {:>20} {:>14} {:>8}", "optimizer", "final objective", "epochs to gap", "ratio")?;
        for r in &self.rows {
            let epochs = r.epochs_to_gap.map_or("not reached".to_string(), |e| e.to_string());
            let ratio = r.ratio.map_or("-".to_string(), |x| format!("{x:.3}"));
            writeln!(f, "{:<16} {:>20.12} {:>14} {:>8}", r.name, r.final_objective, epochs, ratio)?;
        }
        Ok(())
    }
}

/// Safety margin subtracted from the best final objective to form `f*`.
pub fn f_star_margin(best: f64) -> f64 {
    1e-12 * best.abs().max(1.0)
}

/// Compares named traces. `f*` is the lowest final objective over runs that
/// completed, minus [`f_star_margin`].
pub fn compare_traces(named: &[(String, &RunTrace)], gap_target: f64) -> Result<ComparisonTable> {
    let best = named
        .iter()
        .filter(|(_, t)| t.aborted().is_none())
        .filter_map(|(_, t)| t.last().map(|r| r.objective))
        .filter(|f| f.is_finite())
        .fold(f64::INFINITY, f64::min);
    if !best.is_finite() {
        return Err(Error::InvalidParameter("no completed run to take f* from".into()));
    }
    Ok(compare_traces_with(named, best - f_star_margin(best), gap_target))
}

/// Like [`compare_traces`] with a given reference optimum.
pub fn compare_traces_with(named: &[(String, &RunTrace)], f_star: f64, gap_target: f64) -> ComparisonTable {
    let mut rows: Vec<ComparisonRow> = named
        .iter()
        .map(|(name, t)| ComparisonRow {
            name: name.clone(),
            final_objective: t.last().map_or(f64::NAN, |r| r.objective),
            epochs_to_gap: t.epochs_to(f_star + gap_target),
            ratio: None,
        })
        .collect();
    let reference = rows.first().and_then(|r| r.epochs_to_gap);
    for r in &mut rows {
        r.ratio = match (r.epochs_to_gap, reference) {
            (Some(e), Some(base)) => Some(epoch_ratio(e, base)),
            _ => None,
        };
    }
    ComparisonTable { f_star, gap_target, rows }
}

/// Runs configs that share one problem and compares them.
pub fn compare(configs: &[ExperimentConfig], gap_target: f64) -> Result<(Vec<Experiment>, ComparisonTable)> {
    let first = configs.first().ok_or_else(|| Error::InvalidParameter("nothing to compare".into()))?;
    for c in configs {
        if c.dataset != first.dataset
            || c.objective != first.objective
            || c.seed != first.seed
            || c.batches != first.batches
            || c.reg != first.reg
        {
            return Err(Error::InvalidParameter("compared configs must share data, partition and λs".into()));
        }
    }
    let problem = first.build_problem()?;
    let runs: Vec<Experiment> = configs.par_iter().map(|c| run_on(c, &problem)).collect::<Result<_>>()?;
    let named: Vec<(String, &RunTrace)> =
        runs.iter().map(|e| (e.outcome.trace.meta.optimizer.clone(), &e.outcome.trace)).collect();
    let table = compare_traces(&named, gap_target)?;
    Ok((runs, table))
}
