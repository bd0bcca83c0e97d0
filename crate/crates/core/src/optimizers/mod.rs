//! Training loops behind one stepping interface, and the epoch driver that
//! records a [`RunTrace`](crate::harness::RunTrace).

mod plus;
mod proxsag;
mod proxsgd;
mod proxtone;

use std::fmt;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub use plus::ProxtonePlus;
pub use proxsag::ProxSag;
pub use proxsgd::ProxSgd;
pub use proxtone::{HessianMode, Proxtone, ProxtoneConfig, SubspaceConfig};

use crate::error::{Error, Result};
use crate::harness::trace::{RunTrace, TraceMeta, TraceRow, TraceSink};
use crate::objectives::Problem;
use crate::prox::nnz;
use crate::ParamVector;

/// Stream id of the sampling generator, distinct from the streams used for
/// data generation and partitioning with the same seed.
const SAMPLER_STREAM: u64 = 0x5a3;

/// Grid searched for ProxSGD's constant step when none is given.
pub const ETA_GRID: [f64; 6] = [1e-4, 1e-3, 1e-2, 1e-1, 1.0, 10.0];

/// Seeded generator for mini-batch draws.
pub fn sampler(seed: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(SAMPLER_STREAM);
    rng
}

/// Uniform draw from `0..n`, with replacement.
pub fn sample_batch(rng: &mut ChaCha8Rng, n: usize) -> usize {
    rng.random_range(0..n)
}

/// Position of a step within the run.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct StepContext {
    pub iteration: usize,
    /// `iteration / n`
    pub epoch: usize,
}

/// Counters collected by an optimizer over a run.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct Diagnostics {
    pub accepted_pairs: u64,
    pub skipped_pairs: u64,
    pub subproblem_solves: u64,
    /// Solves that hit `max_iter` before the `abstol` test fired.
    pub unconverged_solves: u64,
    pub subspace_collapses: u64,
}

/// One stochastic optimizer. Each call to `step` samples one mini-batch.
pub trait Optimizer: Send {
    fn step(&mut self, problem: &Problem, ctx: StepContext, rng: &mut ChaCha8Rng) -> Result<()>;

    fn x(&self) -> &ParamVector;

    /// Mini-batch gradient evaluations so far.
    fn grad_evals(&self) -> u64;

    fn diagnostics(&self) -> Diagnostics {
        Diagnostics::default()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum OptimizerKind {
    Proxtone,
    ProxtonePlus,
    ProxSgd,
    ProxSag,
}

impl OptimizerKind {
    pub fn name(&self) -> &'static str {
        match self {
            Self::Proxtone => "proxtone",
            Self::ProxtonePlus => "proxtone-plus",
            Self::ProxSgd => "proxsgd",
            Self::ProxSag => "proxsag",
        }
    }

    pub const ALL: [OptimizerKind; 4] = [Self::Proxtone, Self::ProxtonePlus, Self::ProxSgd, Self::ProxSag];
}

impl fmt::Display for OptimizerKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for OptimizerKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| Error::InvalidParameter(format!("unknown optimizer `{s}`")))
    }
}

/// A fully parameterized optimizer.
#[derive(Debug, Clone, PartialEq)]
pub enum OptimizerSpec {
    /// `inexact` forces single-iteration subproblem solves.
    Proxtone { config: ProxtoneConfig, inexact: bool },
    /// PROXTONE with inexact solves for `switch_epoch` epochs, ProxSAG after.
    /// `None` never switches.
    ProxtonePlus { config: ProxtoneConfig, switch_epoch: Option<usize>, lipschitz: f64 },
    ProxSgd { eta: f64 },
    ProxSag { lipschitz: f64 },
}

impl OptimizerSpec {
    pub fn kind(&self) -> OptimizerKind {
        match self {
            Self::Proxtone { .. } => OptimizerKind::Proxtone,
            Self::ProxtonePlus { .. } => OptimizerKind::ProxtonePlus,
            Self::ProxSgd { .. } => OptimizerKind::ProxSgd,
            Self::ProxSag { .. } => OptimizerKind::ProxSag,
        }
    }

    pub fn build(&self, problem: &Problem) -> Result<Box<dyn Optimizer>> {
        let x0 = problem.initial_point().clone();
        Ok(match self {
            Self::Proxtone { config, inexact } => Box::new(Proxtone::new(problem, x0, config.clone(), *inexact)?),
            Self::ProxtonePlus { config, switch_epoch, lipschitz } => {
                Box::new(ProxtonePlus::new(problem, x0, config.clone(), *switch_epoch, *lipschitz)?)
            }
            Self::ProxSgd { eta } => Box::new(ProxSgd::new(x0, *eta)?),
            Self::ProxSag { lipschitz } => Box::new(ProxSag::new(x0, *lipschitz)?),
        })
    }

    fn describe(&self) -> String {
        match self {
            Self::Proxtone { config, inexact } => format!("{} inexact={inexact}", config.describe()),
            Self::ProxtonePlus { config, switch_epoch, lipschitz } => format!(
                "{} switch_epoch={} lipschitz={lipschitz}",
                config.describe(),
                switch_epoch.map_or("never".to_string(), |n| n.to_string())
            ),
            Self::ProxSgd { eta } => format!("eta={eta}"),
            Self::ProxSag { lipschitz } => format!("lipschitz={lipschitz}"),
        }
    }
}

/// How a run ended.
#[derive(Debug, Clone, PartialEq)]
pub enum RunStatus {
    Completed,
    /// A step failed; the trace holds every epoch completed before it.
    Aborted(String),
}

#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub trace: RunTrace,
    pub x: ParamVector,
    pub status: RunStatus,
    pub diagnostics: Diagnostics,
}

impl RunOutcome {
    pub fn is_aborted(&self) -> bool {
        matches!(self.status, RunStatus::Aborted(_))
    }
}

fn trace_row(
    problem: &Problem,
    x: &ParamVector,
    epoch: usize,
    wall: f64,
    grad_evals: u64,
    nnz_tau: f64,
) -> Result<TraceRow> {
    let count = nnz(x, nnz_tau);
    Ok(TraceRow {
        epoch,
        wall_seconds: wall,
        objective: problem.objective(x)?,
        nnz: count,
        sparsity_pct: 100.0 * count as f64 / x.len() as f64,
        grad_evals,
    })
}

/// Runs `epochs · n` steps from the problem's initial point, recording one
/// trace row at epoch 0 and one after every epoch.
///
/// Step failures end the run early with [`RunStatus::Aborted`]; errors from
/// the sink or from evaluating the trace objective are returned.
pub fn run(
    spec: &OptimizerSpec,
    problem: &Problem,
    epochs: usize,
    seed: u64,
    nnz_tau: f64,
    sink: &mut dyn TraceSink,
) -> Result<RunOutcome> {
    if epochs == 0 {
        return Err(Error::InvalidParameter("epochs must be >= 1".into()));
    }
    let mut optimizer = spec.build(problem)?;
    let n = problem.component_count();
    let mut rng = sampler(seed);
    let meta = TraceMeta { optimizer: spec.kind().name().to_string(), seed, flags: spec.describe() };
    let mut trace = RunTrace::new(meta);

    let mut record = |row: TraceRow, trace: &mut RunTrace| -> Result<()> {
        sink.record(&row)?;
        trace.push(row);
        Ok(())
    };

    let row = trace_row(problem, optimizer.x(), 0, 0.0, optimizer.grad_evals(), nnz_tau)?;
    record(row, &mut trace)?;

    let mut wall = 0.0;
    let mut status = RunStatus::Completed;
    'epochs: for epoch in 0..epochs {
        let start = Instant::now();
        for k in epoch * n..(epoch + 1) * n {
            let ctx = StepContext { iteration: k, epoch };
            if let Err(e) = optimizer.step(problem, ctx, &mut rng) {
                log::warn!("{} aborted at iteration {k}: {e}", spec.kind());
                status = RunStatus::Aborted(e.to_string());
                break 'epochs;
            }
        }
        wall += start.elapsed().as_secs_f64();
        let row = trace_row(problem, optimizer.x(), epoch + 1, wall, optimizer.grad_evals(), nnz_tau)?;
        record(row, &mut trace)?;
    }

    if let RunStatus::Aborted(reason) = &status {
        trace.mark_aborted(reason.clone());
    }
    Ok(RunOutcome { trace, x: optimizer.x().clone(), status, diagnostics: optimizer.diagnostics() })
}

pub(crate) fn ensure_finite(x: &ParamVector, what: &str) -> Result<()> {
    if x.iter().all(|v| v.is_finite()) {
        Ok(())
    } else {
        Err(Error::Diverged(format!("non-finite {what}")))
    }
}
