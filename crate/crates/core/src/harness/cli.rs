//! Command-line front end for the experiment runner.

use std::ffi::OsString;
use std::io::Write;
use std::path::PathBuf;

use clap::{Parser, ValueEnum};

use crate::datasets::LabelMap;
use crate::error::{Error, Result};
use crate::harness::{
    compare_traces, run_experiment, sweep, DatasetSource, ExperimentConfig, ObjectiveKind, RunTrace,
};
use crate::optimizers::{HessianMode, OptimizerKind, SubspaceConfig};
use crate::prox::RegularizerConfig;
use crate::subproblem::SubproblemConfig;

pub const EXIT_OK: i32 = 0;
pub const EXIT_CONFIG: i32 = 1;
pub const EXIT_ABORTED: i32 = 2;

/// Synthetic logistic data used when no dataset is given.
pub const DEFAULT_SYNTHETIC: &str = "50,1000,0.2";
/// Synthetic digits used for the MLP when no dataset is given.
pub const DEFAULT_DIGITS: &str = "64,10,1000,0.3";

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ObjectiveArg {
    Logistic,
    Mlp,
}

/// Benchmark proximal stochastic optimizers on L1-regularized problems.
#[derive(Debug, Parser)]
#[command(name = "proxtone", version)]
pub struct Args {
    /// proxtone | proxtone-plus | proxsgd | proxsag
    #[arg(long, default_value = "proxtone", value_parser = parse_optimizer)]
    pub optimizer: OptimizerKind,

    #[arg(long, value_enum, default_value = "logistic")]
    pub objective: ObjectiveArg,

    /// LIBSVM file
    #[arg(long, conflicts_with_all = ["synthetic", "digits"])]
    pub dataset: Option<PathBuf>,

    /// Raw-label translation for --dataset, e.g. "1:+1,2:-1"
    #[arg(long, requires = "dataset")]
    pub label_map: Option<String>,

    /// Synthetic logistic data: p,m,sparsity
    #[arg(long, conflicts_with = "digits")]
    pub synthetic: Option<String>,

    /// Synthetic MLP data: dim,classes,m,noise
    #[arg(long)]
    pub digits: Option<String>,

    /// MLP hidden units
    #[arg(long, default_value_t = 32)]
    pub hidden: usize,

    #[arg(long, default_value_t = 10)]
    pub batches: usize,

    #[arg(long, default_value_t = 1e-4)]
    pub lambda1: f64,

    #[arg(long, default_value_t = 1e-4)]
    pub lambda2: f64,

    #[arg(long, default_value_t = 50)]
    pub epochs: usize,

    #[arg(long, default_value_t = 7)]
    pub seed: u64,

    /// lbfgs | diagonal:SCALE
    #[arg(long, default_value = "lbfgs", value_parser = parse_hessian)]
    pub hessian: HessianMode,

    #[arg(long, default_value_t = 20)]
    pub max_history: usize,

    #[arg(long, default_value_t = 100)]
    pub sub_max_iter: usize,

    #[arg(long, default_value_t = 1e-5)]
    pub sub_abstol: f64,

    /// ProxSGD step (default: best of the grid 1e-4..1e1)
    #[arg(long)]
    pub eta: Option<f64>,

    /// ProxSAG / PROXTONE⁺ Lipschitz constant (default: estimated)
    #[arg(long)]
    pub lipschitz: Option<f64>,

    /// PROXTONE⁺ switch to ProxSAG after this many epochs
    #[arg(long)]
    pub switch_epoch: Option<usize>,

    /// Shared-subspace Hessians with basis capacity QMAX ("auto" = 3n+10)
    #[arg(long, value_name = "QMAX")]
    pub subspace: Option<String>,

    /// Magnitude counted as zero in nnz (default 0, or 1e-8 with --subspace)
    #[arg(long)]
    pub nnz_tau: Option<f64>,

    /// CSV trace output (with --sweep: one file per optimizer, suffixed)
    #[arg(long)]
    pub trace: Option<PathBuf>,

    /// Run all four optimizers in parallel and print a comparison table
    #[arg(long)]
    pub sweep: bool,

    /// Report the first epoch with objective <= TARGET
    #[arg(long)]
    pub target: Option<f64>,

    /// Objective gap used by the --sweep comparison
    #[arg(long, default_value_t = 1e-4)]
    pub gap_target: f64,
}

fn parse_optimizer(s: &str) -> std::result::Result<OptimizerKind, String> {
    s.parse().map_err(|e: Error| e.to_string())
}

fn parse_hessian(s: &str) -> std::result::Result<HessianMode, String> {
    if s == "lbfgs" {
        return Ok(HessianMode::Lbfgs);
    }
    let scale = s
        .strip_prefix("diagonal:")
        .ok_or_else(|| format!("expected `lbfgs` or `diagonal:SCALE`, got `{s}`"))?
        .parse::<f64>()
        .map_err(|e| e.to_string())?;
    if !(scale > 0.0 && scale.is_finite()) {
        return Err(format!("diagonal scale must be > 0, got {scale}"));
    }
    Ok(HessianMode::Diagonal(scale))
}

fn parse_list<T: std::str::FromStr>(flag: &str, s: &str, n: usize) -> Result<Vec<T>> {
    let items: Vec<&str> = s.split(',').map(str::trim).collect();
    let bad = || Error::InvalidParameter(format!("--{flag} expects {n} comma-separated values, got `{s}`"));
    if items.len() != n {
        return Err(bad());
    }
    items.iter().map(|v| v.parse().map_err(|_| bad())).collect()
}

impl Args {
    pub fn to_config(&self) -> Result<ExperimentConfig> {
        let objective = match self.objective {
            ObjectiveArg::Logistic => ObjectiveKind::Logistic,
            ObjectiveArg::Mlp => ObjectiveKind::Mlp,
        };
        let dataset = if let Some(path) = &self.dataset {
            let label_map = self.label_map.as_deref().map_or(Ok(LabelMap::signed()), LabelMap::parse)?;
            DatasetSource::File { path: path.clone(), label_map }
        } else if let Some(spec) = &self.digits {
            digits_source(spec)?
        } else if let Some(spec) = &self.synthetic {
            synthetic_source(spec)?
        } else {
            match objective {
                ObjectiveKind::Logistic => synthetic_source(DEFAULT_SYNTHETIC)?,
                ObjectiveKind::Mlp => digits_source(DEFAULT_DIGITS)?,
            }
        };
        let subspace = match self.subspace.as_deref() {
            None => None,
            Some("auto") => Some(SubspaceConfig::default()),
            Some(q) => {
                let q_max: usize = q
                    .parse()
                    .map_err(|_| Error::InvalidParameter(format!("--subspace expects a count or `auto`, got `{q}`")))?;
                if q_max == 0 {
                    return Err(Error::InvalidParameter("--subspace capacity must be >= 1".into()));
                }
                Some(SubspaceConfig { q_max: Some(q_max), ..Default::default() })
            }
        };
        let config = ExperimentConfig {
            optimizer: self.optimizer,
            objective,
            dataset,
            batches: self.batches,
            reg: RegularizerConfig::new(self.lambda1, self.lambda2)?,
            epochs: self.epochs,
            seed: self.seed,
            hessian: self.hessian,
            max_history: self.max_history,
            subproblem: SubproblemConfig {
                max_iter: self.sub_max_iter,
                abstol: self.sub_abstol,
                ..Default::default()
            },
            subspace,
            eta: self.eta,
            lipschitz: self.lipschitz,
            switch_epoch: self.switch_epoch,
            hidden: self.hidden,
            nnz_tau: self.nnz_tau,
            trace: self.trace.clone(),
            target: self.target,
        };
        config.validate()?;
        Ok(config)
    }
}

fn synthetic_source(spec: &str) -> Result<DatasetSource> {
    let v: Vec<f64> = parse_list("synthetic", spec, 3)?;
    let count = |x: f64| {
        if x >= 1.0 && x.fract() == 0.0 {
            Ok(x as usize)
        } else {
            Err(Error::InvalidParameter(format!("--synthetic: `{x}` is not a positive integer")))
        }
    };
    Ok(DatasetSource::Synthetic { p: count(v[0])?, m: count(v[1])?, sparsity: v[2] })
}

fn digits_source(spec: &str) -> Result<DatasetSource> {
    let v: Vec<f64> = parse_list("digits", spec, 4)?;
    let count = |x: f64| {
        if x >= 1.0 && x.fract() == 0.0 {
            Ok(x as usize)
        } else {
            Err(Error::InvalidParameter(format!("--digits: `{x}` is not a positive integer")))
        }
    };
    if !(v[3] >= 0.0) {
        return Err(Error::InvalidParameter("--digits noise must be >= 0".into()));
    }
    Ok(DatasetSource::Digits { dim: count(v[0])?, classes: count(v[1])?, m: count(v[2])?, noise: v[3] })
}

/// Exit code for an error: bad input is a config error, anything raised
/// while optimizing counts as an aborted run.
pub fn exit_code(err: &Error) -> i32 {
    match err {
        Error::InvalidParameter(_)
        | Error::Parse { .. }
        | Error::UnknownLabel { .. }
        | Error::NoSamples
        | Error::Io(_)
        | Error::DimensionMismatch { .. } => EXIT_CONFIG,
        _ => EXIT_ABORTED,
    }
}

/// Parses arguments, runs, prints the summary to `out` and returns the
/// process exit code.
pub fn main_with_args<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let args = match Args::try_parse_from(args) {
        Ok(a) => a,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_CONFIG } else { EXIT_OK };
            let text = e.render().to_string();
            let _ = if e.use_stderr() { err.write_all(text.as_bytes()) } else { out.write_all(text.as_bytes()) };
            return code;
        }
    };
    let config = match args.to_config() {
        Ok(c) => c,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            return EXIT_CONFIG;
        }
    };
    let result = if args.sweep { run_sweep(&config, args.gap_target, out) } else { run_single(&config, out) };
    match result {
        Ok(code) => code,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            exit_code(&e)
        }
    }
}

fn run_single(config: &ExperimentConfig, out: &mut dyn Write) -> Result<i32> {
    let exp = run_experiment(config)?;
    if !exp.eta_search.is_empty() {
        writeln!(out, "eta grid (eta, final objective): {:?}", exp.eta_search)?;
    }
    write!(out, "{}", exp.summary)?;
    Ok(if exp.outcome.is_aborted() { EXIT_ABORTED } else { EXIT_OK })
}

fn run_sweep(config: &ExperimentConfig, gap_target: f64, out: &mut dyn Write) -> Result<i32> {
    let runs = sweep(config, &OptimizerKind::ALL)?;
    for exp in &runs {
        writeln!(out, "{}", exp.summary)?;
    }
    let named: Vec<(String, &RunTrace)> =
        runs.iter().map(|e| (e.outcome.trace.meta.optimizer.clone(), &e.outcome.trace)).collect();
    match compare_traces(&named, gap_target) {
        Ok(table) => write!(out, "{table}")?,
        Err(e) => writeln!(out, "no comparison: {e}")?,
    }
    Ok(if runs.iter().any(|e| e.outcome.is_aborted()) { EXIT_ABORTED } else { EXIT_OK })
}
