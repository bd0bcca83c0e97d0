//! Subspace mode keeps every batch's Hessian as a small core on a shared
//! basis, so memory stays `O(n q²)` instead of `O(n p²)`.

use proxtone::harness::trace::NullSink;
use proxtone::harness::{DatasetSource, ExperimentConfig};
use proxtone::optimizers::{run, OptimizerSpec, ProxtoneConfig, SubspaceConfig};

fn main() -> proxtone::Result<()> {
    let config = ExperimentConfig { dataset: DatasetSource::Synthetic { p: 400, m: 2000, sparsity: 0.1 }, ..Default::default() };
    let problem = config.build_problem()?;

    // ten batches: a collapse keeps 22 vectors, the floor for q_max
    for q_max in [22, 40, 128] {
        let spec = OptimizerSpec::Proxtone {
            config: ProxtoneConfig {
                subspace: Some(SubspaceConfig { q_max: Some(q_max), ..Default::default() }),
                ..Default::default()
            },
            inexact: false,
        };
        let out = run(&spec, &problem, 15, config.seed, 1e-8, &mut NullSink)?;
        let last = out.trace.last().expect("at least one row");
        println!(
            "q_max {q_max:>4}: objective {:.8}  nnz {:>3}  collapses {}",
            last.objective, last.nnz, out.diagnostics.subspace_collapses
        );
    }

    let full = OptimizerSpec::Proxtone { config: ProxtoneConfig::default(), inexact: false };
    let out = run(&full, &problem, 15, config.seed, 1e-8, &mut NullSink)?;
    println!("full space : objective {:.8}", out.trace.last().expect("at least one row").objective);
    Ok(())
}
