//! A sparse one-hidden-layer network on synthetic digits: PROXTONE⁺ in
//! subspace mode against ProxSGD. Biases are not penalized.

use proxtone::harness::{best_eta, DatasetSource, ExperimentConfig, ObjectiveKind, SUBSPACE_NNZ_TAU};
use proxtone::harness::trace::NullSink;
use proxtone::optimizers::{run, OptimizerSpec, ProxtoneConfig, SubspaceConfig};
use proxtone::prox::{masked_zero_count, RegularizerConfig};

fn main() -> proxtone::Result<()> {
    env_logger::init();
    let epochs = 20;
    let config = ExperimentConfig {
        objective: ObjectiveKind::Mlp,
        dataset: DatasetSource::Digits { dim: 64, classes: 10, m: 1000, noise: 0.3 },
        reg: RegularizerConfig::new(1e-4, 1e-3)?,
        ..Default::default()
    };
    let problem = config.build_problem()?;
    let mask = problem.mask();
    println!("{} parameters, {} penalized", problem.dim(), mask.penalized_count());

    let (eta, _) = best_eta(&problem, epochs, config.seed, 0.0)?;
    let sgd = run(&OptimizerSpec::ProxSgd { eta }, &problem, epochs, config.seed, 0.0, &mut NullSink)?;

    let plus = OptimizerSpec::ProxtonePlus {
        config: ProxtoneConfig { subspace: Some(SubspaceConfig::default()), ..Default::default() },
        switch_epoch: Some(5),
        lipschitz: 0.05,
    };
    let plus = run(&plus, &problem, epochs, config.seed, SUBSPACE_NNZ_TAU, &mut NullSink)?;

    for (name, out) in [(format!("proxsgd (eta {eta})"), &sgd), ("proxtone-plus".to_string(), &plus)] {
        println!(
            "{name:<20} objective {:.5}  zero weights {}",
            out.trace.last().map_or(f64::NAN, |r| r.objective),
            masked_zero_count(&out.x, mask)
        );
    }
    Ok(())
}
