//! PROXTONE on synthetic sparse logistic regression, with a CSV trace.

use proxtone::harness::{run_experiment, ExperimentConfig};
use proxtone::optimizers::OptimizerKind;

fn main() -> proxtone::Result<()> {
    env_logger::init();
    let trace = std::env::temp_dir().join("proxtone_logistic.csv");
    let config = ExperimentConfig {
        optimizer: OptimizerKind::Proxtone,
        epochs: 30,
        seed: 3,
        trace: Some(trace.clone()),
        target: Some(0.285),
        ..Default::default()
    };
    let exp = run_experiment(&config)?;
    print!("{}", exp.summary);
    println!("diagnostics      {:?}", exp.outcome.diagnostics);
    println!("trace written to {}", trace.display());
    Ok(())
}
