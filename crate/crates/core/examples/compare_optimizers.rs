//! All four optimizers on the same problem, compared by epochs to a
//! relative gap.

use proxtone::harness::{compare, ExperimentConfig};
use proxtone::optimizers::OptimizerKind;

fn main() -> proxtone::Result<()> {
    env_logger::init();
    let base = ExperimentConfig { epochs: 40, ..Default::default() };
    let configs: Vec<_> = OptimizerKind::ALL.iter().map(|&k| base.with_optimizer(k)).collect();
    let (runs, table) = compare(&configs, 1e-4)?;
    for exp in &runs {
        println!("{:<14} {:?}", exp.summary.optimizer, exp.spec);
    }
    println!();
    print!("{table}");
    if let Some(r) = table.ratio("proxtone", "proxsgd") {
        println!("proxtone needs {r:.2}x the epochs of proxsgd");
    }
    Ok(())
}
