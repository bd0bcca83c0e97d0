//! Per-batch curvature histories and the BFGS rebuild.
//!
//! Observations of a quadratic's gradient give exact curvature pairs, so
//! the rebuilt matrix converges towards the true Hessian.

use nalgebra::{DMatrix, DVector};
use proxtone::hessian::{bfgs_rebuild, CurvatureHistory};

fn main() -> proxtone::Result<()> {
    let a = DMatrix::from_row_slice(3, 3, &[4.0, 1.0, 0.0, 1.0, 3.0, 0.5, 0.0, 0.5, 2.0]);
    let grad = |x: &DVector<f64>| &a * x;

    let mut history = CurvatureHistory::new(1, 3, 20)?;
    let mut x = DVector::from_vec(vec![1.0, -1.0, 0.5]);
    history.init_batch(0, &x, &grad(&x))?;
    for k in 0..6 {
        x = DVector::from_fn(3, |j, _| ((k * 3 + j) as f64 * 0.7).sin());
        history.record_observation(0, &x, &grad(&x))?;
        let (h, stats) = bfgs_rebuild(&history, 0);
        println!(
            "pairs {:>2}  accepted {:>2}  skipped {}  ‖B − A‖ = {:.2e}",
            history.len(0),
            stats.accepted,
            stats.skipped,
            (h.to_dense() - &a).norm()
        );
    }
    Ok(())
}
