//! Solving an L1-regularized quadratic model with the inner solver.

use nalgebra::{DMatrix, DVector};
use proxtone::hessian::HessianApprox;
use proxtone::prox::PenaltyMask;
use proxtone::subproblem::{solve_lasso, SubproblemConfig};
use proxtone::surrogate::{ComponentModel, QuadraticSurrogate};

fn main() -> proxtone::Result<()> {
    let p = 6;
    let h = DMatrix::from_fn(p, p, |i, j| if i == j { 2.0 } else { 0.3 });
    let anchor = DVector::zeros(p);
    let grad = DVector::from_vec(vec![-1.0, 0.2, -0.05, 0.8, 0.0, -2.0]);
    let model = ComponentModel::new(anchor.clone(), 0.0, grad, HessianApprox::Dense(h))?;
    let surrogate = QuadraticSurrogate::from_models(vec![model])?;

    for lambda2 in [0.0, 0.1, 0.5] {
        let sol = solve_lasso(&surrogate, lambda2, &anchor, &SubproblemConfig::default(), &PenaltyMask::all(p))?;
        println!(
            "λ₂ = {lambda2:<4} iterations {:>3}  converged {}  objective {:.6}  x = {:.4?}",
            sol.iterations,
            sol.converged,
            sol.objective,
            sol.x.as_slice()
        );
    }

    let one = solve_lasso(&surrogate, 0.1, &anchor, &SubproblemConfig::default().inexact(), &PenaltyMask::all(p))?;
    println!("single-iteration solve: objective {:.6}", one.objective);
    Ok(())
}
