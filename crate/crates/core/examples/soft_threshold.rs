//! The L1 proximal operator, coordinate-wise and with a penalty mask.

use nalgebra::DVector;
use proxtone::prox::{nnz, shrink_masked, soft_threshold, PenaltyMask};

fn main() -> proxtone::Result<()> {
    let x = DVector::from_vec(vec![2.5, -0.3, 0.7, -4.0, 0.05]);
    let eps = 0.5;

    let y = soft_threshold(&x, eps)?;
    println!("x            = {:?}", x.as_slice());
    println!("S_{eps}(x)     = {:?}", y.as_slice());
    println!("exact zeros  = {}", x.len() - nnz(&y, 0.0));

    // unpenalized coordinates (e.g. biases) pass through untouched
    let mask = PenaltyMask::from_vec(vec![true, false, true, true, false]);
    let mut z = x.clone();
    shrink_masked(&mut z, eps, &mask);
    println!("masked       = {:?}", z.as_slice());
    Ok(())
}
