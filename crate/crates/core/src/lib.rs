//! Proximal stochastic Newton-type optimization for L1-regularized
//! empirical risk minimization.
//!
//! The objective is the composite finite sum
//!
//! ```text
//! f(x) = (1/n) Σ g_i(x) + λ₂ ‖x‖₁
//! ```
//!
//! where each `g_i` is the smooth loss of one mini-batch. The crate provides
//!
//! * [`optimizers`]: PROXTONE (a piecewise-quadratic surrogate refreshed one
//!   mini-batch at a time, with per-batch L-BFGS curvature), PROXTONE⁺
//!   (PROXTONE for the first epochs, then ProxSAG), and the ProxSGD / ProxSAG
//!   baselines;
//! * [`objectives`]: regularized logistic regression and a small sigmoid MLP;
//! * [`datasets`]: a LIBSVM reader, synthetic generators and mini-batch
//!   partitioning;
//! * [`harness`]: the experiment runner behind the `proxtone` binary, which
//!   writes per-epoch CSV traces and comparison tables.
//!
//! Runnable walkthroughs live in the crate's `examples/` directory
//! (`cargo run --release --example <name>`).

// `!(x > 0.0)` is used on purpose so NaN parameters are rejected too
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod datasets;
pub mod error;
pub mod harness;
pub mod hessian;
pub mod objectives;
pub mod optimizers;
pub mod prox;
pub mod subproblem;
pub mod surrogate;

pub use error::{Error, Result};

/// Dense parameter vector (iterates, gradients, directions).
pub type ParamVector = nalgebra::DVector<f64>;
