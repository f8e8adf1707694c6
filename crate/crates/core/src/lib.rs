//! Robust PCA through bilinear factorizations of weighted Schatten-q and
//! logarithmic quasi-norms.
//!
//! The observed matrix `M` (`m × n`, rows first) is split as `X + S` with
//! `X = A·Bᵀ` of width `r`. The low-rank part is penalized through factor
//! surrogates `h₁(A·W⁻¹) + h₂(B)` and the observed entries of `S` through
//! the ℓ1 norm. [`admm::solve`] runs the splitting method for fixed weights
//! and [`reweight::reweighted_solve`] updates the weights from the recovered
//! spectrum between solves.

pub mod admm;
pub mod cli;
pub mod config;
pub mod datagen;
pub mod error;
pub mod format;
pub mod linalg;
pub mod norms;
pub mod prox;
pub mod reweight;
pub mod verify;

pub use admm::{solve, RpcaProblem, SolveReport, SolverConfig, Termination};
pub use error::{Result, RpcaError};
pub use linalg::{DenseMatrix, ObservationMask, RngSeed, WeightSpec};
pub use norms::{Regularizer, RegularizerKind};

/// Version stamped into manifests and accepted in config files.
pub const FORMAT_VERSION: u32 = 1;
