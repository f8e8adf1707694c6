//! Closed-form block minimizers of the augmented Lagrangian.
//!
//! Each `update_*` reads the blocks already refreshed in the current sweep
//! from `st` and returns the new value of its own block.

use super::{RpcaProblem, SolverConfig, SolverState};
use crate::error::Result;
use crate::linalg::{self, DenseMatrix};
use crate::norms;
use crate::prox::{self, FactorSide};

/// `A ← (XB + ÂW⁻¹ + Y₁W⁻¹/ρ − Y₃B/ρ)(BᵀB + W⁻²)⁻¹`.
pub fn update_a(st: &SolverState, p: &RpcaProblem) -> Result<DenseMatrix> {
    let w = &p.weights;
    let inv_rho = 1.0 / st.rho;
    let rhs = &st.x * &st.b + w.scale_columns(&(&st.a_hat + &st.y1 * inv_rho), -1.0) - (&st.y3 * &st.b) * inv_rho;
    let mut gram = st.b.transpose() * &st.b;
    for (j, &wj) in w.as_slice().iter().enumerate() {
        gram[(j, j)] += 1.0 / (wj * wj);
    }
    linalg::solve_spd_right(&rhs, &gram)
}

/// `B ← (XᵀA + B̂ + Y₂/ρ − Y₃ᵀA/ρ)(AᵀA + I)⁻¹`.
pub fn update_b(st: &SolverState, _p: &RpcaProblem) -> Result<DenseMatrix> {
    let inv_rho = 1.0 / st.rho;
    let rhs = st.x.transpose() * &st.a + &st.b_hat + &st.y2 * inv_rho - (st.y3.transpose() * &st.a) * inv_rho;
    let mut gram = st.a.transpose() * &st.a;
    for j in 0..gram.nrows() {
        gram[(j, j)] += 1.0;
    }
    linalg::solve_spd_right(&rhs, &gram)
}

/// On Ω, soft thresholding of `M − X − Y₄/ρ` at `1/ρ`; off Ω the residual
/// itself, since `S` is unpenalized there.
pub fn update_s(st: &SolverState, p: &RpcaProblem) -> Result<DenseMatrix> {
    let inv_rho = 1.0 / st.rho;
    let mut s = &p.observed - &st.x - &st.y4 * inv_rho;
    for &(i, j) in p.mask.pairs() {
        s[(i, j)] = prox::soft_threshold(s[(i, j)], inv_rho);
    }
    Ok(s)
}

/// `X ← (Y₃ − Y₄ + ρABᵀ + ρ(M − S)) / 2ρ`.
pub fn update_x(st: &SolverState, p: &RpcaProblem) -> Result<DenseMatrix> {
    let ab = &st.a * st.b.transpose();
    let inv_rho = 1.0 / st.rho;
    Ok((ab + &p.observed - &st.s + (&st.y3 - &st.y4) * inv_rho) * 0.5)
}

pub fn update_a_hat(st: &SolverState, p: &RpcaProblem) -> Result<DenseMatrix> {
    let target = p.weights.scale_columns(&st.a, -1.0) - &st.y1 / st.rho;
    prox::prox_regularizer(&target, &p.regularizer, FactorSide::A, p.lambda / st.rho)
}

pub fn update_b_hat(st: &SolverState, p: &RpcaProblem) -> Result<DenseMatrix> {
    let target = &st.b - &st.y2 / st.rho;
    prox::prox_regularizer(&target, &p.regularizer, FactorSide::B, p.lambda / st.rho)
}

/// Multipliers and penalty after one ascent step.
#[derive(Debug, Clone, PartialEq)]
pub struct Duals {
    pub y1: DenseMatrix,
    pub y2: DenseMatrix,
    pub y3: DenseMatrix,
    pub y4: DenseMatrix,
    pub rho: f64,
}

pub fn update_duals(st: &SolverState, p: &RpcaProblem, cfg: &SolverConfig) -> Duals {
    let rho = st.rho;
    let [r1, r2, r3, r4] = constraint_matrices(st, p);
    Duals {
        y1: &st.y1 + r1 * rho,
        y2: &st.y2 + r2 * rho,
        y3: &st.y3 + r3 * rho,
        y4: &st.y4 + r4 * rho,
        rho: (cfg.mu * rho).min(cfg.rho_max),
    }
}

/// `Â − AW⁻¹`, `B̂ − B`, `ABᵀ − X`, `X + S − M`.
fn constraint_matrices(st: &SolverState, p: &RpcaProblem) -> [DenseMatrix; 4] {
    [
        &st.a_hat - p.weights.scale_columns(&st.a, -1.0),
        &st.b_hat - &st.b,
        &st.a * st.b.transpose() - &st.x,
        &st.x + &st.s - &p.observed,
    ]
}

/// Frobenius norms of the four constraint violations.
pub fn constraint_residuals(st: &SolverState, p: &RpcaProblem) -> [f64; 4] {
    constraint_matrices(st, p).map(|c| c.norm())
}

/// Value of the augmented Lagrangian at `st` with its duals and `ρ`.
pub fn augmented_lagrangian(st: &SolverState, p: &RpcaProblem) -> Result<f64> {
    let (h1, h2) = norms::factor_penalties(&st.a_hat, &st.b_hat, &p.regularizer)?;
    let l1: f64 = p.mask.pairs().iter().map(|&(i, j)| st.s[(i, j)].abs()).sum();
    let c = constraint_matrices(st, p);
    let duals = [&st.y1, &st.y2, &st.y3, &st.y4];
    let mut value = p.lambda * (h1 + h2) + l1;
    for (y, ck) in duals.iter().zip(&c) {
        value += y.dot(ck) + 0.5 * st.rho * ck.norm_squared();
    }
    Ok(value)
}
