//! First-order optimality residuals of a solver state.

use super::updates::constraint_residuals;
use super::{RpcaProblem, SolverState};
use crate::error::Result;
use crate::linalg::{self, DenseMatrix};
use crate::norms::{RegularizerKind, RANK_REL_TOL};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KktResiduals {
    /// Absolute norms of `Â−AW⁻¹`, `B̂−B`, `ABᵀ−X`, `X+S−M`.
    pub feasibility: [f64; 4],
    /// Distance of `−Y₁` to `λ∂h₁(Â)`.
    pub stationarity_a_hat: f64,
    /// Distance of `−Y₂` to `λ∂h₂(B̂)`.
    pub stationarity_b_hat: f64,
    /// `‖P_Ωᶜ(Y₄)‖_F`; `S` is free off Ω, so its multiplier must vanish there.
    pub dual_off_mask: f64,
    /// Distance of `−Y₄` to `∂|S|` on Ω.
    pub sparse_stationarity: f64,
}

impl KktResiduals {
    pub fn max(&self) -> f64 {
        self.feasibility
            .iter()
            .chain([
                &self.stationarity_a_hat,
                &self.stationarity_b_hat,
                &self.dual_off_mask,
                &self.sparse_stationarity,
            ])
            .copied()
            .fold(0.0, f64::max)
    }
}

/// Penalty on one factor: `c‖Z‖_F²`, `c‖Z‖_*`, or `c·Σ log(σ + ε)`.
#[derive(Debug, Clone, Copy)]
enum FactorTerm {
    Frobenius(f64),
    Nuclear(f64),
    Log(f64, f64),
}

fn factor_terms(kind: RegularizerKind, eps: f64) -> (FactorTerm, FactorTerm) {
    use FactorTerm::*;
    match kind {
        RegularizerKind::WeightedNuclear => (Frobenius(0.5), Frobenius(0.5)),
        RegularizerKind::WeightedSchattenHalf => (Nuclear(0.5), Nuclear(0.5)),
        RegularizerKind::WeightedSchattenTwoThirds => (Frobenius(1.0 / 3.0), Nuclear(2.0 / 3.0)),
        RegularizerKind::WeightedLog => (Log(0.5, eps), Log(0.5, eps)),
    }
}

/// Frobenius distance from `g` to `scale·∂term(z)`.
///
/// For the spectral terms the subdifferential at `z = U_k Σ_k V_kᵀ` is
/// `U_k D V_kᵀ + {P_U⊥ Q P_V⊥ : ‖Q‖₂ ≤ radius}`, so the distance splits into a
/// tangent part and a clipped-singular-value part.
fn subgradient_distance(g: &DenseMatrix, z: &DenseMatrix, term: FactorTerm, scale: f64) -> Result<f64> {
    let (slope, radius): (Box<dyn Fn(f64) -> f64>, f64) = match term {
        FactorTerm::Frobenius(c) => return Ok((g - z * (2.0 * c * scale)).norm()),
        FactorTerm::Nuclear(c) => (Box::new(move |_| c * scale), c * scale),
        FactorTerm::Log(c, eps) => (Box::new(move |s| c * scale / (s + eps)), c * scale / eps),
    };
    let dec = linalg::svd(z)?;
    let k = dec.numerical_rank(RANK_REL_TOL);
    let u = dec.u.columns(0, k).into_owned();
    let v = dec.v.columns(0, k).into_owned();
    let mut d = DenseMatrix::zeros(k, k);
    for i in 0..k {
        d[(i, i)] = slope(dec.singular_values[i]);
    }
    let pu = DenseMatrix::identity(z.nrows(), z.nrows()) - &u * u.transpose();
    let pv = DenseMatrix::identity(z.ncols(), z.ncols()) - &v * v.transpose();
    let normal = &pu * g * &pv;
    let tangent = g - &normal - &u * d * v.transpose();
    let excess: f64 = linalg::singular_values(&normal)?
        .iter()
        .map(|&s| (s - radius).max(0.0).powi(2))
        .sum();
    Ok((tangent.norm_squared() + excess).sqrt())
}

pub fn kkt_residuals(st: &SolverState, p: &RpcaProblem) -> Result<KktResiduals> {
    let (t1, t2) = factor_terms(p.regularizer.kind(), p.regularizer.eps_log());
    let stationarity_a_hat = subgradient_distance(&(-&st.y1), &st.a_hat, t1, p.lambda)?;
    let stationarity_b_hat = subgradient_distance(&(-&st.y2), &st.b_hat, t2, p.lambda)?;

    let off = linalg::project_mask(&st.y4, &p.mask, false)?;
    let sparse: f64 = p
        .mask
        .pairs()
        .iter()
        .map(|&(i, j)| {
            let (s, y) = (st.s[(i, j)], st.y4[(i, j)]);
            let d = if s != 0.0 { (s.signum() + y).abs() } else { (y.abs() - 1.0).max(0.0) };
            d * d
        })
        .sum();

    Ok(KktResiduals {
        feasibility: constraint_residuals(st, p),
        stationarity_a_hat,
        stationarity_b_hat,
        dual_off_mask: off.norm(),
        sparse_stationarity: sparse.sqrt(),
    })
}
