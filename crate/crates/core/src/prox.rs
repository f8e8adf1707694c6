//! Proximal operators `prox_{t·g}(y) = argmin_x t·g(x) + ½‖x − y‖²` used by
//! the ADMM blocks.

use crate::error::{Result, RpcaError};
use crate::linalg::{self, DenseMatrix};
use crate::norms::{Regularizer, RegularizerKind};

/// Sign-preserving soft threshold `sign(y)·max(|y| − t, 0)`.
#[inline]
pub fn soft_threshold(y: f64, t: f64) -> f64 {
    debug_assert!(t >= 0.0);
    if y > t {
        y - t
    } else if y < -t {
        y + t
    } else {
        0.0
    }
}

/// Minimizer of `t·α‖Z‖_F² + ½‖Z − Y‖_F²`, i.e. `Y / (1 + 2αt)`.
pub fn prox_fro_squared(y: &DenseMatrix, alpha: f64, t: f64) -> DenseMatrix {
    y / (1.0 + 2.0 * alpha * t)
}

/// Singular value thresholding `U·diag(max(σ − τ, 0))·Vᵀ`.
pub fn svt(y: &DenseMatrix, tau: f64) -> Result<DenseMatrix> {
    let t = linalg::svd(y)?;
    let shrunk: Vec<f64> = t.singular_values.iter().map(|&s| (s - tau).max(0.0)).collect();
    Ok(t.reassemble(&shrunk))
}

/// Scalar logarithmic thresholding: minimizer over `x ≥ 0` of
/// `½(x − y)² + t·log(x + ε)`. Ties go to `0`.
pub fn lsvt_scalar(y: f64, t: f64, eps: f64) -> f64 {
    debug_assert!(y >= 0.0 && t > 0.0 && eps > 0.0);
    // (y − ε)² − 4(t − yε) written as (y + ε)² − 4t to avoid cancellation.
    let delta = (y + eps) * (y + eps) - 4.0 * t;
    if delta <= 0.0 {
        return 0.0;
    }
    let root = 0.5 * (y - eps + delta.sqrt());
    if root <= 0.0 {
        return 0.0;
    }
    let f = |x: f64| 0.5 * (x - y) * (x - y) + t * (x + eps).ln();
    if f(root) < f(0.0) {
        root
    } else {
        0.0
    }
}

/// Applies [`lsvt_scalar`] to every singular value of `y`.
pub fn lsvt(y: &DenseMatrix, t: f64, eps: f64) -> Result<DenseMatrix> {
    let dec = linalg::svd(y)?;
    let shrunk: Vec<f64> = dec.singular_values.iter().map(|&s| lsvt_scalar(s, t, eps)).collect();
    Ok(dec.reassemble(&shrunk))
}

/// Which factor a regularizer term acts on: `h₁` on `Â = A·W⁻¹`, `h₂` on `B̂`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FactorSide {
    A,
    B,
}

/// `prox_{t·h}(Y)` for the side-specific term `h` of the regularizer.
pub fn prox_regularizer(y: &DenseMatrix, reg: &Regularizer, side: FactorSide, t: f64) -> Result<DenseMatrix> {
    if !(t.is_finite() && t > 0.0) {
        return Err(RpcaError::InvalidArgument(format!("prox step must be positive, got {t}")));
    }
    match (reg.kind(), side) {
        (RegularizerKind::WeightedNuclear, _) => Ok(prox_fro_squared(y, 0.5, t)),
        (RegularizerKind::WeightedSchattenHalf, _) => svt(y, 0.5 * t),
        (RegularizerKind::WeightedSchattenTwoThirds, FactorSide::A) => Ok(prox_fro_squared(y, 1.0 / 3.0, t)),
        (RegularizerKind::WeightedSchattenTwoThirds, FactorSide::B) => svt(y, 2.0 * t / 3.0),
        (RegularizerKind::WeightedLog, _) => lsvt(y, 0.5 * t, reg.eps_log()),
    }
}

/// Scalar penalty families, each scaled by `alpha`, for oracle comparisons.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ProxKind {
    /// `|x|`
    L1,
    /// `α·x²`
    FroSquared { alpha: f64 },
    /// `α·x` on `x ≥ 0` (one singular value of the nuclear norm)
    Nuclear { alpha: f64 },
    /// `α·log(x + ε)` on `x ≥ 0`
    LogNorm { alpha: f64, eps: f64 },
}

/// A scalar proximal problem with step `t`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProxSpec {
    pub kind: ProxKind,
    pub t: f64,
}

impl ProxSpec {
    pub fn new(kind: ProxKind, t: f64) -> Result<Self> {
        let positive = |v: f64| v.is_finite() && v > 0.0;
        let ok = positive(t)
            && match kind {
                ProxKind::L1 => true,
                ProxKind::FroSquared { alpha } | ProxKind::Nuclear { alpha } => positive(alpha),
                ProxKind::LogNorm { alpha, eps } => positive(alpha) && positive(eps),
            };
        if ok {
            Ok(Self { kind, t })
        } else {
            Err(RpcaError::InvalidArgument(format!("invalid prox parameters {kind:?}, t = {t}")))
        }
    }

    /// Closed-form minimizer. Spectral kinds expect `y ≥ 0`.
    pub fn apply(&self, y: f64) -> f64 {
        match self.kind {
            ProxKind::L1 => soft_threshold(y, self.t),
            ProxKind::FroSquared { alpha } => y / (1.0 + 2.0 * alpha * self.t),
            ProxKind::Nuclear { alpha } => (y - alpha * self.t).max(0.0),
            ProxKind::LogNorm { alpha, eps } => lsvt_scalar(y, alpha * self.t, eps),
        }
    }

    /// `½(x − y)² + t·g(x)`.
    pub fn objective(&self, x: f64, y: f64) -> f64 {
        let g = match self.kind {
            ProxKind::L1 => x.abs(),
            ProxKind::FroSquared { alpha } => alpha * x * x,
            ProxKind::Nuclear { alpha } => alpha * x,
            ProxKind::LogNorm { alpha, eps } => alpha * (x + eps).ln(),
        };
        0.5 * (x - y) * (x - y) + self.t * g
    }
}
