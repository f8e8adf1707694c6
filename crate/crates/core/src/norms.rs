//! Weighted Schatten-q powers, the weighted logarithmic norm, the bilinear
//! surrogates `h₁(A·W⁻¹) + h₂(B)` and the factor pairs that attain them.
//!
//! For `X` with singular values `σᵢ` and weights `W₁₁ ≥ … ≥ W_rr > 0` the
//! surrogates satisfy, over all `A·Bᵀ = X` with `r` columns,
//!
//! ```text
//! Σ σᵢ/Wᵢ          = min ½(‖AW⁻¹‖_F² + ‖B‖_F²)
//! Σ (σᵢ/Wᵢ)^{1/2}  = min ½(‖AW⁻¹‖_* + ‖B‖_*)
//! Σ (σᵢ/Wᵢ)^{2/3}  = min ⅓‖AW⁻¹‖_F² + ⅔‖B‖_*
//! Σ log((σᵢ/Wᵢ)^{1/2} + ε) = min ½(‖AW⁻¹‖_L + ‖B‖_L),   ‖Z‖_L = Σ log(σᵢ(Z) + ε)
//! ```
//!
//! The log identity counts one term per factor column, so its left-hand side
//! runs over `r` singular-value slots (see [`factorization_target`]).

use crate::error::{Result, RpcaError};
use crate::linalg::{self, DenseMatrix, WeightSpec};

/// Singular values at or below this fraction of `σ₁` count as zero.
pub const RANK_REL_TOL: f64 = 1e-10;

/// Default ε of the logarithmic surrogate.
pub const DEFAULT_EPS_LOG: f64 = 0.01;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum RegularizerKind {
    WeightedNuclear,
    WeightedSchattenHalf,
    WeightedSchattenTwoThirds,
    WeightedLog,
}

impl RegularizerKind {
    pub const ALL: [RegularizerKind; 4] = [
        RegularizerKind::WeightedNuclear,
        RegularizerKind::WeightedSchattenHalf,
        RegularizerKind::WeightedSchattenTwoThirds,
        RegularizerKind::WeightedLog,
    ];

    pub fn name(self) -> &'static str {
        match self {
            RegularizerKind::WeightedNuclear => "nuclear",
            RegularizerKind::WeightedSchattenHalf => "schatten_half",
            RegularizerKind::WeightedSchattenTwoThirds => "schatten_two_thirds",
            RegularizerKind::WeightedLog => "log",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().replace('-', "_").as_str() {
            "nuclear" | "weighted_nuclear" => Ok(RegularizerKind::WeightedNuclear),
            "half" | "schatten_half" | "weighted_schatten_half" => Ok(RegularizerKind::WeightedSchattenHalf),
            "two_thirds" | "schatten_two_thirds" | "weighted_schatten_two_thirds" => {
                Ok(RegularizerKind::WeightedSchattenTwoThirds)
            }
            "log" | "weighted_log" => Ok(RegularizerKind::WeightedLog),
            other => Err(RpcaError::InvalidArgument(format!("unknown regularizer kind '{other}'"))),
        }
    }
}

/// Choice of weighted quasi-norm surrogate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Regularizer {
    kind: RegularizerKind,
    eps_log: f64,
}

impl Regularizer {
    pub fn new(kind: RegularizerKind, eps_log: f64) -> Result<Self> {
        if kind == RegularizerKind::WeightedLog && !(eps_log.is_finite() && eps_log > 0.0) {
            return Err(RpcaError::InvalidArgument(format!("eps_log must be positive, got {eps_log}")));
        }
        Ok(Self { kind, eps_log })
    }

    pub fn of_kind(kind: RegularizerKind) -> Self {
        Self {
            kind,
            eps_log: DEFAULT_EPS_LOG,
        }
    }

    pub fn nuclear() -> Self {
        Self::of_kind(RegularizerKind::WeightedNuclear)
    }

    pub fn schatten_half() -> Self {
        Self::of_kind(RegularizerKind::WeightedSchattenHalf)
    }

    pub fn schatten_two_thirds() -> Self {
        Self::of_kind(RegularizerKind::WeightedSchattenTwoThirds)
    }

    pub fn log(eps: f64) -> Result<Self> {
        Self::new(RegularizerKind::WeightedLog, eps)
    }

    pub fn kind(&self) -> RegularizerKind {
        self.kind
    }

    pub fn eps_log(&self) -> f64 {
        self.eps_log
    }
}

/// Exponents with a proven bilinear factorization, plus `q = 2`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum SchattenExponent {
    Two,
    One,
    TwoThirds,
    Half,
}

impl SchattenExponent {
    pub const ALL: [SchattenExponent; 4] = [
        SchattenExponent::Two,
        SchattenExponent::One,
        SchattenExponent::TwoThirds,
        SchattenExponent::Half,
    ];

    pub fn value(self) -> f64 {
        match self {
            SchattenExponent::Two => 2.0,
            SchattenExponent::One => 1.0,
            SchattenExponent::TwoThirds => 2.0 / 3.0,
            SchattenExponent::Half => 0.5,
        }
    }

    pub fn from_value(q: f64) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|e| (e.value() - q).abs() <= 1e-9)
            .ok_or_else(|| {
                RpcaError::InvalidArgument(format!("q = {q} is not one of 2, 1, 2/3, 1/2"))
            })
    }

    /// Accepts decimals (`0.5`) and fractions (`2/3`).
    pub fn parse(s: &str) -> Result<Self> {
        let s = s.trim();
        let bad = || RpcaError::InvalidArgument(format!("cannot parse exponent '{s}'"));
        let q = match s.split_once('/') {
            Some((num, den)) => {
                let num: f64 = num.trim().parse().map_err(|_| bad())?;
                let den: f64 = den.trim().parse().map_err(|_| bad())?;
                num / den
            }
            None => s.parse().map_err(|_| bad())?,
        };
        Self::from_value(q)
    }

    pub fn label(self) -> &'static str {
        match self {
            SchattenExponent::Two => "2",
            SchattenExponent::One => "1",
            SchattenExponent::TwoThirds => "2/3",
            SchattenExponent::Half => "1/2",
        }
    }
}

fn check_weight_coverage(sigma: &[f64], w: &WeightSpec) -> Result<()> {
    let rank = linalg::numerical_rank(sigma, RANK_REL_TOL);
    if rank > w.len() {
        return Err(RpcaError::InvalidArgument(format!(
            "{} weights for {rank} nonzero singular values",
            w.len()
        )));
    }
    Ok(())
}

/// `Σᵢ (σᵢ / Wᵢᵢ)^q` over the numerically nonzero singular values of `x`.
///
/// Values at or below `RANK_REL_TOL·σ₁` are rounding noise of a zero and are
/// dropped; for `q < 1` they would otherwise contribute `noise^q`.
pub fn weighted_schatten_power(x: &DenseMatrix, w: &WeightSpec, q: SchattenExponent) -> Result<f64> {
    let sigma = linalg::singular_values(x)?;
    weighted_schatten_power_of(&sigma, w, q)
}

/// Same as [`weighted_schatten_power`] for precomputed sorted singular values.
pub fn weighted_schatten_power_of(sigma: &[f64], w: &WeightSpec, q: SchattenExponent) -> Result<f64> {
    check_weight_coverage(sigma, w)?;
    let rank = linalg::numerical_rank(sigma, RANK_REL_TOL);
    let q = q.value();
    Ok(sigma[..rank]
        .iter()
        .zip(w.as_slice())
        .map(|(&s, &wi)| (s / wi).powf(q))
        .sum())
}

/// `Σᵢ log((σᵢ / Wᵢᵢ)^{1/k} + ε)` over all `min(m, n)` singular values, with
/// numerically zero ones taken as exactly zero.
pub fn weighted_log_norm(x: &DenseMatrix, w: &WeightSpec, k: u32, eps: f64) -> Result<f64> {
    if eps.is_nan() || eps <= 0.0 {
        return Err(RpcaError::InvalidArgument(format!("eps must be positive, got {eps}")));
    }
    if !(k == 1 || k == 2) {
        return Err(RpcaError::InvalidArgument(format!("log norm order k must be 1 or 2, got {k}")));
    }
    let sigma = linalg::singular_values(x)?;
    weighted_log_norm_of(&sigma, w, k, eps, sigma.len())
}

/// Log norm over the first `terms` slots of `sigma`; slots past the
/// numerical rank, past the end of `sigma` or past the weights contribute
/// `log ε`.
pub(crate) fn weighted_log_norm_of(sigma: &[f64], w: &WeightSpec, k: u32, eps: f64, terms: usize) -> Result<f64> {
    check_weight_coverage(sigma, w)?;
    let rank = linalg::numerical_rank(sigma, RANK_REL_TOL);
    let inv_k = 1.0 / k as f64;
    Ok((0..terms)
        .map(|i| {
            let ratio = match (sigma.get(i), w.as_slice().get(i)) {
                (Some(&s), Some(&wi)) if i < rank => (s / wi).powf(inv_k),
                _ => 0.0,
            };
            (ratio + eps).ln()
        })
        .sum())
}

fn log_sum(sigma: &[f64], eps: f64) -> f64 {
    sigma.iter().map(|s| (s + eps).ln()).sum()
}

/// `(h₁(Â), h₂(B̂))` for the given regularizer.
pub fn factor_penalties(a_hat: &DenseMatrix, b_hat: &DenseMatrix, reg: &Regularizer) -> Result<(f64, f64)> {
    use RegularizerKind::*;
    Ok(match reg.kind() {
        WeightedNuclear => (0.5 * a_hat.norm_squared(), 0.5 * b_hat.norm_squared()),
        WeightedSchattenHalf => (
            0.5 * linalg::singular_values(a_hat)?.iter().sum::<f64>(),
            0.5 * linalg::singular_values(b_hat)?.iter().sum::<f64>(),
        ),
        WeightedSchattenTwoThirds => (
            a_hat.norm_squared() / 3.0,
            2.0 / 3.0 * linalg::singular_values(b_hat)?.iter().sum::<f64>(),
        ),
        WeightedLog => (
            0.5 * log_sum(&linalg::singular_values(a_hat)?, reg.eps_log()),
            0.5 * log_sum(&linalg::singular_values(b_hat)?, reg.eps_log()),
        ),
    })
}

/// `h₁(A·W⁻¹) + h₂(B)`.
pub fn surrogate_objective(a: &DenseMatrix, b: &DenseMatrix, w: &WeightSpec, reg: &Regularizer) -> Result<f64> {
    if a.ncols() != w.len() || b.ncols() != w.len() {
        return Err(RpcaError::DimensionMismatch(format!(
            "factors have {} and {} columns, weights have {}",
            a.ncols(),
            b.ncols(),
            w.len()
        )));
    }
    let (h1, h2) = factor_penalties(&w.scale_columns(a, -1.0), b, reg)?;
    Ok(h1 + h2)
}

/// The weighted norm value that the surrogate attains at its minimum over
/// factorizations of width `r`.
///
/// Schatten kinds ignore `r`. For the log kind the sum runs over the factor
/// slots: each factor of width `r` carries `min(rows, r)` singular values, and
/// slots beyond `rank(X)` contribute `log ε`.
pub fn factorization_target(x: &DenseMatrix, w: &WeightSpec, reg: &Regularizer, r: usize) -> Result<f64> {
    let sigma = linalg::singular_values(x)?;
    factorization_target_of(&sigma, x.nrows(), x.ncols(), w, reg, r)
}

pub(crate) fn factorization_target_of(
    sigma: &[f64],
    rows: usize,
    cols: usize,
    w: &WeightSpec,
    reg: &Regularizer,
    r: usize,
) -> Result<f64> {
    use RegularizerKind::*;
    match reg.kind() {
        WeightedNuclear => weighted_schatten_power_of(sigma, w, SchattenExponent::One),
        WeightedSchattenHalf => weighted_schatten_power_of(sigma, w, SchattenExponent::Half),
        WeightedSchattenTwoThirds => weighted_schatten_power_of(sigma, w, SchattenExponent::TwoThirds),
        WeightedLog => {
            let eps = reg.eps_log();
            let shared = r.min(rows.min(cols));
            let core = weighted_log_norm_of(sigma, w, 2, eps, shared)?;
            let extra = (rows.min(r) - shared) + (cols.min(r) - shared);
            Ok(core + 0.5 * extra as f64 * eps.ln())
        }
    }
}

/// Factor pair `(Ã, B̃)` with `Ã·B̃ᵀ = X` that attains the surrogate minimum.
#[derive(Debug, Clone)]
pub struct FactorWitness {
    pub a_tilde: DenseMatrix,
    pub b_tilde: DenseMatrix,
}

/// Builds `Ã = [U Σ^{a} W_X^{c}, 0]`, `B̃ = [V Σ^{b} W_X^{-c}, 0]` with
/// `(a, b, c) = (½, ½, ½)`, or `(⅓, ⅔, ⅔)` for the Schatten-2/3 kind.
pub fn build_witness(x: &DenseMatrix, w: &WeightSpec, reg: &Regularizer, r: usize) -> Result<FactorWitness> {
    if w.len() != r {
        return Err(RpcaError::DimensionMismatch(format!("{} weights for width {r}", w.len())));
    }
    let t = linalg::svd(x)?;
    let rank = t.numerical_rank(RANK_REL_TOL);
    if rank > r {
        return Err(RpcaError::InvalidArgument(format!(
            "factor width {r} is below the numerical rank {rank}"
        )));
    }
    let (pa, pb, pw) = match reg.kind() {
        RegularizerKind::WeightedSchattenTwoThirds => (1.0 / 3.0, 2.0 / 3.0, 2.0 / 3.0),
        _ => (0.5, 0.5, 0.5),
    };
    let mut a_tilde = DenseMatrix::zeros(x.nrows(), r);
    let mut b_tilde = DenseMatrix::zeros(x.ncols(), r);
    for j in 0..rank {
        let s = t.singular_values[j];
        let wj = w.as_slice()[j];
        a_tilde.set_column(j, &(t.u.column(j) * (s.powf(pa) * wj.powf(pw))));
        b_tilde.set_column(j, &(t.v.column(j) * (s.powf(pb) * wj.powf(-pw))));
    }
    Ok(FactorWitness { a_tilde, b_tilde })
}
