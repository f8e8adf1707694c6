//! Randomized checks of the factorization identities, the Stiefel trace
//! inequalities behind them, and the proximal operators.
//!
//! Trial `i` of a check draws from `seed.stream(i)`, so reports are identical
//! whether trials run serially or in parallel.

use std::fmt;

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{Result, RpcaError};
use crate::linalg::{self, DenseMatrix, RngSeed, WeightSpec};
use crate::norms::{self, Regularizer, SchattenExponent};
use crate::prox::{self, ProxKind, ProxSpec};

/// Outcome of one checker.
#[derive(Debug, Clone, PartialEq)]
pub struct CheckReport {
    pub name: String,
    pub trials: usize,
    pub violations: usize,
    /// Most negative `lhs − rhs` seen; `+∞` when no trial ran.
    pub worst_slack: f64,
    /// Stream indices of the violating trials.
    pub seeds_of_violations: Vec<u64>,
    /// Trials whose witness matched the target to `1e-11` relative; only
    /// tracked by [`check_factorization`].
    pub equality_attained: Option<usize>,
}

impl CheckReport {
    fn from_trials(name: String, outcomes: Vec<TrialOutcome>) -> Self {
        let mut report = Self {
            name,
            trials: outcomes.len(),
            violations: 0,
            worst_slack: f64::INFINITY,
            seeds_of_violations: Vec::new(),
            equality_attained: None,
        };
        for o in outcomes {
            report.worst_slack = report.worst_slack.min(o.worst_slack);
            if o.violated {
                report.violations += 1;
                report.seeds_of_violations.push(o.stream);
            }
        }
        report
    }

    /// No violations, and for factorization checks at least one trial that
    /// attains equality.
    pub fn passed(&self) -> bool {
        self.violations == 0 && self.equality_attained.is_none_or(|n| n > 0 || self.trials == 0)
    }
}

impl fmt::Display for CheckReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} {} {} {:.6e}", self.name, self.trials, self.violations, self.worst_slack)?;
        if let Some(n) = self.equality_attained {
            write!(f, " attained={n}")?;
        }
        if !self.seeds_of_violations.is_empty() {
            let seeds: Vec<String> = self.seeds_of_violations.iter().map(u64::to_string).collect();
            write!(f, " violating_streams={}", seeds.join(","))?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy)]
struct TrialOutcome {
    stream: u64,
    worst_slack: f64,
    violated: bool,
    attained: bool,
}

/// Relative slack tolerance of the inequality checks.
pub const STIEFEL_TOL: f64 = 1e-10;
/// Relative tolerance of the factorization equality and minimality checks.
pub const FACTORIZATION_TOL: f64 = 1e-9;
pub const ATTAINMENT_TOL: f64 = 1e-11;
/// Reparameterizations tried per factorization trial.
pub const REPARAMETERIZATIONS: usize = 20;
pub const GRID_STEP: f64 = 1e-4;
pub const PROX_GAP_TOL: f64 = 1e-6;
/// ε of the log case of the Stiefel inequality.
pub const STIEFEL_LOG_EPS: f64 = 0.01;

/// Sample `exp(U(ln lo, ln hi))`.
fn log_uniform(rng: &mut ChaCha8Rng, lo: f64, hi: f64) -> f64 {
    rng.random_range(lo.ln()..hi.ln()).exp()
}

fn sorted_log_uniform(rng: &mut ChaCha8Rng, len: usize) -> Vec<f64> {
    let mut v: Vec<f64> = (0..len).map(|_| log_uniform(rng, 1e-2, 1e2)).collect();
    v.sort_by(|a, b| b.total_cmp(a));
    v
}

fn run_trials<F>(trials: usize, seed: RngSeed, trial: F) -> Result<Vec<TrialOutcome>>
where
    F: Fn(u64, &mut ChaCha8Rng) -> Result<TrialOutcome> + Sync,
{
    (0..trials as u64)
        .into_par_iter()
        .map(|i| trial(i, &mut seed.stream(i)))
        .collect()
}

/// Which spectral sum the Stiefel inequality is checked for.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum StiefelCase {
    Schatten(SchattenExponent),
    /// `Σ log(σ^{1/k} + ε)` with `k ∈ {1, 2}`.
    Log { k: u32 },
}

impl StiefelCase {
    pub fn label(&self) -> String {
        match self {
            StiefelCase::Schatten(q) => format!("stiefel_q={}", q.label()),
            StiefelCase::Log { k } => format!("stiefel_log_k={k}"),
        }
    }

    fn validate(&self) -> Result<()> {
        match self {
            StiefelCase::Log { k } if !(1..=2).contains(k) => Err(RpcaError::InvalidArgument(format!(
                "log case is only defined for k = 1, 2, got {k}"
            ))),
            _ => Ok(()),
        }
    }

    fn spectral_sum(&self, values: impl Iterator<Item = f64>) -> f64 {
        match *self {
            StiefelCase::Schatten(q) => values.map(|s| s.powf(q.value())).sum(),
            StiefelCase::Log { k } => values.map(|s| (s.powf(1.0 / k as f64) + STIEFEL_LOG_EPS).ln()).sum(),
        }
    }
}

/// `(lhs, rhs)` of the inequality `f(W⁻¹ P Σ) ≥ Σᵢ f(Σᵢᵢ / Wᵢᵢ)` for
/// `P ∈ St(n, r)`, `w` of length `n` and `sigma` of length `r`.
pub fn stiefel_sides(p: &DenseMatrix, w: &[f64], sigma: &[f64], case: StiefelCase) -> Result<(f64, f64)> {
    case.validate()?;
    let (n, r) = p.shape();
    if w.len() != n || sigma.len() != r {
        return Err(RpcaError::DimensionMismatch(format!(
            "P is {n}x{r}, got {} weights and {} singular values",
            w.len(),
            sigma.len()
        )));
    }
    let z = DenseMatrix::from_fn(n, r, |i, j| p[(i, j)] * sigma[j] / w[i]);
    let lhs = case.spectral_sum(linalg::singular_values(&z)?.into_iter());
    let rhs = case.spectral_sum(sigma.iter().zip(w).map(|(s, wi)| s / wi));
    Ok((lhs, rhs))
}

pub fn check_stiefel_inequality(n: usize, r: usize, case: StiefelCase, trials: usize, seed: RngSeed) -> Result<CheckReport> {
    case.validate()?;
    if r == 0 || n < r {
        return Err(RpcaError::InvalidArgument(format!("need n >= r >= 1, got n={n}, r={r}")));
    }
    let outcomes = run_trials(trials, seed, |stream, rng| {
        let p = linalg::random_stiefel_with(rng, n, r)?;
        let w = sorted_log_uniform(rng, n);
        let sigma = sorted_log_uniform(rng, r);
        let (lhs, rhs) = stiefel_sides(&p, &w, &sigma, case)?;
        let slack = lhs - rhs;
        Ok(TrialOutcome {
            stream,
            worst_slack: slack,
            violated: slack < -STIEFEL_TOL * (1.0 + rhs.abs()),
            attained: false,
        })
    })?;
    Ok(CheckReport::from_trials(case.label(), outcomes))
}

/// Random rank-`k ≤ r` matrix with log-uniform singular values.
fn random_low_rank(rng: &mut ChaCha8Rng, m: usize, n: usize, r: usize) -> Result<DenseMatrix> {
    let k = rng.random_range(1..=r);
    let u = linalg::random_stiefel_with(rng, m, k)?;
    let v = linalg::random_stiefel_with(rng, n, k)?;
    let sigma = sorted_log_uniform(rng, k);
    let mut us = u;
    for (j, s) in sigma.iter().enumerate() {
        us.column_mut(j).scale_mut(*s);
    }
    Ok(us * v.transpose())
}

/// Random invertible `r × r` matrix, bounded away from singular.
fn random_invertible(rng: &mut ChaCha8Rng, r: usize) -> DenseMatrix {
    loop {
        let c = linalg::gaussian_matrix(rng, r, r);
        let sv = linalg::singular_values(&c).unwrap_or_default();
        if sv.last().is_some_and(|&s| s > 1e-3 * sv[0]) {
            return c;
        }
    }
}

/// Factorization checks at `m × n`, width `r`, per trial:
/// the witness attains the target within [`FACTORIZATION_TOL`], and
/// [`REPARAMETERIZATIONS`] random factorizations `A = A₀C`, `B = B₀C⁻ᵀ` of
/// the same matrix never go below it.
pub fn check_factorization(m: usize, n: usize, r: usize, reg: Regularizer, trials: usize, seed: RngSeed) -> Result<CheckReport> {
    if r == 0 || r > m.min(n) {
        return Err(RpcaError::InvalidArgument(format!("width {r} must lie in 1..={}", m.min(n))));
    }
    let outcomes = run_trials(trials, seed, |stream, rng| {
        let x = random_low_rank(rng, m, n, r)?;
        let w = WeightSpec::new(sorted_log_uniform(rng, r))?;
        let target = norms::factorization_target(&x, &w, &reg, r)?;
        let tol = FACTORIZATION_TOL * (1.0 + target.abs());

        let wit = norms::build_witness(&x, &w, &reg, r)?;
        let at_witness = norms::surrogate_objective(&wit.a_tilde, &wit.b_tilde, &w, &reg)?;
        let gap = (at_witness - target).abs();
        let mut worst = -gap;
        let mut violated = gap > tol;

        // Balanced factors of X padded to width r; any C gives A·Bᵀ = X.
        let t = linalg::svd(&x)?;
        let k = t.numerical_rank(norms::RANK_REL_TOL);
        let mut a0 = DenseMatrix::zeros(m, r);
        let mut b0 = DenseMatrix::zeros(n, r);
        for j in 0..k {
            let root = t.singular_values[j].sqrt();
            a0.set_column(j, &(t.u.column(j) * root));
            b0.set_column(j, &(t.v.column(j) * root));
        }
        for _ in 0..REPARAMETERIZATIONS {
            let c = random_invertible(rng, r);
            let c_inv_t = c
                .clone()
                .try_inverse()
                .ok_or_else(|| RpcaError::Numerical("reparameterization is singular".into()))?
                .transpose();
            let value = norms::surrogate_objective(&(&a0 * &c), &(&b0 * c_inv_t), &w, &reg)?;
            let slack = value - target;
            worst = worst.min(slack);
            violated |= slack < -tol;
        }
        Ok(TrialOutcome {
            stream,
            worst_slack: worst,
            violated,
            attained: gap <= ATTAINMENT_TOL * (1.0 + target.abs()),
        })
    })?;
    let attained = outcomes.iter().filter(|o| o.attained).count();
    let mut report = CheckReport::from_trials(format!("factorization_{}", reg.kind().name()), outcomes);
    report.equality_attained = Some(attained);
    Ok(report)
}

/// Minimum of `f` over `sign·[0, |y| + 1]` sampled at [`GRID_STEP`].
fn grid_minimum(y: f64, f: impl Fn(f64) -> f64) -> f64 {
    let sign = if y < 0.0 { -1.0 } else { 1.0 };
    let steps = ((y.abs() + 1.0) / GRID_STEP).ceil() as usize;
    (0..=steps).map(|i| f(sign * i as f64 * GRID_STEP)).fold(f64::INFINITY, f64::min)
}

/// Operator names in the order [`check_prox_oracles`] reports them.
pub const PROX_OPERATORS: [&str; 5] = ["soft_threshold", "fro_shrink_1/3", "fro_shrink_1/2", "svt", "lsvt"];

/// Closed-form proximal operators against grid search. Each operator runs
/// `trials` draws; the returned reports follow [`PROX_OPERATORS`].
pub fn check_prox_oracles(trials: usize, seed: RngSeed) -> Result<Vec<CheckReport>> {
    let mut reports = Vec::with_capacity(PROX_OPERATORS.len());
    for (op, name) in PROX_OPERATORS.iter().enumerate() {
        // Separate stream ranges per operator.
        let base = (op as u64) << 32;
        let outcomes = run_trials(trials, seed, |i, _| {
            let stream = base | i;
            let rng = &mut seed.stream(stream);
            let gap = match op {
                0 => scalar_gap(ProxSpec::new(ProxKind::L1, log_uniform(rng, 1e-2, 1e1))?, rng.random_range(-5.0..5.0)),
                1 | 2 => {
                    let alpha = if op == 1 { 1.0 / 3.0 } else { 0.5 };
                    let spec = ProxSpec::new(ProxKind::FroSquared { alpha }, log_uniform(rng, 1e-2, 1e1))?;
                    scalar_gap(spec, rng.random_range(-5.0..5.0))
                }
                3 => svt_gap(rng)?,
                _ => {
                    let eps = log_uniform(rng, 1e-3, 1e-1);
                    let y = rng.random_range(0.0..3.0);
                    // Every tenth draw sits on the zero-discriminant boundary.
                    let t = if i % 10 == 0 { (y + eps) * (y + eps) / 4.0 } else { log_uniform(rng, 1e-3, 1.0) };
                    scalar_gap(ProxSpec::new(ProxKind::LogNorm { alpha: 1.0, eps }, t)?, y)
                }
            };
            Ok(TrialOutcome {
                stream,
                worst_slack: -gap,
                violated: gap > PROX_GAP_TOL,
                attained: false,
            })
        })?;
        reports.push(CheckReport::from_trials(format!("prox_{name}"), outcomes));
    }
    Ok(reports)
}

/// Objective of the closed-form point minus the grid minimum.
fn scalar_gap(spec: ProxSpec, y: f64) -> f64 {
    let x = spec.apply(y);
    spec.objective(x, y) - grid_minimum(y, |v| spec.objective(v, y))
}

/// SVT of a random matrix: compares `½‖Z − Y‖² + τ‖Z‖_*` at the returned
/// `Z` with the same objective at `U·diag(x_grid)·Vᵀ`, where each `x_grid`
/// is the grid minimizer for one singular value of `Y`.
fn svt_gap(rng: &mut ChaCha8Rng) -> Result<f64> {
    let y = linalg::gaussian_matrix(rng, 4, 3) * rng.random_range(0.1..3.0);
    let tau = log_uniform(rng, 1e-2, 3.0);
    let z = prox::svt(&y, tau)?;
    let dec = linalg::svd(&y)?;
    let spec = ProxSpec::new(ProxKind::Nuclear { alpha: 1.0 }, tau)?;
    let grid_values: Vec<f64> = dec
        .singular_values
        .iter()
        .map(|&s| {
            let steps = ((s + 1.0) / GRID_STEP).ceil() as usize;
            (0..=steps)
                .map(|i| i as f64 * GRID_STEP)
                .min_by(|a, b| spec.objective(*a, s).total_cmp(&spec.objective(*b, s)))
                .unwrap_or(0.0)
        })
        .collect();
    let z_grid = dec.reassemble(&grid_values);
    let f = |m: &DenseMatrix| -> Result<f64> {
        Ok(0.5 * (m - &y).norm_squared() + tau * linalg::singular_values(m)?.iter().sum::<f64>())
    };
    Ok(f(&z)? - f(&z_grid)?)
}

/// The default battery used by `verify --all`.
pub fn default_stiefel_cases() -> Vec<StiefelCase> {
    SchattenExponent::ALL
        .iter()
        .map(|&q| StiefelCase::Schatten(q))
        .chain([StiefelCase::Log { k: 1 }, StiefelCase::Log { k: 2 }])
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::norms::RegularizerKind;

    #[test]
    fn identity_columns_give_equality() {
        let p = DenseMatrix::identity(6, 3);
        let sigma = [4.0, 2.0, 0.5];
        for case in default_stiefel_cases() {
            let (lhs, rhs) = stiefel_sides(&p, &[1.0; 6], &sigma, case).unwrap();
            assert!((lhs - rhs).abs() < 1e-12, "{case:?}");
        }
    }

    #[test]
    fn square_orthogonal_case_has_nonnegative_slack() {
        let report = check_stiefel_inequality(4, 4, StiefelCase::Schatten(SchattenExponent::One), 50, RngSeed(2)).unwrap();
        assert_eq!(report.violations, 0);
    }

    #[test]
    fn stiefel_rejects_bad_cases() {
        assert!(check_stiefel_inequality(5, 2, StiefelCase::Log { k: 3 }, 1, RngSeed(0)).is_err());
        assert!(check_stiefel_inequality(2, 5, StiefelCase::Log { k: 1 }, 1, RngSeed(0)).is_err());
    }

    #[test]
    fn reports_are_deterministic() {
        let case = StiefelCase::Schatten(SchattenExponent::Half);
        let a = check_stiefel_inequality(8, 3, case, 40, RngSeed(9)).unwrap();
        let b = check_stiefel_inequality(8, 3, case, 40, RngSeed(9)).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.trials, 40);
    }

    #[test]
    fn small_factorization_battery() {
        for kind in RegularizerKind::ALL {
            let report = check_factorization(6, 5, 3, Regularizer::of_kind(kind), 10, RngSeed(1)).unwrap();
            assert!(report.passed(), "{report}");
        }
    }

    #[test]
    fn small_prox_battery() {
        let reports = check_prox_oracles(10, RngSeed(3)).unwrap();
        assert_eq!(reports.len(), PROX_OPERATORS.len());
        for r in reports {
            assert!(r.passed(), "{r}");
        }
    }

    #[test]
    fn report_line_format() {
        let r = CheckReport::from_trials(
            "x".into(),
            vec![TrialOutcome {
                stream: 4,
                worst_slack: -1.0,
                violated: true,
                attained: false,
            }],
        );
        assert_eq!(r.to_string(), "x 1 1 -1.000000e0 violating_streams=4");
        assert!(!r.passed());
    }
}
