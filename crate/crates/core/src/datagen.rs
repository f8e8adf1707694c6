//! Synthetic low-rank plus sparse instances and recovery metrics.

use rand::seq::index;
use rand::Rng;

use crate::error::{Result, RpcaError};
use crate::linalg::{self, DenseMatrix, ObservationMask, RngSeed};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SyntheticSpec {
    pub m: usize,
    pub n: usize,
    pub true_rank: usize,
    pub corruption_fraction: f64,
    pub corruption_magnitude: f64,
    pub observe_fraction: f64,
    pub seed: RngSeed,
}

impl SyntheticSpec {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(RpcaError::InvalidArgument(msg));
        if self.m == 0 || self.n == 0 {
            return bad("dimensions must be positive".into());
        }
        if self.true_rank == 0 || self.true_rank > self.m.min(self.n) {
            return bad(format!("true_rank {} must lie in 1..={}", self.true_rank, self.m.min(self.n)));
        }
        if !(0.0..1.0).contains(&self.corruption_fraction) {
            return bad(format!("corruption_fraction {} must lie in [0, 1)", self.corruption_fraction));
        }
        if !(self.corruption_magnitude.is_finite() && self.corruption_magnitude > 0.0) {
            return bad(format!("corruption_magnitude {} must be positive", self.corruption_magnitude));
        }
        if !(self.observe_fraction > 0.0 && self.observe_fraction <= 1.0) {
            return bad(format!("observe_fraction {} must lie in (0, 1]", self.observe_fraction));
        }
        Ok(())
    }

    pub fn corrupted_count(&self) -> usize {
        (self.corruption_fraction * (self.m * self.n) as f64).round() as usize
    }

    pub fn observed_count(&self) -> usize {
        ((self.observe_fraction * (self.m * self.n) as f64).round() as usize).max(1)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GroundTruth {
    pub x_true: DenseMatrix,
    pub s_true: DenseMatrix,
    pub observed: DenseMatrix,
    pub mask: ObservationMask,
}

/// Draws `L`, `R`, the corruption and the mask from one generator, in that
/// order.
pub fn generate(spec: &SyntheticSpec) -> Result<GroundTruth> {
    spec.validate()?;
    let (m, n, k) = (spec.m, spec.n, spec.true_rank);
    let mut rng = spec.seed.rng();
    let l = linalg::gaussian_matrix(&mut rng, m, k);
    let r = linalg::gaussian_matrix(&mut rng, n, k);
    // Each entry of L·Rᵀ sums k unit-variance products; 1/√k restores unit
    // variance.
    let x_true = (l * r.transpose()) / (k as f64).sqrt();

    let mut s_true = DenseMatrix::zeros(m, n);
    let mut support = index::sample(&mut rng, m * n, spec.corrupted_count()).into_vec();
    support.sort_unstable();
    let mag = spec.corruption_magnitude;
    for flat in support {
        s_true[(flat / n, flat % n)] = rng.random_range(-mag..=mag);
    }

    let mask = if spec.observe_fraction >= 1.0 {
        ObservationMask::full(m, n)
    } else {
        let picked = index::sample(&mut rng, m * n, spec.observed_count());
        ObservationMask::new(m, n, picked.into_iter().map(|flat| (flat / n, flat % n)))?
    };

    let observed = &x_true + &s_true;
    Ok(GroundTruth {
        x_true,
        s_true,
        observed,
        mask,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RecoveryMetrics {
    /// `‖X̂ − X*‖_F / ‖X*‖_F`.
    pub x_rel_error: f64,
    /// `‖Ŝ − S*‖_F / (1 + ‖S*‖_F)`.
    pub s_rel_error: f64,
    /// Count of `σᵢ(X̂) > 1e-6·σ₁(X̂)`.
    pub x_rank: usize,
    pub support_precision: f64,
    pub support_recall: f64,
}

pub const METRIC_RANK_REL_TOL: f64 = 1e-6;
pub const SUPPORT_REL_THRESHOLD: f64 = 1e-6;

/// Support statistics use the threshold `1e-6·max|S*|`; with no predicted or
/// no true support the corresponding ratio is 1.
pub fn recovery_metrics(truth: &GroundTruth, x_hat: &DenseMatrix, s_hat: &DenseMatrix) -> Result<RecoveryMetrics> {
    for (name, m) in [("X_hat", x_hat), ("S_hat", s_hat)] {
        if m.shape() != truth.x_true.shape() {
            return Err(RpcaError::DimensionMismatch(format!(
                "{name} is {}x{}, ground truth is {}x{}",
                m.nrows(),
                m.ncols(),
                truth.x_true.nrows(),
                truth.x_true.ncols()
            )));
        }
    }
    let x_norm = truth.x_true.norm();
    let x_err = (x_hat - &truth.x_true).norm();
    let x_rel_error = if x_norm > 0.0 { x_err / x_norm } else { x_err };
    let s_rel_error = (s_hat - &truth.s_true).norm() / (1.0 + truth.s_true.norm());
    let x_rank = linalg::numerical_rank(&linalg::singular_values(x_hat)?, METRIC_RANK_REL_TOL);

    let threshold = SUPPORT_REL_THRESHOLD * truth.s_true.amax();
    let (mut tp, mut predicted, mut actual) = (0usize, 0usize, 0usize);
    for (hat, real) in s_hat.iter().zip(truth.s_true.iter()) {
        let p = hat.abs() > threshold;
        let a = real.abs() > threshold;
        predicted += p as usize;
        actual += a as usize;
        tp += (p && a) as usize;
    }
    let ratio = |num: usize, den: usize| if den == 0 { 1.0 } else { num as f64 / den as f64 };
    Ok(RecoveryMetrics {
        x_rel_error,
        s_rel_error,
        x_rank,
        support_precision: ratio(tp, predicted),
        support_recall: ratio(tp, actual),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn spec() -> SyntheticSpec {
        SyntheticSpec {
            m: 20,
            n: 15,
            true_rank: 3,
            corruption_fraction: 0.1,
            corruption_magnitude: 5.0,
            observe_fraction: 0.8,
            seed: RngSeed(7),
        }
    }

    #[test]
    fn instance_structure() {
        let g = generate(&spec()).unwrap();
        assert_eq!(g.observed, &g.x_true + &g.s_true);
        assert_eq!(g.s_true.iter().filter(|v| **v != 0.0).count(), 30);
        assert!(g.s_true.amax() <= 5.0);
        assert_eq!(g.mask.len(), 240);
        let sigma = linalg::singular_values(&g.x_true).unwrap();
        assert_eq!(linalg::numerical_rank(&sigma, 1e-10), 3);
    }

    #[test]
    fn edge_fractions() {
        let g = generate(&SyntheticSpec {
            corruption_fraction: 0.0,
            observe_fraction: 1.0,
            ..spec()
        })
        .unwrap();
        assert_eq!(g.s_true.norm(), 0.0);
        assert_eq!(g.observed, g.x_true);
        assert!(g.mask.is_full());
    }

    #[test]
    fn deterministic_in_seed() {
        assert_eq!(generate(&spec()).unwrap(), generate(&spec()).unwrap());
        let other = generate(&SyntheticSpec { seed: RngSeed(8), ..spec() }).unwrap();
        assert_ne!(other.x_true, generate(&spec()).unwrap().x_true);
    }

    #[test]
    fn invalid_specs() {
        for bad in [
            SyntheticSpec { true_rank: 16, ..spec() },
            SyntheticSpec { corruption_fraction: 1.0, ..spec() },
            SyntheticSpec { observe_fraction: 0.0, ..spec() },
            SyntheticSpec { corruption_magnitude: -1.0, ..spec() },
        ] {
            assert!(generate(&bad).is_err());
        }
    }

    #[test]
    fn metric_examples() {
        let g = generate(&spec()).unwrap();
        let exact = recovery_metrics(&g, &g.x_true, &g.s_true).unwrap();
        assert_eq!(exact.x_rel_error, 0.0);
        assert_eq!(exact.s_rel_error, 0.0);
        assert_eq!(exact.x_rank, 3);
        assert_eq!((exact.support_precision, exact.support_recall), (1.0, 1.0));

        let zero = DenseMatrix::zeros(20, 15);
        assert_eq!(recovery_metrics(&g, &zero, &g.s_true).unwrap().x_rel_error, 1.0);

        let mut delta = DenseMatrix::zeros(20, 15);
        delta[(3, 4)] = 0.3;
        delta[(10, 1)] = -0.4;
        let m = recovery_metrics(&g, &(&g.x_true + &delta), &g.s_true).unwrap();
        assert!((m.x_rel_error - 0.5 / g.x_true.norm()).abs() < 1e-14);

        assert!(recovery_metrics(&g, &DenseMatrix::zeros(2, 2), &g.s_true).is_err());
    }
}
