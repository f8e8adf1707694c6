//! Outer loop: solve, reset the weights to the floored singular values of the
//! recovery, and solve again from the previous factors.

use crate::admm::{self, RpcaProblem, SolveReport, SolverConfig, Termination};
use crate::error::{Result, RpcaError};
use crate::linalg::{self, DenseMatrix, WeightSpec};

/// Lower bound applied to the singular values that become weights.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum EpsFloor {
    /// Fraction of `σ₁` of the first-round recovery.
    Relative(f64),
    Absolute(f64),
}

impl Default for EpsFloor {
    fn default() -> Self {
        EpsFloor::Relative(1e-3)
    }
}

impl EpsFloor {
    fn value(&self) -> f64 {
        match *self {
            EpsFloor::Relative(v) | EpsFloor::Absolute(v) => v,
        }
    }

    /// The absolute floor given `σ₁` of the first recovery.
    pub fn resolve(&self, top_singular_value: f64) -> f64 {
        match *self {
            EpsFloor::Absolute(v) => v,
            // A zero recovery has no scale; fall back to the fraction itself.
            EpsFloor::Relative(f) if top_singular_value > 0.0 => f * top_singular_value,
            EpsFloor::Relative(f) => f,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ReweightConfig {
    pub outer_rounds: usize,
    pub eps_floor: EpsFloor,
    pub inner: SolverConfig,
}

impl Default for ReweightConfig {
    fn default() -> Self {
        Self {
            outer_rounds: 3,
            eps_floor: EpsFloor::default(),
            inner: SolverConfig::default(),
        }
    }
}

impl ReweightConfig {
    pub fn validate(&self) -> Result<()> {
        if self.outer_rounds == 0 {
            return Err(RpcaError::InvalidArgument("outer_rounds must be positive".into()));
        }
        let v = self.eps_floor.value();
        if !(v.is_finite() && v > 0.0) {
            return Err(RpcaError::InvalidArgument(format!("eps_floor must be positive, got {v}")));
        }
        self.inner.validate()
    }
}

/// Result of the outer loop.
#[derive(Debug, Clone)]
pub struct ReweightReport {
    /// Report of the last round.
    pub report: SolveReport,
    /// Weights used in each round; entry 0 is the identity.
    pub weights: Vec<WeightSpec>,
    /// Report of every round, in order.
    pub rounds: Vec<SolveReport>,
}

/// Top `r` singular values floored at `floor`.
pub fn floored_weights(x: &DenseMatrix, r: usize, floor: f64) -> Result<WeightSpec> {
    let sigma = linalg::singular_values(x)?;
    WeightSpec::new((0..r).map(|i| sigma.get(i).copied().unwrap_or(0.0).max(floor)).collect())
}

/// Weights built from the true low-rank matrix.
pub fn oracle_weights(x_true: &DenseMatrix, r: usize, eps_floor: f64) -> Result<WeightSpec> {
    if r == 0 || r > x_true.nrows().min(x_true.ncols()) {
        return Err(RpcaError::InvalidArgument(format!("weight count {r} exceeds the matrix dimensions")));
    }
    if !(eps_floor.is_finite() && eps_floor > 0.0) {
        return Err(RpcaError::InvalidArgument(format!("eps_floor must be positive, got {eps_floor}")));
    }
    floored_weights(x_true, r, eps_floor)
}

pub fn reweighted_solve(p: &RpcaProblem, cfg: &ReweightConfig) -> Result<ReweightReport> {
    cfg.validate()?;
    if !p.weights.is_identity() {
        return Err(RpcaError::InvalidArgument("the first round must use identity weights".into()));
    }
    let wrap = |round: usize| move |e: RpcaError| RpcaError::Round { round, source: Box::new(e) };

    let mut weights = vec![p.weights.clone()];
    let mut rounds: Vec<SolveReport> = Vec::with_capacity(cfg.outer_rounds);
    let mut floor = None;
    let mut problem = p.clone();
    for round in 0..cfg.outer_rounds {
        let report = match rounds.last() {
            None => admm::solve(&problem, &cfg.inner).map_err(wrap(round))?,
            Some(prev) => {
                let start = prev.state.restart(&problem.weights, cfg.inner.rho0);
                admm::solve_from(&problem, &cfg.inner, start).map_err(wrap(round))?
            }
        };
        if report.termination == Termination::NumericalFailure {
            let msg = report.failure.clone().unwrap_or_else(|| "numerical failure".into());
            return Err(wrap(round)(RpcaError::Numerical(msg)));
        }
        let last = round + 1 == cfg.outer_rounds;
        if !last {
            let floor = *floor.get_or_insert_with(|| {
                let top = linalg::spectral_norm(&report.x_hat).unwrap_or(0.0);
                cfg.eps_floor.resolve(top)
            });
            let w = floored_weights(&report.x_hat, p.rank, floor).map_err(wrap(round))?;
            problem = problem.with_weights(w.clone()).map_err(wrap(round))?;
            weights.push(w);
        }
        rounds.push(report);
    }
    Ok(ReweightReport {
        report: rounds.last().cloned().expect("at least one round"),
        weights,
        rounds,
    })
}
