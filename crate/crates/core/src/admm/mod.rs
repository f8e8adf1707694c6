//! ADMM for the factorized robust PCA model
//!
//! ```text
//! min λ(h₁(Â) + h₂(B̂)) + ‖P_Ω(S)‖₁
//! s.t. Â = A·W⁻¹,  B̂ = B,  A·Bᵀ = X,  X + S = M
//! ```
//!
//! Each sweep minimizes the augmented Lagrangian exactly over
//! `A → B → S → X → Â → B̂`, then takes one ascent step on the four duals and
//! grows the penalty geometrically up to `rho_max`.

mod kkt;
mod updates;

pub use kkt::{kkt_residuals, KktResiduals};
pub use updates::{
    augmented_lagrangian, constraint_residuals, update_a, update_a_hat, update_b, update_b_hat, update_duals,
    update_s, update_x, Duals,
};

use crate::error::{Result, RpcaError};
use crate::linalg::{self, DenseMatrix, ObservationMask, RngSeed, WeightSpec};
use crate::norms::Regularizer;

/// Problem data: observed matrix, mask, weight and factor width.
#[derive(Debug, Clone)]
pub struct RpcaProblem {
    pub observed: DenseMatrix,
    pub mask: ObservationMask,
    pub lambda: f64,
    pub rank: usize,
    pub weights: WeightSpec,
    pub regularizer: Regularizer,
}

impl RpcaProblem {
    pub fn new(
        observed: DenseMatrix,
        mask: ObservationMask,
        lambda: f64,
        rank: usize,
        weights: WeightSpec,
        regularizer: Regularizer,
    ) -> Result<Self> {
        linalg::ensure_finite(&observed, "observed matrix")?;
        if observed.shape() != (mask.rows(), mask.cols()) {
            return Err(RpcaError::DimensionMismatch(format!(
                "observed matrix is {}x{}, mask is {}x{}",
                observed.nrows(),
                observed.ncols(),
                mask.rows(),
                mask.cols()
            )));
        }
        if !(lambda.is_finite() && lambda > 0.0) {
            return Err(RpcaError::InvalidArgument(format!("lambda must be positive, got {lambda}")));
        }
        if rank == 0 || rank > observed.nrows().min(observed.ncols()) {
            return Err(RpcaError::InvalidArgument(format!(
                "factor width {rank} must lie in 1..={}",
                observed.nrows().min(observed.ncols())
            )));
        }
        if weights.len() != rank {
            return Err(RpcaError::DimensionMismatch(format!(
                "{} weights for factor width {rank}",
                weights.len()
            )));
        }
        Ok(Self {
            observed,
            mask,
            lambda,
            rank,
            weights,
            regularizer,
        })
    }

    /// Identity weights and `λ = 1/√max(m, n)`.
    pub fn with_defaults(observed: DenseMatrix, mask: ObservationMask, rank: usize, regularizer: Regularizer) -> Result<Self> {
        let lambda = default_lambda(observed.nrows(), observed.ncols());
        Self::new(observed, mask, lambda, rank, WeightSpec::identity(rank), regularizer)
    }

    pub fn with_weights(&self, weights: WeightSpec) -> Result<Self> {
        Self::new(
            self.observed.clone(),
            self.mask.clone(),
            self.lambda,
            self.rank,
            weights,
            self.regularizer,
        )
    }

    pub fn rows(&self) -> usize {
        self.observed.nrows()
    }

    pub fn cols(&self) -> usize {
        self.observed.ncols()
    }

    /// `1 + ‖M‖_F`, the scale of the relative residuals.
    pub fn residual_scale(&self) -> f64 {
        1.0 + self.observed.norm()
    }
}

pub fn default_lambda(rows: usize, cols: usize) -> f64 {
    1.0 / (rows.max(cols) as f64).sqrt()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum InitKind {
    SvdOfObserved,
    SeededGaussian,
}

impl InitKind {
    pub fn name(self) -> &'static str {
        match self {
            InitKind::SvdOfObserved => "svd_of_observed",
            InitKind::SeededGaussian => "seeded_gaussian",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s.trim() {
            "svd_of_observed" | "svd" => Ok(InitKind::SvdOfObserved),
            "seeded_gaussian" | "gaussian" => Ok(InitKind::SeededGaussian),
            other => Err(RpcaError::InvalidArgument(format!("unknown init kind '{other}'"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverConfig {
    pub rho0: f64,
    pub mu: f64,
    pub rho_max: f64,
    pub max_iter: usize,
    pub tol_primal: f64,
    pub init: InitKind,
    pub seed: RngSeed,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            rho0: 1e-2,
            mu: 1.05,
            rho_max: 1e8,
            max_iter: 1000,
            tol_primal: 1e-7,
            init: InitKind::SvdOfObserved,
            seed: RngSeed(0),
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |what: String| Err(RpcaError::InvalidArgument(what));
        if !(self.rho0.is_finite() && self.rho0 > 0.0) {
            return bad(format!("rho0 must be positive, got {}", self.rho0));
        }
        if !(self.mu.is_finite() && self.mu > 1.0) {
            return bad(format!("mu must exceed 1, got {}", self.mu));
        }
        if !(self.rho_max.is_finite() && self.rho_max >= self.rho0) {
            return bad(format!("rho_max must be at least rho0, got {}", self.rho_max));
        }
        if self.max_iter == 0 {
            return bad("max_iter must be positive".into());
        }
        if !(self.tol_primal.is_finite() && self.tol_primal > 0.0) {
            return bad(format!("tol_primal must be positive, got {}", self.tol_primal));
        }
        Ok(())
    }
}

/// All primal blocks, duals and the current penalty.
#[derive(Debug, Clone, PartialEq)]
pub struct SolverState {
    pub a: DenseMatrix,
    pub b: DenseMatrix,
    pub s: DenseMatrix,
    pub x: DenseMatrix,
    pub a_hat: DenseMatrix,
    pub b_hat: DenseMatrix,
    pub y1: DenseMatrix,
    pub y2: DenseMatrix,
    pub y3: DenseMatrix,
    pub y4: DenseMatrix,
    pub rho: f64,
    pub iter: usize,
}

impl SolverState {
    pub fn is_finite(&self) -> bool {
        self.rho.is_finite()
            && [
                &self.a, &self.b, &self.s, &self.x, &self.a_hat, &self.b_hat, &self.y1, &self.y2, &self.y3, &self.y4,
            ]
            .iter()
            .all(|m| m.iter().all(|v| v.is_finite()))
    }

    /// Keeps `A, B, X, S`, rebuilds `Â = A·W⁻¹, B̂ = B` for new weights and
    /// clears the duals.
    pub fn restart(&self, weights: &WeightSpec, rho0: f64) -> Self {
        let (m, n, r) = (self.a.nrows(), self.b.nrows(), self.a.ncols());
        Self {
            a: self.a.clone(),
            b: self.b.clone(),
            s: self.s.clone(),
            x: self.x.clone(),
            a_hat: weights.scale_columns(&self.a, -1.0),
            b_hat: self.b.clone(),
            y1: DenseMatrix::zeros(m, r),
            y2: DenseMatrix::zeros(n, r),
            y3: DenseMatrix::zeros(m, n),
            y4: DenseMatrix::zeros(m, n),
            rho: rho0,
            iter: 0,
        }
    }
}

/// Initial point of the iteration.
pub fn init_state(p: &RpcaProblem, cfg: &SolverConfig) -> Result<SolverState> {
    cfg.validate()?;
    let (m, n, r) = (p.rows(), p.cols(), p.rank);
    let x0 = linalg::project_mask(&p.observed, &p.mask, true)?;
    let (a, b) = match cfg.init {
        InitKind::SvdOfObserved => {
            let t = linalg::svd(&x0)?;
            let mut a = DenseMatrix::zeros(m, r);
            let mut b = DenseMatrix::zeros(n, r);
            for j in 0..r {
                let root = t.singular_values[j].sqrt();
                a.set_column(j, &(t.u.column(j) * root));
                b.set_column(j, &(t.v.column(j) * root));
            }
            (a, b)
        }
        InitKind::SeededGaussian => {
            let mut rng = cfg.seed.rng();
            let scale = 1.0 / (r as f64).sqrt();
            let a = linalg::gaussian_matrix(&mut rng, m, r) * scale;
            let b = linalg::gaussian_matrix(&mut rng, n, r) * scale;
            (a, b)
        }
    };
    Ok(SolverState {
        a_hat: p.weights.scale_columns(&a, -1.0),
        b_hat: b.clone(),
        a,
        b,
        s: DenseMatrix::zeros(m, n),
        x: x0,
        y1: DenseMatrix::zeros(m, r),
        y2: DenseMatrix::zeros(n, r),
        y3: DenseMatrix::zeros(m, n),
        y4: DenseMatrix::zeros(m, n),
        rho: cfg.rho0,
        iter: 0,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Termination {
    Converged,
    MaxIter,
    RhoCapped,
    NumericalFailure,
}

impl Termination {
    pub fn name(self) -> &'static str {
        match self {
            Termination::Converged => "converged",
            Termination::MaxIter => "max_iter",
            Termination::RhoCapped => "rho_capped",
            Termination::NumericalFailure => "numerical_failure",
        }
    }
}

/// One row of the iteration history.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IterationRecord {
    pub iter: usize,
    /// Penalty used by this sweep.
    pub rho: f64,
    /// `‖Â−AW⁻¹‖, ‖B̂−B‖, ‖ABᵀ−X‖, ‖X+S−M‖`, each over `1 + ‖M‖_F`.
    pub residuals: [f64; 4],
    /// Augmented Lagrangian after the primal sweep, before the dual step.
    pub lagrangian: f64,
    /// `‖Y₁‖₂` after the dual step.
    pub y1_spectral: f64,
    /// `‖Y₃‖_F` after the dual step.
    pub y3_frobenius: f64,
    /// `‖Aᵏ⁺¹ − Aᵏ‖_F`.
    pub a_step: f64,
}

impl IterationRecord {
    pub fn max_residual(&self) -> f64 {
        self.residuals.iter().copied().fold(0.0, f64::max)
    }
}

#[derive(Debug, Clone)]
pub struct SolveReport {
    pub x_hat: DenseMatrix,
    pub s_hat: DenseMatrix,
    pub iterations: usize,
    pub termination: Termination,
    pub history: Vec<IterationRecord>,
    /// Final iterate, used for warm starts and diagnostics.
    pub state: SolverState,
    pub failure: Option<String>,
}

impl SolveReport {
    pub fn final_residuals(&self) -> Option<[f64; 4]> {
        self.history.last().map(|r| r.residuals)
    }
}

/// Iterations at the penalty cap without a new best residual before giving up.
pub const RHO_CAP_PATIENCE: usize = 50;

/// Runs the iteration from [`init_state`].
pub fn solve(p: &RpcaProblem, cfg: &SolverConfig) -> Result<SolveReport> {
    let state = init_state(p, cfg)?;
    solve_from(p, cfg, state)
}

/// Runs the iteration from a given state.
pub fn solve_from(p: &RpcaProblem, cfg: &SolverConfig, mut state: SolverState) -> Result<SolveReport> {
    cfg.validate()?;
    let scale = p.residual_scale();
    let mut history = Vec::with_capacity(cfg.max_iter.min(4096));
    let mut best = f64::INFINITY;
    let mut stalled = 0usize;
    let mut termination = Termination::MaxIter;
    let mut failure = None;

    for _ in 0..cfg.max_iter {
        match sweep(&state, p, cfg, scale) {
            Ok((next, record)) if next.is_finite() && record.lagrangian.is_finite() => {
                let capped = state.rho >= cfg.rho_max;
                state = next;
                history.push(record);
                let worst = record.max_residual();
                if worst <= cfg.tol_primal {
                    termination = Termination::Converged;
                    break;
                }
                if worst < best {
                    best = worst;
                    stalled = 0;
                } else if capped {
                    stalled += 1;
                    if stalled >= RHO_CAP_PATIENCE {
                        termination = Termination::RhoCapped;
                        break;
                    }
                }
            }
            Ok(_) => {
                termination = Termination::NumericalFailure;
                failure = Some(format!("non-finite iterate at iteration {}", state.iter + 1));
                break;
            }
            Err(e) => {
                termination = Termination::NumericalFailure;
                failure = Some(e.to_string());
                break;
            }
        }
    }

    Ok(SolveReport {
        x_hat: state.x.clone(),
        s_hat: state.s.clone(),
        iterations: history.len(),
        termination,
        history,
        state,
        failure,
    })
}

/// One full sweep: six block minimizations, then the dual step.
pub fn sweep(st: &SolverState, p: &RpcaProblem, cfg: &SolverConfig, scale: f64) -> Result<(SolverState, IterationRecord)> {
    let mut next = st.clone();
    next.a = update_a(&next, p)?;
    next.b = update_b(&next, p)?;
    next.s = update_s(&next, p)?;
    next.x = update_x(&next, p)?;
    next.a_hat = update_a_hat(&next, p)?;
    next.b_hat = update_b_hat(&next, p)?;

    let lagrangian = augmented_lagrangian(&next, p)?;
    let res = constraint_residuals(&next, p);
    let used_rho = next.rho;
    let duals = update_duals(&next, p, cfg);
    next.y1 = duals.y1;
    next.y2 = duals.y2;
    next.y3 = duals.y3;
    next.y4 = duals.y4;
    next.rho = duals.rho;
    next.iter += 1;

    let y1_spectral = if next.y1.iter().all(|v| v.is_finite()) {
        linalg::spectral_norm(&next.y1)?
    } else {
        f64::NAN
    };
    let record = IterationRecord {
        iter: next.iter,
        rho: used_rho,
        residuals: res.map(|r| r / scale),
        lagrangian,
        y1_spectral,
        y3_frobenius: next.y3.norm(),
        a_step: (&next.a - &st.a).norm(),
    };
    Ok((next, record))
}
