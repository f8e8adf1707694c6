//! Dense matrices, thin SVD, observation masks, weights and seeded sampling.
//!
//! Matrices are `m × n` (rows × cols) throughout. Factor matrices `A` and `B`
//! are `m × r` and `n × r`, so that `X = A·Bᵀ`.

use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Result, RpcaError};

/// Real dense matrix, the value type for every matrix quantity in the crate.
pub type DenseMatrix = DMatrix<f64>;

/// Build a matrix from row-major entries, rejecting non-finite values.
pub fn from_row_major(rows: usize, cols: usize, entries: &[f64]) -> Result<DenseMatrix> {
    if rows == 0 || cols == 0 {
        return Err(RpcaError::InvalidArgument(format!(
            "matrix dimensions must be positive, got {rows}x{cols}"
        )));
    }
    if entries.len() != rows * cols {
        return Err(RpcaError::DimensionMismatch(format!(
            "{} entries for a {rows}x{cols} matrix",
            entries.len()
        )));
    }
    let m = DMatrix::from_row_slice(rows, cols, entries);
    ensure_finite(&m, "matrix entries")?;
    Ok(m)
}

pub fn ensure_finite(m: &DenseMatrix, what: &'static str) -> Result<()> {
    if m.iter().all(|v| v.is_finite()) {
        Ok(())
    } else {
        Err(RpcaError::NonFinite(what))
    }
}

/// Thin singular value decomposition `X = U·diag(s)·Vᵀ`.
///
/// `U` is `m × k`, `V` is `n × k` with `k = min(m, n)`. Singular values are
/// non-increasing and each column of `U` has its largest-magnitude entry
/// positive, which makes the factors deterministic for distinct singular
/// values.
#[derive(Debug, Clone)]
pub struct SvdTriple {
    pub u: DenseMatrix,
    pub singular_values: DVector<f64>,
    pub v: DenseMatrix,
}

impl SvdTriple {
    pub fn len(&self) -> usize {
        self.singular_values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.singular_values.is_empty()
    }

    /// `U·diag(values)·Vᵀ` for a replacement vector of singular values.
    pub fn reassemble(&self, values: &[f64]) -> DenseMatrix {
        assert_eq!(values.len(), self.len());
        let mut us = self.u.clone();
        for (j, &s) in values.iter().enumerate() {
            us.column_mut(j).scale_mut(s);
        }
        us * self.v.transpose()
    }

    pub fn reconstruct(&self) -> DenseMatrix {
        self.reassemble(self.singular_values.as_slice())
    }

    /// Number of singular values above `rel_tol · σ₁`.
    pub fn numerical_rank(&self, rel_tol: f64) -> usize {
        numerical_rank(self.singular_values.as_slice(), rel_tol)
    }
}

/// Count of entries of a non-increasing vector strictly above `rel_tol · s[0]`.
pub fn numerical_rank(values: &[f64], rel_tol: f64) -> usize {
    match values.first() {
        Some(&top) if top > 0.0 => values.iter().filter(|&&s| s > rel_tol * top).count(),
        _ => 0,
    }
}

/// Sweep limit of the Jacobi iteration; convergence takes well under 20 at
/// the sizes used here.
const JACOBI_MAX_SWEEPS: usize = 80;

/// Reconstruction error above which a decomposition is rejected.
const SVD_CHECK_TOL: f64 = 1e-9;

/// One-sided (Hestenes) Jacobi on the columns of a tall matrix.
///
/// Returns `(G, V)` with `X·V = G`, `V` orthogonal and the columns of `G`
/// mutually orthogonal relative to their norms. Unlike bidiagonal QR this is
/// reliable on exactly rank-deficient inputs, which the solver produces
/// constantly.
fn jacobi_orthogonalize(x: &DenseMatrix, want_v: bool) -> Result<(DenseMatrix, Option<DenseMatrix>)> {
    let (m, n) = x.shape();
    debug_assert!(m >= n);
    let tol = m as f64 * f64::EPSILON;
    let mut g = x.clone();
    let mut v = want_v.then(|| DenseMatrix::identity(n, n));
    for _ in 0..JACOBI_MAX_SWEEPS {
        let mut rotated = false;
        for p in 0..n {
            for q in p + 1..n {
                let (gp, gq) = (g.column(p), g.column(q));
                let alpha = gp.norm_squared();
                let beta = gq.norm_squared();
                let gamma = gp.dot(&gq);
                if gamma == 0.0 || gamma.abs() <= tol * (alpha * beta).sqrt() {
                    continue;
                }
                rotated = true;
                let zeta = (beta - alpha) / (2.0 * gamma);
                let t = zeta.signum() / (zeta.abs() + (1.0 + zeta * zeta).sqrt());
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = c * t;
                rotate_columns(&mut g, p, q, c, s);
                if let Some(v) = v.as_mut() {
                    rotate_columns(v, p, q, c, s);
                }
            }
        }
        if !rotated {
            return Ok((g, v));
        }
    }
    Err(RpcaError::Numerical(format!(
        "SVD of a {m}x{n} matrix did not converge in {JACOBI_MAX_SWEEPS} sweeps"
    )))
}

fn rotate_columns(a: &mut DenseMatrix, p: usize, q: usize, c: f64, s: f64) {
    for i in 0..a.nrows() {
        let (x, y) = (a[(i, p)], a[(i, q)]);
        a[(i, p)] = c * x - s * y;
        a[(i, q)] = s * x + c * y;
    }
}

/// Extends the first `filled` orthonormal columns of `u` to a full
/// orthonormal set by Gram-Schmidt on the standard basis.
fn complete_orthonormal(u: &mut DenseMatrix, filled: usize) {
    let m = u.nrows();
    let mut next = filled;
    for e in 0..m {
        if next == u.ncols() {
            break;
        }
        let mut cand = DVector::zeros(m);
        cand[e] = 1.0;
        for _ in 0..2 {
            for j in 0..next {
                let proj = u.column(j).dot(&cand);
                cand -= u.column(j) * proj;
            }
        }
        let norm = cand.norm();
        if norm > 0.5 {
            u.set_column(next, &(cand / norm));
            next += 1;
        }
    }
}

type Factors = Option<(DenseMatrix, DenseMatrix)>;

/// Singular values and (optionally) factors of a tall matrix, sorted.
fn tall_svd(x: &DenseMatrix, want_vectors: bool) -> Result<(DVector<f64>, Factors)> {
    let n = x.ncols();
    let (g, v) = jacobi_orthogonalize(x, want_vectors)?;
    let norms: Vec<f64> = (0..n).map(|j| g.column(j).norm()).collect();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| norms[b].total_cmp(&norms[a]));
    let s = DVector::from_iterator(n, order.iter().map(|&j| norms[j]));
    if !want_vectors {
        return Ok((s, None));
    }
    let v = v.expect("V requested");
    let mut u = DenseMatrix::zeros(x.nrows(), n);
    let mut v_sorted = DenseMatrix::zeros(n, n);
    let mut filled = 0;
    for (k, &j) in order.iter().enumerate() {
        v_sorted.set_column(k, &v.column(j));
        if norms[j] > f64::MIN_POSITIVE {
            u.set_column(k, &(g.column(j) / norms[j]));
            filled = k + 1;
        }
    }
    complete_orthonormal(&mut u, filled);
    Ok((s, Some((u, v_sorted))))
}

/// Thin SVD with sorted singular values and normalized signs.
///
/// Computed by one-sided Jacobi. The result is checked against `x`; a
/// decomposition that fails to reproduce it is reported as
/// [`RpcaError::Numerical`].
pub fn svd(x: &DenseMatrix) -> Result<SvdTriple> {
    ensure_finite(x, "svd input")?;
    let wide = x.nrows() < x.ncols();
    let (s, vectors) = if wide {
        tall_svd(&x.transpose(), true)?
    } else {
        tall_svd(x, true)?
    };
    let (a, b) = vectors.expect("vectors requested");
    let (mut u, mut v) = if wide { (b, a) } else { (a, b) };
    for j in 0..s.len() {
        let col = u.column(j);
        let mut best = 0;
        for i in 1..col.len() {
            if col[i].abs() > col[best].abs() {
                best = i;
            }
        }
        if col[best] < 0.0 {
            u.column_mut(j).neg_mut();
            v.column_mut(j).neg_mut();
        }
    }
    let triple = SvdTriple {
        u,
        singular_values: s,
        v,
    };
    let err = (triple.reconstruct() - x).norm();
    if err.is_nan() || err > SVD_CHECK_TOL * (1.0 + x.norm()) {
        return Err(RpcaError::Numerical(format!(
            "SVD of a {}x{} matrix failed its reconstruction check ({err:e})",
            x.nrows(),
            x.ncols()
        )));
    }
    Ok(triple)
}

/// Singular values only, sorted non-increasing.
pub fn singular_values(x: &DenseMatrix) -> Result<Vec<f64>> {
    ensure_finite(x, "singular value input")?;
    let (s, _) = if x.nrows() < x.ncols() {
        tall_svd(&x.transpose(), false)?
    } else {
        tall_svd(x, false)?
    };
    Ok(s.iter().copied().collect())
}

/// Largest singular value.
pub fn spectral_norm(x: &DenseMatrix) -> Result<f64> {
    Ok(singular_values(x)?.first().copied().unwrap_or(0.0))
}

/// Index set Ω of observed entries.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ObservationMask {
    rows: usize,
    cols: usize,
    observed: Vec<(usize, usize)>,
    flags: Vec<bool>,
}

impl ObservationMask {
    /// Validates bounds and uniqueness; pairs are stored in row-major order.
    pub fn new(rows: usize, cols: usize, pairs: impl IntoIterator<Item = (usize, usize)>) -> Result<Self> {
        if rows == 0 || cols == 0 {
            return Err(RpcaError::InvalidArgument("mask dimensions must be positive".into()));
        }
        let mut flags = vec![false; rows * cols];
        for (i, j) in pairs {
            if i >= rows || j >= cols {
                return Err(RpcaError::InvalidArgument(format!(
                    "mask index ({i}, {j}) outside {rows}x{cols}"
                )));
            }
            let slot = &mut flags[i * cols + j];
            if *slot {
                return Err(RpcaError::InvalidArgument(format!("duplicate mask index ({i}, {j})")));
            }
            *slot = true;
        }
        let observed = (0..rows * cols)
            .filter(|&idx| flags[idx])
            .map(|idx| (idx / cols, idx % cols))
            .collect();
        Ok(Self {
            rows,
            cols,
            observed,
            flags,
        })
    }

    pub fn full(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            observed: (0..rows).flat_map(|i| (0..cols).map(move |j| (i, j))).collect(),
            flags: vec![true; rows * cols],
        }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn len(&self) -> usize {
        self.observed.len()
    }

    pub fn is_empty(&self) -> bool {
        self.observed.is_empty()
    }

    pub fn is_full(&self) -> bool {
        self.observed.len() == self.rows * self.cols
    }

    #[inline]
    pub fn contains(&self, i: usize, j: usize) -> bool {
        self.flags[i * self.cols + j]
    }

    /// Observed pairs in row-major order.
    pub fn pairs(&self) -> &[(usize, usize)] {
        &self.observed
    }

    fn check_shape(&self, x: &DenseMatrix) -> Result<()> {
        if x.shape() != (self.rows, self.cols) {
            return Err(RpcaError::DimensionMismatch(format!(
                "matrix is {}x{}, mask is {}x{}",
                x.nrows(),
                x.ncols(),
                self.rows,
                self.cols
            )));
        }
        Ok(())
    }
}

/// `P_Ω(X)` when `keep_observed`, otherwise `P_Ωᶜ(X)`.
pub fn project_mask(x: &DenseMatrix, mask: &ObservationMask, keep_observed: bool) -> Result<DenseMatrix> {
    mask.check_shape(x)?;
    Ok(DMatrix::from_fn(x.nrows(), x.ncols(), |i, j| {
        if mask.contains(i, j) == keep_observed {
            x[(i, j)]
        } else {
            0.0
        }
    }))
}

/// Positive, non-increasing diagonal weights.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightSpec(Vec<f64>);

impl WeightSpec {
    pub fn new(weights: Vec<f64>) -> Result<Self> {
        if weights.is_empty() {
            return Err(RpcaError::InvalidArgument("weights must be non-empty".into()));
        }
        if let Some(w) = weights.iter().find(|w| !(w.is_finite() && **w > 0.0)) {
            return Err(RpcaError::InvalidArgument(format!("weight {w} is not a positive finite number")));
        }
        if weights.windows(2).any(|p| p[0] < p[1]) {
            return Err(RpcaError::InvalidArgument("weights must be non-increasing".into()));
        }
        Ok(Self(weights))
    }

    pub fn identity(r: usize) -> Self {
        Self(vec![1.0; r])
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn is_identity(&self) -> bool {
        self.0.iter().all(|&w| w == 1.0)
    }

    /// `A·W^p`: scales column `j` by `w_j^p`.
    pub fn scale_columns(&self, a: &DenseMatrix, power: f64) -> DenseMatrix {
        assert_eq!(a.ncols(), self.len(), "factor width must equal weight count");
        let mut out = a.clone();
        for (j, &w) in self.0.iter().enumerate() {
            out.column_mut(j).scale_mut(w.powf(power));
        }
        out
    }
}

/// Seed for the crate's ChaCha8 generators.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub struct RngSeed(pub u64);

impl RngSeed {
    pub fn rng(self) -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(self.0)
    }

    /// Independent generator for a sub-task, e.g. one verification trial.
    pub fn stream(self, index: u64) -> ChaCha8Rng {
        let mut rng = self.rng();
        rng.set_stream(index);
        rng
    }
}

pub fn gaussian_matrix<R: rand::Rng + ?Sized>(rng: &mut R, rows: usize, cols: usize) -> DenseMatrix {
    // Drawn in row-major order so the sample does not depend on storage layout.
    let entries: Vec<f64> = (0..rows * cols).map(|_| StandardNormal.sample(rng)).collect();
    DMatrix::from_row_slice(rows, cols, &entries)
}

/// Haar-distributed `n × r` matrix with orthonormal columns.
pub fn random_stiefel(n: usize, r: usize, seed: RngSeed) -> Result<DenseMatrix> {
    random_stiefel_with(&mut seed.rng(), n, r)
}

pub fn random_stiefel_with<R: rand::Rng + ?Sized>(rng: &mut R, n: usize, r: usize) -> Result<DenseMatrix> {
    if r == 0 || n < r {
        return Err(RpcaError::InvalidArgument(format!(
            "Stiefel sample needs n >= r >= 1, got n={n}, r={r}"
        )));
    }
    let g = gaussian_matrix(rng, n, r);
    let qr = g.qr();
    let mut q = qr.q();
    let rdiag = qr.r().diagonal();
    // Fixing sign(R_jj) > 0 makes Q uniform on the Stiefel manifold.
    for j in 0..r {
        if rdiag[j] < 0.0 {
            q.column_mut(j).neg_mut();
        }
    }
    Ok(q)
}

/// Solves `X·G = rhs` for symmetric positive-definite `G`.
pub fn solve_spd_right(rhs: &DenseMatrix, gram: &DenseMatrix) -> Result<DenseMatrix> {
    let chol = gram
        .clone()
        .cholesky()
        .ok_or_else(|| RpcaError::Numerical("system matrix is not positive definite".into()))?;
    let xt = chol.solve(&rhs.transpose());
    let x = xt.transpose();
    ensure_finite(&x, "linear solve")
        .map_err(|_| RpcaError::Numerical("linear solve produced non-finite values".into()))?;
    Ok(x)
}
