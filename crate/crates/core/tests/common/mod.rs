//! Oracles written independently of the library: a two-sided Jacobi
//! eigensolver, a from-scratch augmented Lagrangian, central differences and
//! grid search.

#![allow(dead_code)]

use nalgebra::DMatrix;
use reweighted_rpca::admm::{RpcaProblem, SolverState};
use reweighted_rpca::linalg::{self, RngSeed};

pub type Mat = DMatrix<f64>;

/// Eigenvalues (descending) and eigenvectors of a symmetric matrix by cyclic
/// two-sided Jacobi rotations.
pub fn jacobi_eigen(a: &Mat) -> (Vec<f64>, Mat) {
    let n = a.nrows();
    let mut a = a.clone();
    let mut v = Mat::identity(n, n);
    for _ in 0..100 {
        let off: f64 = (0..n).flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j))).map(|(i, j)| a[(i, j)].powi(2)).sum();
        if off.sqrt() <= 1e-15 * a.norm() {
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                if a[(p, q)] == 0.0 {
                    continue;
                }
                let theta = (a[(q, q)] - a[(p, p)]) / (2.0 * a[(p, q)]);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                let mut rot = Mat::identity(n, n);
                rot[(p, p)] = c;
                rot[(q, q)] = c;
                rot[(p, q)] = s;
                rot[(q, p)] = -s;
                a = rot.transpose() * &a * &rot;
                v = &v * &rot;
            }
        }
    }
    let mut idx: Vec<usize> = (0..n).collect();
    idx.sort_by(|&i, &j| a[(j, j)].total_cmp(&a[(i, i)]));
    let vals = idx.iter().map(|&i| a[(i, i)]).collect();
    let vecs = Mat::from_fn(n, n, |r, c| v[(r, idx[c])]);
    (vals, vecs)
}

/// Singular values as `‖X·vⱼ‖` over the eigenvectors `vⱼ` of `XᵀX` (of `XXᵀ`
/// when wide). Unlike `√λⱼ` this stays accurate for values near zero.
pub fn oracle_singular_values(x: &Mat) -> Vec<f64> {
    let x = if x.nrows() >= x.ncols() { x.clone() } else { x.transpose() };
    let (_, v) = jacobi_eigen(&(x.transpose() * &x));
    let mut s: Vec<f64> = (x * v).column_iter().map(|c| c.norm()).collect();
    s.sort_by(|a, b| b.total_cmp(a));
    s
}

/// Polar factor `Z(ZᵀZ)^{-1/2}` and the spectral function
/// `Z·V·diag(f(σ)/σ)·Vᵀ = U·diag(f(σ))·Vᵀ` for full-column-rank `Z`.
pub fn spectral_apply(z: &Mat, f: impl Fn(f64) -> f64) -> Mat {
    let (lam, v) = jacobi_eigen(&(z.transpose() * z));
    let d = Mat::from_diagonal(&nalgebra::DVector::from_iterator(
        lam.len(),
        lam.iter().map(|&l| {
            let s = l.sqrt();
            f(s) / s
        }),
    ));
    z * &v * d * v.transpose()
}

/// Smooth part of the augmented Lagrangian in `(A, B, S, X)`, written out
/// term by term from the definition; the regularizer and ℓ1 terms are added
/// by callers that need them.
pub fn smooth_lagrangian(st: &SolverState, p: &RpcaProblem) -> f64 {
    let w = p.weights.as_slice();
    let a_winv = Mat::from_fn(st.a.nrows(), st.a.ncols(), |i, j| st.a[(i, j)] / w[j]);
    let c1 = &st.a_hat - a_winv;
    let c2 = &st.b_hat - &st.b;
    let c3 = &st.a * st.b.transpose() - &st.x;
    let c4 = &st.x + &st.s - &p.observed;
    let inner = |y: &Mat, c: &Mat| y.iter().zip(c.iter()).map(|(a, b)| a * b).sum::<f64>();
    let sq = |c: &Mat| c.iter().map(|v| v * v).sum::<f64>();
    inner(&st.y1, &c1)
        + inner(&st.y2, &c2)
        + inner(&st.y3, &c3)
        + inner(&st.y4, &c4)
        + 0.5 * st.rho * (sq(&c1) + sq(&c2) + sq(&c3) + sq(&c4))
}

/// Central-difference gradient of `f` at `x`.
pub fn fd_gradient(x: &Mat, h: f64, f: impl Fn(&Mat) -> f64) -> Mat {
    let mut g = Mat::zeros(x.nrows(), x.ncols());
    for i in 0..x.nrows() {
        for j in 0..x.ncols() {
            let mut plus = x.clone();
            plus[(i, j)] += h;
            let mut minus = x.clone();
            minus[(i, j)] -= h;
            g[(i, j)] = (f(&plus) - f(&minus)) / (2.0 * h);
        }
    }
    g
}

/// Minimum of `f` on the grid `lo, lo + step, …, hi`.
pub fn grid_min(lo: f64, hi: f64, step: f64, f: impl Fn(f64) -> f64) -> (f64, f64) {
    let n = ((hi - lo) / step).ceil() as usize;
    (0..=n)
        .map(|i| lo + i as f64 * step)
        .map(|x| (x, f(x)))
        .fold((lo, f64::INFINITY), |best, cur| if cur.1 < best.1 { cur } else { best })
}

pub fn gaussian(seed: u64, rows: usize, cols: usize) -> Mat {
    linalg::gaussian_matrix(&mut RngSeed(seed).rng(), rows, cols)
}

/// Random state with every block and dual populated, for problem `p`.
pub fn random_state(p: &RpcaProblem, seed: u64, rho: f64) -> SolverState {
    let (m, n, r) = (p.rows(), p.cols(), p.rank);
    let mut rng = RngSeed(seed).rng();
    let mut g = |rows, cols| linalg::gaussian_matrix(&mut rng, rows, cols);
    SolverState {
        a: g(m, r),
        b: g(n, r),
        s: g(m, n),
        x: g(m, n),
        a_hat: g(m, r),
        b_hat: g(n, r),
        y1: g(m, r) * 0.5,
        y2: g(n, r) * 0.5,
        y3: g(m, n) * 0.5,
        y4: g(m, n) * 0.5,
        rho,
        iter: 0,
    }
}
