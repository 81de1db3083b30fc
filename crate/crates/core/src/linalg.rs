//! Small dense linear-algebra kernels over plain slices.
//!
//! Everything here is sequential with a fixed accumulation order so that
//! results are bit-reproducible regardless of how callers schedule work.

use alloc::vec;
use alloc::vec::Vec;

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn weighted_dot(w: &[f64], a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    debug_assert_eq!(w.len(), a.len());
    w.iter().zip(a).zip(b).map(|((w, x), y)| w * x * y).sum()
}

/// `y += alpha * x`
pub fn axpy(alpha: f64, x: &[f64], y: &mut [f64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += alpha * xi;
    }
}

/// Outcome of [`orthonormalize`].
#[derive(Debug, Clone, PartialEq)]
pub struct Orthonormalized {
    pub rows: Vec<Vec<f64>>,
    /// Input positions that survived, in order.
    pub kept: Vec<usize>,
    /// Input positions dropped as numerically dependent.
    pub dropped: Vec<usize>,
}

/// Modified Gram-Schmidt with one full reorthogonalization pass, under the
/// inner product `<a, b> = Σ w_j a_j b_j`.
///
/// A row whose residual norm falls below `rel_tol` times its original norm
/// (or is below `1e-300` absolutely) is dropped.
pub fn orthonormalize(rows: &[Vec<f64>], weights: &[f64], rel_tol: f64) -> Orthonormalized {
    let mut out: Vec<Vec<f64>> = Vec::with_capacity(rows.len());
    let mut kept = Vec::new();
    let mut dropped = Vec::new();
    for (idx, row) in rows.iter().enumerate() {
        let norm0 = libm::sqrt(weighted_dot(weights, row, row));
        let mut v = row.clone();
        for _pass in 0..2 {
            for q in &out {
                let c = weighted_dot(weights, &v, q);
                axpy(-c, q, &mut v);
            }
        }
        let norm = libm::sqrt(weighted_dot(weights, &v, &v));
        if !(norm > rel_tol * norm0) || norm < 1e-300 {
            dropped.push(idx);
            continue;
        }
        for x in &mut v {
            *x /= norm;
        }
        out.push(v);
        kept.push(idx);
    }
    Orthonormalized { rows: out, kept, dropped }
}

/// Least-squares solution of `A x ≈ b` for a column-major `A` (`cols`
/// columns of length `rows`) via Gram-Schmidt QR with reorthogonalization.
///
/// Returns `None` when `A` is numerically rank deficient.
pub fn least_squares(columns: &[Vec<f64>], b: &[f64]) -> Option<Vec<f64>> {
    let ncols = columns.len();
    let mut q: Vec<Vec<f64>> = Vec::with_capacity(ncols);
    let mut r = vec![0.0; ncols * ncols];
    for (j, col) in columns.iter().enumerate() {
        let norm0 = libm::sqrt(dot(col, col));
        let mut v = col.clone();
        for _pass in 0..2 {
            for (k, qk) in q.iter().enumerate() {
                let c = dot(&v, qk);
                r[k * ncols + j] += c;
                axpy(-c, qk, &mut v);
            }
        }
        let norm = libm::sqrt(dot(&v, &v));
        if !(norm > 1e-12 * norm0) || norm0 == 0.0 {
            return None;
        }
        r[j * ncols + j] = norm;
        for x in &mut v {
            *x /= norm;
        }
        q.push(v);
    }
    // x = R⁻¹ Qᵀ b
    let mut rhs: Vec<f64> = q.iter().map(|qk| dot(qk, b)).collect();
    for j in (0..ncols).rev() {
        let mut s = rhs[j];
        for k in j + 1..ncols {
            s -= r[j * ncols + k] * rhs[k];
        }
        rhs[j] = s / r[j * ncols + j];
    }
    Some(rhs)
}

/// Solves the symmetric positive-definite system `A x = b` (row-major `A`)
/// by Cholesky factorization. Returns `None` if `A` is not numerically SPD.
pub fn cholesky_solve(a: &[f64], b: &[f64]) -> Option<Vec<f64>> {
    let n = b.len();
    debug_assert_eq!(a.len(), n * n);
    let mut l = vec![0.0; n * n];
    for i in 0..n {
        for j in 0..=i {
            let mut s = a[i * n + j];
            for k in 0..j {
                s -= l[i * n + k] * l[j * n + k];
            }
            if i == j {
                if !(s > 0.0) {
                    return None;
                }
                l[i * n + i] = libm::sqrt(s);
            } else {
                l[i * n + j] = s / l[j * n + j];
            }
        }
    }
    let mut y = vec![0.0; n];
    for i in 0..n {
        let mut s = b[i];
        for k in 0..i {
            s -= l[i * n + k] * y[k];
        }
        y[i] = s / l[i * n + i];
    }
    let mut x = vec![0.0; n];
    for i in (0..n).rev() {
        let mut s = y[i];
        for k in i + 1..n {
            s -= l[k * n + i] * x[k];
        }
        x[i] = s / l[i * n + i];
    }
    Some(x)
}
