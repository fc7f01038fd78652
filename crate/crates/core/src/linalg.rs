//! Numerical rank certificates and structured products.
//!
//! Singular values come from one-sided (Hestenes) Jacobi rotations applied
//! to the shorter side of the matrix. Only the values are kept. Jacobi keeps
//! the absolute error of the small singular values at roughly
//! `eps * sigma_1`, which is what the rank thresholds rely on.

use alloc::vec::Vec;

use crate::error::{bail, Result};
use crate::matrix::Matrix;

pub const DEFAULT_TOL_REL: f64 = 1e-8;

const MAX_SWEEPS: usize = 80;
/// Kruskal rank is an exhaustive subset search; keep it small.
pub const KRUSKAL_MAX_COLUMNS: usize = 12;

/// Singular spectrum plus the rank decision taken from it.
#[derive(Debug, Clone, PartialEq)]
pub struct RankReport {
    /// Descending, nonnegative.
    pub singular_values: Vec<f64>,
    pub numerical_rank: usize,
    /// Relative threshold: singular values above `threshold_used * sigma_1` count.
    pub threshold_used: f64,
    /// `sigma_r / sigma_{r+1}` at the cut; infinite when `sigma_{r+1}` is
    /// zero or does not exist.
    pub gap_ratio: f64,
}

impl RankReport {
    /// Rebuilds the report for a different relative threshold.
    pub fn with_threshold(singular_values: Vec<f64>, tol_rel: f64) -> Self {
        let top = singular_values.first().copied().unwrap_or(0.0);
        let cut = tol_rel * top;
        let numerical_rank = if top > 0.0 {
            singular_values.iter().take_while(|&&s| s > cut).count()
        } else {
            0
        };
        let gap_ratio = gap_at(&singular_values, numerical_rank);
        Self { singular_values, numerical_rank, threshold_used: tol_rel, gap_ratio }
    }
}

/// `sigma_r / sigma_{r+1}` with 1-based `r`; `r = 0` or a missing/zero
/// successor yields infinity.
pub fn gap_at(singular_values: &[f64], r: usize) -> f64 {
    if r == 0 || r >= singular_values.len() {
        return f64::INFINITY;
    }
    let next = singular_values[r];
    if next == 0.0 {
        f64::INFINITY
    } else {
        singular_values[r - 1] / next
    }
}

/// Singular values of `m`, sorted descending. There are `min(rows, cols)`
/// of them.
pub fn singular_values(m: &Matrix) -> Result<Vec<f64>> {
    if m.as_slice().iter().any(|x| !x.is_finite()) {
        bail!(Argument, "matrix has non-finite entries");
    }
    let (count, len) = (m.rows().min(m.cols()), m.rows().max(m.cols()));
    if count == 0 {
        return Ok(Vec::new());
    }
    // Work on the `count` vectors of length `len` along the shorter side.
    let mut vecs: Vec<Vec<f64>> = if m.rows() <= m.cols() {
        (0..m.rows()).map(|i| m.row(i).to_vec()).collect()
    } else {
        (0..m.cols()).map(|j| m.column(j)).collect()
    };
    debug_assert!(vecs.iter().all(|v| v.len() == len));

    for _ in 0..MAX_SWEEPS {
        let mut rotated = false;
        for p in 0..count {
            for q in p + 1..count {
                let (alpha, beta, gamma) = dots(&vecs[p], &vecs[q]);
                if alpha == 0.0 || beta == 0.0 {
                    continue;
                }
                if gamma.abs() <= f64::EPSILON * libm::sqrt(alpha) * libm::sqrt(beta) {
                    continue;
                }
                rotated = true;
                let zeta = (beta - alpha) / (2.0 * gamma);
                let t = libm::copysign(1.0, zeta) / (zeta.abs() + libm::sqrt(1.0 + zeta * zeta));
                let c = 1.0 / libm::sqrt(1.0 + t * t);
                let s = c * t;
                let (lo, hi) = vecs.split_at_mut(q);
                for (x, y) in lo[p].iter_mut().zip(hi[0].iter_mut()) {
                    let (xp, yq) = (*x, *y);
                    *x = c * xp - s * yq;
                    *y = s * xp + c * yq;
                }
            }
        }
        if !rotated {
            break;
        }
    }

    let mut sv: Vec<f64> = vecs.iter().map(|v| norm(v)).collect();
    sv.sort_by(|a, b| b.partial_cmp(a).expect("finite singular values"));
    Ok(sv)
}

fn dots(x: &[f64], y: &[f64]) -> (f64, f64, f64) {
    let mut a = 0.0;
    let mut b = 0.0;
    let mut g = 0.0;
    for (&u, &v) in x.iter().zip(y) {
        a += u * u;
        b += v * v;
        g += u * v;
    }
    (a, b, g)
}

fn norm(x: &[f64]) -> f64 {
    // Scaled to stay clear of underflow for very small probability tables.
    let scale = x.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
    if scale == 0.0 {
        return 0.0;
    }
    let ss: f64 = x.iter().map(|v| (v / scale) * (v / scale)).sum();
    scale * libm::sqrt(ss)
}

/// SVD-based numerical rank with a threshold relative to the largest
/// singular value. The zero matrix has rank 0.
pub fn numerical_rank(m: &Matrix, tol_rel: f64) -> Result<RankReport> {
    if !(tol_rel > 0.0 && tol_rel < 1.0) {
        bail!(Argument, "tol_rel must lie in (0, 1), got {tol_rel}");
    }
    Ok(RankReport::with_threshold(singular_values(m)?, tol_rel))
}

/// `A ⊗ B`: block `(i, j)` is `a_ij * B`.
pub fn kronecker(a: &Matrix, b: &Matrix) -> Matrix {
    let (p, q) = (b.rows(), b.cols());
    Matrix::from_fn(a.rows() * p, a.cols() * q, |r, c| a[(r / p, c / q)] * b[(r % p, c % q)])
}

/// Column-wise Kronecker product `(c_1 ⊗ d_1 | ... | c_R ⊗ d_R)`.
pub fn khatri_rao(c: &Matrix, d: &Matrix) -> Result<Matrix> {
    if c.cols() != d.cols() {
        bail!(Argument, "khatri_rao needs equal column counts, got {} and {}", c.cols(), d.cols());
    }
    let p = d.rows();
    Ok(Matrix::from_fn(c.rows() * p, c.cols(), |r, k| c[(r / p, k)] * d[(r % p, k)]))
}

/// Largest `r` such that every `r` columns are linearly independent.
///
/// Exhaustive over column subsets, so limited to
/// [`KRUSKAL_MAX_COLUMNS`] columns. A zero column forces 0.
pub fn kruskal_rank(m: &Matrix, tol_rel: f64) -> Result<usize> {
    let n = m.cols();
    if n > KRUSKAL_MAX_COLUMNS {
        bail!(Size, "kruskal_rank supports at most {KRUSKAL_MAX_COLUMNS} columns, got {n}");
    }
    if !(tol_rel > 0.0 && tol_rel < 1.0) {
        bail!(Argument, "tol_rel must lie in (0, 1), got {tol_rel}");
    }
    // Single columns are judged against the largest column norm so that a
    // numerically zero column is caught even though it is "full rank" alone.
    let norms: Vec<f64> = (0..n).map(|j| norm(&m.column(j))).collect();
    let top = norms.iter().fold(0.0_f64, |a, &b| a.max(b));
    if n == 0 || norms.iter().any(|&s| s <= tol_rel * top) {
        return Ok(0);
    }
    let mut krank = 1;
    for size in 2..=n.min(m.rows()) {
        let mut all_independent = true;
        for_each_subset(n, size, &mut |cols| {
            if !all_independent {
                return;
            }
            let sub = m.select_cols(cols);
            match numerical_rank(&sub, tol_rel) {
                Ok(r) if r.numerical_rank == size => {}
                _ => all_independent = false,
            }
        });
        if !all_independent {
            break;
        }
        krank = size;
    }
    Ok(krank)
}

/// Calls `f` with each `size`-subset of `0..n` in lexicographic order.
pub fn for_each_subset(n: usize, size: usize, f: &mut dyn FnMut(&[usize])) {
    if size > n {
        return;
    }
    let mut idx: Vec<usize> = (0..size).collect();
    loop {
        f(&idx);
        // Rightmost position that can still move up.
        let mut i = size;
        while i > 0 && idx[i - 1] == n - size + (i - 1) {
            i -= 1;
        }
        if i == 0 {
            return;
        }
        idx[i - 1] += 1;
        for k in i..size {
            idx[k] = idx[k - 1] + 1;
        }
    }
}
