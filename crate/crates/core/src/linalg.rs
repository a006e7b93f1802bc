//! Small dense helpers shared by the filters.

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};

/// Relative pivot threshold under which a Cholesky factor is treated as singular.
pub const SPD_PIVOT_TOL: f64 = 1e-13;

/// Default relative singular-value tolerance for numerical rank.
pub const DEFAULT_RANK_TOL: f64 = 1e-12;

/// Replaces `a` by `(a + aᵀ) / 2`.
pub fn symmetrize(a: &mut DMatrix<f64>) {
    let n = a.nrows();
    for i in 0..n {
        for j in (i + 1)..n {
            let v = 0.5 * (a[(i, j)] + a[(j, i)]);
            a[(i, j)] = v;
            a[(j, i)] = v;
        }
    }
}

pub fn symmetrized(mut a: DMatrix<f64>) -> DMatrix<f64> {
    symmetrize(&mut a);
    a
}

pub fn is_zero(a: &DMatrix<f64>) -> bool {
    a.iter().all(|&v| v == 0.0)
}

/// Cholesky factor of a symmetric matrix, rejected when any pivot is tiny
/// relative to the largest one.
pub fn spd_factor(a: &DMatrix<f64>) -> Option<Cholesky<f64, Dyn>> {
    spd_factor_owned(a.clone())
}

/// [`spd_factor`] that factors `a`'s own storage; `Cholesky::unpack` hands
/// it back for reuse.
pub fn spd_factor_owned(a: DMatrix<f64>) -> Option<Cholesky<f64, Dyn>> {
    let chol = a.cholesky()?;
    let l = chol.l_dirty();
    let (mut lo, mut hi) = (f64::INFINITY, 0.0_f64);
    for i in 0..l.nrows() {
        let p = l[(i, i)] * l[(i, i)];
        lo = lo.min(p);
        hi = hi.max(p);
    }
    if !(lo.is_finite() && lo > SPD_PIVOT_TOL * hi) {
        return None;
    }
    Some(chol)
}

/// Copies `src` into `buf` and factors it in place. Reclaim the storage with
/// `*buf = chol.unpack()`.
pub(crate) fn spd_factor_into(
    buf: &mut DMatrix<f64>,
    src: &DMatrix<f64>,
) -> Option<Cholesky<f64, Dyn>> {
    if buf.shape() == src.shape() {
        buf.copy_from(src);
    } else {
        *buf = src.clone();
    }
    spd_factor_owned(std::mem::replace(buf, DMatrix::zeros(0, 0)))
}

/// Inverse of a symmetric positive definite matrix, symmetrized.
pub fn spd_inverse(a: &DMatrix<f64>) -> Option<DMatrix<f64>> {
    spd_factor(a).map(|c| symmetrized(c.inverse()))
}

pub fn symmetric_eigenvalues(a: &DMatrix<f64>) -> DVector<f64> {
    symmetrized(a.clone()).symmetric_eigen().eigenvalues
}

pub fn min_eigenvalue(a: &DMatrix<f64>) -> f64 {
    symmetric_eigenvalues(a).min()
}

pub fn is_symmetric(a: &DMatrix<f64>, tol: f64) -> bool {
    a.is_square() && (a - a.transpose()).amax() <= tol * a.amax().max(1.0)
}

/// Numerical rank with singular-value cutoff `max_dim · σ_max · rel_tol`.
pub fn numerical_rank(c: &DMatrix<f64>, rel_tol: f64) -> usize {
    if c.is_empty() {
        return 0;
    }
    let sv = c.clone().svd(false, false).singular_values;
    let smax = sv.max();
    if smax == 0.0 {
        return 0;
    }
    let cutoff = c.nrows().max(c.ncols()) as f64 * smax * rel_tol;
    sv.iter().filter(|&&s| s > cutoff).count()
}

/// Inverse of a general square matrix, `None` if the LU pivots indicate
/// numerical singularity.
pub fn checked_inverse(a: &DMatrix<f64>) -> Option<DMatrix<f64>> {
    let lu = a.clone().lu();
    let u = lu.u();
    let (mut lo, mut hi) = (f64::INFINITY, 0.0_f64);
    for i in 0..u.nrows() {
        let p = u[(i, i)].abs();
        lo = lo.min(p);
        hi = hi.max(p);
    }
    if lo.is_nan() || lo <= 1e-14 * hi {
        return None;
    }
    lu.try_inverse()
}

/// Block-diagonal matrix of the given square blocks.
pub fn block_diagonal(blocks: &[&DMatrix<f64>]) -> DMatrix<f64> {
    let dim: usize = blocks.iter().map(|b| b.nrows()).sum();
    let mut out = DMatrix::zeros(dim, dim);
    let mut at = 0;
    for b in blocks {
        out.view_mut((at, at), (b.nrows(), b.ncols())).copy_from(*b);
        at += b.nrows();
    }
    out
}
