//! Dense linear-algebra helpers shared by the estimator modules.

use nalgebra::{DMatrix, DVector, SymmetricEigen};

use crate::error::{Error, Result};

/// Relative singular-value cutoff used for the pseudo-inverse of `G`.
pub const PINV_TOL: f64 = 1e-12;

/// Relative eigenvalue cutoff for gain solves against innovation covariances.
pub const SOLVE_CUTOFF: f64 = 1e-10;

/// Moore-Penrose pseudo-inverse. Singular values below `tol * sigma_max` are
/// treated as zero.
pub fn pinv(m: &DMatrix<f64>, tol: f64) -> DMatrix<f64> {
    let (rows, cols) = m.shape();
    if rows == 0 || cols == 0 {
        return DMatrix::zeros(cols, rows);
    }
    let svd = m.clone().svd(true, true);
    let u = svd.u.as_ref().expect("u requested");
    let v_t = svd.v_t.as_ref().expect("v_t requested");
    let smax = svd.singular_values.max();
    let cutoff = tol * smax;
    let mut out = DMatrix::zeros(cols, rows);
    for (k, &s) in svd.singular_values.iter().enumerate() {
        if s > cutoff && s > 0.0 {
            // out += v_k * u_k^T / s
            let vk = v_t.row(k).transpose();
            let uk = u.column(k);
            out.ger(1.0 / s, &vk, &uk, 1.0);
        }
    }
    out
}

/// Pseudo-inverse of a symmetric matrix through its eigendecomposition.
/// Returns the pseudo-inverse and the number of eigen-directions dropped.
pub fn sym_pinv(m: &DMatrix<f64>, rel_cutoff: f64) -> (DMatrix<f64>, usize) {
    let n = m.nrows();
    if n == 0 {
        return (DMatrix::zeros(0, 0), 0);
    }
    let eig = SymmetricEigen::new(symmetrize(m));
    let scale = eig.eigenvalues.iter().fold(0.0_f64, |a, &x| a.max(x.abs()));
    let cutoff = rel_cutoff * scale;
    let mut out = DMatrix::zeros(n, n);
    let mut dropped = 0;
    for (k, &lam) in eig.eigenvalues.iter().enumerate() {
        if lam > cutoff && lam > 0.0 {
            let q = eig.eigenvectors.column(k);
            out.ger(1.0 / lam, &q, &q, 1.0);
        } else {
            dropped += 1;
        }
    }
    (out, dropped)
}

/// Solves `X * S = C` for `X` with `S` symmetric positive-semidefinite,
/// using the pseudo-inverse of `S` when it is singular.
pub fn solve_right_psd(c: &DMatrix<f64>, s: &DMatrix<f64>, rel_cutoff: f64) -> (DMatrix<f64>, usize) {
    let (s_pinv, dropped) = sym_pinv(s, rel_cutoff);
    (c * s_pinv, dropped)
}

pub fn symmetrize(m: &DMatrix<f64>) -> DMatrix<f64> {
    (m + m.transpose()) * 0.5
}

/// Largest absolute entry of `a - b`.
pub fn max_abs_diff(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
    assert_eq!(a.shape(), b.shape(), "shape mismatch in max_abs_diff");
    a.iter().zip(b.iter()).fold(0.0, |acc, (x, y)| acc.max((x - y).abs()))
}

pub fn max_abs(a: &DMatrix<f64>) -> f64 {
    a.iter().fold(0.0, |acc, x| acc.max(x.abs()))
}

/// Largest singular value.
pub fn spectral_norm(m: &DMatrix<f64>) -> f64 {
    if m.is_empty() {
        return 0.0;
    }
    m.singular_values().max()
}

/// Largest eigenvalue modulus of a square matrix.
pub fn spectral_radius(m: &DMatrix<f64>) -> f64 {
    assert!(m.is_square(), "spectral radius needs a square matrix");
    match m.nrows() {
        0 => 0.0,
        1 => m[(0, 0)].abs(),
        _ => m
            .complex_eigenvalues()
            .iter()
            .fold(0.0, |acc, z| acc.max(z.norm())),
    }
}

/// Numerical rank with a cutoff relative to the largest singular value.
pub fn numerical_rank(m: &DMatrix<f64>, rel_tol: f64) -> usize {
    if m.is_empty() {
        return 0;
    }
    let sv = m.singular_values();
    let cutoff = rel_tol * sv.max();
    sv.iter().filter(|&&s| s > cutoff && s > 0.0).count()
}

/// Ascending eigenvalues of a symmetric matrix.
pub fn sym_eigenvalues(m: &DMatrix<f64>) -> Vec<f64> {
    if m.is_empty() {
        return Vec::new();
    }
    let mut ev: Vec<f64> = SymmetricEigen::new(symmetrize(m)).eigenvalues.iter().copied().collect();
    ev.sort_by(|a, b| a.total_cmp(b));
    ev
}

/// Symmetric square-root factor `S` with `S * S^T = m`. Eigenvalues in
/// `[-tol * scale, 0)` are clipped to zero; anything more negative is an error.
pub fn psd_sqrt(m: &DMatrix<f64>, tol: f64) -> Result<DMatrix<f64>> {
    let n = m.nrows();
    if !m.is_square() {
        return Err(Error::Dimension(format!("covariance is {}x{}", m.nrows(), m.ncols())));
    }
    if n == 0 {
        return Ok(DMatrix::zeros(0, 0));
    }
    let eig = SymmetricEigen::new(symmetrize(m));
    let scale = eig.eigenvalues.iter().fold(1.0_f64, |a, &x| a.max(x.abs()));
    let mut diag = DVector::zeros(n);
    for (k, &lam) in eig.eigenvalues.iter().enumerate() {
        if lam < -tol * scale {
            return Err(Error::Model(format!(
                "covariance is not positive-semidefinite (eigenvalue {lam:e})"
            )));
        }
        diag[k] = lam.max(0.0).sqrt();
    }
    let q = &eig.eigenvectors;
    Ok(q * DMatrix::from_diagonal(&diag) * q.transpose())
}

/// `kron(a, b)`.
pub fn kron(a: &DMatrix<f64>, b: &DMatrix<f64>) -> DMatrix<f64> {
    a.kronecker(b)
}

/// `(1 1^T) ⊗ x` for `n` agents.
pub fn ones_kron(n: usize, x: &DMatrix<f64>) -> DMatrix<f64> {
    let (r, c) = x.shape();
    let mut out = DMatrix::zeros(n * r, n * c);
    for i in 0..n {
        for j in 0..n {
            out.view_mut((i * r, j * c), (r, c)).copy_from(x);
        }
    }
    out
}

/// Adds `x` to every `m x m` block of `target`.
pub fn add_ones_kron(target: &mut DMatrix<f64>, x: &DMatrix<f64>) {
    let m = x.nrows();
    let n = target.nrows() / m;
    for i in 0..n {
        for j in 0..n {
            let mut v = target.view_mut((i * m, j * m), (m, m));
            v += x;
        }
    }
}

/// Block-diagonal matrix from arbitrary-shaped blocks.
pub fn block_diag(blocks: &[DMatrix<f64>]) -> DMatrix<f64> {
    let rows: usize = blocks.iter().map(|b| b.nrows()).sum();
    let cols: usize = blocks.iter().map(|b| b.ncols()).sum();
    let mut out = DMatrix::zeros(rows, cols);
    let (mut r, mut c) = (0, 0);
    for b in blocks {
        out.view_mut((r, c), b.shape()).copy_from(b);
        r += b.nrows();
        c += b.ncols();
    }
    out
}

/// Copy of the `(r, c)` block of size `m x m`.
pub fn block(x: &DMatrix<f64>, r: usize, c: usize, m: usize) -> DMatrix<f64> {
    x.view((r * m, c * m), (m, m)).into_owned()
}

/// Stacks per-agent vectors into one long vector.
pub fn stack(parts: &[DVector<f64>]) -> DVector<f64> {
    let len: usize = parts.iter().map(|p| p.len()).sum();
    let mut out = DVector::zeros(len);
    let mut off = 0;
    for p in parts {
        out.rows_mut(off, p.len()).copy_from(p);
        off += p.len();
    }
    out
}

/// Checks that every row has the same length and builds a matrix.
pub fn from_rows(rows: &[Vec<f64>]) -> Result<DMatrix<f64>> {
    let nrows = rows.len();
    let ncols = rows.first().map_or(0, |r| r.len());
    if rows.iter().any(|r| r.len() != ncols) {
        return Err(Error::Dimension("ragged matrix rows".into()));
    }
    Ok(DMatrix::from_fn(nrows, ncols, |i, j| rows[i][j]))
}

pub fn to_rows(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    (0..m.nrows()).map(|i| m.row(i).iter().copied().collect()).collect()
}

/// 10·log10 with a floor at the smallest positive normal so zero maps to a
/// finite (very negative) value.
pub fn to_db(x: f64) -> f64 {
    10.0 * x.max(f64::MIN_POSITIVE).log10()
}
