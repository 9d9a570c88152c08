//! Thin helpers over `nalgebra` for the small dense systems used here.

use nalgebra::{DMatrix, DVector};

pub fn submatrix(m: &DMatrix<f64>, rows: &[usize], cols: &[usize]) -> DMatrix<f64> {
    DMatrix::from_fn(rows.len(), cols.len(), |i, j| m[(rows[i], cols[j])])
}

pub fn subvector(v: &DVector<f64>, idx: &[usize]) -> DVector<f64> {
    DVector::from_iterator(idx.len(), idx.iter().map(|&i| v[i]))
}

/// Solve `a x = b` for symmetric positive definite `a` by Cholesky.
pub fn spd_solve(a: &DMatrix<f64>, b: &DMatrix<f64>) -> Option<DMatrix<f64>> {
    a.clone().cholesky().map(|c| c.solve(b))
}

/// Solve a symmetric positive semidefinite system, falling back to the
/// minimum-norm least-squares solution when Cholesky fails.
pub fn psd_solve(a: &DMatrix<f64>, b: &DVector<f64>) -> DVector<f64> {
    if let Some(c) = a.clone().cholesky() {
        return c.solve(b);
    }
    let svd = a.clone().svd(true, true);
    let tol = svd.singular_values.max() * (a.nrows().max(1) as f64) * f64::EPSILON;
    svd.solve(b, tol).expect("svd computed with u and v")
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn norm2_sq(a: &[f64]) -> f64 {
    a.iter().map(|x| x * x).sum()
}
