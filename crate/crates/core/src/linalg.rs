//! Small dense linear-algebra helpers on top of nalgebra.

use nalgebra::{DMatrix, DVector};

use crate::error::{invalid, Result};

/// Singular values below this (relative to the largest) count as zero.
pub const RANK_TOL: f64 = 1e-12;

/// Singular values in descending order (one-sided Jacobi via nalgebra's SVD).
pub fn singular_values(m: &DMatrix<f64>) -> Vec<f64> {
    if m.nrows() == 0 || m.ncols() == 0 {
        return Vec::new();
    }
    let mut s: Vec<f64> = m
        .clone()
        .svd(false, false)
        .singular_values
        .iter()
        .copied()
        .collect();
    s.sort_by(|a, b| b.partial_cmp(a).unwrap());
    s
}

/// Smallest of the `min(rows, cols)` singular values; 0 for an empty matrix.
pub fn sigma_min(m: &DMatrix<f64>) -> f64 {
    singular_values(m).last().copied().unwrap_or(0.0)
}

pub fn sigma_max(m: &DMatrix<f64>) -> f64 {
    singular_values(m).first().copied().unwrap_or(0.0)
}

/// Numerical rank with the relative threshold `rel_tol * sigma_max`.
pub fn rank(m: &DMatrix<f64>, rel_tol: f64) -> usize {
    let s = singular_values(m);
    let Some(&top) = s.first() else { return 0 };
    if top == 0.0 {
        return 0;
    }
    s.iter().filter(|&&v| v > rel_tol * top).count()
}

/// Moore-Penrose pseudoinverse with the relative cutoff [`RANK_TOL`].
pub fn pinv(m: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let top = sigma_max(m);
    let eps = (RANK_TOL * top).max(f64::MIN_POSITIVE);
    m.clone()
        .svd(true, true)
        .pseudo_inverse(eps)
        .map_err(|e| invalid(format!("pseudoinverse failed: {e}")))
}

/// Orthogonal projector onto the range of a symmetric PSD matrix.
pub fn range_projector(sym: &DMatrix<f64>) -> DMatrix<f64> {
    let n = sym.nrows();
    let eig = sym.clone().symmetric_eigen();
    let top = eig.eigenvalues.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let mut p = DMatrix::zeros(n, n);
    for (k, &lam) in eig.eigenvalues.iter().enumerate() {
        if top > 0.0 && lam.abs() > RANK_TOL * top {
            let v = eig.eigenvectors.column(k);
            p += v * v.transpose();
        }
    }
    p
}

/// Extreme eigenvalues `(min, max)` of a symmetric matrix.
pub fn eigen_extremes(sym: &DMatrix<f64>) -> (f64, f64) {
    let eig = sym.clone().symmetric_eigen();
    let lo = eig
        .eigenvalues
        .iter()
        .copied()
        .fold(f64::INFINITY, f64::min);
    let hi = eig
        .eigenvalues
        .iter()
        .copied()
        .fold(f64::NEG_INFINITY, f64::max);
    (lo, hi)
}

/// Condition number `sigma_max / sigma_min`; infinite when singular.
pub fn condition_number(m: &DMatrix<f64>) -> f64 {
    let s = singular_values(m);
    match (s.first(), s.last()) {
        (Some(&hi), Some(&lo)) if lo > 0.0 => hi / lo,
        _ => f64::INFINITY,
    }
}

pub fn dvec(v: &[f64]) -> DVector<f64> {
    DVector::from_column_slice(v)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sigma_min_of_diagonal() {
        let m = DMatrix::from_diagonal(&dvec(&[3.0, 0.5, 2.0]));
        assert!((sigma_min(&m) - 0.5).abs() < 1e-14);
        assert!((sigma_max(&m) - 3.0).abs() < 1e-14);
    }

    #[test]
    fn pinv_satisfies_penrose_identity() {
        let x = DMatrix::from_row_slice(2, 4, &[1.0, 2.0, 0.5, -1.0, 0.0, 1.0, 3.0, 2.0]);
        let xp = pinv(&x).unwrap();
        let back = &x * &xp * &x;
        assert!((back - &x).norm() < 1e-12);
    }

    #[test]
    fn rank_deficient_detected() {
        let m = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 2.0, 4.0]);
        assert_eq!(rank(&m, 1e-12), 1);
        assert!(sigma_min(&m) < 1e-12);
    }

    #[test]
    fn range_projector_is_idempotent() {
        let a = DMatrix::from_row_slice(3, 3, &[2.0, 0.0, 0.0, 0.0, 1.0, 1.0, 0.0, 1.0, 1.0]);
        let p = range_projector(&a);
        assert!((&p * &p - &p).norm() < 1e-12);
        assert!((&p * &a - &a).norm() < 1e-12);
    }
}
