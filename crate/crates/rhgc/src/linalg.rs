//! Small dense linear-algebra helpers shared across modules.

use crate::error::{Error, Result};
use nalgebra::{DMatrix, DVector};

/// Spectral norm (largest singular value).
pub fn spectral_norm(m: &DMatrix<f64>) -> f64 {
    if m.nrows() == 0 || m.ncols() == 0 {
        return 0.0;
    }
    m.singular_values().max()
}

/// Eigenvalues of a symmetric matrix, ascending.
pub fn symmetric_eigenvalues(m: &DMatrix<f64>) -> Vec<f64> {
    let sym = (m + m.transpose()) * 0.5;
    let mut eig: Vec<f64> = sym.symmetric_eigenvalues().iter().copied().collect();
    eig.sort_by(|a, b| a.partial_cmp(b).unwrap());
    eig
}

/// Numerical rank via singular values with threshold `n * eps * sigma_max`.
pub fn numerical_rank(m: &DMatrix<f64>) -> usize {
    let sv = m.singular_values();
    let smax = sv.max();
    if smax == 0.0 {
        return 0;
    }
    let tol = (m.nrows().max(m.ncols()) as f64) * f64::EPSILON * smax;
    sv.iter().filter(|&&s| s > tol).count()
}

/// Solve `a x = b` by LU with a residual check.
pub fn solve(a: &DMatrix<f64>, b: &DVector<f64>) -> Result<DVector<f64>> {
    let x = a
        .clone()
        .lu()
        .solve(b)
        .ok_or(Error::SingularTransform)?;
    let residual = (a * &x - b).norm();
    let scale = 1.0 + b.norm();
    if residual > 1e-10 * scale {
        return Err(Error::SteadyStateSolveFailed {
            residual: residual / scale,
        });
    }
    Ok(x)
}

/// Solve `a X = B` column by column with residual checks.
pub fn solve_matrix(a: &DMatrix<f64>, b: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let lu = a.clone().lu();
    let x = lu.solve(b).ok_or(Error::SingularTransform)?;
    let residual = spectral_norm(&(a * &x - b));
    if residual > 1e-10 * (1.0 + spectral_norm(b)) {
        return Err(Error::SteadyStateSolveFailed { residual });
    }
    Ok(x)
}

/// Matrix inverse through an LU solve against the identity.
pub fn invert(a: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let n = a.nrows();
    solve_matrix(a, &DMatrix::identity(n, n))
}

/// 2-condition estimate from singular values.
pub fn condition_estimate(m: &DMatrix<f64>) -> f64 {
    let sv = m.singular_values();
    let smax = sv.max();
    let smin = sv.iter().cloned().fold(f64::INFINITY, f64::min);
    if smin <= 0.0 {
        f64::INFINITY
    } else {
        smax / smin
    }
}

/// Frobenius-style max-abs-entry distance, convenient for fixed-point stops.
pub fn max_abs_diff(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
    (a - b).abs().max()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rank_of_singular_matrix() {
        let m = DMatrix::from_row_slice(3, 3, &[1.0, 2.0, 3.0, 2.0, 4.0, 6.0, 0.0, 0.0, 1.0]);
        assert_eq!(numerical_rank(&m), 2);
    }

    #[test]
    fn spectral_norm_of_row_vector_is_euclidean() {
        let m = DMatrix::from_row_slice(1, 3, &[1.0, -2.0, 2.0]);
        assert!((spectral_norm(&m) - 3.0).abs() < 1e-12);
    }

    #[test]
    fn solve_checks_residual() {
        let a = DMatrix::from_row_slice(2, 2, &[2.0, 0.0, 0.0, 4.0]);
        let b = DVector::from_row_slice(&[2.0, 8.0]);
        let x = solve(&a, &b).unwrap();
        assert!((x[0] - 1.0).abs() < 1e-14);
        assert!((x[1] - 2.0).abs() < 1e-14);
    }
}
