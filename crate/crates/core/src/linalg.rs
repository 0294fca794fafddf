//! Small dense helpers on top of `nalgebra` dynamic matrices.

use crate::{Matrix, Vector};

pub fn identity(n: usize) -> Matrix {
    Matrix::identity(n, n)
}

pub fn diag(entries: &Vector) -> Matrix {
    Matrix::from_diagonal(entries)
}

/// Writes `src` into `dst` with its top-left corner at `(row, col)`.
pub fn set_block(dst: &mut Matrix, row: usize, col: usize, src: &Matrix) {
    dst.view_mut((row, col), (src.nrows(), src.ncols())).copy_from(src);
}

/// Largest singular value. Empty matrices have norm zero.
pub fn spectral_norm(m: &Matrix) -> f64 {
    if m.is_empty() {
        return 0.0;
    }
    m.singular_values().max()
}

/// Largest absolute entry.
pub fn max_abs(m: &Matrix) -> f64 {
    m.iter().fold(0.0_f64, |acc, v| acc.max(v.abs()))
}

/// Eigenvalue with the largest real part, as `(re, im)`.
pub fn rightmost_eigenvalue(m: &Matrix) -> (f64, f64) {
    m.complex_eigenvalues()
        .iter()
        .map(|c| (c.re, c.im))
        .fold((f64::NEG_INFINITY, 0.0), |best, c| if c.0 > best.0 { c } else { best })
}

/// Smallest and largest eigenvalue of the symmetric part of `m`.
pub fn symmetric_extremes(m: &Matrix) -> (f64, f64) {
    let sym = (m + m.transpose()) * 0.5;
    let eig = sym.symmetric_eigenvalues();
    (eig.min(), eig.max())
}

/// Outcome of a positive-definiteness test.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DefinitenessTest {
    pub positive_definite: bool,
    pub lambda_min: f64,
    pub lambda_max: f64,
}

/// Cholesky attempt plus eigenvalue extremes. A matrix only counts as
/// positive definite when the factorisation succeeds and
/// `lambda_min > 1e-12 * lambda_max`.
pub fn definiteness(m: &Matrix) -> DefinitenessTest {
    let sym = (m + m.transpose()) * 0.5;
    let (lambda_min, lambda_max) = symmetric_extremes(&sym);
    let cholesky_ok = sym.clone().cholesky().is_some();
    DefinitenessTest {
        positive_definite: cholesky_ok && lambda_min > 1e-12 * lambda_max.abs(),
        lambda_min,
        lambda_max,
    }
}

/// Central finite-difference Jacobian of `f` at `x`.
pub fn fd_jacobian<F>(f: F, x: &Vector, step: f64) -> Matrix
where
    F: Fn(&Vector) -> Vector,
{
    let m = f(x).len();
    let mut jac = Matrix::zeros(m, x.len());
    let mut probe = x.clone();
    for j in 0..x.len() {
        let orig = probe[j];
        probe[j] = orig + step;
        let plus = f(&probe);
        probe[j] = orig - step;
        let minus = f(&probe);
        probe[j] = orig;
        jac.set_column(j, &((plus - minus) / (2.0 * step)));
    }
    jac
}

/// Converts a matrix into row-major nested vectors for serialization.
pub fn to_rows(m: &Matrix) -> Vec<Vec<f64>> {
    (0..m.nrows()).map(|i| m.row(i).iter().copied().collect()).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn spectral_norm_of_diagonal_is_largest_entry() {
        let m = diag(&Vector::from_vec(vec![1.0, -3.0, 2.0]));
        assert!((spectral_norm(&m) - 3.0).abs() < 1e-12);
        assert_eq!(spectral_norm(&Matrix::zeros(0, 3)), 0.0);
    }

    #[test]
    fn definiteness_flags_indefinite() {
        let m = Matrix::from_row_slice(2, 2, &[1.0, 2.0, 2.0, 1.0]);
        let t = definiteness(&m);
        assert!(!t.positive_definite);
        assert!((t.lambda_min + 1.0).abs() < 1e-12);
        let t = definiteness(&identity(3));
        assert!(t.positive_definite);
    }

    #[test]
    fn fd_jacobian_of_quadratic() {
        let f = |x: &Vector| Vector::from_vec(vec![x[0] * x[0], x[0] * x[1]]);
        let j = fd_jacobian(f, &Vector::from_vec(vec![2.0, 3.0]), 1e-6);
        let expected = Matrix::from_row_slice(2, 2, &[4.0, 0.0, 3.0, 2.0]);
        assert!(max_abs(&(j - expected)) < 1e-8);
    }
}
