//! Small dense linear-algebra helpers on top of nalgebra.

use nalgebra::{DMatrix, DVector, SymmetricEigen};

use crate::error::{Error, Result};

/// Eigenvalues below this fraction of the largest one are treated as zero.
pub const EIGEN_FLOOR: f64 = 1e-12;

pub fn from_row_major(d: usize, data: &[f64]) -> DMatrix<f64> {
    DMatrix::from_row_slice(d, d, data)
}

fn symmetric_eigen(m: &DMatrix<f64>, what: &str) -> Result<SymmetricEigen<f64, nalgebra::Dyn>> {
    if !m.is_square() {
        return Err(Error::invalid(format!("{what} must be square")));
    }
    if m.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("matrix"));
    }
    let sym = 0.5 * (m + m.transpose());
    let eig = sym.symmetric_eigen();
    let max = eig.eigenvalues.iter().copied().fold(0.0_f64, f64::max);
    let min = eig.eigenvalues.iter().copied().fold(f64::INFINITY, f64::min);
    if !(max > 0.0) || min <= EIGEN_FLOOR * max {
        return Err(Error::Singular(format!(
            "{what}: eigenvalues in [{min:e}, {max:e}]"
        )));
    }
    Ok(eig)
}

/// Applies `f` to the eigenvalues of a symmetric positive-definite matrix.
fn spectral_map(m: &DMatrix<f64>, what: &str, f: impl Fn(f64) -> f64) -> Result<DMatrix<f64>> {
    let eig = symmetric_eigen(m, what)?;
    let vals = DVector::from_iterator(eig.eigenvalues.len(), eig.eigenvalues.iter().map(|&l| f(l)));
    let q = &eig.eigenvectors;
    Ok(q * DMatrix::from_diagonal(&vals) * q.transpose())
}

/// Symmetric positive-definite square root.
pub fn sym_sqrt(m: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    spectral_map(m, "matrix square root", f64::sqrt)
}

/// Symmetric inverse square root `M^{-1/2}`.
pub fn sym_inv_sqrt(m: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    spectral_map(m, "inverse square root", |l| 1.0 / l.sqrt())
}

/// Inverse of a symmetric positive-definite matrix.
pub fn spd_inverse(m: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    spectral_map(m, "inverse", |l| 1.0 / l)
}

pub fn min_eigenvalue(m: &DMatrix<f64>) -> f64 {
    let sym = 0.5 * (m + m.transpose());
    sym.symmetric_eigen()
        .eigenvalues
        .iter()
        .copied()
        .fold(f64::INFINITY, f64::min)
}

pub fn kronecker(a: &DMatrix<f64>, b: &DMatrix<f64>) -> DMatrix<f64> {
    a.kronecker(b)
}

/// `vᵀ M v`.
pub fn quadratic_form(m: &DMatrix<f64>, v: &[f64]) -> f64 {
    let n = v.len();
    let mut acc = 0.0;
    for i in 0..n {
        let mut row = 0.0;
        for j in 0..n {
            row += m[(i, j)] * v[j];
        }
        acc += v[i] * row;
    }
    acc
}

pub fn mat_vec(m: &DMatrix<f64>, v: &[f64]) -> Vec<f64> {
    (0..m.nrows())
        .map(|i| (0..m.ncols()).map(|j| m[(i, j)] * v[j]).sum())
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn square_root_round_trip() {
        let m = DMatrix::from_row_slice(2, 2, &[4.0, 1.0, 1.0, 3.0]);
        let r = sym_sqrt(&m).unwrap();
        assert!((&r * &r - &m).norm() < 1e-12);
        let ri = sym_inv_sqrt(&m).unwrap();
        assert!((&ri * &m * &ri - DMatrix::identity(2, 2)).norm() < 1e-12);
    }

    #[test]
    fn singular_rejected() {
        let m = DMatrix::from_row_slice(2, 2, &[1.0, 1.0, 1.0, 1.0]);
        assert!(sym_inv_sqrt(&m).is_err());
        let m = DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, -1.0]);
        assert!(sym_sqrt(&m).is_err());
    }

    #[test]
    fn kronecker_row_major_vec() {
        // (A ⊗ B) vec_r(C) = vec_r(A C Bᵀ) for row-wise vectorization
        let a = DMatrix::from_row_slice(2, 2, &[2.0, 1.0, 0.5, 3.0]);
        let b = DMatrix::from_row_slice(3, 3, &[1.0, 0.2, 0.0, 0.2, 2.0, 0.1, 0.0, 0.1, 1.5]);
        let c = DMatrix::from_row_slice(2, 3, &[1.0, 3.0, 5.0, 2.0, 4.0, 6.0]);
        let vec_r: Vec<f64> = (0..2).flat_map(|i| (0..3).map(move |j| (i, j))).map(|(i, j)| c[(i, j)]).collect();
        assert_eq!(vec_r, vec![1.0, 3.0, 5.0, 2.0, 4.0, 6.0]);
        let lhs = mat_vec(&kronecker(&a, &b), &vec_r);
        let prod = &a * &c * b.transpose();
        let rhs: Vec<f64> = (0..2).flat_map(|i| (0..3).map(move |j| (i, j))).map(|(i, j)| prod[(i, j)]).collect();
        for (l, r) in lhs.iter().zip(&rhs) {
            assert!((l - r).abs() < 1e-12);
        }
    }
}
