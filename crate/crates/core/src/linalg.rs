//! Hermitian eigendecomposition.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use num_complex::Complex64;

use crate::error::{Error, Result};

pub type CMatrix = DMatrix<Complex64>;
pub type CVector = DVector<Complex64>;

const MAX_SWEEPS: usize = 10_000;

/// Eigenvalues in descending order with matching orthonormal eigenvector
/// columns.
#[derive(Debug, Clone)]
pub struct HermitianEig {
    pub values: Vec<f64>,
    pub vectors: CMatrix,
}

/// Largest entrywise `|R - Rᴴ|`.
pub fn hermitian_defect(r: &CMatrix) -> f64 {
    let n = r.nrows();
    let mut worst = 0.0f64;
    for i in 0..n {
        for j in i..n {
            worst = worst.max((r[(i, j)] - r[(j, i)].conj()).norm());
        }
    }
    worst
}

pub fn hermitian_eig(r: &CMatrix) -> Result<HermitianEig> {
    if !r.is_square() {
        return Err(Error::InvalidArgument(format!(
            "{}x{} matrix is not square",
            r.nrows(),
            r.ncols()
        )));
    }
    let scale = r.iter().fold(1.0f64, |m, z| m.max(z.norm()));
    let defect = hermitian_defect(r);
    if defect > 1e-10 * scale {
        return Err(Error::NotHermitian(defect));
    }
    let eig = SymmetricEigen::try_new(r.clone(), f64::EPSILON, MAX_SWEEPS)
        .ok_or(Error::ConvergenceFailure)?;

    let mut order: Vec<usize> = (0..r.nrows()).collect();
    order.sort_by(|&i, &j| eig.eigenvalues[j].total_cmp(&eig.eigenvalues[i]));
    let values = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let vectors = CMatrix::from_columns(
        &order
            .iter()
            .map(|&i| eig.eigenvectors.column(i))
            .collect::<Vec<_>>(),
    );
    Ok(HermitianEig { values, vectors })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn residual(r: &CMatrix, e: &HermitianEig) -> f64 {
        let lambda = CMatrix::from_diagonal(&CVector::from_iterator(
            e.values.len(),
            e.values.iter().map(|&v| Complex64::new(v, 0.0)),
        ));
        (r * &e.vectors - &e.vectors * lambda).norm()
    }

    fn orthonormality(e: &HermitianEig) -> f64 {
        let n = e.vectors.ncols();
        (e.vectors.adjoint() * &e.vectors - CMatrix::identity(n, n)).norm()
    }

    #[test]
    fn identity() {
        let r = CMatrix::identity(3, 3);
        let e = hermitian_eig(&r).unwrap();
        assert_eq!(e.values.len(), 3);
        for v in &e.values {
            assert!((v - 1.0).abs() < 1e-12);
        }
        assert!(orthonormality(&e) < 1e-12);
    }

    #[test]
    fn diagonal() {
        let r = CMatrix::from_diagonal(&CVector::from_vec(vec![
            Complex64::new(1.0, 0.0),
            Complex64::new(3.0, 0.0),
            Complex64::new(2.0, 0.0),
        ]));
        let e = hermitian_eig(&r).unwrap();
        assert_eq!(e.values, vec![3.0, 2.0, 1.0]);
        // Each eigenvector is a unit-modulus multiple of a basis vector.
        for (col, row) in [(0, 1), (1, 2), (2, 0)] {
            assert!((e.vectors[(row, col)].norm() - 1.0).abs() < 1e-12);
        }
        assert!(residual(&r, &e) < 1e-12);
    }

    #[test]
    fn rank_one_outer_product() {
        let m = 5;
        let v = CVector::from_iterator(m, (0..m).map(|i| Complex64::cis(0.7 * i as f64)));
        let r = &v * v.adjoint();
        let e = hermitian_eig(&r).unwrap();
        assert!((e.values[0] - m as f64).abs() < 1e-12);
        for &x in &e.values[1..] {
            assert!(x.abs() < 1e-12);
        }
        assert!(residual(&r, &e) < 1e-10);
    }

    #[test]
    fn complex_hermitian() {
        let r = CMatrix::from_row_slice(
            2,
            2,
            &[
                Complex64::new(2.0, 0.0),
                Complex64::new(0.0, -1.0),
                Complex64::new(0.0, 1.0),
                Complex64::new(2.0, 0.0),
            ],
        );
        let e = hermitian_eig(&r).unwrap();
        assert!((e.values[0] - 3.0).abs() < 1e-12);
        assert!((e.values[1] - 1.0).abs() < 1e-12);
        assert!(residual(&r, &e) < 1e-12);
        assert!(orthonormality(&e) < 1e-12);
    }

    #[test]
    fn rejects_non_hermitian() {
        let mut r = CMatrix::identity(2, 2);
        r[(0, 1)] = Complex64::new(0.5, 0.0);
        assert!(matches!(hermitian_eig(&r), Err(Error::NotHermitian(_))));
        assert!(hermitian_eig(&CMatrix::zeros(2, 3)).is_err());
    }
}
