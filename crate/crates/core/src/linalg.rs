//! Small dense complex linear-algebra helpers shared across the crate.
//!
//! Everything here operates on `nalgebra` dynamic matrices of `Complex64`.
//! Matrices in this problem are tiny (at most `K*d` square, i.e. single
//! digits), so clarity wins over blocking or allocation tricks.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use thiserror::Error;

/// Absolute floor below which a symmetrized eigenvalue is clamped to zero
/// when taking PSD square roots (relative to the largest eigenvalue).
const PSD_CLAMP: f64 = 1e-12;

#[derive(Debug, Error, PartialEq)]
pub enum LinalgError {
    #[error("matrix is not Hermitian (deviation {deviation:.3e})")]
    NotHermitian { deviation: f64 },
    #[error("matrix is not positive definite (min eigenvalue {min_eigenvalue:.3e})")]
    NotPositiveDefinite { min_eigenvalue: f64 },
    #[error("matrix is not positive semidefinite (min eigenvalue {min_eigenvalue:.3e})")]
    NotPositiveSemidefinite { min_eigenvalue: f64 },
    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },
}

/// Frobenius deviation of `m` from its own conjugate transpose.
pub fn hermitian_deviation(m: &DMatrix<Complex64>) -> f64 {
    (m - m.adjoint()).norm()
}

/// Checks `m` is Hermitian to `tol` relative to `max(1, ||m||_F)`.
pub fn check_hermitian(m: &DMatrix<Complex64>, tol: f64) -> Result<(), LinalgError> {
    let scale = m.norm().max(1.0);
    let deviation = hermitian_deviation(m);
    if deviation > tol * scale {
        return Err(LinalgError::NotHermitian { deviation });
    }
    Ok(())
}

/// Eigendecomposition of a Hermitian matrix with eigenvalues sorted in
/// descending order and per-column canonical phase (largest-magnitude entry
/// rotated to the positive real axis). The input is symmetrized first so
/// round-off in the caller cannot leak into the solver.
pub fn hermitian_eigen_sorted(m: &DMatrix<Complex64>) -> (Vec<f64>, DMatrix<Complex64>) {
    let n = m.nrows();
    let sym = (m + m.adjoint()).scale(0.5);
    let eig = sym.symmetric_eigen();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| {
        eig.eigenvalues[b]
            .partial_cmp(&eig.eigenvalues[a])
            .expect("eigenvalues are finite")
            .then(a.cmp(&b))
    });
    let values: Vec<f64> = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let mut vectors = DMatrix::zeros(n, n);
    for (dst, &src) in order.iter().enumerate() {
        let mut col = eig.eigenvectors.column(src).clone_owned();
        canonical_phase(&mut col);
        vectors.set_column(dst, &col);
    }
    (values, vectors)
}

/// Rotates a vector by a unit phase so its largest-magnitude entry is real
/// and nonnegative. Ties broken by the first index reaching the maximum.
pub fn canonical_phase(v: &mut DVector<Complex64>) {
    let mut best = 0usize;
    let mut best_mag = 0.0f64;
    for (i, z) in v.iter().enumerate() {
        let mag = z.norm_sqr();
        if mag > best_mag * (1.0 + 1e-12) {
            best_mag = mag;
            best = i;
        }
    }
    if best_mag == 0.0 {
        return;
    }
    let pivot = v[best];
    let phase = pivot / pivot.norm();
    for z in v.iter_mut() {
        *z /= phase;
    }
    v[best] = Complex64::new(v[best].re, 0.0);
}

/// Hermitian square root of a positive semidefinite matrix.
///
/// Eigenvalues in `[-clamp, 0]` (relative to the largest) are clamped to
/// zero; anything more negative is rejected.
pub fn sqrt_psd(m: &DMatrix<Complex64>) -> Result<DMatrix<Complex64>, LinalgError> {
    check_hermitian(m, 1e-10)?;
    let (values, vectors) = hermitian_eigen_sorted(m);
    let scale = values.first().copied().unwrap_or(0.0).max(1.0);
    let mut roots = Vec::with_capacity(values.len());
    for &v in &values {
        if v < -PSD_CLAMP * scale {
            return Err(LinalgError::NotPositiveSemidefinite { min_eigenvalue: v });
        }
        roots.push(v.max(0.0).sqrt());
    }
    let d = DMatrix::from_diagonal(&DVector::from_iterator(
        roots.len(),
        roots.iter().map(|&r| Complex64::new(r, 0.0)),
    ));
    Ok(&vectors * d * vectors.adjoint())
}

/// `u^H M v` for vectors `u`, `v` and matrix `M`.
pub fn quad_uv(u: &DVector<Complex64>, m: &DMatrix<Complex64>, v: &DVector<Complex64>) -> Complex64 {
    (u.adjoint() * m * v)[(0, 0)]
}

/// Real part of `u^H M u`; exact for Hermitian `M`.
pub fn quad_real(u: &DVector<Complex64>, m: &DMatrix<Complex64>) -> f64 {
    quad_uv(u, m, u).re
}

/// Complex identity matrix.
pub fn identity(n: usize) -> DMatrix<Complex64> {
    DMatrix::identity(n, n)
}
