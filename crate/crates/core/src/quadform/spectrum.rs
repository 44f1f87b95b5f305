//! Clustered eigendecomposition and standardization of quadratic forms.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::linalg::{check_hermitian, hermitian_eigen_sorted, sqrt_psd};

use super::{EigenCluster, HermitianSpectrum, QuadFormError, QuadFormParams};

/// Eigendecomposes a Hermitian positive definite matrix and merges
/// eigenvalues whose relative gap is at most `cluster_tol` into one
/// multiplicity cluster (value: mean of the merged eigenvalues; basis:
/// concatenated eigenvectors, re-orthonormalized).
pub fn eigendecompose_hermitian(
    sigma: &DMatrix<Complex64>,
    cluster_tol: f64,
) -> Result<HermitianSpectrum, QuadFormError> {
    check_hermitian(sigma, 1e-10)?;
    let n = sigma.nrows();
    let (values, vectors) = hermitian_eigen_sorted(sigma);
    let min = values.last().copied().unwrap_or(0.0);
    if min <= 0.0 {
        return Err(QuadFormError::NotPositiveDefinite {
            min_eigenvalue: min,
        });
    }

    let mut clusters: Vec<EigenCluster> = Vec::new();
    let mut start = 0usize;
    while start < n {
        let rep = values[start];
        let mut end = start + 1;
        while end < n && (rep - values[end]) <= cluster_tol * rep {
            end += 1;
        }
        let members = &values[start..end];
        let value = members.iter().sum::<f64>() / members.len() as f64;
        let mut basis = DMatrix::zeros(n, end - start);
        for (j, col) in (start..end).enumerate() {
            basis.set_column(j, &vectors.column(col).clone_owned());
        }
        orthonormalize_in_place(&mut basis);
        clusters.push(EigenCluster {
            value,
            multiplicity: end - start,
            basis,
        });
        start = end;
    }

    Ok(HermitianSpectrum { clusters, dim: n })
}

/// Modified Gram-Schmidt on the columns. The solver already returns an
/// orthonormal set; this removes residual cross-talk inside merged blocks.
fn orthonormalize_in_place(m: &mut DMatrix<Complex64>) {
    let cols = m.ncols();
    for j in 0..cols {
        for p in 0..j {
            let proj = (m.column(p).adjoint() * m.column(j))[(0, 0)];
            let prev = m.column(p).clone_owned();
            let mut col = m.column_mut(j);
            col.zip_apply(&prev, |c, pv| *c -= proj * pv);
        }
        let norm = m.column(j).norm();
        m.column_mut(j).scale_mut(1.0 / norm);
    }
}

/// Standardizes `X ~ CN(mu, Sigma)` for the residue series of `X^H X`:
/// clusters the spectrum and computes `chi_i = lambda_i^{-1/2} Psi_i^H mu`
/// per cluster together with the noncentrality `eta_i^2 = ||chi_i||^2`.
pub fn standardize(
    mu: &DVector<Complex64>,
    sigma: &DMatrix<Complex64>,
    cluster_tol: f64,
) -> Result<QuadFormParams, QuadFormError> {
    if mu.len() != sigma.nrows() {
        return Err(QuadFormError::DimensionMismatch {
            expected: sigma.nrows(),
            actual: mu.len(),
        });
    }
    let spectrum = eigendecompose_hermitian(sigma, cluster_tol)?;
    let mut chi = Vec::with_capacity(spectrum.clusters().len());
    let mut eta_sq = Vec::with_capacity(spectrum.clusters().len());
    for cl in spectrum.clusters() {
        let c = (cl.basis.adjoint() * mu).map(|z| z / cl.value.sqrt());
        eta_sq.push(c.norm_squared());
        chi.push(c);
    }
    Ok(QuadFormParams {
        spectrum,
        chi,
        eta_sq,
    })
}

/// Reduces the general form `X^H Qbar X` (with Hermitian positive definite
/// `Qbar`) to the standardized `Y^H Y` form via `Y = Qbar^{1/2} X`, i.e.
/// `standardize(Qbar^{1/2} mu, Qbar^{1/2} Sigma Qbar^{1/2})`.
pub fn reduce_general_form(
    mu: &DVector<Complex64>,
    sigma: &DMatrix<Complex64>,
    qbar: &DMatrix<Complex64>,
    cluster_tol: f64,
) -> Result<QuadFormParams, QuadFormError> {
    if qbar.nrows() != sigma.nrows() {
        return Err(QuadFormError::DimensionMismatch {
            expected: sigma.nrows(),
            actual: qbar.nrows(),
        });
    }
    check_hermitian(qbar, 1e-10)?;
    let (qvals, _) = hermitian_eigen_sorted(qbar);
    let qmin = qvals.last().copied().unwrap_or(0.0);
    if qmin <= 0.0 {
        return Err(QuadFormError::NotPositiveDefinite {
            min_eigenvalue: qmin,
        });
    }
    let root = sqrt_psd(qbar)?;
    let mu_r = &root * mu;
    let sigma_r = &root * sigma * &root;
    let sigma_r = (&sigma_r + sigma_r.adjoint()).scale(0.5);
    standardize(&mu_r, &sigma_r, cluster_tol)
}
