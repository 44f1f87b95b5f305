//! Tail and CDF evaluation for Hermitian quadratic forms of non-central
//! complex Gaussian vectors.
//!
//! For `X ~ CN(mu, Sigma)` and a Hermitian positive definite `Q`, the upper
//! tail `Pr{X^H Q X >= tau}` is computed as a residue series over the
//! distinct eigenvalues of the (reduced) covariance. The series converges
//! from the upper tail first, which is exactly the regime outage analysis
//! cares about. A classical Laguerre series-fitting estimate and a Monte
//! Carlo sampler are provided as baselines/oracles.

mod instances;
mod laguerre;
mod mc;
mod series;
mod signed_ln;
mod spectrum;

pub use instances::{random_instance, RandomInstance};
pub use laguerre::{laguerre_cdf, LaguerreParams};
pub use mc::{mc_cdf, mc_tail, McEstimate};
pub use series::{
    cdf, g_derivatives, log_g_derivatives, truncation_bound_identity, upper_tail,
    upper_tail_with_trace, SeriesTermTrace,
};
pub use signed_ln::SignedLn;
pub use spectrum::{eigendecompose_hermitian, reduce_general_form, standardize};


use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use thiserror::Error;

use crate::linalg::LinalgError;

/// Default relative gap below which eigenvalues are merged into one
/// multiplicity cluster. Near-degenerate unmerged pairs make the
/// `(1 - lambda_p/lambda_i)` factors of the series explode, so clustering
/// is the stabilizer.
pub const DEFAULT_CLUSTER_TOL: f64 = 1e-8;

#[derive(Debug, Error, PartialEq)]
pub enum QuadFormError {
    #[error("matrix is not Hermitian (deviation {deviation:.3e})")]
    NotHermitian { deviation: f64 },
    #[error("matrix is not positive definite (min eigenvalue {min_eigenvalue:.3e})")]
    NotPositiveDefinite { min_eigenvalue: f64 },
    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },
    #[error("cluster collision: eigenvalue ratio {ratio} at cluster pair ({i}, {p}) survived clustering")]
    ClusterCollision { i: usize, p: usize, ratio: f64 },
    #[error("value overflows f64 at derivative order {order}")]
    Overflow { order: usize },
    #[error("series-fitting coefficient recursion lost all significant digits at term {term}")]
    NumericalBreakdown { term: usize },
    #[error("cluster index {index} out of range ({clusters} clusters)")]
    ClusterIndexOutOfRange { index: usize, clusters: usize },
}

impl From<LinalgError> for QuadFormError {
    fn from(e: LinalgError) -> Self {
        match e {
            LinalgError::NotHermitian { deviation } => QuadFormError::NotHermitian { deviation },
            LinalgError::NotPositiveDefinite { min_eigenvalue }
            | LinalgError::NotPositiveSemidefinite { min_eigenvalue } => {
                QuadFormError::NotPositiveDefinite { min_eigenvalue }
            }
            LinalgError::DimensionMismatch { expected, actual } => {
                QuadFormError::DimensionMismatch { expected, actual }
            }
        }
    }
}

/// One multiplicity cluster of the covariance spectrum: a distinct
/// eigenvalue, its (merged) multiplicity, and the `n x kappa` orthonormal
/// eigenvector block spanning its eigenspace.
#[derive(Debug, Clone)]
pub struct EigenCluster {
    pub value: f64,
    pub multiplicity: usize,
    pub basis: DMatrix<Complex64>,
}

/// Clustered eigendecomposition of a Hermitian positive definite matrix,
/// ordered by descending eigenvalue.
#[derive(Debug, Clone)]
pub struct HermitianSpectrum {
    clusters: Vec<EigenCluster>,
    dim: usize,
}

impl HermitianSpectrum {
    /// Assembles a spectrum from explicit clusters (dimension inferred from
    /// the summed multiplicities). The caller vouches for distinct positive
    /// eigenvalues and orthonormal blocks; [`eigendecompose_hermitian`] is
    /// the checked route.
    pub fn from_clusters(clusters: Vec<EigenCluster>) -> Self {
        let dim = clusters.iter().map(|c| c.multiplicity).sum();
        HermitianSpectrum { clusters, dim }
    }

    pub fn clusters(&self) -> &[EigenCluster] {
        &self.clusters
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Reassembled eigenvector matrix (columns in cluster order).
    pub fn eigenvector_matrix(&self) -> DMatrix<Complex64> {
        let mut m = DMatrix::zeros(self.dim, self.dim);
        let mut col = 0;
        for cl in &self.clusters {
            for j in 0..cl.multiplicity {
                m.set_column(col, &cl.basis.column(j).clone_owned());
                col += 1;
            }
        }
        m
    }

    /// `Psi Lambda Psi^H` from the clustered decomposition.
    pub fn reconstruct(&self) -> DMatrix<Complex64> {
        let psi = self.eigenvector_matrix();
        let mut diag = DVector::zeros(self.dim);
        let mut idx = 0;
        for cl in &self.clusters {
            for _ in 0..cl.multiplicity {
                diag[idx] = Complex64::new(cl.value, 0.0);
                idx += 1;
            }
        }
        &psi * DMatrix::from_diagonal(&diag) * psi.adjoint()
    }

    /// Frobenius departure of `Psi^H Psi` from the identity.
    pub fn orthonormality_defect(&self) -> f64 {
        let psi = self.eigenvector_matrix();
        (psi.adjoint() * &psi - DMatrix::<Complex64>::identity(self.dim, self.dim)).norm()
    }
}

/// Standardized quadratic-form parameters: the clustered spectrum plus the
/// transformed mean `chi = Lambda^{-1/2} Psi^H mu` split per cluster, and
/// the per-cluster noncentrality `eta^2 = sum_j |chi_i^{(j)}|^2`.
///
/// The tail depends on the eigenbasis only through `eta^2`, which is
/// invariant under rotations within each eigenvector block.
#[derive(Debug, Clone)]
pub struct QuadFormParams {
    pub spectrum: HermitianSpectrum,
    pub chi: Vec<DVector<Complex64>>,
    pub eta_sq: Vec<f64>,
}

impl QuadFormParams {
    pub fn dim(&self) -> usize {
        self.spectrum.dim()
    }

    pub fn n_clusters(&self) -> usize {
        self.spectrum.clusters().len()
    }

    /// Largest multiplicity across clusters.
    pub fn max_multiplicity(&self) -> usize {
        self.spectrum
            .clusters()
            .iter()
            .map(|c| c.multiplicity)
            .max()
            .unwrap_or(0)
    }

    /// `Psi Lambda^{1/2} chi`, which must reproduce the original mean.
    pub fn mean_round_trip(&self) -> DVector<Complex64> {
        let mut mu = DVector::zeros(self.dim());
        for (cl, chi) in self.spectrum.clusters().iter().zip(&self.chi) {
            let scaled = chi.map(|z| z * cl.value.sqrt());
            mu += &cl.basis * scaled;
        }
        mu
    }
}

/// Truncation policy for the residue series.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SeriesMode {
    /// Evaluate every term up to `max_terms` (the highest derivative order
    /// `n` included in the sum).
    Fixed,
    /// Grow the series until the truncation estimate or successive-term
    /// magnitude falls below `target_abs_error`, capped at `max_terms`.
    Adaptive,
}

/// Controls series truncation. `max_terms` is the highest series index `n`
/// that may be evaluated; the series for a cluster of multiplicity `kappa`
/// starts at `n = kappa - 1`.
#[derive(Debug, Clone, Copy)]
pub struct SeriesControl {
    pub max_terms: usize,
    pub target_abs_error: f64,
    pub mode: SeriesMode,
}

impl SeriesControl {
    pub fn fixed(max_terms: usize) -> Self {
        SeriesControl {
            max_terms,
            target_abs_error: 0.0,
            mode: SeriesMode::Fixed,
        }
    }

    pub fn adaptive(target_abs_error: f64, max_terms: usize) -> Self {
        SeriesControl {
            max_terms,
            target_abs_error,
            mode: SeriesMode::Adaptive,
        }
    }

    /// Adaptive control whose cap scales with the noncentrality of `params`:
    /// the series needs on the order of `eta^2` terms before its terms start
    /// decaying, so a flat cap starves high-noncentrality evaluations.
    pub fn auto_for(params: &QuadFormParams) -> Self {
        let eta_max = params.eta_sq.iter().cloned().fold(0.0, f64::max);
        let cap = 200.0f64.max(eta_max + 12.0 * (eta_max + 1.0).sqrt() + params.dim() as f64);
        SeriesControl::adaptive(1e-8, cap.ceil() as usize)
    }
}

impl Default for SeriesControl {
    fn default() -> Self {
        SeriesControl::adaptive(1e-8, 200)
    }
}

/// Result of a tail/CDF evaluation.
#[derive(Debug, Clone, Copy)]
pub struct TailEstimate {
    /// Probability clamped to `[0, 1]`.
    pub probability: f64,
    /// Truncation-error estimate: exact remaining-mass bound for a single
    /// cluster, the per-cluster identity-case heuristic otherwise.
    pub error_estimate: f64,
    /// Number of series terms evaluated (across the deepest cluster).
    pub terms_used: usize,
    /// Magnitude clipped off when clamping into `[0, 1]`.
    pub clamp_adjustment: f64,
    /// Adaptive mode hit `max_terms` before meeting `target_abs_error`.
    pub budget_exhausted: bool,
}

impl TailEstimate {
    fn exact(probability: f64) -> Self {
        TailEstimate {
            probability,
            error_estimate: 0.0,
            terms_used: 0,
            clamp_adjustment: 0.0,
            budget_exhausted: false,
        }
    }
}
