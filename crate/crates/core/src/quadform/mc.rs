//! Monte Carlo oracle for quadratic-form tail probabilities.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rayon::prelude::*;

use crate::linalg::sqrt_psd;
use crate::rng::{rng_for, standard_complex};

use super::QuadFormError;

/// Fixed partition count; results are reproducible for any worker count
/// because each partition derives its own seed and partial hit counts are
/// integers.
const PARTITIONS: u64 = 64;

/// A Monte Carlo estimate with its binomial standard error.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct McEstimate {
    pub estimate: f64,
    pub std_error: f64,
    pub samples: u64,
}

impl McEstimate {
    fn from_hits(hits: u64, samples: u64) -> Self {
        let p = hits as f64 / samples as f64;
        McEstimate {
            estimate: p,
            std_error: (p * (1.0 - p) / samples as f64).sqrt(),
            samples,
        }
    }

    fn complement(self) -> Self {
        McEstimate {
            estimate: 1.0 - self.estimate,
            ..self
        }
    }
}

/// Empirical `Pr{X^H Qbar X >= tau}` for `X ~ CN(mu, Sigma)`.
///
/// Draws `X = mu + Sigma^{1/2} z` with `z` standard complex Gaussian, and
/// evaluates the form as `||Qbar^{1/2} X||^2`. Deterministic per seed.
pub fn mc_tail(
    mu: &DVector<Complex64>,
    sigma: &DMatrix<Complex64>,
    qbar: &DMatrix<Complex64>,
    tau: f64,
    samples: u64,
    seed: u64,
) -> Result<McEstimate, QuadFormError> {
    assert!(samples >= 1_000, "need at least 10^3 samples");
    let n = sigma.nrows();
    if mu.len() != n || qbar.nrows() != n {
        return Err(QuadFormError::DimensionMismatch {
            expected: n,
            actual: mu.len().min(qbar.nrows()),
        });
    }
    let a = sqrt_psd(sigma)?;
    let b = sqrt_psd(qbar)?;
    // ||B(mu + A z)||^2 = ||W z + c||^2
    let w = &b * &a;
    let c = &b * mu;

    let base = samples / PARTITIONS;
    let extra = samples % PARTITIONS;
    let hits: u64 = (0..PARTITIONS)
        .into_par_iter()
        .map(|part| {
            let count = base + u64::from(part < extra);
            let mut rng = rng_for(seed, "mc_tail", part, 0);
            let mut z = DVector::zeros(n);
            let mut hits = 0u64;
            for _ in 0..count {
                for zi in z.iter_mut() {
                    *zi = standard_complex(&mut rng);
                }
                let y = (&w * &z + &c).norm_squared();
                if y >= tau {
                    hits += 1;
                }
            }
            hits
        })
        .sum();

    Ok(McEstimate::from_hits(hits, samples))
}

/// Empirical CDF `Pr{X^H Qbar X <= y}`; complement of [`mc_tail`] on the
/// same draws (ties sit on the tail side, a null set for these laws).
pub fn mc_cdf(
    mu: &DVector<Complex64>,
    sigma: &DMatrix<Complex64>,
    qbar: &DMatrix<Complex64>,
    y: f64,
    samples: u64,
    seed: u64,
) -> Result<McEstimate, QuadFormError> {
    Ok(mc_tail(mu, sigma, qbar, y, samples, seed)?.complement())
}
