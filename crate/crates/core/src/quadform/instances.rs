//! Seeded generator of randomized quadratic-form instances for oracle
//! validation: correlated covariances with mixed eigenvalue multiplicities,
//! complex means, and (optionally) a non-identity form matrix.
//!
//! Instances are kept inside the conditioning regime of the residue
//! expansion: distinct eigenvalues are separated by a healthy ratio and the
//! cancellation hazard `max_i (max_p |b_p| * eta_i^2/lambda_i)` is bounded,
//! mirroring the regimes the expansion is used for. Candidates that land
//! outside (e.g. a form matrix pushing two reduced eigenvalues together)
//! are rejected and redrawn deterministically.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rand::Rng;

use crate::rng::{rng_for, standard_complex};

use super::{reduce_general_form, QuadFormParams, DEFAULT_CLUSTER_TOL};

/// One validation instance of `X^H Qbar X`, `X ~ CN(mu, Sigma)`.
#[derive(Debug, Clone)]
pub struct RandomInstance {
    pub mu: DVector<Complex64>,
    pub sigma: DMatrix<Complex64>,
    pub qbar: DMatrix<Complex64>,
    pub params: QuadFormParams,
}

/// Largest tolerated cancellation hazard; e^25 * eps stays near 1e-5.
const HAZARD_LIMIT: f64 = 25.0;

/// Smallest tolerated relative gap between distinct reduced eigenvalues.
const MIN_RELATIVE_GAP: f64 = 0.15;

fn random_unitary<R: Rng + ?Sized>(n: usize, rng: &mut R) -> DMatrix<Complex64> {
    let raw = DMatrix::from_fn(n, n, |_, _| standard_complex(rng));
    raw.qr().q()
}

fn hazard(params: &QuadFormParams) -> f64 {
    let clusters = params.spectrum.clusters();
    let mut worst = 0.0f64;
    for (i, ci) in clusters.iter().enumerate() {
        if params.eta_sq[i] == 0.0 {
            continue;
        }
        let z = params.eta_sq[i] / ci.value;
        let mut b_max = 0.0f64;
        for (p, cp) in clusters.iter().enumerate() {
            if p != i {
                b_max = b_max.max((cp.value * ci.value / (ci.value - cp.value)).abs());
            }
        }
        worst = worst.max(b_max * z.max(1.0));
    }
    worst
}

fn min_relative_gap(params: &QuadFormParams) -> f64 {
    let values: Vec<f64> = params
        .spectrum
        .clusters()
        .iter()
        .map(|c| c.value)
        .collect();
    let mut min_gap = f64::INFINITY;
    for w in values.windows(2) {
        min_gap = min_gap.min((w[0] - w[1]).abs() / w[0]);
    }
    min_gap
}

/// Deterministically draws the `index`-th validation instance for `seed`.
/// `dim_max` bounds the vector dimension (at least 2).
pub fn random_instance(seed: u64, index: u64, dim_max: usize) -> RandomInstance {
    let dim_max = dim_max.max(2);
    for attempt in 0..64u64 {
        let mut rng = rng_for(seed, "qf_instance", index, attempt);
        let n = rng.random_range(2..=dim_max);

        // Multiplicity pattern: split n into blocks of size 1..=3.
        let mut mults = Vec::new();
        let mut left = n;
        while left > 0 {
            let m = rng.random_range(1..=left.min(3));
            mults.push(m);
            left -= m;
        }

        // Distinct values on a jittered geometric ladder.
        let mut eig = Vec::with_capacity(n);
        let mut value = 1.2 + 1.2 * rng.random::<f64>();
        for &m in &mults {
            for _ in 0..m {
                eig.push(value);
            }
            value *= 0.40 + 0.15 * rng.random::<f64>();
        }

        let u = random_unitary(n, &mut rng);
        let d = DMatrix::from_diagonal(&DVector::from_iterator(
            n,
            eig.iter().map(|&e| Complex64::new(e, 0.0)),
        ));
        let sigma = &u * d * u.adjoint();
        let sigma = (&sigma + sigma.adjoint()).scale(0.5);

        // Mean scaled to a prescribed total noncentrality mu^H Sigma^{-1} mu.
        let raw_mu = DVector::from_fn(n, |_, _| standard_complex(&mut rng));
        let eta_target = 0.3 + 5.0 * rng.random::<f64>();
        let whitened = sigma
            .clone()
            .cholesky()
            .expect("ladder spectrum is positive definite")
            .solve(&raw_mu);
        let eta_raw = (raw_mu.adjoint() * whitened)[(0, 0)].re;
        let mu = raw_mu.scale((eta_target / eta_raw.max(1e-12)).sqrt());

        // Half the instances exercise a non-identity form matrix.
        let qbar = if rng.random::<bool>() {
            let v = random_unitary(n, &mut rng);
            let q = DMatrix::from_diagonal(&DVector::from_iterator(
                n,
                (0..n).map(|_| Complex64::new(0.6 + 1.2 * rng.random::<f64>(), 0.0)),
            ));
            let m = &v * q * v.adjoint();
            (&m + m.adjoint()).scale(0.5)
        } else {
            DMatrix::identity(n, n)
        };

        let params = match reduce_general_form(&mu, &sigma, &qbar, DEFAULT_CLUSTER_TOL) {
            Ok(p) => p,
            Err(_) => continue,
        };
        if hazard(&params) <= HAZARD_LIMIT
            && (params.n_clusters() == 1 || min_relative_gap(&params) >= MIN_RELATIVE_GAP)
        {
            return RandomInstance {
                mu,
                sigma,
                qbar,
                params,
            };
        }
    }
    panic!("no acceptable instance after 64 attempts (seed {seed}, index {index})");
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn instances_are_deterministic_and_mixed() {
        let a = random_instance(7, 0, 8);
        let b = random_instance(7, 0, 8);
        assert_eq!(a.mu, b.mu);
        assert_eq!(a.sigma, b.sigma);
        let mut saw_multiplicity = false;
        let mut saw_general_form = false;
        for idx in 0..20 {
            let inst = random_instance(42, idx, 8);
            assert!(inst.params.dim() <= 8);
            if inst.params.max_multiplicity() > 1 {
                saw_multiplicity = true;
            }
            if (inst.qbar.clone() - DMatrix::identity(inst.qbar.nrows(), inst.qbar.ncols()))
                .norm()
                > 1e-12
            {
                saw_general_form = true;
            }
        }
        assert!(saw_multiplicity, "no instance had a repeated eigenvalue");
        assert!(saw_general_form, "no instance had a non-identity form");
    }
}
