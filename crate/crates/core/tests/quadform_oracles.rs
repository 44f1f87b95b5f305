//! Independent numerical oracles for the residue series: finite differences
//! and Cauchy-integral differentiation of a from-scratch `g_i(s)`, Monte
//! Carlo tail estimates, and the truncation-residual laws.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use obeam_core::linalg::identity;
use obeam_core::quadform::{
    cdf, g_derivatives, laguerre_cdf, log_g_derivatives, mc_tail, reduce_general_form,
    standardize, truncation_bound_identity, upper_tail, LaguerreParams, QuadFormParams,
    SeriesControl, DEFAULT_CLUSTER_TOL,
};
use obeam_core::rng::{rng_for, standard_complex};

fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

/// Direct evaluation of g_i(s) at complex s, written independently of the
/// implementation path under test:
///
///   g_i(s) = e^{tau s}/(s - 1/l_i)
///          * exp(-sum_{p!=i} ((s-1/l_i) l_p / (1 + (s-1/l_i) l_p)) eta_p^2)
///          / prod_{p!=i} (1 + (s-1/l_i) l_p)^{kappa_p}
fn g_direct(
    lambdas: &[f64],
    kappas: &[usize],
    etas: &[f64],
    i: usize,
    tau: f64,
    s: Complex64,
) -> Complex64 {
    let li = lambdas[i];
    let shift = s - Complex64::new(1.0 / li, 0.0);
    let mut value = (s * tau).exp() / shift;
    for p in 0..lambdas.len() {
        if p == i {
            continue;
        }
        let lp = lambdas[p];
        let denom = Complex64::new(1.0, 0.0) + shift * lp;
        value *= (-(shift * lp / denom) * etas[p]).exp();
        value /= denom.powi(kappas[p] as i32);
    }
    value
}

/// Builds params from a diagonal covariance with prescribed eigenvalues and
/// a given mean.
fn diag_params(diag: &[f64], mu: &[Complex64]) -> QuadFormParams {
    let n = diag.len();
    let sigma = DMatrix::from_fn(n, n, |r, col| {
        if r == col {
            c(diag[r], 0.0)
        } else {
            c(0.0, 0.0)
        }
    });
    standardize(
        &DVector::from_row_slice(mu),
        &sigma,
        DEFAULT_CLUSTER_TOL,
    )
    .unwrap()
}

fn cluster_views(params: &QuadFormParams) -> (Vec<f64>, Vec<usize>, Vec<f64>) {
    let lambdas: Vec<f64> = params.spectrum.clusters().iter().map(|c| c.value).collect();
    let kappas: Vec<usize> = params
        .spectrum
        .clusters()
        .iter()
        .map(|c| c.multiplicity)
        .collect();
    (lambdas, kappas, params.eta_sq.clone())
}

#[test]
fn first_log_derivative_matches_finite_difference() {
    // Two distinct clusters: diag(2, 1, 1) with a generic mean.
    let params = diag_params(&[2.0, 1.0, 1.0], &[c(0.5, 0.0), c(0.0, 0.3), c(-0.2, 0.1)]);
    let (lambdas, kappas, etas) = cluster_views(&params);
    let tau = 1.7;
    let h = 1e-6;
    for i in 0..lambdas.len() {
        let got = log_g_derivatives(&params, i, tau, 1).unwrap()[0];
        let gp = g_direct(&lambdas, &kappas, &etas, i, tau, c(h, 0.0)).re;
        let gm = g_direct(&lambdas, &kappas, &etas, i, tau, c(-h, 0.0)).re;
        let g0 = g_direct(&lambdas, &kappas, &etas, i, tau, c(0.0, 0.0)).re;
        let fd = (gp - gm) / (2.0 * h) / g0;
        assert!(
            (got - fd).abs() <= 1e-5 * fd.abs().max(1.0),
            "cluster {i}: {got} vs finite difference {fd}"
        );
    }
}

#[test]
fn g_derivatives_match_cauchy_integral() {
    // Mixed multiplicities: diag(2.2, 1.3, 0.4, 0.4).
    let params = diag_params(
        &[2.2, 1.3, 0.4, 0.4],
        &[c(0.4, -0.2), c(0.1, 0.6), c(-0.3, 0.0), c(0.2, 0.2)],
    );
    let (lambdas, kappas, etas) = cluster_views(&params);
    let tau = 2.4;
    let m_points = 1024usize;
    for i in 0..lambdas.len() {
        // Contour radius safely inside the nearest singularity of g_i.
        let li = lambdas[i];
        let mut nearest = 1.0 / li;
        for (p, &lp) in lambdas.iter().enumerate() {
            if p != i {
                nearest = nearest.min((1.0 / li - 1.0 / lp).abs());
            }
        }
        let r = 0.25 * nearest;
        let got = g_derivatives(&params, i, tau, 6).unwrap();
        #[allow(clippy::needless_range_loop)]
        for n in 0..=6usize {
            let mut acc = c(0.0, 0.0);
            for m in 0..m_points {
                let theta = 2.0 * std::f64::consts::PI * m as f64 / m_points as f64;
                let s = c(r * theta.cos(), r * theta.sin());
                let phase = c(0.0, -(n as f64) * theta).exp();
                acc += g_direct(&lambdas, &kappas, &etas, i, tau, s) * phase;
            }
            let fact: f64 = (1..=n).map(|k| k as f64).product();
            let want = acc.re / m_points as f64 / r.powi(n as i32) * fact;
            assert!(
                (got[n] - want).abs() <= 1e-6 * want.abs().max(1e-6),
                "cluster {i}, n = {n}: {} vs Cauchy {want}",
                got[n]
            );
        }
    }
}

/// The correlated 4x4 benchmark: mean 0.5*1, covariance 0.3*I, and a
/// non-identity positive definite form matrix.
fn benchmark_form() -> (DVector<Complex64>, DMatrix<Complex64>, DMatrix<Complex64>) {
    let mu = DVector::from_element(4, c(0.5, 0.0));
    let sigma = identity(4).scale(0.3);
    let qbar = DMatrix::from_row_slice(4, 4, &[
        c(1.0, 0.0), c(0.5, 0.0), c(0.0, 0.0), c(0.0, 0.0),
        c(0.5, 0.0), c(1.0, 0.0), c(0.0, 0.0), c(0.0, 0.0),
        c(0.0, 0.0), c(0.0, 0.0), c(1.0, 0.0), c(0.0, 0.0),
        c(0.0, 0.0), c(0.0, 0.0), c(0.0, 0.0), c(1.0, 0.0),
    ]);
    (mu, sigma, qbar)
}

#[test]
fn general_form_tail_matches_monte_carlo() {
    let (mu, sigma, qbar) = benchmark_form();
    let params = reduce_general_form(&mu, &sigma, &qbar, DEFAULT_CLUSTER_TOL).unwrap();
    assert_eq!(params.n_clusters(), 3); // eigenvalues 0.45, 0.3 (double), 0.15
    let ctl = SeriesControl::default();
    for k in 1..=10 {
        let tau = k as f64;
        let analytic = upper_tail(&params, tau, &ctl).probability;
        let mc = mc_tail(&mu, &sigma, &qbar, tau, 1_000_000, 9000 + k as u64).unwrap();
        let tol = (3.0 * mc.std_error).max(2e-3);
        assert!(
            (analytic - mc.estimate).abs() <= tol,
            "tau = {tau}: series {analytic} vs MC {} +/- {}",
            mc.estimate,
            mc.std_error
        );
    }
}

#[test]
fn qbar_scaling_law() {
    let (mu, sigma, _) = benchmark_form();
    let scaled = reduce_general_form(&mu, &sigma, &identity(4).scale(2.0), 1e-8).unwrap();
    let plain = standardize(&mu, &sigma, 1e-8).unwrap();
    let ctl = SeriesControl::default();
    for tau in [0.5, 1.0, 2.0, 4.0] {
        let a = upper_tail(&scaled, tau, &ctl).probability;
        let b = upper_tail(&plain, tau / 2.0, &ctl).probability;
        assert!((a - b).abs() < 1e-12, "tau = {tau}: {a} vs {b}");
    }
}

#[test]
fn tail_invariant_under_eigenblock_rotation() {
    // Outputs depend on each eigenvector block only through eta^2; rotating
    // a block by a random unitary must not move the tail.
    let params = diag_params(
        &[1.0, 1.0, 0.5, 0.5],
        &[c(0.4, 0.1), c(-0.2, 0.3), c(0.6, 0.0), c(0.0, -0.5)],
    );
    let mut rng = rng_for(31, "rotation", 0, 0);
    let mut clusters = params.spectrum.clusters().to_vec();
    let mut chis = params.chi.clone();
    for (cl, chi) in clusters.iter_mut().zip(chis.iter_mut()) {
        let k = cl.multiplicity;
        let raw = DMatrix::from_fn(k, k, |_, _| standard_complex(&mut rng));
        let q = raw.qr().q();
        cl.basis = &cl.basis * &q;
        *chi = q.adjoint() * chi.clone();
    }
    let eta_sq: Vec<f64> = chis.iter().map(|c| c.norm_squared()).collect();
    let rotated = QuadFormParams {
        spectrum: obeam_core::quadform::HermitianSpectrum::from_clusters(clusters),
        chi: chis,
        eta_sq,
    };
    let ctl = SeriesControl::default();
    for tau in [0.3, 1.0, 2.0, 5.0] {
        let a = upper_tail(&params, tau, &ctl).probability;
        let b = upper_tail(&rotated, tau, &ctl).probability;
        assert!((a - b).abs() < 1e-12);
    }
}

#[test]
fn single_cluster_residual_sign_and_decay() {
    // kappa = 4, eta^2 = 10/3 single-cluster benchmark. The truncation
    // residual R_N(y) = CDF_exact - CDF_truncated is nonpositive, its
    // magnitude decays in y, and strictly decays in N.
    let mu = DVector::from_element(4, c(0.5, 0.0));
    let params = standardize(&mu, &identity(4).scale(0.3), 1e-8).unwrap();
    let reference = SeriesControl::fixed(200);
    let ys: Vec<f64> = (1..=16).map(|k| 0.5 * k as f64).collect();
    for n in 3..=15usize {
        let ctl = SeriesControl::fixed(n);
        let mut prev_mag = f64::INFINITY;
        for &y in &ys {
            let full = cdf(&params, y, &reference).probability;
            let trunc = cdf(&params, y, &ctl).probability;
            let residual = full - trunc;
            assert!(residual <= 1e-15, "R_{n}({y}) = {residual} > 0");
            let mag = residual.abs();
            assert!(
                mag <= prev_mag + 1e-15,
                "|R_{n}| not nonincreasing at y = {y}"
            );
            prev_mag = mag;
        }
    }
    // Strict decay in N at fixed y while terms remain nonzero.
    let y = 2.0;
    let full = cdf(&params, y, &reference).probability;
    let mut prev = f64::INFINITY;
    for n in 3..=15usize {
        let r = (full - cdf(&params, y, &SeriesControl::fixed(n)).probability).abs();
        assert!(r < prev, "|R_{n}| = {r} not strictly below {prev}");
        prev = r;
    }
}

#[test]
fn truncation_bound_dominates_observed_residual() {
    let mu = DVector::from_element(4, c(0.5, 0.0));
    let params = standardize(&mu, &identity(4).scale(0.3), 1e-8).unwrap();
    let reference = upper_tail(&params, 2.0, &SeriesControl::fixed(200)).probability;
    for n in 3..=60usize {
        let got = upper_tail(&params, 2.0, &SeriesControl::fixed(n)).probability;
        let bound = truncation_bound_identity(10.0 / 3.0, 4, n);
        assert!(
            (reference - got).abs() <= bound * (1.0 + 1e-12) + 1e-15,
            "N = {n}: residual {} exceeds bound {bound}",
            (reference - got).abs()
        );
    }
}

#[test]
fn monotone_in_threshold_over_dense_grid() {
    let (mu, sigma, qbar) = benchmark_form();
    let params = reduce_general_form(&mu, &sigma, &qbar, 1e-8).unwrap();
    let ctl = SeriesControl::default();
    let mut prev = f64::INFINITY;
    for k in 0..=120 {
        let tau = 0.1 * k as f64;
        let p = upper_tail(&params, tau, &ctl).probability;
        assert!(p <= prev + 1e-12, "tail increased at tau = {tau}");
        assert!((0.0..=1.0).contains(&p));
        prev = p;
    }
}

#[test]
fn adaptive_agrees_with_deep_fixed_truncation() {
    let (mu, sigma, qbar) = benchmark_form();
    let params = reduce_general_form(&mu, &sigma, &qbar, 1e-8).unwrap();
    for tau in [0.5, 2.0, 5.0, 9.0] {
        let a = upper_tail(&params, tau, &SeriesControl::adaptive(1e-10, 300)).probability;
        let b = upper_tail(&params, tau, &SeriesControl::fixed(300)).probability;
        assert!((a - b).abs() < 1e-9);
    }
}

#[test]
fn laguerre_converges_lower_tail_first() {
    // On the correlated benchmark the residue series pins the upper tail
    // with few terms while the series fitting still errs there; reference
    // is the deep residue truncation (itself validated against MC above).
    let (mu, sigma, qbar) = benchmark_form();
    let params = reduce_general_form(&mu, &sigma, &qbar, 1e-8).unwrap();
    let reference = SeriesControl::fixed(200);
    let n = 20usize;
    let lag = LaguerreParams::new(2.0, n);
    let grid: Vec<f64> = (0..200).map(|i| 10.0 * i as f64 / 199.0).collect();
    let top: Vec<f64> = grid[180..].to_vec();
    let mut residue_err: f64 = 0.0;
    let mut laguerre_err: f64 = 0.0;
    for &y in &top {
        let truth = cdf(&params, y, &reference).probability;
        let res = cdf(&params, y, &SeriesControl::fixed(n)).probability;
        let lagv = laguerre_cdf(&params, y, &lag).unwrap();
        residue_err = residue_err.max((res - truth).abs());
        laguerre_err = laguerre_err.max((lagv - truth).abs());
    }
    assert!(
        residue_err < laguerre_err,
        "upper-decile: residue {residue_err} vs laguerre {laguerre_err}"
    );
}

#[test]
fn laguerre_beta_controls_convergence_rate() {
    let (mu, sigma, qbar) = benchmark_form();
    let params = reduce_general_form(&mu, &sigma, &qbar, 1e-8).unwrap();
    let reference = SeriesControl::fixed(200);
    let grid: Vec<f64> = (0..200).map(|i| 10.0 * i as f64 / 199.0).collect();
    let mse = |beta: f64, n: usize| -> f64 {
        let lag = LaguerreParams::new(beta, n);
        let mut acc = 0.0;
        for &y in &grid {
            let truth = cdf(&params, y, &reference).probability;
            let got = laguerre_cdf(&params, y, &lag).unwrap();
            acc += (got - truth).powi(2);
        }
        acc / grid.len() as f64
    };
    // Both choices converge with N, at visibly different rates.
    for beta in [1.0, 2.0] {
        let coarse = mse(beta, 8);
        let fine = mse(beta, 40);
        assert!(fine < coarse, "beta = {beta}: {fine} !< {coarse}");
        assert!(fine < 1e-4, "beta = {beta} did not converge: {fine}");
    }
    assert!(mse(1.0, 20) < mse(2.0, 20));
}
