//! Per-stream outage probabilities, Chernoff bounds, and epsilon-outage
//! rates.
//!
//! The outage event `log2(1 + SINR) <= R` rearranges into a Gaussian
//! quadratic form exceeding a threshold; evaluation dispatches to
//! structurally-reduced routes when the configuration allows (known links,
//! single stream, uncorrelated antennas) and to the general residue series
//! otherwise. The reductions only skip work: every route must agree with
//! the general path.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rayon::prelude::*;
use thiserror::Error;

use crate::channel::{
    complement_users, sinr, stream_covariance_restricted, stream_mean_restricted, BeamSet,
    ChannelError, ChannelEstimateSet, NetworkConfig,
};
use crate::linalg::{quad_real, quad_uv, sqrt_psd};
use crate::quadform::{
    standardize, upper_tail, EigenCluster, HermitianSpectrum, McEstimate, QuadFormError,
    QuadFormParams, SeriesControl, DEFAULT_CLUSTER_TOL,
};
use crate::rng::{rng_for, standard_complex};

/// Alignment slack for the finite-sum route: couplings at this level only
/// shift the tail by a comparable amount, far under validation tolerances.
pub const DEFAULT_ALIGNMENT_TOL: f64 = 1e-8;

const MC_PARTITIONS: u64 = 64;

#[derive(Debug, Error)]
pub enum OutageError {
    #[error(transparent)]
    Channel(#[from] ChannelError),
    #[error(transparent)]
    QuadForm(#[from] QuadFormError),
    #[error("beams are not interference-aligned (defect {defect:.3e} > tol {tol:.3e})")]
    NotAligned { defect: f64, tol: f64 },
    #[error("Chernoff parameter s = {s} outside (0, {max:.6e})")]
    SOutOfRange { s: f64, max: f64 },
    #[error("Chernoff bound unavailable: {0}")]
    ChernoffNotApplicable(String),
    #[error("no finite rate meets the outage budget for stream {stream} of user {user}")]
    NoFiniteRate { user: usize, stream: usize },
}

/// One outage evaluation request.
#[derive(Debug, Clone)]
pub struct OutageQuery {
    /// Receiver/user index `k`.
    pub user: usize,
    /// Stream index `m`.
    pub stream: usize,
    /// Target rate in bits per channel use.
    pub rate: f64,
    /// Links with perfect CSI at this receiver (must contain `user` when
    /// nonempty).
    pub known_links: Vec<usize>,
    /// Series truncation control; `None` scales the budget automatically.
    pub series: Option<SeriesControl>,
}

impl OutageQuery {
    pub fn new(user: usize, stream: usize, rate: f64) -> Self {
        OutageQuery {
            user,
            stream,
            rate,
            known_links: Vec::new(),
            series: None,
        }
    }

    pub fn with_known_links(mut self, known: &[usize]) -> Self {
        self.known_links = known.to_vec();
        self
    }

    pub fn with_series(mut self, ctl: SeriesControl) -> Self {
        self.series = Some(ctl);
        self
    }
}

/// Evaluation route taken, named by the structure it exploits.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OutageMethod {
    /// Full residue series on the eigensolver-standardized covariance.
    GeneralSeries,
    /// Dimension reduced by perfectly-known links.
    ReducedKnownLinks,
    /// Zero transformed mean (aligned beams): the series truncates exactly.
    AlignedFiniteSum,
    /// Single stream, distinct eigenvalues: diagonal covariance, no solver.
    DistinctEigenvalues,
    /// Single stream, uncorrelated antennas: one multiplicity cluster.
    UncorrelatedSingleCluster,
    /// Exponential upper bound, not a probability.
    ChernoffBound,
    /// Empirical frequency over sampled error realizations.
    MonteCarlo,
    /// Deterministic 0/1 step at the perfect-CSI rate.
    PerfectCsiStep,
}

/// Result of an outage evaluation.
#[derive(Debug, Clone, Copy)]
pub struct OutageReport {
    pub probability: f64,
    pub tau: f64,
    pub terms_used: usize,
    pub method: OutageMethod,
    pub error_estimate: f64,
}

/// Rate delivered by stream `m` of user `k` when the CSI error vanishes.
pub fn perfect_csi_rate(
    beams: &BeamSet,
    h_hat: &ChannelEstimateSet,
    cfg: &NetworkConfig,
    k: usize,
    m: usize,
) -> Result<f64, OutageError> {
    let h_true: Vec<Vec<DMatrix<Complex64>>> = h_hat.links().to_vec();
    let s = sinr(beams, h_hat, &h_true, cfg, k, m)?;
    Ok((1.0 + s).log2())
}

/// Links whose CSI error variance is exactly zero behave as perfectly
/// known regardless of the query's known set.
fn effective_known(cfg: &NetworkConfig, k: usize, known: &[usize]) -> Vec<usize> {
    (0..cfg.users)
        .filter(|&i| known.contains(&i) || cfg.sigma_h_sq(k, i) == 0.0)
        .collect()
}

/// Threshold with known-link interference folded in; assumes indices were
/// validated. Unlike the public contract this does not require `k` in the
/// set: a zero-variance link is deterministic whether or not the caller
/// declared it known.
fn threshold_internal(
    beams: &BeamSet,
    h_hat: &ChannelEstimateSet,
    cfg: &NetworkConfig,
    k: usize,
    m: usize,
    rate: f64,
    known: &[usize],
) -> f64 {
    let u = beams.rx[k].column(m);
    let desired = (u.adjoint() * h_hat.get(k, k) * beams.tx[k].column(m))[(0, 0)].norm_sqr();
    let gain = (2.0f64).powf(rate) - 1.0;
    if gain == 0.0 {
        return f64::INFINITY;
    }
    let mut tau = desired / gain - cfg.noise_var;
    for &i in known {
        let coupled = u.adjoint() * h_hat.get(k, i) * &beams.tx[i];
        for j in 0..cfg.streams {
            if i == k && j == m {
                continue;
            }
            tau -= coupled[(0, j)].norm_sqr();
        }
    }
    tau
}

fn validate_query(cfg: &NetworkConfig, q: &OutageQuery) -> Result<(), OutageError> {
    if q.user >= cfg.users {
        return Err(ChannelError::IndexOutOfRange {
            what: "user",
            index: q.user,
            bound: cfg.users,
        }
        .into());
    }
    if q.stream >= cfg.streams {
        return Err(ChannelError::IndexOutOfRange {
            what: "stream",
            index: q.stream,
            bound: cfg.streams,
        }
        .into());
    }
    assert!(q.rate >= 0.0, "target rate must be nonnegative");
    if !q.known_links.is_empty() && !q.known_links.contains(&q.user) {
        return Err(ChannelError::DesiredLinkNotKnown { user: q.user }.into());
    }
    if let Some(&bad) = q.known_links.iter().find(|&&i| i >= cfg.users) {
        return Err(ChannelError::IndexOutOfRange {
            what: "known link",
            index: bad,
            bound: cfg.users,
        }
        .into());
    }
    Ok(())
}

fn step_report(
    beams: &BeamSet,
    h_hat: &ChannelEstimateSet,
    cfg: &NetworkConfig,
    q: &OutageQuery,
) -> Result<OutageReport, OutageError> {
    let limit = perfect_csi_rate(beams, h_hat, cfg, q.user, q.stream)?;
    Ok(OutageReport {
        probability: if q.rate >= limit { 1.0 } else { 0.0 },
        tau: threshold_internal(beams, h_hat, cfg, q.user, q.stream, q.rate, &q.known_links),
        terms_used: 0,
        method: OutageMethod::PerfectCsiStep,
        error_estimate: 0.0,
    })
}

/// Builds the clustered spectrum of a diagonal covariance without running
/// an eigensolver: entries sorted descending, merged at the relative gap
/// tolerance, selection vectors as the basis.
fn diagonal_params(cov: &DMatrix<Complex64>, mu: &DVector<Complex64>) -> QuadFormParams {
    let n = cov.nrows();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| {
        cov[(b, b)]
            .re
            .partial_cmp(&cov[(a, a)].re)
            .expect("finite variances")
            .then(a.cmp(&b))
    });
    let mut clusters = Vec::new();
    let mut chi = Vec::new();
    let mut eta_sq = Vec::new();
    let mut start = 0usize;
    while start < n {
        let rep = cov[(order[start], order[start])].re;
        let mut end = start + 1;
        while end < n && (rep - cov[(order[end], order[end])].re) <= DEFAULT_CLUSTER_TOL * rep {
            end += 1;
        }
        let members = &order[start..end];
        let value = members.iter().map(|&i| cov[(i, i)].re).sum::<f64>() / members.len() as f64;
        let mut basis = DMatrix::zeros(n, members.len());
        let mut chi_block = DVector::zeros(members.len());
        for (j, &idx) in members.iter().enumerate() {
            basis[(idx, j)] = Complex64::new(1.0, 0.0);
            chi_block[j] = mu[idx] / value.sqrt();
        }
        eta_sq.push(chi_block.norm_squared());
        clusters.push(EigenCluster {
            value,
            multiplicity: members.len(),
            basis,
        });
        chi.push(chi_block);
        start = end;
    }
    QuadFormParams {
        spectrum: HermitianSpectrum::from_clusters(clusters),
        chi,
        eta_sq,
    }
}

fn evaluate(
    params: &QuadFormParams,
    tau: f64,
    series: Option<SeriesControl>,
    method: OutageMethod,
) -> OutageReport {
    let ctl = series.unwrap_or_else(|| SeriesControl::auto_for(params));
    let est = upper_tail(params, tau, &ctl);
    OutageReport {
        probability: est.probability,
        tau,
        terms_used: est.terms_used,
        method,
        error_estimate: est.error_estimate,
    }
}

/// Outage probability of stream `m` of user `k` at the query's target
/// rate, dispatching to the cheapest applicable route.
pub fn outage_probability(
    beams: &BeamSet,
    h_hat: &ChannelEstimateSet,
    cfg: &NetworkConfig,
    q: &OutageQuery,
) -> Result<OutageReport, OutageError> {
    outage_impl(beams, h_hat, cfg, q, false)
}

/// As [`outage_probability`] but always through the eigensolver route;
/// the structural reductions are validated against this.
pub fn outage_probability_general(
    beams: &BeamSet,
    h_hat: &ChannelEstimateSet,
    cfg: &NetworkConfig,
    q: &OutageQuery,
) -> Result<OutageReport, OutageError> {
    outage_impl(beams, h_hat, cfg, q, true)
}

fn outage_impl(
    beams: &BeamSet,
    h_hat: &ChannelEstimateSet,
    cfg: &NetworkConfig,
    q: &OutageQuery,
    force_general: bool,
) -> Result<OutageReport, OutageError> {
    validate_query(cfg, q)?;
    let (k, m) = (q.user, q.stream);
    let known = effective_known(cfg, k, &q.known_links);
    let rest = complement_users(cfg.users, &known);
    if rest.is_empty() {
        // Every link deterministic: outage is a step at the perfect-CSI rate.
        return step_report(beams, h_hat, cfg, q);
    }
    let tau = threshold_internal(beams, h_hat, cfg, k, m, q.rate, &known);

    let mu = stream_mean_restricted(beams, h_hat, k, m, &rest);
    let cov = stream_covariance_restricted(beams, cfg, k, m, &rest);

    let (params, structural_method) = if !force_general && cfg.streams == 1 {
        let p = diagonal_params(&cov, &mu);
        let method = if p.n_clusters() == 1 {
            OutageMethod::UncorrelatedSingleCluster
        } else if p.max_multiplicity() == 1 {
            OutageMethod::DistinctEigenvalues
        } else {
            OutageMethod::GeneralSeries
        };
        (p, method)
    } else {
        (
            standardize(&mu, &cov, DEFAULT_CLUSTER_TOL)?,
            OutageMethod::GeneralSeries,
        )
    };
    let method = if force_general {
        OutageMethod::GeneralSeries
    } else if !known.is_empty() {
        OutageMethod::ReducedKnownLinks
    } else {
        structural_method
    };
    Ok(evaluate(&params, tau, q.series, method))
}

/// Finite-sum outage for interference-aligned beams with the desired link
/// perfectly known: the transformed mean vanishes so the series truncates
/// after the first term of each cluster.
pub fn outage_ia(
    beams: &BeamSet,
    h_hat: &ChannelEstimateSet,
    cfg: &NetworkConfig,
    q: &OutageQuery,
    alignment_tol: f64,
) -> Result<OutageReport, OutageError> {
    validate_query(cfg, q)?;
    let (k, m) = (q.user, q.stream);
    if !q.known_links.contains(&k) {
        return Err(ChannelError::DesiredLinkNotKnown { user: k }.into());
    }
    // Per-stream alignment precondition: every cross-user coupling into
    // this receive filter must vanish.
    let u = beams.rx[k].column(m);
    let mut defect = 0.0f64;
    for i in 0..cfg.users {
        if i == k {
            continue;
        }
        let coupled = u.adjoint() * h_hat.get(k, i) * &beams.tx[i];
        for z in coupled.iter() {
            defect = defect.max(z.norm());
        }
    }
    if defect > alignment_tol {
        return Err(OutageError::NotAligned {
            defect,
            tol: alignment_tol,
        });
    }

    let known = effective_known(cfg, k, &q.known_links);
    let rest = complement_users(cfg.users, &known);
    if rest.is_empty() {
        return step_report(beams, h_hat, cfg, q);
    }
    let tau = threshold_internal(beams, h_hat, cfg, k, m, q.rate, &known);
    let cov = stream_covariance_restricted(beams, cfg, k, m, &rest);
    // chi = 0 exactly under alignment.
    let zero_mu = DVector::zeros(rest.len() * cfg.streams);
    let params = if cfg.streams == 1 {
        diagonal_params(&cov, &zero_mu)
    } else {
        standardize(&zero_mu, &cov, DEFAULT_CLUSTER_TOL)?
    };
    let mut report = evaluate(&params, tau, q.series, OutageMethod::AlignedFiniteSum);
    report.error_estimate = 0.0; // the truncated terms are identically zero
    Ok(report)
}

/// Per-entry `(variance, |mean|^2)` of the stacked interference variables
/// for the Chernoff bound; requires independent entries (single stream, or
/// uncorrelated antennas with orthogonal transmit columns).
fn chernoff_entries(
    beams: &BeamSet,
    h_hat: &ChannelEstimateSet,
    cfg: &NetworkConfig,
    k: usize,
    m: usize,
) -> Result<Vec<(f64, f64)>, OutageError> {
    if cfg.streams > 1 {
        let id_t = DMatrix::<Complex64>::identity(cfg.tx_antennas, cfg.tx_antennas);
        let id_r = DMatrix::<Complex64>::identity(cfg.rx_antennas, cfg.rx_antennas);
        let uncorrelated = (&cfg.tx_correlation - id_t).norm() <= 1e-12
            && (&cfg.rx_correlation - id_r).norm() <= 1e-12;
        let orthogonal = beams.tx.iter().all(|v| {
            let gram = v.adjoint() * v;
            (gram - DMatrix::<Complex64>::identity(v.ncols(), v.ncols())).norm() <= 1e-8
        });
        if !(uncorrelated && orthogonal) {
            return Err(OutageError::ChernoffNotApplicable(
                "multi-stream bound needs uncorrelated antennas and orthogonal transmit columns"
                    .into(),
            ));
        }
    }
    let u = beams.rx_col(k, m);
    let rx_gain = quad_real(&u, &cfg.rx_correlation);
    let mut entries = Vec::with_capacity(cfg.users * cfg.streams);
    for i in 0..cfg.users {
        let coupled = u.adjoint() * h_hat.get(k, i) * &beams.tx[i];
        for j in 0..cfg.streams {
            let v = beams.tx_col(i, j);
            let var = cfg.sigma_h_sq(k, i) * rx_gain * quad_real(&v, &cfg.tx_correlation);
            let mean_sq = if i == k && j == m {
                0.0
            } else {
                coupled[(0, j)].norm_sqr()
            };
            entries.push((var, mean_sq));
        }
    }
    Ok(entries)
}

fn chernoff_exponent(entries: &[(f64, f64)], tau: f64, s: f64) -> f64 {
    let mut f = tau * s;
    for &(var, mean_sq) in entries {
        f += (1.0 - var * s).ln() + mean_sq * s / (var * s - 1.0);
    }
    f
}

/// Chernoff upper bound
/// `exp(-[tau s + sum log(1 - var s) + sum mean^2 s/(var s - 1)])`
/// on the outage probability of stream `m` of user `k`. May exceed 1
/// (valid but vacuous); never clamped.
///
/// `s` defaults to `1/(sigma_h^2 tr(St) tr(Sr))`, which sits below
/// `min 1/var` for unit-norm beams.
pub fn chernoff_bound(
    beams: &BeamSet,
    h_hat: &ChannelEstimateSet,
    cfg: &NetworkConfig,
    k: usize,
    m: usize,
    rate: f64,
    s: Option<f64>,
) -> Result<f64, OutageError> {
    let entries = chernoff_entries(beams, h_hat, cfg, k, m)?;
    let s_max = entries
        .iter()
        .map(|&(var, _)| 1.0 / var)
        .fold(f64::INFINITY, f64::min);
    let s = match s {
        Some(s) => s,
        None => {
            let sigma_h_max = (0..cfg.users)
                .map(|i| cfg.sigma_h_sq(k, i))
                .fold(0.0f64, f64::max);
            let trace_product = cfg.tx_correlation.trace().re * cfg.rx_correlation.trace().re;
            1.0 / (sigma_h_max * trace_product)
        }
    };
    if !(s > 0.0 && s < s_max) {
        return Err(OutageError::SOutOfRange { s, max: s_max });
    }
    let tau = threshold_internal(beams, h_hat, cfg, k, m, rate, &[]);
    Ok((-chernoff_exponent(&entries, tau, s)).exp())
}

/// Chernoff bound with `s` tightened by golden-section search over
/// `(0, min 1/var)`; the exponent is concave in `s` so the maximum is
/// unique.
pub fn chernoff_bound_tightened(
    beams: &BeamSet,
    h_hat: &ChannelEstimateSet,
    cfg: &NetworkConfig,
    k: usize,
    m: usize,
    rate: f64,
) -> Result<f64, OutageError> {
    let entries = chernoff_entries(beams, h_hat, cfg, k, m)?;
    let s_max = entries
        .iter()
        .map(|&(var, _)| 1.0 / var)
        .fold(f64::INFINITY, f64::min);
    let tau = threshold_internal(beams, h_hat, cfg, k, m, rate, &[]);
    let golden = 0.5 * (3.0 - 5.0f64.sqrt());
    let (mut lo, mut hi) = (s_max * 1e-9, s_max * (1.0 - 1e-9));
    let mut a = lo + golden * (hi - lo);
    let mut b = hi - golden * (hi - lo);
    let mut fa = chernoff_exponent(&entries, tau, a);
    let mut fb = chernoff_exponent(&entries, tau, b);
    for _ in 0..200 {
        if hi - lo <= 1e-12 * s_max {
            break;
        }
        if fa < fb {
            lo = a;
            a = b;
            fa = fb;
            b = hi - golden * (hi - lo);
            fb = chernoff_exponent(&entries, tau, b);
        } else {
            hi = b;
            b = a;
            fb = fa;
            a = lo + golden * (hi - lo);
            fa = chernoff_exponent(&entries, tau, a);
        }
    }
    Ok((-fa.max(fb)).exp())
}

/// The rate ceiling under which the outage probability decays
/// exponentially as the CSI quality improves:
///
/// `log2(1 + |u^H Hhat_kk v|^2 / (sum_i |mu_ki|^2 / (1 - (u^H Sr u)(v_i^H
/// St v_i)/(tr(Sr) tr(St))) + sigma^2))`.
pub fn rate_bar(
    beams: &BeamSet,
    h_hat: &ChannelEstimateSet,
    cfg: &NetworkConfig,
    k: usize,
    m: usize,
) -> f64 {
    let u = beams.rx_col(k, m);
    let rx_gain = quad_real(&u, &cfg.rx_correlation);
    let trace_product = cfg.tx_correlation.trace().re * cfg.rx_correlation.trace().re;
    let desired = quad_uv(&u, h_hat.get(k, k), &beams.tx_col(k, m)).norm_sqr();
    let mut denom = cfg.noise_var;
    for i in 0..cfg.users {
        if i == k {
            continue; // mu_kk = 0 contributes nothing
        }
        for j in 0..cfg.streams {
            let v = beams.tx_col(i, j);
            let mu_sq = quad_uv(&u, h_hat.get(k, i), &v).norm_sqr();
            let ratio = rx_gain * quad_real(&v, &cfg.tx_correlation) / trace_product;
            denom += mu_sq / (1.0 - ratio);
        }
    }
    (1.0 + desired / denom).log2()
}

/// Largest rate whose outage probability does not exceed `epsilon`, found
/// by bisection (the outage probability is monotone in the rate).
/// Terminates when `|p(R) - epsilon| <= 1e-6` or the bracket width falls
/// under 1e-9.
#[allow(clippy::too_many_arguments)]
pub fn epsilon_outage_rate(
    beams: &BeamSet,
    h_hat: &ChannelEstimateSet,
    cfg: &NetworkConfig,
    k: usize,
    m: usize,
    epsilon: f64,
    known_links: &[usize],
    series: Option<SeriesControl>,
) -> Result<f64, OutageError> {
    assert!(epsilon > 0.0 && epsilon < 1.0, "epsilon must be in (0, 1)");
    let probe = |rate: f64| -> Result<f64, OutageError> {
        let mut q = OutageQuery::new(k, m, rate).with_known_links(known_links);
        q.series = series;
        Ok(outage_probability(beams, h_hat, cfg, &q)?.probability)
    };
    let u = beams.rx[k].column(m);
    let desired = (u.adjoint() * h_hat.get(k, k) * beams.tx[k].column(m))[(0, 0)].norm_sqr();
    if desired <= 0.0 || probe(1e-9)? > epsilon {
        return Err(OutageError::NoFiniteRate { user: k, stream: m });
    }
    let mut hi = 1.0f64;
    let mut doublings = 0;
    while probe(hi)? <= epsilon {
        hi *= 2.0;
        doublings += 1;
        if doublings > 64 {
            return Err(OutageError::NoFiniteRate { user: k, stream: m });
        }
    }
    let mut lo = 0.0f64;
    let mut mid = 0.5 * hi;
    while hi - lo > 1e-9 {
        mid = 0.5 * (lo + hi);
        let p = probe(mid)?;
        if (p - epsilon).abs() <= 1e-6 {
            return Ok(mid);
        }
        if p > epsilon {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok(mid)
}

/// Monte Carlo outage estimate: samples CSI error realizations, computes
/// the instantaneous SINR, and counts `log2(1 + SINR) <= rate`.
/// Deterministic per seed for any worker count.
pub fn mc_outage(
    beams: &BeamSet,
    h_hat: &ChannelEstimateSet,
    cfg: &NetworkConfig,
    q: &OutageQuery,
    trials: u64,
    seed: u64,
) -> Result<McEstimate, OutageError> {
    assert!(trials >= 1_000, "need at least 10^3 trials");
    validate_query(cfg, q)?;
    let (k, m) = (q.user, q.stream);
    let known = effective_known(cfg, k, &q.known_links);
    let sinr_floor = (2.0f64).powf(q.rate) - 1.0;

    // u^H (Hhat_ki + E_ki) v_i^(j) = c_ij + sigma_h (b^H W) a_ij with
    // b = Sr^{1/2} u, a_ij = St^{1/2} v_i^(j), W i.i.d. CN(0, 1).
    let u = beams.rx_col(k, m);
    let sqrt_t = sqrt_psd(&cfg.tx_correlation).map_err(ChannelError::from)?;
    let sqrt_r = sqrt_psd(&cfg.rx_correlation).map_err(ChannelError::from)?;
    let b_conj: Vec<Complex64> = (&sqrt_r * &u).iter().map(|z| z.conj()).collect();
    let d = cfg.streams;
    let mut coupling = vec![Complex64::new(0.0, 0.0); cfg.users * d];
    let mut tx_proj: Vec<DVector<Complex64>> = Vec::with_capacity(cfg.users * d);
    let mut sigma_h = vec![0.0f64; cfg.users];
    for i in 0..cfg.users {
        sigma_h[i] = if known.contains(&i) {
            0.0
        } else {
            cfg.sigma_h_sq(k, i).sqrt()
        };
        let coupled = u.adjoint() * h_hat.get(k, i) * &beams.tx[i];
        for j in 0..d {
            coupling[i * d + j] = coupled[(0, j)];
            tx_proj.push(&sqrt_t * beams.tx_col(i, j));
        }
    }
    let desired = coupling[k * d + m].norm_sqr();
    let noise = cfg.noise_var;

    let base = trials / MC_PARTITIONS;
    let extra = trials % MC_PARTITIONS;
    let stream_tag = (k * d + m) as u64;
    let hits: u64 = (0..MC_PARTITIONS)
        .into_par_iter()
        .map(|part| {
            let count = base + u64::from(part < extra);
            let mut rng = rng_for(seed, "mc_outage", part, stream_tag);
            let mut w_row = vec![Complex64::new(0.0, 0.0); cfg.tx_antennas];
            let mut hits = 0u64;
            for _ in 0..count {
                let mut denom = noise;
                for i in 0..cfg.users {
                    if sigma_h[i] == 0.0 {
                        // Deterministic link: interference enters exactly.
                        for j in 0..d {
                            if i == k && j == m {
                                continue;
                            }
                            denom += coupling[i * d + j].norm_sqr();
                        }
                        continue;
                    }
                    // Fresh Gaussian matrix per link; accumulate b^H W.
                    for w in w_row.iter_mut() {
                        let mut acc = Complex64::new(0.0, 0.0);
                        for &bc in &b_conj {
                            acc += bc * standard_complex(&mut rng);
                        }
                        *w = acc;
                    }
                    for j in 0..d {
                        let a = &tx_proj[i * d + j];
                        let mut fluct = Complex64::new(0.0, 0.0);
                        for (wc, ac) in w_row.iter().zip(a.iter()) {
                            fluct += wc * ac;
                        }
                        fluct *= sigma_h[i];
                        let total = if i == k && j == m {
                            fluct // own-stream slot has zero deterministic part
                        } else {
                            coupling[i * d + j] + fluct
                        };
                        denom += total.norm_sqr();
                    }
                }
                if desired / denom <= sinr_floor {
                    hits += 1;
                }
            }
            hits
        })
        .sum();

    let p = hits as f64 / trials as f64;
    Ok(McEstimate {
        estimate: p,
        std_error: (p * (1.0 - p) / trials as f64).sqrt(),
        samples: trials,
    })
}
