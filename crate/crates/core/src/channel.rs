//! K-user MIMO interference channel with Kronecker-structured CSI error.
//!
//! True channels decompose as `H_ki = Hhat_ki + E_ki` where `Hhat` is the
//! estimate known to all nodes and `E_ki = Sr^{1/2} Hw St^{1/2}` with
//! `vec(Hw) ~ CN(0, sigma_h^2 I)`, giving `vec(E) ~ CN(0, sigma_h^2
//! (St^T kron Sr))`. This module builds the per-stream Gaussian
//! quadratic-form ingredients (mean vector, block-diagonal covariance,
//! outage threshold) consumed by the outage layer.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rand::Rng;
use thiserror::Error;

use crate::linalg::{check_hermitian, hermitian_eigen_sorted, quad_real, quad_uv, sqrt_psd};
use crate::rng::{rng_for, standard_complex};

#[derive(Debug, Error, PartialEq)]
pub enum ChannelError {
    #[error("correlation strength rho = {rho} outside [0, 1]")]
    RhoOutOfRange { rho: f64 },
    #[error("{what} index {index} out of range (< {bound})")]
    IndexOutOfRange {
        what: &'static str,
        index: usize,
        bound: usize,
    },
    #[error("known-link set must contain the desired link of user {user}")]
    DesiredLinkNotKnown { user: usize },
    #[error("invalid network configuration: {0}")]
    InvalidConfig(String),
    #[error(transparent)]
    Linalg(#[from] crate::linalg::LinalgError),
}

/// Static description of the network: dimensions, noise and CSI-error
/// levels, and antenna correlation structure.
#[derive(Debug, Clone)]
pub struct NetworkConfig {
    /// Number of transmitter-receiver pairs (K).
    pub users: usize,
    /// Transmit antennas per node (N_t).
    pub tx_antennas: usize,
    /// Receive antennas per node (N_r).
    pub rx_antennas: usize,
    /// Streams per user (d).
    pub streams: usize,
    /// Thermal noise variance (sigma^2).
    pub noise_var: f64,
    /// CSI error scale (sigma_h^2), applied to every link unless overridden.
    pub csi_error_var: f64,
    /// Transmit antenna correlation (N_t x N_t, Hermitian PSD).
    pub tx_correlation: DMatrix<Complex64>,
    /// Receive antenna correlation (N_r x N_r, Hermitian PSD).
    pub rx_correlation: DMatrix<Complex64>,
    /// Optional per-link CSI error variance override, indexed `[k][i]`.
    pub link_error_var: Option<Vec<Vec<f64>>>,
}

impl NetworkConfig {
    /// Configuration with identity antenna correlations (the explicit
    /// default).
    pub fn new(
        users: usize,
        tx_antennas: usize,
        rx_antennas: usize,
        streams: usize,
        noise_var: f64,
        csi_error_var: f64,
    ) -> Self {
        NetworkConfig {
            users,
            tx_antennas,
            rx_antennas,
            streams,
            noise_var,
            csi_error_var,
            tx_correlation: DMatrix::identity(tx_antennas, tx_antennas),
            rx_correlation: DMatrix::identity(rx_antennas, rx_antennas),
            link_error_var: None,
        }
    }

    pub fn with_correlations(
        mut self,
        tx: DMatrix<Complex64>,
        rx: DMatrix<Complex64>,
    ) -> Result<Self, ChannelError> {
        if tx.nrows() != self.tx_antennas || rx.nrows() != self.rx_antennas {
            return Err(ChannelError::InvalidConfig(
                "correlation matrix dimensions do not match antenna counts".into(),
            ));
        }
        check_hermitian(&tx, 1e-10)?;
        check_hermitian(&rx, 1e-10)?;
        self.tx_correlation = tx;
        self.rx_correlation = rx;
        Ok(self)
    }

    pub fn validate(&self) -> Result<(), ChannelError> {
        if self.users == 0 {
            return Err(ChannelError::InvalidConfig("need at least one user".into()));
        }
        if self.streams == 0 || self.streams > self.tx_antennas.min(self.rx_antennas) {
            return Err(ChannelError::InvalidConfig(format!(
                "streams = {} must satisfy 1 <= d <= min(N_t, N_r) = {}",
                self.streams,
                self.tx_antennas.min(self.rx_antennas)
            )));
        }
        if self.noise_var < 0.0 || self.csi_error_var < 0.0 {
            return Err(ChannelError::InvalidConfig(
                "noise and CSI error variances must be nonnegative".into(),
            ));
        }
        if let Some(table) = &self.link_error_var {
            let ok = table.len() == self.users
                && table.iter().all(|row| row.len() == self.users)
                && table.iter().flatten().all(|&v| v >= 0.0);
            if !ok {
                return Err(ChannelError::InvalidConfig(
                    "per-link error variance table must be K x K and nonnegative".into(),
                ));
            }
        }
        Ok(())
    }

    /// CSI error variance of link `(k, i)`.
    pub fn sigma_h_sq(&self, k: usize, i: usize) -> f64 {
        self.link_error_var
            .as_ref()
            .map_or(self.csi_error_var, |t| t[k][i])
    }

    /// All links share a zero CSI error variance.
    pub fn is_error_free(&self) -> bool {
        match &self.link_error_var {
            Some(t) => t.iter().flatten().all(|&v| v == 0.0),
            None => self.csi_error_var == 0.0,
        }
    }

    /// Sets the CSI error variance so that the channel K factor equals
    /// `k_factor` (linear) under the estimate normalization
    /// `||Hhat||_F^2 = N_t N_r`.
    pub fn with_k_factor(mut self, k_factor: f64) -> Self {
        let trace_product = self.tx_correlation.trace().re * self.rx_correlation.trace().re;
        self.csi_error_var =
            (self.tx_antennas * self.rx_antennas) as f64 / (k_factor * trace_product);
        self
    }

    /// Sets the noise variance so the receive SNR equals `gamma` (linear)
    /// under the same normalization.
    pub fn with_snr(mut self, gamma: f64) -> Self {
        self.noise_var = (self.tx_antennas * self.rx_antennas) as f64 / gamma;
        self
    }
}

/// Exponential antenna correlation profile: entry `(i, j) = rho^{|i-j|}`.
/// Its trace is `n`, preserving total power relative to the identity.
pub fn exponential_correlation(n: usize, rho: f64) -> Result<DMatrix<Complex64>, ChannelError> {
    if !(0.0..=1.0).contains(&rho) {
        return Err(ChannelError::RhoOutOfRange { rho });
    }
    Ok(DMatrix::from_fn(n, n, |i, j| {
        Complex64::new(rho.powi((i as i32 - j as i32).abs()), 0.0)
    }))
}

/// The K x K array of channel estimates `Hhat_ki` (receiver k, transmitter i).
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelEstimateSet {
    links: Vec<Vec<DMatrix<Complex64>>>,
}

impl ChannelEstimateSet {
    pub fn new(links: Vec<Vec<DMatrix<Complex64>>>) -> Self {
        ChannelEstimateSet { links }
    }

    pub fn users(&self) -> usize {
        self.links.len()
    }

    pub fn get(&self, k: usize, i: usize) -> &DMatrix<Complex64> {
        &self.links[k][i]
    }

    pub fn links(&self) -> &[Vec<DMatrix<Complex64>>] {
        &self.links
    }

    /// Channel K factor of link `(k, i)`:
    /// `||Hhat_ki||_F^2 / (sigma_h^2 tr(St) tr(Sr))`.
    pub fn k_factor(&self, cfg: &NetworkConfig, k: usize, i: usize) -> f64 {
        let trace_product = cfg.tx_correlation.trace().re * cfg.rx_correlation.trace().re;
        self.links[k][i].norm_squared() / (cfg.sigma_h_sq(k, i) * trace_product)
    }

    /// Receive SNR of user `k`: `||Hhat_kk||_F^2 / sigma^2`.
    pub fn snr(&self, cfg: &NetworkConfig, k: usize) -> f64 {
        self.links[k][k].norm_squared() / cfg.noise_var
    }
}

/// One realization of the CSI errors `E_ki`.
#[derive(Debug, Clone)]
pub struct ErrorRealization {
    links: Vec<Vec<DMatrix<Complex64>>>,
}

impl ErrorRealization {
    pub fn get(&self, k: usize, i: usize) -> &DMatrix<Complex64> {
        &self.links[k][i]
    }

    /// True channels `Hhat + E`.
    pub fn true_channels(&self, estimates: &ChannelEstimateSet) -> Vec<Vec<DMatrix<Complex64>>> {
        self.links
            .iter()
            .zip(estimates.links())
            .map(|(erow, hrow)| erow.iter().zip(hrow).map(|(e, h)| h + e).collect())
            .collect()
    }
}

/// Transmit matrices `V_k` (N_t x d) and receive filters `U_k` (N_r x d)
/// with unit-norm columns.
#[derive(Debug, Clone, PartialEq)]
pub struct BeamSet {
    pub tx: Vec<DMatrix<Complex64>>,
    pub rx: Vec<DMatrix<Complex64>>,
}

impl BeamSet {
    pub fn users(&self) -> usize {
        self.tx.len()
    }

    pub fn tx_col(&self, i: usize, j: usize) -> DVector<Complex64> {
        self.tx[i].column(j).clone_owned()
    }

    pub fn rx_col(&self, k: usize, m: usize) -> DVector<Complex64> {
        self.rx[k].column(m).clone_owned()
    }

    /// Largest deviation of any beam column from unit norm.
    pub fn norm_defect(&self) -> f64 {
        let mut worst = 0.0f64;
        for m in self.tx.iter().chain(&self.rx) {
            for j in 0..m.ncols() {
                worst = worst.max((m.column(j).norm() - 1.0).abs());
            }
        }
        worst
    }

    /// Total cross-user leakage in the receive-filtered estimated channel:
    /// `sum_k sum_{i != k} ||U_k^H Hhat_ki V_i||_F^2`.
    pub fn leakage(&self, estimates: &ChannelEstimateSet) -> f64 {
        let k_users = self.users();
        let mut total = 0.0;
        for k in 0..k_users {
            for i in 0..k_users {
                if i != k {
                    total +=
                        (self.rx[k].adjoint() * estimates.get(k, i) * &self.tx[i]).norm_squared();
                }
            }
        }
        total
    }

    /// Largest cross-user interference coupling
    /// `max_{i != k, j, m} |u_k^(m)H Hhat_ki v_i^(j)|`.
    pub fn alignment_defect(&self, estimates: &ChannelEstimateSet) -> f64 {
        let k_users = self.users();
        let mut worst = 0.0f64;
        for k in 0..k_users {
            for i in 0..k_users {
                if i == k {
                    continue;
                }
                let coupled = self.rx[k].adjoint() * estimates.get(k, i) * &self.tx[i];
                for v in coupled.iter() {
                    worst = worst.max(v.norm());
                }
            }
        }
        worst
    }
}

/// Draws the channel estimates: i.i.d. standard complex Gaussian entries,
/// then each matrix scaled so `||Hhat_ki||_F^2 = N_t N_r` exactly.
pub fn generate_estimates(cfg: &NetworkConfig, seed: u64) -> ChannelEstimateSet {
    let target = ((cfg.tx_antennas * cfg.rx_antennas) as f64).sqrt();
    let links = (0..cfg.users)
        .map(|k| {
            (0..cfg.users)
                .map(|i| {
                    let mut rng = rng_for(seed, "estimate", k as u64, i as u64);
                    let mut h = DMatrix::from_fn(cfg.rx_antennas, cfg.tx_antennas, |_, _| {
                        standard_complex(&mut rng)
                    });
                    let norm = h.norm();
                    h.scale_mut(target / norm);
                    h
                })
                .collect()
        })
        .collect();
    ChannelEstimateSet { links }
}

/// Reusable sampler of Kronecker-structured CSI errors; precomputes the
/// correlation square roots once.
pub struct ErrorSampler {
    sqrt_tx: DMatrix<Complex64>,
    sqrt_rx: DMatrix<Complex64>,
    sigma_h: Vec<Vec<f64>>,
    rx_antennas: usize,
    tx_antennas: usize,
}

impl ErrorSampler {
    pub fn new(cfg: &NetworkConfig) -> Result<Self, ChannelError> {
        cfg.validate()?;
        let sigma_h = (0..cfg.users)
            .map(|k| (0..cfg.users).map(|i| cfg.sigma_h_sq(k, i).sqrt()).collect())
            .collect();
        Ok(ErrorSampler {
            sqrt_tx: sqrt_psd(&cfg.tx_correlation)?,
            sqrt_rx: sqrt_psd(&cfg.rx_correlation)?,
            sigma_h,
            rx_antennas: cfg.rx_antennas,
            tx_antennas: cfg.tx_antennas,
        })
    }

    /// One draw of `E_ki = Sr^{1/2} Hw St^{1/2}`, `Hw` i.i.d.
    /// `CN(0, sigma_h^2)`.
    pub fn sample_link<R: Rng + ?Sized>(
        &self,
        k: usize,
        i: usize,
        rng: &mut R,
    ) -> DMatrix<Complex64> {
        let scale = self.sigma_h[k][i];
        if scale == 0.0 {
            return DMatrix::zeros(self.rx_antennas, self.tx_antennas);
        }
        let white = DMatrix::from_fn(self.rx_antennas, self.tx_antennas, |_, _| {
            standard_complex(rng) * scale
        });
        &self.sqrt_rx * white * &self.sqrt_tx
    }
}

/// One full error realization, each link independently reproducible from
/// `(seed, "error", k, i)`.
pub fn sample_error(cfg: &NetworkConfig, seed: u64) -> Result<ErrorRealization, ChannelError> {
    let sampler = ErrorSampler::new(cfg)?;
    let links = (0..cfg.users)
        .map(|k| {
            (0..cfg.users)
                .map(|i| {
                    let mut rng = rng_for(seed, "error", k as u64, i as u64);
                    sampler.sample_link(k, i, &mut rng)
                })
                .collect()
        })
        .collect();
    Ok(ErrorRealization { links })
}

fn check_stream(cfg: &NetworkConfig, k: usize, m: usize) -> Result<(), ChannelError> {
    if k >= cfg.users {
        return Err(ChannelError::IndexOutOfRange {
            what: "user",
            index: k,
            bound: cfg.users,
        });
    }
    if m >= cfg.streams {
        return Err(ChannelError::IndexOutOfRange {
            what: "stream",
            index: m,
            bound: cfg.streams,
        });
    }
    Ok(())
}

/// Instantaneous SINR of stream `m` of user `k` for a given error
/// realization (`h_true = h_hat + E` link-wise):
///
/// ```text
/// |u^H Hhat_kk v_k^(m)|^2 /
///   (|u^H E_kk v_k^(m)|^2 + sum_{j!=m} |u^H H_kk v_k^(j)|^2
///    + sum_{i!=k} sum_j |u^H H_ki v_i^(j)|^2 + sigma^2)
/// ```
#[allow(clippy::needless_range_loop)]
pub fn sinr(
    beams: &BeamSet,
    h_hat: &ChannelEstimateSet,
    h_true: &[Vec<DMatrix<Complex64>>],
    cfg: &NetworkConfig,
    k: usize,
    m: usize,
) -> Result<f64, ChannelError> {
    check_stream(cfg, k, m)?;
    let u = beams.rx[k].column(m);
    let desired = (u.adjoint() * h_hat.get(k, k) * beams.tx[k].column(m))[(0, 0)].norm_sqr();

    let e_kk = &h_true[k][k] - h_hat.get(k, k);
    let mut denom = (u.adjoint() * e_kk * beams.tx[k].column(m))[(0, 0)].norm_sqr();
    for j in 0..cfg.streams {
        if j != m {
            denom += (u.adjoint() * &h_true[k][k] * beams.tx[k].column(j))[(0, 0)].norm_sqr();
        }
    }
    for i in 0..cfg.users {
        if i == k {
            continue;
        }
        for j in 0..cfg.streams {
            denom += (u.adjoint() * &h_true[k][i] * beams.tx[i].column(j))[(0, 0)].norm_sqr();
        }
    }
    Ok(desired / (denom + cfg.noise_var))
}

/// Mean vector of the stacked interference-plus-self-error variables for
/// stream `m` of user `k`, restricted to transmitters in `users` (in the
/// given order). The slot for transmitter `i`, stream `j` is
/// `u_k^(m)H Hhat_ki v_i^(j)`, except the own-stream slot `(i = k, j = m)`
/// which is zero.
pub fn stream_mean_restricted(
    beams: &BeamSet,
    h_hat: &ChannelEstimateSet,
    k: usize,
    m: usize,
    users: &[usize],
) -> DVector<Complex64> {
    let d = beams.tx[k].ncols();
    let u = beams.rx[k].column(m);
    let mut mu = DVector::zeros(users.len() * d);
    for (pos, &i) in users.iter().enumerate() {
        let coupled = u.adjoint() * h_hat.get(k, i) * &beams.tx[i];
        for j in 0..d {
            mu[pos * d + j] = if i == k && j == m {
                Complex64::new(0.0, 0.0)
            } else {
                coupled[(0, j)]
            };
        }
    }
    mu
}

/// Full-length mean vector (all K transmitters).
pub fn stream_mean_vector(
    beams: &BeamSet,
    h_hat: &ChannelEstimateSet,
    k: usize,
    m: usize,
) -> DVector<Complex64> {
    let users: Vec<usize> = (0..h_hat.users()).collect();
    stream_mean_restricted(beams, h_hat, k, m, &users)
}

/// Covariance of the same stacked variables, restricted to `users`:
/// block-diagonal with `d x d` blocks
/// `sigma_h^2 (u^H Sr u) * [v_i^(q)H St v_i^(p)]_{p,q}`.
pub fn stream_covariance_restricted(
    beams: &BeamSet,
    cfg: &NetworkConfig,
    k: usize,
    m: usize,
    users: &[usize],
) -> DMatrix<Complex64> {
    let d = cfg.streams;
    let u = beams.rx_col(k, m);
    let rx_gain = quad_real(&u, &cfg.rx_correlation);
    let mut cov = DMatrix::zeros(users.len() * d, users.len() * d);
    for (pos, &i) in users.iter().enumerate() {
        let scale = cfg.sigma_h_sq(k, i) * rx_gain;
        for p in 0..d {
            for q in 0..d {
                let vp = beams.tx_col(i, p);
                let vq = beams.tx_col(i, q);
                cov[(pos * d + p, pos * d + q)] = quad_uv(&vq, &cfg.tx_correlation, &vp) * scale;
            }
        }
    }
    cov
}

/// Full `Kd x Kd` block-diagonal covariance.
pub fn stream_covariance(
    beams: &BeamSet,
    cfg: &NetworkConfig,
    k: usize,
    m: usize,
) -> DMatrix<Complex64> {
    let users: Vec<usize> = (0..cfg.users).collect();
    stream_covariance_restricted(beams, cfg, k, m, &users)
}

/// Outage threshold for stream `m` of user `k` at target rate `rate`
/// (bits/channel use).
///
/// With no perfectly-known links: `tau = |u^H Hhat_kk v|^2/(2^R - 1) -
/// sigma^2`. With known links `known` (which must include `k`), the
/// perfectly-known interference becomes deterministic and moves into the
/// threshold: every `|u^H Hhat_ki v_i^(j)|^2` with `i` known is
/// subtracted, except the desired slot `(i = k, j = m)`.
pub fn threshold_tau(
    beams: &BeamSet,
    h_hat: &ChannelEstimateSet,
    cfg: &NetworkConfig,
    k: usize,
    m: usize,
    rate: f64,
    known: &[usize],
) -> Result<f64, ChannelError> {
    check_stream(cfg, k, m)?;
    assert!(rate >= 0.0, "target rate must be nonnegative");
    if !known.is_empty() && !known.contains(&k) {
        return Err(ChannelError::DesiredLinkNotKnown { user: k });
    }
    let u = beams.rx[k].column(m);
    let desired = (u.adjoint() * h_hat.get(k, k) * beams.tx[k].column(m))[(0, 0)].norm_sqr();
    let gain = (2.0f64).powf(rate) - 1.0;
    if gain == 0.0 {
        return Ok(f64::INFINITY);
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
    Ok(tau)
}

/// Users not in the known-link set, in ascending order.
pub fn complement_users(users: usize, known: &[usize]) -> Vec<usize> {
    (0..users).filter(|i| !known.contains(i)).collect()
}

/// Smallest eigenvalue of a stream covariance; the residue series requires
/// it to be strictly positive.
pub fn covariance_min_eigenvalue(cov: &DMatrix<Complex64>) -> f64 {
    let (values, _) = hermitian_eigen_sorted(cov);
    values.last().copied().unwrap_or(0.0)
}
