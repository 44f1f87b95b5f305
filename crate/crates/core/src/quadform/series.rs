//! The residue series for the upper tail of a Gaussian quadratic form.
//!
//! `Pr{X^H X >= tau}` is a sum of residues at the poles `-1/lambda_i` of the
//! contour-integral CDF representation:
//!
//! ```text
//! upper(tau) = - sum_i  e^{-(tau/l_i + eta_i^2)} / l_i^{k_i}
//!              * sum_{n >= k_i - 1}  g_i^{(n)}(0) / n!
//!                * (eta_i^2 / l_i)^{n-k_i+1} / (n-k_i+1)!
//! ```
//!
//! The derivatives of `g_i` follow a binomial recursion seeded by closed-form
//! derivatives of `log g_i`; all recursion intermediates are carried in
//! signed log-magnitude form so factorial growth cannot overflow. A single
//! eigenvalue cluster admits a factored form of the very same terms
//! (Poisson weight times regularized Gamma tail) which is evaluated directly:
//! each term then lies in `[0, 1]` and the remaining Poisson mass is an
//! exact truncation bound.

use super::signed_ln::SignedLn;
use super::{QuadFormError, QuadFormParams, SeriesControl, SeriesMode, TailEstimate};

/// Relative eigenvalue-ratio floor under which two "distinct" clusters are
/// considered collided (broken clustering upstream).
const COLLISION_TOL: f64 = 1e-13;

/// Largest `ln |term|` that still accumulates safely in plain f64.
const F64_SAFE_LN: f64 = 700.0;

/// Consecutive sub-threshold rows required before adaptive stop.
const ADAPTIVE_STREAK: usize = 3;

#[derive(Debug, Clone, Copy)]
struct Cluster {
    lambda: f64,
    kappa: usize,
    eta_sq: f64,
}

fn clusters_of(params: &QuadFormParams) -> Vec<Cluster> {
    params
        .spectrum
        .clusters()
        .iter()
        .zip(&params.eta_sq)
        .map(|(cl, &eta_sq)| Cluster {
            lambda: cl.value,
            kappa: cl.multiplicity,
            eta_sq,
        })
        .collect()
}

fn check_cluster_index(params: &QuadFormParams, i: usize) -> Result<(), QuadFormError> {
    let n = params.n_clusters();
    if i >= n {
        return Err(QuadFormError::ClusterIndexOutOfRange {
            index: i,
            clusters: n,
        });
    }
    Ok(())
}

fn ln_factorial(n: usize) -> f64 {
    libm::lgamma((n + 1) as f64)
}

/// `[log g_i]^{(m)}(0) / (m-1)!` for `m >= 1`.
///
/// From the closed form, with `b_p = lambda_p * lambda_i / (lambda_i - lambda_p)`:
///
/// ```text
/// L_m = tau*[m=1] + lambda_i^m
///     + (-1)^m sum_{p != i} b_p^m (m eta_p^2 lambda_i/(lambda_i - lambda_p) + kappa_p)
/// ```
fn normalized_log_g(
    clusters: &[Cluster],
    i: usize,
    tau: f64,
    m: usize,
) -> Result<SignedLn, QuadFormError> {
    let li = clusters[i].lambda;
    let mf = m as f64;
    let mut acc = SignedLn::new(1, mf * li.ln());
    if m == 1 {
        acc = acc + SignedLn::from_f64(tau);
    }
    let parity: i8 = if m.is_multiple_of(2) { 1 } else { -1 };
    for (p, cp) in clusters.iter().enumerate() {
        if p == i {
            continue;
        }
        let gap = li - cp.lambda;
        if gap.abs() <= COLLISION_TOL * li {
            return Err(QuadFormError::ClusterCollision {
                i,
                p,
                ratio: cp.lambda / li,
            });
        }
        let b = cp.lambda * li / gap;
        let coeff = mf * cp.eta_sq * li / gap + cp.kappa as f64;
        let b_sign: i8 = if b >= 0.0 { 1 } else { -1 };
        let pow_sign = if m.is_multiple_of(2) { 1 } else { b_sign };
        let term = SignedLn::new(pow_sign, mf * b.abs().ln()) * SignedLn::from_f64(coeff);
        acc = acc + term * SignedLn::new(parity, 0.0);
    }
    Ok(acc)
}

/// `g_i(0)` in signed log form:
/// `-lambda_i * exp(sum_p eta_p^2 lambda_p/(lambda_i-lambda_p))
///  / prod_p (1 - lambda_p/lambda_i)^{kappa_p}`.
fn g_zero(clusters: &[Cluster], i: usize) -> Result<SignedLn, QuadFormError> {
    let li = clusters[i].lambda;
    let mut sign: i8 = -1;
    let mut ln = li.ln();
    for (p, cp) in clusters.iter().enumerate() {
        if p == i {
            continue;
        }
        let gap = li - cp.lambda;
        if gap.abs() <= COLLISION_TOL * li {
            return Err(QuadFormError::ClusterCollision {
                i,
                p,
                ratio: cp.lambda / li,
            });
        }
        ln += cp.eta_sq * cp.lambda / gap;
        let factor = 1.0 - cp.lambda / li;
        if factor < 0.0 && cp.kappa % 2 == 1 {
            sign = -sign;
        }
        ln -= cp.kappa as f64 * factor.abs().ln();
    }
    Ok(SignedLn::new(sign, ln))
}

/// Extends normalized Taylor coefficients `t_n = g_i^{(n)}(0)/n!` up to
/// `n_max` via `t_n = (1/n) sum_{l<n} t_l L_{n-l}`.
fn extend_taylor(
    t: &mut Vec<SignedLn>,
    l: &mut Vec<SignedLn>,
    clusters: &[Cluster],
    i: usize,
    tau: f64,
    n_max: usize,
) -> Result<(), QuadFormError> {
    while l.len() < n_max {
        let m = l.len() + 1;
        l.push(normalized_log_g(clusters, i, tau, m)?);
    }
    while t.len() <= n_max {
        let n = t.len();
        let mut acc = SignedLn::ZERO;
        for (li, tl) in t.iter().take(n).enumerate() {
            acc = acc + *tl * l[n - li - 1];
        }
        t.push(acc.scale_ln(-(n as f64).ln()));
    }
    Ok(())
}

/// The `n`-th derivatives of `log g_i` at `s = 0` for `n = 1..=n_max`.
pub fn log_g_derivatives(
    params: &QuadFormParams,
    cluster: usize,
    tau: f64,
    n_max: usize,
) -> Result<Vec<f64>, QuadFormError> {
    check_cluster_index(params, cluster)?;
    let clusters = clusters_of(params);
    let mut out = Vec::with_capacity(n_max);
    for m in 1..=n_max {
        let val = normalized_log_g(&clusters, cluster, tau, m)?
            .scale_ln(ln_factorial(m - 1))
            .to_f64();
        if !val.is_finite() {
            return Err(QuadFormError::Overflow { order: m });
        }
        out.push(val);
    }
    Ok(out)
}

/// The derivatives `g_i^{(0)}(0) ..= g_i^{(n_max)}(0)` computed by the
/// binomial recursion over the closed-form log-derivatives.
pub fn g_derivatives(
    params: &QuadFormParams,
    cluster: usize,
    tau: f64,
    n_max: usize,
) -> Result<Vec<f64>, QuadFormError> {
    check_cluster_index(params, cluster)?;
    let clusters = clusters_of(params);
    let mut t = vec![g_zero(&clusters, cluster)?];
    let mut l = Vec::new();
    extend_taylor(&mut t, &mut l, &clusters, cluster, tau, n_max)?;
    let mut out = Vec::with_capacity(n_max + 1);
    for (n, tn) in t.iter().enumerate() {
        let val = tn.scale_ln(ln_factorial(n)).to_f64();
        if !val.is_finite() {
            return Err(QuadFormError::Overflow { order: n });
        }
        out.push(val);
    }
    Ok(out)
}

/// Worst-case truncation bound for a single-cluster (identity-covariance
/// class) series truncated at index `n`:
/// `(eta^2)^{n-kappa+2} / (n-kappa+2)!`.
///
/// Exact-valid for one cluster; a heuristic indicator when several clusters
/// exist.
pub fn truncation_bound_identity(eta_sq: f64, kappa: usize, n: usize) -> f64 {
    assert!(
        n + 2 >= kappa,
        "truncation bound needs n >= kappa - 2 (n = {n}, kappa = {kappa})"
    );
    let m = n + 2 - kappa;
    if m == 0 {
        return 1.0;
    }
    if eta_sq == 0.0 {
        return 0.0;
    }
    (m as f64 * eta_sq.ln() - ln_factorial(m)).exp()
}

/// Signed contribution of one series index of one cluster to the upper
/// tail, for diagnostics dumps.
#[derive(Debug, Clone, Copy)]
pub struct SeriesTermTrace {
    pub cluster: usize,
    pub n: usize,
    pub term: f64,
}

#[derive(Default)]
struct Kahan {
    sum: f64,
    carry: f64,
}

impl Kahan {
    fn add(&mut self, x: f64) {
        let y = x - self.carry;
        let t = self.sum + y;
        self.carry = (t - self.sum) - y;
        self.sum = t;
    }
}

/// `Pr{X^H X >= tau}` for standardized parameters.
///
/// `tau <= 0` returns exactly 1 (the form is nonnegative). Results are
/// clamped to `[0, 1]` with the clipped magnitude reported.
pub fn upper_tail(params: &QuadFormParams, tau: f64, ctl: &SeriesControl) -> TailEstimate {
    upper_tail_impl(params, tau, ctl, None)
}

/// As [`upper_tail`], also recording every evaluated series term.
pub fn upper_tail_with_trace(
    params: &QuadFormParams,
    tau: f64,
    ctl: &SeriesControl,
) -> (TailEstimate, Vec<SeriesTermTrace>) {
    let mut trace = Vec::new();
    let est = upper_tail_impl(params, tau, ctl, Some(&mut trace));
    (est, trace)
}

/// `Pr{X^H X <= y}`: the complement of [`upper_tail`].
pub fn cdf(params: &QuadFormParams, y: f64, ctl: &SeriesControl) -> TailEstimate {
    let mut est = upper_tail(params, y, ctl);
    est.probability = 1.0 - est.probability;
    est
}

fn upper_tail_impl(
    params: &QuadFormParams,
    tau: f64,
    ctl: &SeriesControl,
    trace: Option<&mut Vec<SeriesTermTrace>>,
) -> TailEstimate {
    if tau <= 0.0 {
        return TailEstimate::exact(1.0);
    }
    if tau == f64::INFINITY {
        return TailEstimate::exact(0.0);
    }
    let clusters = clusters_of(params);
    if clusters.len() == 1 {
        single_cluster_tail(clusters[0], tau, ctl, trace)
    } else {
        multi_cluster_tail(&clusters, tau, ctl, trace)
    }
}

/// Factored single-cluster evaluation. The series term of index
/// `n = kappa - 1 + j` equals `Pois(j; eta^2) * GammaQ(kappa + j, tau/lambda)`,
/// so every term lies in `[0, 1]`, the partial sums are increasing, and the
/// Poisson mass not yet consumed bounds the truncation error exactly.
fn single_cluster_tail(
    cl: Cluster,
    tau: f64,
    ctl: &SeriesControl,
    mut trace: Option<&mut Vec<SeriesTermTrace>>,
) -> TailEstimate {
    let x = tau / cl.lambda;
    let ln_x = x.ln();

    // q = GammaQ(kappa, x) = e^{-x} sum_{l<kappa} x^l/l!
    let mut q = 0.0f64;
    let mut ln_pdf = -x; // ln of e^{-x} x^l / l! at l = 0
    for l in 0..cl.kappa {
        q += ln_pdf.exp();
        ln_pdf += ln_x - ((l + 1) as f64).ln();
    }
    // ln_pdf is now at l = kappa: the increment taking GammaQ(kappa+j) to
    // GammaQ(kappa+j+1) at j = 0.

    let ln_eta = if cl.eta_sq > 0.0 { cl.eta_sq.ln() } else { 0.0 };
    let mut ln_pois = -cl.eta_sq; // ln Pois(0; eta^2)
    let mut remaining = 1.0f64; // Poisson mass not yet consumed
    let mut sum = Kahan::default();
    let mut terms = 0usize;
    let mut budget_exhausted = false;

    let j_cap = if ctl.max_terms + 1 >= cl.kappa {
        ctl.max_terms + 1 - cl.kappa
    } else {
        // Truncation before the first series index: empty sum.
        return TailEstimate {
            probability: 0.0,
            error_estimate: 1.0,
            terms_used: 0,
            clamp_adjustment: 0.0,
            budget_exhausted: ctl.mode == SeriesMode::Adaptive,
        };
    };

    let mut j = 0usize;
    loop {
        let pois = ln_pois.exp();
        let term = pois * q;
        sum.add(term);
        remaining = (remaining - pois).max(0.0);
        if let Some(tr) = trace.as_deref_mut() {
            tr.push(SeriesTermTrace {
                cluster: 0,
                n: cl.kappa - 1 + j,
                term,
            });
        }
        terms += 1;

        if cl.eta_sq == 0.0 {
            // All higher terms carry a zero Poisson weight.
            remaining = 0.0;
            break;
        }
        match ctl.mode {
            SeriesMode::Adaptive => {
                if remaining <= ctl.target_abs_error {
                    break;
                }
                if j >= j_cap {
                    budget_exhausted = true;
                    break;
                }
            }
            SeriesMode::Fixed => {
                if j >= j_cap {
                    break;
                }
            }
        }

        q += ln_pdf.exp();
        ln_pdf += ln_x - ((cl.kappa + j + 1) as f64).ln();
        ln_pois += ln_eta - ((j + 1) as f64).ln();
        j += 1;
    }

    let raw = sum.sum;
    let clamped = raw.clamp(0.0, 1.0);
    TailEstimate {
        probability: clamped,
        error_estimate: remaining,
        terms_used: terms,
        clamp_adjustment: (raw - clamped).abs(),
        budget_exhausted,
    }
}

fn multi_cluster_tail(
    clusters: &[Cluster],
    tau: f64,
    ctl: &SeriesControl,
    trace: Option<&mut Vec<SeriesTermTrace>>,
) -> TailEstimate {
    let k = clusters.len();
    let mut taylor: Vec<Vec<SignedLn>> = Vec::with_capacity(k);
    let mut logd: Vec<Vec<SignedLn>> = vec![Vec::new(); k];
    let mut ln_pref = Vec::with_capacity(k);
    let mut ln_z = Vec::with_capacity(k);
    for (i, cl) in clusters.iter().enumerate() {
        match g_zero(clusters, i) {
            Ok(g0) => taylor.push(vec![g0]),
            Err(_) => {
                // Collided clusters mean the upstream clustering was bypassed;
                // surface an unusable (but honest) estimate.
                return TailEstimate {
                    probability: f64::NAN,
                    error_estimate: f64::INFINITY,
                    terms_used: 0,
                    clamp_adjustment: 0.0,
                    budget_exhausted: true,
                };
            }
        }
        ln_pref.push(-tau / cl.lambda - cl.eta_sq - cl.kappa as f64 * cl.lambda.ln());
        ln_z.push(if cl.eta_sq > 0.0 {
            (cl.eta_sq / cl.lambda).ln()
        } else {
            f64::NEG_INFINITY
        });
    }

    let n_start = clusters.iter().map(|c| c.kappa - 1).min().unwrap_or(0);
    let n_warmup = clusters.iter().map(|c| c.kappa + 1).max().unwrap_or(0);
    let ln_target = if ctl.target_abs_error > 0.0 {
        ctl.target_abs_error.ln()
    } else {
        f64::NEG_INFINITY
    };

    let mut recorded: Vec<(usize, usize, SignedLn)> = Vec::new();
    let mut streak = 0usize;
    let mut budget_exhausted = false;
    let mut n_last = n_start;

    'outer: for n in n_start..=ctl.max_terms {
        n_last = n;
        let mut row_max = f64::NEG_INFINITY;
        for (i, cl) in clusters.iter().enumerate() {
            if n + 1 < cl.kappa {
                continue;
            }
            let m = n + 1 - cl.kappa;
            if cl.eta_sq == 0.0 && m > 0 {
                continue;
            }
            if extend_taylor(&mut taylor[i], &mut logd[i], clusters, i, tau, n).is_err() {
                return TailEstimate {
                    probability: f64::NAN,
                    error_estimate: f64::INFINITY,
                    terms_used: 0,
                    clamp_adjustment: 0.0,
                    budget_exhausted: true,
                };
            }
            let scale = if m == 0 {
                ln_pref[i]
            } else {
                ln_pref[i] + m as f64 * ln_z[i] - ln_factorial(m)
            };
            // Contribution to the upper tail carries the leading minus sign.
            let contribution = -taylor[i][n].scale_ln(scale);
            if !contribution.is_zero() {
                row_max = row_max.max(contribution.ln_abs());
            }
            recorded.push((i, n, contribution));
        }

        if ctl.mode == SeriesMode::Adaptive && n >= n_warmup {
            if row_max < ln_target {
                streak += 1;
                if streak >= ADAPTIVE_STREAK {
                    break 'outer;
                }
            } else {
                streak = 0;
            }
        }
        if n == ctl.max_terms && ctl.mode == SeriesMode::Adaptive && streak < ADAPTIVE_STREAK {
            budget_exhausted = true;
        }
    }

    // Accumulate in plain f64 when safe, in log space otherwise.
    let max_ln = recorded
        .iter()
        .map(|(_, _, t)| t.ln_abs())
        .fold(f64::NEG_INFINITY, f64::max);
    let raw = if max_ln < F64_SAFE_LN {
        let mut acc = Kahan::default();
        for &(_, _, t) in &recorded {
            acc.add(t.to_f64());
        }
        acc.sum
    } else {
        let mut acc = SignedLn::ZERO;
        for &(_, _, t) in &recorded {
            acc = acc + t;
        }
        acc.to_f64()
    };

    // Opposite-sign residues of nearly equal eigenvalues cancel; whatever
    // magnitude was summed and lost again bounds the rounding noise left in
    // the result. This floor keeps the reported error honest when the
    // spectrum is ill-conditioned for the residue method.
    let cancellation_floor = if max_ln.is_finite() {
        (max_ln + f64::EPSILON.ln()).exp()
    } else {
        0.0
    };

    if let Some(tr) = trace {
        for &(i, n, t) in &recorded {
            tr.push(SeriesTermTrace {
                cluster: i,
                n,
                term: t.to_f64(),
            });
        }
    }

    let mut error_estimate = cancellation_floor;
    for cl in clusters {
        if n_last + 2 >= cl.kappa {
            error_estimate += truncation_bound_identity(cl.eta_sq, cl.kappa, n_last);
        } else {
            error_estimate += 1.0;
        }
    }
    let clamped = raw.clamp(0.0, 1.0);
    TailEstimate {
        probability: clamped,
        error_estimate: error_estimate.min(1.0),
        terms_used: n_last + 1 - n_start,
        clamp_adjustment: if raw.is_finite() {
            (raw - clamped).abs()
        } else {
            f64::INFINITY
        },
        budget_exhausted,
    }
}
