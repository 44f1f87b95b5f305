//! Laguerre series-fitting baseline for the quadratic-form CDF.
//!
//! The classical approach: convert the form to a weighted sum of
//! independent noncentral chi-squares, take its known MGF, and fit the
//! coefficients of a Laguerre-basis density expansion so the transform of
//! the series matches the MGF. It converges from the lower tail first —
//! the opposite regime of the residue series — which is exactly why it is
//! kept here as an accuracy baseline only.

use super::{QuadFormError, QuadFormParams};

/// Control parameters for the Laguerre basis.
#[derive(Debug, Clone, Copy)]
pub struct LaguerreParams {
    /// Positive scale parameter of the basis; convergence speed depends on
    /// it strongly and no principled choice is known.
    pub beta: f64,
    /// Number of basis functions fitted.
    pub basis_degree_limit: usize,
}

impl LaguerreParams {
    pub fn new(beta: f64, basis_degree_limit: usize) -> Self {
        assert!(beta > 0.0, "beta must be positive");
        LaguerreParams {
            beta,
            basis_degree_limit,
        }
    }
}

/// Per-dimension view of the form: each cluster of multiplicity `kappa`
/// contributes `kappa` chi-square components of weight `lambda/2` (so the
/// component MGF uses `1 - lambda s`) and noncentrality `2|chi^(j)|^2`.
struct Component {
    /// `u = 1 - lambda/(2 beta)`: the transformed-variable pole location.
    u: f64,
    /// Noncentrality of the (2-degree-of-freedom) chi-square component.
    noncentrality: f64,
}

fn components(params: &QuadFormParams, beta: f64) -> Vec<Component> {
    let mut out = Vec::with_capacity(params.dim());
    for (cl, chi) in params.spectrum.clusters().iter().zip(&params.chi) {
        for j in 0..cl.multiplicity {
            out.push(Component {
                u: 1.0 - cl.value / (2.0 * beta),
                noncentrality: 2.0 * chi[j].norm_sqr(),
            });
        }
    }
    out
}

/// Series-fitting estimate of `Pr{X^H X <= y}`.
///
/// The fitted coefficients are the Taylor coefficients of the transformed
/// MGF; they are obtained by exponentiating the power series of its log.
/// Reports `NumericalBreakdown` when the coefficient recursion degenerates
/// (non-finite or runaway coefficients, e.g. a divergent basis scale).
pub fn laguerre_cdf(
    params: &QuadFormParams,
    y: f64,
    lag: &LaguerreParams,
) -> Result<f64, QuadFormError> {
    assert!(lag.beta > 0.0, "beta must be positive");
    if y <= 0.0 {
        return Ok(0.0);
    }
    let comps = components(params, lag.beta);
    let q = comps.len(); // complex dimension = half the real degrees of freedom
    let n_terms = lag.basis_degree_limit;

    // Power series of log T(w) where T(w) = sum_k c_k w^k:
    //   d_j = sum_e [ u_e^j / j + (mu_e^2/2) u_e^{j-1} (u_e - 1) ],  j >= 1.
    let mut d = vec![0.0f64; n_terms + 1];
    for comp in &comps {
        let mut u_pow = 1.0; // u^{j-1}
        for (j, dj) in d.iter_mut().enumerate().skip(1) {
            let u_j = u_pow * comp.u;
            *dj += u_j / j as f64 + 0.5 * comp.noncentrality * u_pow * (comp.u - 1.0);
            u_pow = u_j;
        }
    }

    // c_0 = 1; c_k = (1/k) sum_{j=1..k} j d_j c_{k-j}.
    let mut c = vec![0.0f64; n_terms + 1];
    c[0] = 1.0;
    for k in 1..=n_terms {
        let mut acc = 0.0;
        for j in 1..=k {
            acc += j as f64 * d[j] * c[k - j];
        }
        let ck = acc / k as f64;
        if !ck.is_finite() || ck.abs() > 1e120 {
            return Err(QuadFormError::NumericalBreakdown { term: k });
        }
        c[k] = ck;
    }

    // Integrated basis functions:
    //   H_0(y) = P(q, X)                       (regularized lower gamma)
    //   H_k(y) = k!/(Gamma(q+k) k) e^{-X} X^q L_{k-1}^{(q)}(X),  k >= 1,
    // with X = y / (2 beta).
    let x = y / (2.0 * lag.beta);
    let mut value = c[0] * regularized_lower_gamma_int(q, x);
    let envelope = (-x + q as f64 * x.ln()).exp();
    let mut lk_prev = 0.0f64; // L_{k-2}^{(q)}
    let mut lk = 1.0f64; // L_{k-1}^{(q)} starting at k = 1
    for (k, &ck) in c.iter().enumerate().skip(1) {
        let weight = (libm::lgamma(k as f64 + 1.0) - libm::lgamma((q + k) as f64)).exp()
            / k as f64;
        let hk = weight * envelope * lk;
        if !hk.is_finite() {
            return Err(QuadFormError::NumericalBreakdown { term: k });
        }
        value += ck * hk;
        // Advance L_{k-1} -> L_k with the alpha = q three-term recurrence.
        let kf = k as f64;
        let next = ((2.0 * kf - 1.0 + q as f64 - x) * lk - (kf - 1.0 + q as f64) * lk_prev) / kf;
        lk_prev = lk;
        lk = next;
    }
    Ok(value)
}

/// Regularized lower incomplete gamma `P(a, x)` for integer `a`.
fn regularized_lower_gamma_int(a: usize, x: f64) -> f64 {
    // P(a, x) = 1 - e^{-x} sum_{l<a} x^l/l!
    let mut upper = 0.0;
    let mut ln_term = -x;
    for l in 0..a {
        upper += ln_term.exp();
        ln_term += x.ln() - (l as f64 + 1.0).ln();
    }
    (1.0 - upper).clamp(0.0, 1.0)
}
