//! Luxemburg (Orlicz) norm estimation and the Ψ_q MGF envelopes.
//!
//! Throughout, `Ψ_q(t) = exp(t^q) - 1` for `q ≥ 1`; `q = 1` is the
//! sub-exponential class and `q = 2` the sub-Gaussian class. The Luxemburg
//! norm is `‖X‖_Ψ = inf{c > 0 : E[Ψ(|X|/c)] ≤ 1}`, estimated here by plugging
//! in the empirical mean and bisecting in `c` (the criterion is strictly
//! decreasing in `c`).

use serde::Serialize;
use statrs::function::gamma::ln_gamma;

use crate::error::{Error, Result};
use crate::xi::{TailReport, XiFunction};

/// Ψ_q(t) = exp(t^q) − 1.
pub fn psi_q(t: f64, q: f64) -> f64 {
    (t.powf(q)).exp() - 1.0
}

/// Ψ_q⁻¹(v) = (log(1 + v))^{1/q}.
pub fn psi_q_inv(v: f64, q: f64) -> f64 {
    (v.ln_1p()).powf(1.0 / q)
}

/// An empirical Luxemburg norm.
#[derive(Debug, Clone, Serialize)]
pub struct OrliczEstimate {
    pub q: f64,
    pub norm: f64,
    pub sample_count: usize,
    /// Relative bisection tolerance on the norm.
    pub bisection_tol: f64,
    /// Empirical criterion mean Ψ_q(|x_i|/norm) at the returned norm
    /// (1 unless the norm is 0).
    pub criterion: f64,
}

const BISECTION_TOL: f64 = 1e-10;
const BISECTION_CAP: usize = 200;

/// Empirical Luxemburg norm `inf{c > 0 : (1/N) Σ Ψ_q(|x_i|/c) ≤ 1}`.
pub fn luxemburg_norm(samples: &[f64], q: f64) -> Result<OrliczEstimate> {
    let weights = vec![1.0 / samples.len().max(1) as f64; samples.len()];
    luxemburg_norm_weighted(samples, &weights, q)
}

/// Luxemburg norm of a finitely supported distribution: `inf{c > 0 :
/// Σ w_i Ψ_q(|x_i|/c) ≤ 1}` with positive weights summing to 1. With uniform
/// weights this is the empirical (plug-in) norm.
pub fn luxemburg_norm_weighted(values: &[f64], weights: &[f64], q: f64) -> Result<OrliczEstimate> {
    if values.is_empty() {
        return Err(Error::EmptyInput("luxemburg_norm"));
    }
    if !(q >= 1.0) {
        return Err(Error::invalid("q", format!("must be >= 1, got {q}")));
    }
    if values.len() != weights.len() {
        return Err(Error::invalid("weights", "length mismatch with values"));
    }
    let max_abs = values.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    if max_abs == 0.0 {
        return Ok(OrliczEstimate {
            q,
            norm: 0.0,
            sample_count: values.len(),
            bisection_tol: BISECTION_TOL,
            criterion: 0.0,
        });
    }
    let w_at_max = values
        .iter()
        .zip(weights)
        .filter(|(v, _)| v.abs() == max_abs)
        .map(|(_, w)| *w)
        .sum::<f64>()
        .max(f64::MIN_POSITIVE);
    let criterion = |c: f64| -> f64 {
        values
            .iter()
            .zip(weights)
            .map(|(v, w)| w * psi_q(v.abs() / c, q))
            .sum()
    };
    // Brackets: at c_lo the max sample alone pushes the criterion to >= 1;
    // at c_hi every term is at most w_i, so the criterion is <= 1.
    let mut lo = max_abs / psi_q_inv(1.0 / w_at_max, q);
    let mut hi = max_abs / psi_q_inv(1.0, q);
    debug_assert!(criterion(lo) >= 1.0 - 1e-12, "lower bracket invalid");
    debug_assert!(criterion(hi) <= 1.0 + 1e-12, "upper bracket invalid");
    for _ in 0..BISECTION_CAP {
        if (hi - lo) <= BISECTION_TOL * hi {
            break;
        }
        let mid = 0.5 * (lo + hi);
        if criterion(mid) > 1.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(OrliczEstimate {
        q,
        norm: hi,
        sample_count: values.len(),
        bisection_tol: BISECTION_TOL,
        criterion: criterion(hi),
    })
}

/// Series value of the Ψ_q centered-MGF exponent,
/// `ξ(λ) = log(1 + 2 Σ_{k≥1} u^{2k} Γ(2k/q+1)/(2k)!)` with `u = norm·λ`.
///
/// For `q = 1` the series sums in closed form to `log(1 + 2u²/(1-u²))` on
/// `u < 1`. For `q > 1` the terms decay factorially; the series is truncated
/// when the next term drops below 1e-15 of the partial sum, with a geometric
/// remainder bound folded in. Evaluation is carried out in log space so large
/// `u` cannot overflow.
pub(crate) fn psi_series_xi_value(norm: f64, q: f64, lambda: f64) -> f64 {
    let u = norm * lambda;
    if u == 0.0 {
        return 0.0;
    }
    if q == 1.0 {
        let s = u * u;
        if s >= 1.0 {
            return f64::INFINITY;
        }
        return (2.0 * s / (1.0 - s)).ln_1p();
    }
    // log Σ exp(lt_k), streaming log-sum-exp.
    let ln_u2 = 2.0 * u.ln();
    let ln_term = |k: f64| k * ln_u2 + ln_gamma(2.0 * k / q + 1.0) - ln_gamma(2.0 * k + 1.0);
    let mut log_sum = f64::NEG_INFINITY;
    let mut k = 1.0f64;
    let mut lt = ln_term(k);
    loop {
        log_sum = logsumexp2(log_sum, lt);
        let lt_next = ln_term(k + 1.0);
        let ratio = (lt_next - lt).exp();
        if lt_next < log_sum + (1e-15f64).ln() && ratio < 0.9 {
            // Geometric remainder: Σ_{j>k} t_j <= t_{k+1} / (1 - ratio).
            log_sum = logsumexp2(log_sum, lt_next - (1.0 - ratio).ln());
            break;
        }
        k += 1.0;
        lt = lt_next;
        if k > 100_000.0 {
            break;
        }
    }
    // ξ = log(1 + 2 e^{log_sum})
    if log_sum > 700.0 {
        std::f64::consts::LN_2 + log_sum + (0.5 * (-log_sum).exp()).ln_1p()
    } else {
        (2.0 * log_sum.exp()).ln_1p()
    }
}

fn logsumexp2(a: f64, b: f64) -> f64 {
    if a == f64::NEG_INFINITY {
        return b;
    }
    let (hi, lo) = if a >= b { (a, b) } else { (b, a) };
    hi + (lo - hi).exp().ln_1p()
}

/// The ξ function generated by a Ψ_q Orlicz norm bound:
/// `E[cosh(λX)] ≤ exp(ξ(λ))` whenever `‖X‖_{Ψ_q} ≤ norm`.
///
/// The domain is `[0, 1/norm)` for `q = 1` (the series has radius of
/// convergence `1/norm`) and `[0, ∞)` for `q > 1` (ratio-test convergence
/// everywhere).
pub fn xi_psi_q(norm: f64, q: f64) -> Result<XiFunction> {
    if !(norm >= 0.0 && norm.is_finite()) {
        return Err(Error::invalid("norm", format!("must be finite and >= 0, got {norm}")));
    }
    if !(q >= 1.0) {
        return Err(Error::invalid("q", format!("must be >= 1, got {q}")));
    }
    let domain = if q == 1.0 && norm > 0.0 {
        1.0 / norm
    } else {
        f64::INFINITY
    };
    Ok(XiFunction::psi_series(norm, q, domain))
}

fn norms_tail(norms: &[f64], t: f64, exponent: f64, lambda_star: f64) -> Result<TailReport> {
    if norms.is_empty() {
        return Err(Error::EmptyInput("tail bound norms"));
    }
    if norms.iter().any(|n| !(n.is_finite() && *n >= 0.0)) {
        return Err(Error::invalid("norms", "must be finite and >= 0"));
    }
    if !(t >= 0.0) {
        return Err(Error::invalid("t", "must be >= 0"));
    }
    let degenerate = norms.iter().all(|n| *n == 0.0);
    if degenerate {
        // Zero norms mean the h_i vanish a.s.: any positive deviation has
        // probability 0 by convention.
        return Ok(TailReport {
            threshold: t,
            bound: if t > 0.0 { 0.0 } else { 1.0 },
            lambda_star: 0.0,
            exponent_value: if t > 0.0 { f64::INFINITY } else { 0.0 },
            degenerate: true,
        });
    }
    Ok(TailReport::from_exponent(t, exponent, lambda_star))
}

/// Sub-Gaussian tail bound `exp(-t² / (4 Σ norm_i²))` from Ψ₂ norms of the
/// one-component mean-difference envelopes.
pub fn subgauss_tail(norms: &[f64], t: f64) -> Result<TailReport> {
    let s: f64 = norms.iter().map(|n| n * n).sum();
    let (exponent, lambda) = if s > 0.0 {
        (t * t / (4.0 * s), t / (2.0 * s))
    } else {
        (0.0, 0.0)
    };
    norms_tail(norms, t, exponent, lambda)
}

/// Sub-exponential (Bernstein-type) tail bound
/// `exp(-t² / (8 Σ norm_i² + 2 t max_i norm_i))` from Ψ₁ norms.
pub fn subexp_tail(norms: &[f64], t: f64) -> Result<TailReport> {
    let s: f64 = norms.iter().map(|n| n * n).sum();
    let m = norms.iter().fold(0.0f64, |a, b| a.max(*b));
    let (exponent, lambda) = if s > 0.0 {
        (t * t / (8.0 * s + 2.0 * t * m), t / (4.0 * s + t * m))
    } else {
        (0.0, 0.0)
    };
    norms_tail(norms, t, exponent, lambda)
}

/// Result of checking the Orlicz concentration envelope
/// `P(|X| > s) ≤ min(1, 1/Ψ_q(s/‖X‖))` against the empirical exceedance rate.
#[derive(Debug, Clone, Serialize)]
pub struct OrliczTailCheck {
    pub q: f64,
    pub s: f64,
    pub norm: f64,
    pub envelope: f64,
    pub empirical_fraction: f64,
    pub sample_count: usize,
}

pub fn orlicz_tail_check(samples: &[f64], q: f64, s: f64) -> Result<OrliczTailCheck> {
    if !(s > 0.0) {
        return Err(Error::invalid("s", "must be > 0"));
    }
    let est = luxemburg_norm(samples, q)?;
    let envelope = if est.norm == 0.0 {
        0.0
    } else {
        (1.0 / psi_q(s / est.norm, q)).min(1.0)
    };
    let exceed = samples.iter().filter(|x| x.abs() > s).count();
    Ok(OrliczTailCheck {
        q,
        s,
        norm: est.norm,
        envelope,
        empirical_fraction: exceed as f64 / samples.len() as f64,
        sample_count: samples.len(),
    })
}
