//! ξ functions and the tail bounds they induce.
//!
//! A ξ function is a centered-MGF exponent bound: a nonnegative, nondecreasing
//! map on `[0, K)` with `E[cosh(λ h)] ≤ e^{ξ(λ)}` for the random quantity `h`
//! it describes. Tail bounds are Chernoff-style:
//!
//! ```text
//! P(±(φ - E[φ]) ≥ t) ≤ exp(-sup_{λ ∈ [0,K)} {λ t - Σ_i ξ_i(λ)})
//! ```
//!
//! The supremum is a Legendre-type transform, computed here by golden-section
//! search (the objective is concave for every built-in ξ kind).

use std::sync::Arc;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::numeric;
use crate::orlicz;

/// Absolute tolerance on λ for the Legendre search.
const LAMBDA_TOL: f64 = 1e-12;

#[derive(Clone)]
enum Repr {
    /// ξ(λ) = a λ²
    Quadratic { a: f64 },
    /// ξ(λ) = 2 u² λ² / (1 - u² λ²) on [0, 1/u)
    Bernstein { u: f64 },
    /// ξ(λ) = log(1 + 2 Σ_{k≥1} (norm λ)^{2k} Γ(2k/q+1)/(2k)!)
    PsiSeries { norm: f64, q: f64 },
    /// λ ↦ factor · inner(λ / factor), the sample-reuse transform
    Scaled { factor: f64, inner: Box<XiFunction> },
    /// Pointwise sum
    Sum { parts: Vec<XiFunction> },
    Custom {
        f: Arc<dyn Fn(f64) -> f64 + Send + Sync>,
    },
}

/// A centered-MGF exponent bound ξ: [0, K) → [0, ∞).
#[derive(Clone)]
pub struct XiFunction {
    domain_limit: f64,
    repr: Repr,
}

impl std::fmt::Debug for XiFunction {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "XiFunction(kind={}, K={})", self.kind(), self.domain_limit)
    }
}

impl XiFunction {
    /// ξ(λ) = a λ² with domain [0, ∞).
    pub fn quadratic(a: f64) -> Result<Self> {
        if !(a.is_finite() && a >= 0.0) {
            return Err(Error::invalid("a", format!("must be finite and >= 0, got {a}")));
        }
        Ok(XiFunction {
            domain_limit: f64::INFINITY,
            repr: Repr::Quadratic { a },
        })
    }

    /// ξ(λ) = 2 u² λ² / (1 - u² λ²) with domain [0, 1/u); the sub-exponential
    /// (Bernstein-type) envelope with scale `u`.
    pub fn bernstein(u: f64) -> Result<Self> {
        if !(u.is_finite() && u >= 0.0) {
            return Err(Error::invalid("u", format!("must be finite and >= 0, got {u}")));
        }
        Ok(XiFunction {
            domain_limit: if u > 0.0 { 1.0 / u } else { f64::INFINITY },
            repr: Repr::Bernstein { u },
        })
    }

    /// An arbitrary user-supplied ξ on [0, K). The evaluator must be finite and
    /// nonnegative on the interior of its domain; ξ(0) > 0 is tolerated (the
    /// resulting tail bounds are clamped to 1).
    pub fn custom(domain_limit: f64, f: impl Fn(f64) -> f64 + Send + Sync + 'static) -> Result<Self> {
        if !(domain_limit > 0.0) {
            return Err(Error::invalid("domain_limit", "must be > 0"));
        }
        Ok(XiFunction {
            domain_limit,
            repr: Repr::Custom { f: Arc::new(f) },
        })
    }

    pub(crate) fn psi_series(norm: f64, q: f64, domain_limit: f64) -> Self {
        XiFunction {
            domain_limit,
            repr: Repr::PsiSeries { norm, q },
        }
    }

    /// Restricts the domain to `[0, k)` with `k ≤ K`; the restriction of a
    /// valid ξ is itself valid (used e.g. to pick `K_X = m·K_Y`).
    pub fn with_domain_limit(&self, k: f64) -> Result<XiFunction> {
        if !(k > 0.0 && k <= self.domain_limit) {
            return Err(Error::Domain(format!(
                "restricted limit {k} outside (0, {}]",
                self.domain_limit
            )));
        }
        let mut out = self.clone();
        out.domain_limit = k;
        Ok(out)
    }

    /// The sample-reuse transform λ ↦ m ξ(λ/m) with domain m·K.
    pub fn reuse_scaled(&self, m: u32) -> XiFunction {
        let factor = f64::from(m.max(1));
        XiFunction {
            domain_limit: self.domain_limit * factor,
            repr: Repr::Scaled {
                factor,
                inner: Box::new(self.clone()),
            },
        }
    }

    /// Pointwise sum; the domain is the intersection of the summands' domains.
    pub fn sum(parts: Vec<XiFunction>) -> Result<XiFunction> {
        if parts.is_empty() {
            return Err(Error::EmptyInput("XiFunction::sum"));
        }
        let k = parts.iter().map(|p| p.domain_limit).fold(f64::INFINITY, f64::min);
        if !(k > 0.0) {
            return Err(Error::Domain(format!("summed domain limit {k} is not positive")));
        }
        Ok(XiFunction {
            domain_limit: k,
            repr: Repr::Sum { parts },
        })
    }

    /// Domain limit K (may be +∞).
    pub fn domain_limit(&self) -> f64 {
        self.domain_limit
    }

    pub fn kind(&self) -> &'static str {
        match &self.repr {
            Repr::Quadratic { .. } => "quadratic",
            Repr::Bernstein { .. } => "bernstein",
            Repr::PsiSeries { .. } => "series",
            Repr::Scaled { .. } => "scaled",
            Repr::Sum { .. } => "sum",
            Repr::Custom { .. } => "custom",
        }
    }

    /// Evaluates ξ(λ) for λ ≥ 0. Returns +∞ for λ ≥ K; non-finite values from
    /// the evaluator near a finite K are interpreted as +∞ by consumers.
    pub fn eval(&self, lambda: f64) -> f64 {
        debug_assert!(lambda >= 0.0, "xi functions are defined on [0, K)");
        if lambda >= self.domain_limit {
            return f64::INFINITY;
        }
        match &self.repr {
            Repr::Quadratic { a } => a * lambda * lambda,
            Repr::Bernstein { u } => {
                let s = (u * lambda) * (u * lambda);
                if s >= 1.0 {
                    f64::INFINITY
                } else {
                    2.0 * s / (1.0 - s)
                }
            }
            Repr::PsiSeries { norm, q } => orlicz::psi_series_xi_value(*norm, *q, lambda),
            Repr::Scaled { factor, inner } => factor * inner.eval(lambda / factor),
            Repr::Sum { parts } => parts.iter().map(|p| p.eval(lambda)).sum(),
            Repr::Custom { f } => f(lambda),
        }
    }
}

/// Outcome of a tail-bound computation: `P(deviation ≥ threshold) ≤ bound`,
/// with the optimizing λ and the achieved exponent recorded.
#[derive(Debug, Clone, Serialize)]
pub struct TailReport {
    /// The deviation threshold the bound applies to.
    pub threshold: f64,
    /// Probability bound in [0, 1].
    pub bound: f64,
    /// The λ attaining (or approaching) the supremum.
    pub lambda_star: f64,
    /// Value of `sup_λ {λt - Σ ξ_i(λ)}`, clamped at 0.
    pub exponent_value: f64,
    /// Set when the inputs were degenerate (e.g. all Orlicz norms zero).
    #[serde(skip_serializing_if = "std::ops::Not::not")]
    #[serde(default)]
    pub degenerate: bool,
}

impl TailReport {
    /// Builds a report from a raw supremum value; negative suprema (possible
    /// only for custom ξ with ξ(0) > 0) clamp the bound to 1.
    pub fn from_exponent(threshold: f64, sup: f64, lambda_star: f64) -> TailReport {
        let exponent_value = sup.max(0.0);
        TailReport {
            threshold,
            bound: (-exponent_value).exp().min(1.0),
            lambda_star,
            exponent_value,
            degenerate: false,
        }
    }
}

fn validate_xi(xi: &XiFunction) -> Result<()> {
    let k = xi.domain_limit();
    let probe_hi = if k.is_finite() { k * (1.0 - 1e-9) } else { 8.0 };
    for i in 0..=64 {
        let lambda = probe_hi * f64::from(i) / 64.0;
        let v = xi.eval(lambda);
        if v.is_finite() && v < 0.0 {
            return Err(Error::InvalidXi(format!("xi({lambda}) = {v} < 0")));
        }
        if lambda == 0.0 && v.is_nan() {
            return Err(Error::InvalidXi("xi(0) is NaN".into()));
        }
    }
    Ok(())
}

/// Computes `sup_{λ ∈ [0,K)} {λ t - ξ(λ)}` and its maximizer.
///
/// Golden-section search on λ; for K = ∞ the bracket is grown by doubling
/// until the (concave) objective turns over, and for finite K the supremum is
/// additionally refined against the endpoint. In debug builds the result is
/// verified against a 10⁴-point grid.
pub fn legendre_sup(xi: &XiFunction, t: f64) -> Result<(f64, f64)> {
    if !(t.is_finite() && t >= 0.0) {
        return Err(Error::invalid("t", format!("slope must be finite and >= 0, got {t}")));
    }
    validate_xi(xi)?;
    let objective = |lambda: f64| {
        let v = xi.eval(lambda);
        if v.is_finite() {
            lambda * t - v
        } else {
            f64::NEG_INFINITY
        }
    };
    let k = xi.domain_limit();
    let (mut lambda_star, mut value) = if k.is_finite() {
        let hi = k * (1.0 - 1e-13);
        let best = numeric::golden_max(objective, 0.0, hi, LAMBDA_TOL.max(k * 1e-15));
        // The supremum may sit against the open endpoint (ξ finite up to K);
        // probe a geometric sequence approaching K.
        let mut best = best;
        for j in 6..=15 {
            let lambda = k * (1.0 - 10f64.powi(-j));
            let v = objective(lambda);
            if v > best.1 {
                best = (lambda, v);
            }
        }
        best
    } else {
        numeric::golden_max_unbounded(objective, LAMBDA_TOL)
    };
    let at_zero = objective(0.0);
    if at_zero > value {
        lambda_star = 0.0;
        value = at_zero;
    }
    if value.is_nan() || value == f64::NEG_INFINITY {
        return Err(Error::InvalidXi(
            "objective is -inf on the whole domain; xi is infinite everywhere".into(),
        ));
    }
    #[cfg(debug_assertions)]
    {
        let hi = if k.is_finite() {
            k * (1.0 - 1e-13)
        } else {
            (lambda_star.max(1.0)) * 4.0
        };
        let mut grid_max = f64::NEG_INFINITY;
        for i in 0..=10_000u32 {
            let lambda = hi * f64::from(i) / 10_000.0;
            grid_max = grid_max.max(objective(lambda));
        }
        debug_assert!(
            grid_max <= value + 1e-7 * (1.0 + value.abs()),
            "grid sup {grid_max} exceeds golden-section result {value}"
        );
    }
    Ok((value, lambda_star))
}

/// Tail bound of the generalized bounded-mean-difference inequality:
/// `P(±(φ - E[φ]) ≥ t) ≤ min(1, exp(-sup_λ {λt - Σ_i ξ_i(λ)}))`.
pub fn mcdiarmid_tail(xis: &[XiFunction], t: f64) -> Result<TailReport> {
    if xis.is_empty() {
        return Err(Error::EmptyInput("mcdiarmid_tail"));
    }
    let combined = XiFunction::sum(xis.to_vec())?;
    let (sup, lambda_star) = legendre_sup(&combined, t)?;
    Ok(TailReport::from_exponent(t, sup, lambda_star))
}

/// Per-λ verdict of an empirical MGF-envelope check.
#[derive(Debug, Clone, Serialize)]
pub struct EnvelopePoint {
    pub lambda: f64,
    /// Sample mean of cosh(λ h).
    pub mean: f64,
    /// Standard error of that mean.
    pub std_err: f64,
    /// e^{ξ(λ)}.
    pub envelope: f64,
    /// `mean ≤ envelope + 3·std_err`.
    pub pass: bool,
}

/// Empirically validates `E[cosh(λ h)] ≤ e^{ξ(λ)}` on a λ grid from samples of
/// `h`. A point passes when the sample mean does not exceed the envelope by
/// more than three standard errors.
pub fn mgf_envelope_check(
    h_samples: &[f64],
    xi: &XiFunction,
    lambda_grid: &[f64],
) -> Result<Vec<EnvelopePoint>> {
    if h_samples.len() < 1000 {
        return Err(Error::invalid(
            "h_samples",
            format!("need at least 1000 samples, got {}", h_samples.len()),
        ));
    }
    let n = h_samples.len() as f64;
    let mut out = Vec::with_capacity(lambda_grid.len());
    for &lambda in lambda_grid {
        if !(lambda >= 0.0 && lambda < xi.domain_limit()) {
            return Err(Error::Domain(format!(
                "lambda {lambda} outside [0, {})",
                xi.domain_limit()
            )));
        }
        let mut mean = 0.0;
        for &h in h_samples {
            mean += (lambda * h).cosh();
        }
        mean /= n;
        let mut var = 0.0;
        for &h in h_samples {
            let d = (lambda * h).cosh() - mean;
            var += d * d;
        }
        let std_err = (var / (n * (n - 1.0))).sqrt();
        let envelope = xi.eval(lambda).exp();
        let pass = if envelope.is_infinite() {
            true
        } else {
            mean <= envelope + 3.0 * std_err
        };
        out.push(EnvelopePoint {
            lambda,
            mean,
            std_err,
            envelope,
            pass,
        });
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn quadratic_legendre_matches_closed_form() {
        for &a in &[0.1, 1.0, 10.0] {
            for &t in &[0.01, 1.0, 100.0] {
                let xi = XiFunction::quadratic(a).unwrap();
                let (value, lambda) = legendre_sup(&xi, t).unwrap();
                let exact = t * t / (4.0 * a);
                assert!(
                    (value - exact).abs() <= 1e-9 * exact,
                    "a={a} t={t}: {value} vs {exact}"
                );
                assert!((lambda - t / (2.0 * a)).abs() <= 1e-6 * (1.0 + t / (2.0 * a)));
            }
        }
    }

    #[test]
    fn quadratic_on_restricted_domain_matches_simplified_form() {
        // ξ(λ) = A λ² on [0, mK_Y): for ε ≤ 4 m K_Y A the supremum of
        // λ·(ε/2) - A λ² equals ε²/(16 A).
        let a = 0.7;
        let m_ky = 2.5;
        let eps = 0.9 * 4.0 * m_ky * a;
        let xi = XiFunction {
            domain_limit: m_ky,
            repr: Repr::Quadratic { a },
        };
        let (value, _) = legendre_sup(&xi, eps / 2.0).unwrap();
        let exact = eps * eps / (16.0 * a);
        assert!((value - exact).abs() < 1e-9 * exact);
    }

    #[test]
    fn bernstein_legendre_matches_dense_grid_oracle() {
        let xi = XiFunction::bernstein(1.0).unwrap();
        let (value, _) = legendre_sup(&xi, 1.0).unwrap();
        // Independent dense-grid oracle over [0, 1).
        let mut oracle = f64::NEG_INFINITY;
        let n = 1_000_000;
        for i in 0..n {
            let lambda = (i as f64) / (n as f64);
            let s = lambda * lambda;
            let v = lambda - 2.0 * s / (1.0 - s);
            oracle = oracle.max(v);
        }
        assert!((value - oracle).abs() < 1e-8, "{value} vs {oracle}");
        // Lower bound from the closed-form sub-exponential relaxation.
        assert!(value >= 1.0 / (8.0 + 2.0), "{value}");
    }

    #[test]
    fn mcdiarmid_tail_constant_difference() {
        // One constant difference c = 1 via cosh(λ) ≤ e^{λ²/2}.
        let xi = XiFunction::quadratic(0.5).unwrap();
        let report = mcdiarmid_tail(&[xi], 1.0).unwrap();
        assert!((report.bound - (-0.5f64).exp()).abs() < 1e-9);
    }

    #[test]
    fn mcdiarmid_tail_at_zero_threshold_is_one() {
        let xi = XiFunction::quadratic(2.0).unwrap();
        let report = mcdiarmid_tail(&[xi], 0.0).unwrap();
        assert_eq!(report.bound, 1.0);
        assert_eq!(report.exponent_value, 0.0);
    }

    #[test]
    fn mcdiarmid_exponent_is_quarter_of_classical() {
        // n identical quadratic ξ_i = λ² c_i² / 2 give exponent t²/(2 Σ c_i²),
        // exactly 4 times smaller than the classical 2t²/Σ c_i².
        let cs = [0.5, 1.0, 0.25, 2.0];
        let t = 0.8;
        let xis: Vec<_> = cs
            .iter()
            .map(|c| XiFunction::quadratic(c * c / 2.0).unwrap())
            .collect();
        let report = mcdiarmid_tail(&xis, t).unwrap();
        let sum_sq: f64 = cs.iter().map(|c| c * c).sum();
        let classical = 2.0 * t * t / sum_sq;
        let ratio = classical / report.exponent_value;
        assert!((ratio - 4.0).abs() < 1e-12 * 4.0, "ratio {ratio}");
    }

    #[test]
    fn tail_bound_nonincreasing_in_t() {
        let xis = vec![
            XiFunction::quadratic(0.3).unwrap(),
            XiFunction::bernstein(0.7).unwrap(),
        ];
        let mut prev = f64::INFINITY;
        for i in 0..40 {
            let t = f64::from(i) * 0.25;
            let b = mcdiarmid_tail(&xis, t).unwrap().bound;
            assert!(b <= prev + 1e-12, "t={t}: {b} > {prev}");
            prev = b;
        }
    }

    #[test]
    fn tail_bound_nondecreasing_under_xi_enlargement() {
        let small = vec![XiFunction::quadratic(0.5).unwrap()];
        let large = vec![XiFunction::quadratic(0.8).unwrap()];
        for &t in &[0.1, 0.5, 1.5, 4.0] {
            let b_small = mcdiarmid_tail(&small, t).unwrap().bound;
            let b_large = mcdiarmid_tail(&large, t).unwrap().bound;
            assert!(b_large >= b_small - 1e-12);
        }
    }

    #[test]
    fn scale_change_of_variables_leaves_exponent_invariant() {
        // Replacing ξ(λ) by ξ(sλ) and t by t/s leaves the supremum unchanged.
        let s = 3.7;
        let t = 1.3;
        let base = XiFunction::bernstein(0.9).unwrap();
        let (v1, _) = legendre_sup(&base, t).unwrap();
        let scaled = XiFunction::custom(base.domain_limit() / s, move |l| {
            let xi = XiFunction::bernstein(0.9).unwrap();
            xi.eval(s * l)
        })
        .unwrap();
        let (v2, _) = legendre_sup(&scaled, t * s).unwrap();
        assert!((v1 - v2).abs() < 1e-8 * (1.0 + v1.abs()), "{v1} vs {v2}");
    }

    #[test]
    fn reuse_scaled_is_valid_xi() {
        let xi = XiFunction::bernstein(0.5).unwrap();
        let scaled = xi.reuse_scaled(4);
        assert_eq!(scaled.domain_limit(), 4.0 * xi.domain_limit());
        assert_eq!(scaled.eval(0.0), 0.0);
        let mut prev = 0.0;
        for i in 1..100 {
            let lambda = scaled.domain_limit() * f64::from(i) / 101.0;
            let v = scaled.eval(lambda);
            assert!(v >= prev - 1e-12, "not nondecreasing at {lambda}");
            assert!(v >= 0.0);
            prev = v;
        }
    }

    #[test]
    fn rejects_negative_threshold_and_negative_xi() {
        let xi = XiFunction::quadratic(1.0).unwrap();
        assert!(legendre_sup(&xi, -1.0).is_err());
        let bad = XiFunction::custom(1.0, |l| l - 0.5).unwrap();
        assert!(legendre_sup(&bad, 1.0).is_err());
    }

    #[test]
    fn custom_xi_positive_at_zero_clamps_bound() {
        let xi = XiFunction::custom(f64::INFINITY, |l| 5.0 + l * l).unwrap();
        let report = mcdiarmid_tail(&[xi], 0.1).unwrap();
        assert_eq!(report.bound, 1.0);
    }

    #[test]
    fn envelope_check_constant_h_passes() {
        let c = 1.3;
        let samples = vec![c; 2000];
        let xi = XiFunction::quadratic(c * c / 2.0).unwrap();
        let grid = [0.0, 0.5, 1.0, 2.0];
        let points = mgf_envelope_check(&samples, &xi, &grid).unwrap();
        assert!(points.iter().all(|p| p.pass));
    }

    #[test]
    fn envelope_check_zero_xi_fails_for_positive_lambda() {
        let samples: Vec<f64> = (0..2000).map(|i| if i % 2 == 0 { 1.0 } else { 2.0 }).collect();
        let xi = XiFunction::custom(f64::INFINITY, |_| 0.0).unwrap();
        let points = mgf_envelope_check(&samples, &xi, &[0.5, 1.0]).unwrap();
        assert!(points.iter().all(|p| !p.pass));
    }

    #[test]
    fn envelope_check_rejects_out_of_domain_lambda() {
        let samples = vec![1.0; 1000];
        let xi = XiFunction::bernstein(1.0).unwrap();
        assert!(mgf_envelope_check(&samples, &xi, &[1.5]).is_err());
    }
}
