//! Empirical Rademacher complexity, covering numbers, the entropy-integral
//! bound with sample-dependent Lipschitz constants, and the sample-reuse mean
//! constant `C_{n,m}`.
//!
//! The central quantity is the Dudley-style functional
//!
//! ```text
//! inf_{η>0} { 4η + 1_{η<D} · 8√2 · n^{-1/2} ∫_{η/2}^{D/2} √(log N(ε)) dε }
//! ```
//!
//! evaluated against a [`CoveringSpec`]. Multiplying by the root-mean-square
//! sample Lipschitz constant bounds the empirical Rademacher complexity of a
//! Lipschitz-parameterized family.

use std::sync::Arc;

use rand::Rng;
use statrs::function::gamma::ln_gamma;

use crate::error::{Error, Result};
use crate::mc::{self, streams};
use crate::numeric;

const SQRT2: f64 = std::f64::consts::SQRT_2;

#[derive(Clone)]
enum CoverKind {
    /// Norm ball of the given radius in ℝ^k: `N(ε) ≤ (1 + 2R/ε)^k`.
    Ball { k: u32, radius: f64 },
    /// Explicit finite point set; covers from a farthest-point ordering.
    /// `radii[j]` is the covering radius achieved by the first `j+1` centers,
    /// so the cover size at ε is the first `j+1` with `radii[j] ≤ ε`.
    FiniteSet { radii: Vec<f64> },
    /// Product of factor spaces under the stacked Euclidean metric; covering
    /// each factor at ε/√(#parts) covers the product at ε.
    Product { parts: Vec<CoveringSpec> },
    Custom {
        log_cover: Arc<dyn Fn(f64) -> f64 + Send + Sync>,
    },
}

/// A diameter together with an upper bound `ε ↦ log N(ε, Θ, d_Θ)` on metric
/// entropy.
#[derive(Clone)]
pub struct CoveringSpec {
    diameter: f64,
    kind: CoverKind,
}

impl std::fmt::Debug for CoveringSpec {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let kind = match &self.kind {
            CoverKind::Ball { k, radius } => format!("ball(k={k}, radius={radius})"),
            CoverKind::FiniteSet { radii } => format!("finite_set({} points)", radii.len()),
            CoverKind::Product { parts } => format!("product({} parts)", parts.len()),
            CoverKind::Custom { .. } => "custom".to_string(),
        };
        write!(f, "CoveringSpec(D={}, {kind})", self.diameter)
    }
}

impl CoveringSpec {
    /// Unit ball in ℝ^k under any norm.
    pub fn unit_ball(k: u32) -> Result<Self> {
        CoveringSpec::ball(k, 1.0)
    }

    /// Radius-R ball in ℝ^k: diameter 2R, `log N(ε) = k log(1 + 2R/ε)`.
    pub fn ball(k: u32, radius: f64) -> Result<Self> {
        if k == 0 {
            return Err(Error::invalid("k", "must be >= 1"));
        }
        if !(radius >= 0.0 && radius.is_finite()) {
            return Err(Error::invalid("radius", "must be finite and >= 0"));
        }
        Ok(CoveringSpec {
            diameter: 2.0 * radius,
            kind: CoverKind::Ball { k, radius },
        })
    }

    /// Finite point set in ℝ^d with the Euclidean metric. The entropy bound
    /// comes from a farthest-point (greedy) cover, monotone in ε by
    /// construction.
    pub fn finite_set(points: &[Vec<f64>]) -> Result<Self> {
        if points.is_empty() {
            return Err(Error::EmptyInput("finite_set points"));
        }
        let n = points.len();
        // Farthest-point ordering: start at index 0, repeatedly add the point
        // farthest from the chosen centers; track the covering radius.
        let mut nearest = vec![f64::INFINITY; n];
        let mut radii = Vec::with_capacity(n);
        let mut current = 0usize;
        for _ in 0..n {
            let mut far_idx = 0;
            let mut far_dist = -1.0;
            for (j, nj) in nearest.iter_mut().enumerate() {
                let d = numeric::dist2(&points[current], &points[j]);
                if d < *nj {
                    *nj = d;
                }
                if *nj > far_dist {
                    far_dist = *nj;
                    far_idx = j;
                }
            }
            radii.push(far_dist);
            current = far_idx;
        }
        let mut diameter = 0.0f64;
        for i in 0..n {
            for j in i + 1..n {
                diameter = diameter.max(numeric::dist2(&points[i], &points[j]));
            }
        }
        Ok(CoveringSpec {
            diameter,
            kind: CoverKind::FiniteSet { radii },
        })
    }

    /// Product space under the stacked Euclidean metric.
    pub fn product(parts: Vec<CoveringSpec>) -> Result<Self> {
        if parts.is_empty() {
            return Err(Error::EmptyInput("product parts"));
        }
        let diameter = parts.iter().map(|p| p.diameter * p.diameter).sum::<f64>().sqrt();
        Ok(CoveringSpec {
            diameter,
            kind: CoverKind::Product { parts },
        })
    }

    /// Custom entropy bound; values are clamped to 0 beyond the diameter.
    pub fn custom(diameter: f64, log_cover: impl Fn(f64) -> f64 + Send + Sync + 'static) -> Result<Self> {
        if !(diameter >= 0.0) {
            return Err(Error::invalid("diameter", "must be >= 0"));
        }
        Ok(CoveringSpec {
            diameter,
            kind: CoverKind::Custom {
                log_cover: Arc::new(log_cover),
            },
        })
    }

    pub fn diameter(&self) -> f64 {
        self.diameter
    }

    /// Upper bound on `log N(ε, Θ, d_Θ)`; 0 for ε ≥ diameter.
    pub fn log_cover(&self, eps: f64) -> f64 {
        if eps >= self.diameter || self.diameter == 0.0 {
            return 0.0;
        }
        match &self.kind {
            CoverKind::Ball { k, radius } => f64::from(*k) * (1.0 + 2.0 * radius / eps).ln(),
            CoverKind::FiniteSet { radii } => {
                let size = radii.partition_point(|r| *r > eps) + 1;
                (size.min(radii.len()) as f64).ln()
            }
            CoverKind::Product { parts } => {
                let scale = (parts.len() as f64).sqrt();
                parts.iter().map(|p| p.log_cover(eps / scale)).sum()
            }
            CoverKind::Custom { log_cover } => log_cover(eps).max(0.0),
        }
    }
}

/// `k · log(1 + 2/ε)`, the unit-ball covering bound in ℝ^k, clamped to 0 for
/// ε at or beyond the diameter 2.
pub fn unit_ball_log_cover(eps: f64, k: u32) -> Result<f64> {
    if !(eps > 0.0) {
        return Err(Error::invalid("eps", "must be > 0"));
    }
    if k == 0 {
        return Err(Error::invalid("k", "must be >= 1"));
    }
    if eps >= 2.0 {
        return Ok(0.0);
    }
    Ok(f64::from(k) * (1.0 + 2.0 / eps).ln())
}

/// The Dudley-style entropy functional
/// `inf_{η>0} {4η + 1_{η<D} 8√2 n^{-1/2} ∫_{η/2}^{D/2} √(log N(ε)) dε}`.
///
/// The infimum over η is found by golden-section search on log η with the
/// endpoints η → 0 and η = D included as candidates; the inner integral uses
/// adaptive Simpson quadrature at tolerance 1e-10.
pub fn entropy_integral_bound(cover: &CoveringSpec, n: u64) -> Result<f64> {
    if n == 0 {
        return Err(Error::invalid("n", "must be >= 1"));
    }
    let d = cover.diameter();
    if d == 0.0 {
        return Ok(0.0);
    }
    let objective = entropy_objective(cover, n);
    let eta_min = d * 1e-12;
    let (w_lo, w_hi) = (eta_min.ln(), d.ln());
    let (_, neg_best) = numeric::golden_max(|w| -objective(w.exp()), w_lo, w_hi, 1e-10);
    let mut best = -neg_best;
    for eta in [eta_min, d] {
        best = best.min(objective(eta));
    }
    Ok(best)
}

/// The η-objective of [`entropy_integral_bound`], exposed to keep oracle
/// comparisons honest about what is being minimized.
pub fn entropy_objective(cover: &CoveringSpec, n: u64) -> impl Fn(f64) -> f64 + '_ {
    let d = cover.diameter();
    let scale = 8.0 * SQRT2 / (n as f64).sqrt();
    move |eta: f64| {
        let tail = if eta < d {
            let integrand = |e: f64| cover.log_cover(e).max(0.0).sqrt();
            scale * numeric::adaptive_simpson(&integrand, eta / 2.0, d / 2.0, 1e-10, 40)
        } else {
            0.0
        };
        4.0 * eta + tail
    }
}

/// The sample-reuse mean constant
/// `C_{n,m} = 2 √((1-1/m)·moment_inner + (1/m)·moment_full) · dudley`,
/// where `moment_inner = ∫ (E_{P_Y}[L(x,·)])² dP_X`,
/// `moment_full = E_{P_X×P_Y}[L²]`, and `dudley` is the entropy-integral
/// value for the parameter space.
pub fn c_nm(moment_inner: f64, moment_full: f64, m: u32, dudley: f64) -> Result<f64> {
    if m == 0 {
        return Err(Error::invalid("m", "must be >= 1"));
    }
    if !(moment_inner >= 0.0 && moment_full >= 0.0 && dudley >= 0.0) {
        return Err(Error::invalid("moments", "must be >= 0"));
    }
    if moment_inner > moment_full * (1.0 + 1e-9) + 1e-12 {
        return Err(Error::JensenViolation {
            inner: moment_inner,
            full: moment_full,
        });
    }
    let mf = f64::from(m);
    let combo = (1.0 - 1.0 / mf) * moment_inner + moment_full / mf;
    Ok(2.0 * combo.sqrt() * dudley)
}

/// The streamlined finite-dimensional constant
/// `C̃_{n,m} = (16√2/√n) √((1-1/m)·moment_inner + (1/m)·moment_full)
///            ∫_0^{D/2} √(log N(ε)) dε`,
/// valid when the entropy is integrable at 0 (true for ball covers).
pub fn finite_dim_c_tilde(
    moment_inner: f64,
    moment_full: f64,
    m: u32,
    cover: &CoveringSpec,
    n: u64,
) -> Result<f64> {
    if m == 0 || n == 0 {
        return Err(Error::invalid("m/n", "must be >= 1"));
    }
    if moment_inner > moment_full * (1.0 + 1e-9) + 1e-12 {
        return Err(Error::JensenViolation {
            inner: moment_inner,
            full: moment_full,
        });
    }
    let d = cover.diameter();
    if d == 0.0 {
        return Ok(0.0);
    }
    let mf = f64::from(m);
    let combo = (1.0 - 1.0 / mf) * moment_inner + moment_full / mf;
    let integral = entropy_integral_from_zero(cover);
    Ok(16.0 * SQRT2 / (n as f64).sqrt() * combo.sqrt() * integral)
}

/// `∫_0^{D/2} √(log N(ε)) dε` with the integrable singularity at 0 cut at
/// `δ = 1e-12·D` and the sliver bounded by `δ·√(log N(δ))`.
pub(crate) fn entropy_integral_from_zero(cover: &CoveringSpec) -> f64 {
    let d = cover.diameter();
    if d == 0.0 {
        return 0.0;
    }
    let integrand = |e: f64| cover.log_cover(e).max(0.0).sqrt();
    let delta = d * 1e-12;
    numeric::adaptive_simpson(&integrand, delta, d / 2.0, 1e-10, 40) + delta * integrand(delta)
}

/// `E[‖Y‖^p] = 2^{p/2} Γ((d+p)/2) / Γ(d/2)` for `Y ~ N(0, I_d)`.
pub fn gaussian_norm_moment(d: u32, p: f64) -> Result<f64> {
    if d == 0 {
        return Err(Error::invalid("d", "must be >= 1"));
    }
    if !(p >= 0.0 && p.is_finite()) {
        return Err(Error::invalid("p", "must be finite and >= 0"));
    }
    let df = f64::from(d);
    Ok((0.5 * p * std::f64::consts::LN_2 + ln_gamma((df + p) / 2.0) - ln_gamma(df / 2.0)).exp())
}

/// How to average over sign vectors in [`empirical_rademacher`].
#[derive(Debug, Clone, Copy)]
pub enum RademacherDraws {
    /// All 2^n sign vectors exactly once (n ≤ 20).
    Exhaustive,
    /// Monte-Carlo sign draws with counter-based seeding.
    MonteCarlo { draws: u64, seed: u64 },
}

/// An empirical Rademacher complexity estimate.
#[derive(Debug, Clone, serde::Serialize)]
pub struct RademacherEstimate {
    pub estimate: f64,
    /// Standard error of the Monte-Carlo mean (0 in exhaustive mode).
    pub std_err: f64,
    pub draws: u64,
    pub exhaustive: bool,
}

/// Estimates `E_σ[sup_θ (1/n) σ·g_θ(z)]` for a finite family given the value
/// table `values[θ][i] = g_θ(z_i)`.
pub fn empirical_rademacher(values: &[Vec<f64>], draws: RademacherDraws) -> Result<RademacherEstimate> {
    if values.is_empty() {
        return Err(Error::EmptyInput("rademacher family"));
    }
    let n = values[0].len();
    if n == 0 {
        return Err(Error::EmptyInput("rademacher samples"));
    }
    if values.iter().any(|row| row.len() != n) {
        return Err(Error::invalid("values", "rows have unequal lengths"));
    }
    let sup_for_signs = |signs: &[f64]| -> f64 {
        values
            .iter()
            .map(|row| row.iter().zip(signs).map(|(g, s)| g * s).sum::<f64>() / n as f64)
            .fold(f64::NEG_INFINITY, f64::max)
    };
    match draws {
        RademacherDraws::Exhaustive => {
            if n > 20 {
                return Err(Error::invalid(
                    "n",
                    format!("exhaustive enumeration limited to n <= 20, got {n}"),
                ));
            }
            let total = 1u64 << n;
            let mut signs = vec![0.0; n];
            let mut sum = 0.0;
            for bits in 0..total {
                for (i, s) in signs.iter_mut().enumerate() {
                    *s = if bits >> i & 1 == 1 { 1.0 } else { -1.0 };
                }
                sum += sup_for_signs(&signs);
            }
            Ok(RademacherEstimate {
                estimate: sum / total as f64,
                std_err: 0.0,
                draws: total,
                exhaustive: true,
            })
        }
        RademacherDraws::MonteCarlo { draws, seed } => {
            if draws == 0 {
                return Err(Error::invalid("draws", "must be >= 1"));
            }
            let mut sum = 0.0;
            let mut sum_sq = 0.0;
            let mut signs = vec![0.0; n];
            for draw in 0..draws {
                let mut rng = mc::trial_rng(seed, streams::RADEMACHER, draw);
                for s in signs.iter_mut() {
                    *s = if rng.gen::<bool>() { 1.0 } else { -1.0 };
                }
                let v = sup_for_signs(&signs);
                sum += v;
                sum_sq += v * v;
            }
            let mean = sum / draws as f64;
            let var = (sum_sq / draws as f64 - mean * mean).max(0.0);
            let std_err = if draws > 1 {
                (var / (draws as f64 - 1.0)).sqrt()
            } else {
                f64::INFINITY
            };
            Ok(RademacherEstimate {
                estimate: mean,
                std_err,
                draws,
                exhaustive: false,
            })
        }
    }
}
