//! Uniform-law-of-large-numbers and stochastic-optimization bounds with
//! sample reuse.
//!
//! The sampling scheme pairs each of the `n` X-samples with `m` fresh
//! Y-samples. The combined MGF exponent is `ξ_X(λ) + m·ξ_Y(λ/m)` on
//! `[0, K_X)` and the headline bounds are
//!
//! ```text
//! P(φ± - E[φ±] ≥ t)               ≤ exp(-n sup_λ {λt   - (ξ_X + mξ_Y(λ/m))})
//! P(φ± ≥ t + C_{n,m})             ≤ same right-hand side
//! E[excess]                        ≤ 2 C_{n,m} + ε_opt
//! P(excess ≥ t + 2C_{n,m} + ε_opt) ≤ exp(-n sup_λ {λt/2 - (ξ_X + mξ_Y(λ/m))})
//! ```
//!
//! where `φ±` is the signed supremum of empirical-minus-population means over
//! the parameter family and `excess` is the population excess risk of the
//! empirical minimizer.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::complexity::{self, CoveringSpec};
use crate::error::{Error, Result};
use crate::mc::{self, streams, SamplerKind};
use crate::xi::{legendre_sup, TailReport, XiFunction};

/// Objective evaluator `g(θ, x, y)`.
pub type Objective = Arc<dyn Fn(&[f64], &[f64], &[f64]) -> f64 + Send + Sync>;

/// The envelope functions attached to a sample-reuse problem: one-component
/// difference bounds, the sample-dependent Lipschitz coefficient, the
/// absolute envelope with its shift, and the integrable lower bound.
pub struct LipschitzEnvelopeSet {
    /// `|g(θ,x,y) - g(θ,x̃,y)| ≤ h_x(x, x̃, y)`
    pub h_x: Arc<dyn Fn(&[f64], &[f64], &[f64]) -> f64 + Send + Sync>,
    /// `|g(θ,x,y) - g(θ,x,ỹ)| ≤ h_y(y, ỹ)`
    pub h_y: Arc<dyn Fn(&[f64], &[f64]) -> f64 + Send + Sync>,
    /// `θ ↦ g(θ,x,y) - shift(θ)` is `lip(x,y)`-Lipschitz
    pub lip: Arc<dyn Fn(&[f64], &[f64]) -> f64 + Send + Sync>,
    /// `|g(θ,x,y) - shift(θ)| ≤ envelope(x,y)`
    pub envelope: Arc<dyn Fn(&[f64], &[f64]) -> f64 + Send + Sync>,
    pub shift: Arc<dyn Fn(&[f64]) -> f64 + Send + Sync>,
    /// `g ≥ lower` pointwise
    pub lower: Arc<dyn Fn(&[f64], &[f64]) -> f64 + Send + Sync>,
}

/// A stochastic-optimization problem over a finite parameter grid.
pub struct StochOptProblem {
    pub objective: Objective,
    pub theta_grid: Vec<Vec<f64>>,
    pub envelopes: LipschitzEnvelopeSet,
    pub xi_x: XiFunction,
    pub xi_y: XiFunction,
    pub m: u32,
    pub n: u32,
    pub eps_opt: f64,
}

impl StochOptProblem {
    pub fn validate(&self) -> Result<()> {
        if self.theta_grid.is_empty() {
            return Err(Error::EmptyInput("theta_grid"));
        }
        if self.n == 0 || self.m == 0 {
            return Err(Error::invalid("n/m", "must be >= 1"));
        }
        if self.xi_x.domain_limit() / f64::from(self.m) > self.xi_y.domain_limit() {
            return Err(Error::Domain(format!(
                "K_X/m = {} exceeds K_Y = {}",
                self.xi_x.domain_limit() / f64::from(self.m),
                self.xi_y.domain_limit()
            )));
        }
        Ok(())
    }
}

/// One draw of the paired sample: `n` X-points, `n × m` Y-points.
#[derive(Debug, Clone)]
pub struct SampleBatch {
    pub x: Vec<Vec<f64>>,
    pub y: Vec<Vec<Vec<f64>>>,
    pub seed: u64,
    pub trial: u64,
}

impl SampleBatch {
    /// Generates the batch for (`seed`, `trial`); regeneration is
    /// bit-identical.
    pub fn generate(
        x_kind: &SamplerKind,
        y_kind: &SamplerKind,
        n: u32,
        m: u32,
        seed: u64,
        trial: u64,
    ) -> SampleBatch {
        let mut rng_x = mc::trial_rng(seed, streams::X_SAMPLES, trial);
        let mut rng_y = mc::trial_rng(seed, streams::Y_SAMPLES, trial);
        let x: Vec<Vec<f64>> = (0..n).map(|_| x_kind.sample(&mut rng_x)).collect();
        let y: Vec<Vec<Vec<f64>>> = (0..n)
            .map(|_| (0..m).map(|_| y_kind.sample(&mut rng_y)).collect())
            .collect();
        SampleBatch { x, y, seed, trial }
    }
}

/// The combined sample-reuse exponent `λ ↦ ξ_X(λ) + m·ξ_Y(λ/m)` on `[0, K_X)`.
pub fn reuse_xi(xi_x: &XiFunction, xi_y: &XiFunction, m: u32) -> Result<XiFunction> {
    if m == 0 {
        return Err(Error::invalid("m", "must be >= 1"));
    }
    if xi_x.domain_limit() / f64::from(m) > xi_y.domain_limit() {
        return Err(Error::Domain(format!(
            "K_X/m = {} exceeds K_Y = {}",
            xi_x.domain_limit() / f64::from(m),
            xi_y.domain_limit()
        )));
    }
    XiFunction::sum(vec![xi_x.clone(), xi_y.reuse_scaled(m)])
}

/// Tail bound on `P(φ± ≥ t + C_{n,m})`.
pub fn ulln_tail(problem: &StochOptProblem, t: f64, c_nm: f64) -> Result<TailReport> {
    problem.validate()?;
    let combined = reuse_xi(&problem.xi_x, &problem.xi_y, problem.m)?;
    let (sup, lambda_star) = legendre_sup(&combined, t)?;
    Ok(TailReport::from_exponent(
        t + c_nm,
        f64::from(problem.n) * sup,
        lambda_star,
    ))
}

/// The `L¹` excess-risk bound `2 C_{n,m} + ε_opt`.
pub fn opt_l1_bound(c_nm: f64, eps_opt: f64) -> Result<f64> {
    if !(c_nm >= 0.0 && eps_opt >= 0.0) {
        return Err(Error::invalid("c_nm/eps_opt", "must be >= 0"));
    }
    Ok(2.0 * c_nm + eps_opt)
}

/// Tail bound on `P(excess ≥ t + 2C_{n,m} + ε_opt)`: the ULLN exponent at
/// slope `t/2`.
pub fn opt_tail(problem: &StochOptProblem, t: f64, c_nm: f64) -> Result<TailReport> {
    problem.validate()?;
    if !(t >= 0.0) {
        return Err(Error::invalid("t", "must be >= 0"));
    }
    let combined = reuse_xi(&problem.xi_x, &problem.xi_y, problem.m)?;
    let (sup, lambda_star) = legendre_sup(&combined, t / 2.0)?;
    Ok(TailReport::from_exponent(
        t + 2.0 * c_nm + problem.eps_opt,
        f64::from(problem.n) * sup,
        lambda_star,
    ))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Sign {
    Plus,
    Minus,
}

/// `φ± = max over the θ-grid of ±(empirical mean - population mean)`.
pub fn sup_deviation(
    problem: &StochOptProblem,
    batch: &SampleBatch,
    population_means: &[f64],
    sign: Sign,
) -> Result<f64> {
    if population_means.len() != problem.theta_grid.len() {
        return Err(Error::invalid(
            "population_means",
            "length mismatch with theta_grid",
        ));
    }
    let mut best = f64::NEG_INFINITY;
    for (theta, pop) in problem.theta_grid.iter().zip(population_means) {
        let emp = empirical_mean(problem, batch, theta);
        let dev = match sign {
            Sign::Plus => emp - pop,
            Sign::Minus => pop - emp,
        };
        best = best.max(dev);
    }
    Ok(best)
}

/// `(1/nm) Σ_i Σ_j g(θ, x_i, y_{ij})`.
pub fn empirical_mean(problem: &StochOptProblem, batch: &SampleBatch, theta: &[f64]) -> f64 {
    let mut sum = 0.0;
    let mut count = 0usize;
    for (x, ys) in batch.x.iter().zip(&batch.y) {
        for y in ys {
            sum += (problem.objective)(theta, x, y);
            count += 1;
        }
    }
    sum / count as f64
}

/// Grid argmin of the empirical objective, ties broken by lowest index.
/// The grid optimum is exact, so the achieved ε_opt is 0; any grid-versus-
/// continuum gap is reported separately by callers that have a continuum
/// optimum available.
pub fn empirical_minimizer(problem: &StochOptProblem, batch: &SampleBatch) -> Result<(usize, f64)> {
    problem.validate()?;
    let mut best_idx = 0usize;
    let mut best_val = f64::INFINITY;
    for (idx, theta) in problem.theta_grid.iter().enumerate() {
        let v = empirical_mean(problem, batch, theta);
        if v < best_val {
            best_val = v;
            best_idx = idx;
        }
    }
    Ok((best_idx, 0.0))
}

// ---------------------------------------------------------------------------
// Bilinear test family
// ---------------------------------------------------------------------------

/// The desk-scale family `g_θ(x, y) = θ₁ x + θ₂ x y` over a θ-grid inside a
/// Euclidean ball, with `x` from a compact scalar mixture and `y` scalar from
/// a known distribution.
///
/// All assumption constants are available in closed form:
/// `|Δ_x g| ≤ R |x-x̃| (1+|y|)`, `|Δ_y g| ≤ R r₀ |y-ỹ|`,
/// `L(x,y) = |x|(1+|y|)`, and for Gaussian `y` the difference `|y-ỹ|` has
/// Ψ₂ norm `4/√3` exactly, giving quadratic ξ functions on the nose.
pub struct BilinearFamily {
    pub x_kind: SamplerKind,
    pub y_kind: SamplerKind,
    pub radius: f64,
    pub r0: f64,
    pub problem: StochOptProblem,
    pub population_means: Vec<f64>,
    pub c_nm: f64,
}

impl BilinearFamily {
    pub fn new(
        atoms: Vec<Vec<f64>>,
        weights: Vec<f64>,
        y_kind: SamplerKind,
        radius: f64,
        grid_step: f64,
        n: u32,
        m: u32,
    ) -> Result<BilinearFamily> {
        let x_kind = SamplerKind::Mixture {
            atoms: atoms.clone(),
            weights: weights.clone(),
        };
        x_kind.validate()?;
        y_kind.validate()?;
        if x_kind.dim() != 1 || y_kind.dim() != 1 {
            return Err(Error::invalid("dims", "bilinear family is scalar in x and y"));
        }
        if !(radius > 0.0 && grid_step > 0.0) {
            return Err(Error::invalid("radius/grid_step", "must be > 0"));
        }
        let r0 = atoms.iter().fold(0.0f64, |r, a| r.max(a[0].abs()));
        let e_abs_y = y_kind
            .norm_moment(1.0)
            .ok_or_else(|| Error::invalid("y_dist", "needs a finite first absolute moment"))?;
        let e_y2 = y_kind
            .norm_moment(2.0)
            .ok_or_else(|| Error::invalid("y_dist", "needs a finite second moment"))?;
        let e_x: f64 = atoms.iter().zip(&weights).map(|(a, w)| w * a[0]).sum();
        let e_x2: f64 = atoms.iter().zip(&weights).map(|(a, w)| w * a[0] * a[0]).sum();
        let mean_y = y_kind
            .mean()
            .map(|v| v[0])
            .ok_or_else(|| Error::invalid("y_dist", "needs a finite mean"))?;

        // Lattice over [-R, R]² intersected with the closed R-ball.
        let mut theta_grid = Vec::new();
        let steps = (2.0 * radius / grid_step).round() as i64;
        for i in 0..=steps {
            for j in 0..=steps {
                let t1 = -radius + grid_step * i as f64;
                let t2 = -radius + grid_step * j as f64;
                if t1 * t1 + t2 * t2 <= radius * radius + 1e-12 {
                    theta_grid.push(vec![t1, t2]);
                }
            }
        }
        if theta_grid.is_empty() {
            return Err(Error::invalid("grid_step", "grid has no points inside the ball"));
        }

        // ξ_X: E_Y[h_X(x, x̃, ·)] ≤ 2 R r₀ (1 + E|y|) =: c_x, a bounded
        // difference, so cosh(λ c_x) ≤ exp(λ² c_x²/2).
        let c_x = 2.0 * radius * r0 * (1.0 + e_abs_y);
        let xi_x = XiFunction::quadratic(c_x * c_x / 2.0)?;
        // ξ_Y: h_Y = R r₀ |y - ỹ|. For Gaussian y the Ψ₂ norm of |y - ỹ| is
        // 4/√3 exactly (solve (1 - 4/c²)^{-1/2} = 2); otherwise estimate it
        // from paired draws. Heavy-tailed y (no finite Orlicz norm) gets a
        // degenerate domain so tail computations fail loudly; the L¹ path
        // never evaluates ξ_Y.
        let hy_scale = radius * r0;
        let xi_y = match &y_kind {
            SamplerKind::Gaussian { .. } => {
                let psi2 = hy_scale * 4.0 / 3.0f64.sqrt();
                XiFunction::quadratic(psi2 * psi2)?
            }
            SamplerKind::Pareto { .. } => XiFunction::custom(f64::MIN_POSITIVE, |_| 0.0)?,
            other => {
                let mut rng = mc::trial_rng(0xB1B1, streams::NORM_CALIBRATION, 0);
                let samples: Vec<f64> = (0..20_000)
                    .map(|_| {
                        let y = other.sample(&mut rng)[0];
                        let y2 = other.sample(&mut rng)[0];
                        hy_scale * (y - y2).abs()
                    })
                    .collect();
                let est = crate::orlicz::luxemburg_norm(&samples, 2.0)?;
                XiFunction::quadratic(est.norm * est.norm)?
            }
        };

        let objective: Objective = Arc::new(|theta: &[f64], x: &[f64], y: &[f64]| {
            theta[0] * x[0] + theta[1] * x[0] * y[0]
        });
        let r = radius;
        let r0c = r0;
        let envelopes = LipschitzEnvelopeSet {
            h_x: Arc::new(move |x: &[f64], xt: &[f64], y: &[f64]| {
                r * (x[0] - xt[0]).abs() * (1.0 + y[0].abs())
            }),
            h_y: Arc::new(move |y: &[f64], yt: &[f64]| r * r0c * (y[0] - yt[0]).abs()),
            lip: Arc::new(|x: &[f64], y: &[f64]| x[0].abs() * (1.0 + y[0].abs())),
            envelope: Arc::new(move |x: &[f64], y: &[f64]| r * x[0].abs() * (1.0 + y[0].abs())),
            shift: Arc::new(|_| 0.0),
            lower: Arc::new(move |x: &[f64], y: &[f64]| -r * x[0].abs() * (1.0 + y[0].abs())),
        };

        let population_means: Vec<f64> = theta_grid
            .iter()
            .map(|theta| theta[0] * e_x + theta[1] * e_x * mean_y)
            .collect();

        // C_{n,m} from closed-form moments of L(x,y) = |x|(1+|y|) and the
        // ball covering of the parameter space.
        let moment_inner = e_x2 * (1.0 + e_abs_y) * (1.0 + e_abs_y);
        let moment_full = e_x2 * (1.0 + 2.0 * e_abs_y + e_y2);
        let cover = CoveringSpec::ball(2, radius)?;
        let dudley = complexity::entropy_integral_bound(&cover, u64::from(n))?;
        let c_nm = complexity::c_nm(moment_inner, moment_full, m, dudley)?;

        let problem = StochOptProblem {
            objective,
            theta_grid,
            envelopes,
            xi_x,
            xi_y,
            m,
            n,
            eps_opt: 0.0,
        };
        Ok(BilinearFamily {
            x_kind,
            y_kind,
            radius,
            r0,
            problem,
            population_means,
            c_nm,
        })
    }

    /// Whether ξ_Y (and hence the tail bounds) exists for the chosen y
    /// distribution.
    pub fn has_mgf(&self) -> bool {
        !matches!(self.y_kind, SamplerKind::Pareto { .. })
    }

    pub fn batch(&self, seed: u64, trial: u64) -> SampleBatch {
        SampleBatch::generate(
            &self.x_kind,
            &self.y_kind,
            self.problem.n,
            self.problem.m,
            seed,
            trial,
        )
    }

    /// Population excess risk of the grid point `idx`.
    pub fn excess(&self, idx: usize) -> f64 {
        let min = self
            .population_means
            .iter()
            .cloned()
            .fold(f64::INFINITY, f64::min);
        self.population_means[idx] - min
    }
}

// ---------------------------------------------------------------------------
// Certification campaigns
// ---------------------------------------------------------------------------

/// Configuration shared by the `ulln certify` and `opt certify` campaigns.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BilinearConfig {
    pub atoms: Vec<Vec<f64>>,
    pub weights: Vec<f64>,
    pub y_dist: SamplerKind,
    pub theta_radius: f64,
    pub grid_step: f64,
    pub n: u32,
    pub m: u32,
    pub trials: u64,
    /// Explicit thresholds; when absent an 8-point grid is derived so the
    /// bounds span [1e-3, 0.8].
    #[serde(default)]
    pub t_grid: Option<Vec<f64>>,
    pub seed: u64,
    #[serde(default = "default_confidence")]
    pub confidence: f64,
    #[serde(default)]
    pub output_path: Option<String>,
}

pub(crate) fn default_confidence() -> f64 {
    0.99
}

/// One certified threshold in a campaign summary.
#[derive(Debug, Clone, Serialize)]
pub struct CertLine {
    pub t: f64,
    pub threshold: f64,
    pub bound: f64,
    pub p_hat: f64,
    pub upper_cl: f64,
    pub verdict: mc::Verdict,
}

#[derive(Debug, Clone, Serialize)]
pub struct UllnSummary {
    pub config: BilinearConfig,
    pub c_nm: f64,
    pub mean_phi_plus: f64,
    pub mean_phi_minus: f64,
    pub se_phi_plus: f64,
    pub se_phi_minus: f64,
    /// Mean certificate: MC mean of φ± ≤ C_{n,m} + 3 SE.
    pub mean_certified: bool,
    /// Deviation certificates around the MC mean of φ₊.
    pub deviation_plus: Vec<CertLine>,
    /// Shifted certificates on {φ₊ ≥ t + C_{n,m}}.
    pub shifted_plus: Vec<CertLine>,
    pub any_violation: bool,
}

/// Output of a campaign: RFC-4180 CSV text plus a JSON-ready summary.
pub struct CampaignOutput<S> {
    pub csv: String,
    pub summary: S,
}

pub(crate) fn mean_and_se(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

/// Derives a threshold grid whose bounds are log-spaced across
/// [1e-3, 0.8]; `bound_of_t` must be nonincreasing in t.
pub(crate) fn auto_t_grid(bound_of_t: impl Fn(f64) -> f64, points: usize) -> Vec<f64> {
    let targets: Vec<f64> = (0..points)
        .map(|i| {
            let frac = i as f64 / (points - 1) as f64;
            10f64.powf(-3.0 + frac * (0.8f64.log10() + 3.0))
        })
        .collect();
    targets
        .iter()
        .map(|&target| {
            let mut lo = 0.0;
            let mut hi = 1.0;
            while bound_of_t(hi) > target && hi < 1e12 {
                hi *= 2.0;
            }
            for _ in 0..200 {
                let mid = 0.5 * (lo + hi);
                if bound_of_t(mid) > target {
                    lo = mid;
                } else {
                    hi = mid;
                }
            }
            0.5 * (lo + hi)
        })
        .collect()
}

/// Runs the ULLN certification campaign: simulates `φ±` over independent
/// batches and certifies both the mean bound and the tail bounds.
pub fn run_ulln_certify(
    config: &BilinearConfig,
    workers: Option<usize>,
) -> Result<CampaignOutput<UllnSummary>> {
    if config.trials < 2 {
        return Err(Error::invalid("trials", "must be >= 2"));
    }
    let family = BilinearFamily::new(
        config.atoms.clone(),
        config.weights.clone(),
        config.y_dist.clone(),
        config.theta_radius,
        config.grid_step,
        config.n,
        config.m,
    )?;
    if !family.has_mgf() {
        return Err(Error::invalid(
            "y_dist",
            "ulln certificates need an MGF bound for h_Y; heavy-tailed y supports only `opt certify` L1 mode",
        ));
    }
    let phis: Vec<(f64, f64)> = mc::run_indexed(config.trials, workers, |trial| {
        let batch = family.batch(config.seed, trial);
        let plus = sup_deviation(&family.problem, &batch, &family.population_means, Sign::Plus)
            .expect("validated problem");
        let minus = sup_deviation(&family.problem, &batch, &family.population_means, Sign::Minus)
            .expect("validated problem");
        (plus, minus)
    });

    let mut csv = String::from("trial,phi_plus,phi_minus\n");
    for (trial, (p, m_)) in phis.iter().enumerate() {
        csv.push_str(&format!("{trial},{p},{m_}\n"));
    }

    let plus: Vec<f64> = phis.iter().map(|v| v.0).collect();
    let minus: Vec<f64> = phis.iter().map(|v| v.1).collect();
    let (mean_plus, se_plus) = mean_and_se(&plus);
    let (mean_minus, se_minus) = mean_and_se(&minus);
    let mean_certified = mean_plus <= family.c_nm + 3.0 * se_plus
        && mean_minus <= family.c_nm + 3.0 * se_minus;

    let bound_at = |t: f64| {
        ulln_tail(&family.problem, t, family.c_nm)
            .map(|r| r.bound)
            .unwrap_or(1.0)
    };
    let t_grid = config
        .t_grid
        .clone()
        .unwrap_or_else(|| auto_t_grid(bound_at, 8));

    let mut deviation_plus = Vec::new();
    let mut shifted_plus = Vec::new();
    let mut any_violation = !mean_certified;
    for &t in &t_grid {
        let report = ulln_tail(&family.problem, t, family.c_nm)?;
        // Deviations of φ₊ around its MC-estimated mean.
        let dev_successes = plus.iter().filter(|p| **p - mean_plus >= t).count() as u64;
        let dev = mc::certify_counts(dev_successes, config.trials, report.bound, config.confidence)?;
        any_violation |= dev.verdict == mc::Verdict::Violated;
        deviation_plus.push(CertLine {
            t,
            threshold: t,
            bound: report.bound,
            p_hat: dev.p_hat,
            upper_cl: dev.upper_cl,
            verdict: dev.verdict,
        });
        // The shifted event {φ₊ ≥ t + C_{n,m}}.
        let shift_successes = plus.iter().filter(|p| **p >= t + family.c_nm).count() as u64;
        let shifted =
            mc::certify_counts(shift_successes, config.trials, report.bound, config.confidence)?;
        any_violation |= shifted.verdict == mc::Verdict::Violated;
        shifted_plus.push(CertLine {
            t,
            threshold: report.threshold,
            bound: report.bound,
            p_hat: shifted.p_hat,
            upper_cl: shifted.upper_cl,
            verdict: shifted.verdict,
        });
    }

    Ok(CampaignOutput {
        csv,
        summary: UllnSummary {
            config: config.clone(),
            c_nm: family.c_nm,
            mean_phi_plus: mean_plus,
            mean_phi_minus: mean_minus,
            se_phi_plus: se_plus,
            se_phi_minus: se_minus,
            mean_certified,
            deviation_plus,
            shifted_plus,
            any_violation,
        },
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct OptSummary {
    pub config: BilinearConfig,
    pub c_nm: f64,
    pub l1_bound: f64,
    pub mean_abs_excess: f64,
    pub se_excess: f64,
    /// `mean |excess| ≤ 2 C_{n,m} + ε_opt + 3 SE`.
    pub l1_certified: bool,
    /// Tail certificates (empty when the y distribution has no MGF).
    pub tail: Vec<CertLine>,
    pub any_violation: bool,
}

/// Runs the stochastic-optimization certification campaign: trains the grid
/// argmin on fresh batches, certifies the excess-risk tail bound where an MGF
/// exists and the `L¹` bound always.
pub fn run_opt_certify(
    config: &BilinearConfig,
    workers: Option<usize>,
) -> Result<CampaignOutput<OptSummary>> {
    if config.trials < 2 {
        return Err(Error::invalid("trials", "must be >= 2"));
    }
    let family = BilinearFamily::new(
        config.atoms.clone(),
        config.weights.clone(),
        config.y_dist.clone(),
        config.theta_radius,
        config.grid_step,
        config.n,
        config.m,
    )?;
    let excesses: Vec<f64> = mc::run_indexed(config.trials, workers, |trial| {
        let batch = family.batch(config.seed, trial);
        let (idx, _) = empirical_minimizer(&family.problem, &batch).expect("validated problem");
        family.excess(idx)
    });

    let mut csv = String::from("trial,excess\n");
    for (trial, e) in excesses.iter().enumerate() {
        csv.push_str(&format!("{trial},{e}\n"));
    }

    let (_, se_excess) = mean_and_se(&excesses);
    let mean_abs = excesses.iter().map(|e| e.abs()).sum::<f64>() / excesses.len() as f64;
    let l1_bound = opt_l1_bound(family.c_nm, family.problem.eps_opt)?;
    let l1_certified = mean_abs <= l1_bound + 3.0 * se_excess;

    let mut tail = Vec::new();
    let mut any_violation = !l1_certified;
    if family.has_mgf() {
        let bound_at = |t: f64| {
            opt_tail(&family.problem, t, family.c_nm)
                .map(|r| r.bound)
                .unwrap_or(1.0)
        };
        let t_grid = config
            .t_grid
            .clone()
            .unwrap_or_else(|| auto_t_grid(bound_at, 8));
        for &t in &t_grid {
            let report = opt_tail(&family.problem, t, family.c_nm)?;
            let successes = excesses
                .iter()
                .filter(|e| **e >= t + 2.0 * family.c_nm + family.problem.eps_opt)
                .count() as u64;
            let cert =
                mc::certify_counts(successes, config.trials, report.bound, config.confidence)?;
            any_violation |= cert.verdict == mc::Verdict::Violated;
            tail.push(CertLine {
                t,
                threshold: report.threshold,
                bound: report.bound,
                p_hat: cert.p_hat,
                upper_cl: cert.upper_cl,
                verdict: cert.verdict,
            });
        }
    }

    Ok(CampaignOutput {
        csv,
        summary: OptSummary {
            config: config.clone(),
            c_nm: family.c_nm,
            l1_bound,
            mean_abs_excess: mean_abs,
            se_excess,
            l1_certified,
            tail,
            any_violation,
        },
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn quad_problem(a_x: f64, a_y: f64, n: u32, m: u32) -> StochOptProblem {
        StochOptProblem {
            objective: Arc::new(|_, _, _| 0.0),
            theta_grid: vec![vec![0.0]],
            envelopes: trivial_envelopes(),
            xi_x: XiFunction::quadratic(a_x).unwrap(),
            xi_y: XiFunction::quadratic(a_y).unwrap(),
            m,
            n,
            eps_opt: 0.0,
        }
    }

    fn trivial_envelopes() -> LipschitzEnvelopeSet {
        LipschitzEnvelopeSet {
            h_x: Arc::new(|_, _, _| 0.0),
            h_y: Arc::new(|_, _| 0.0),
            lip: Arc::new(|_, _| 1.0),
            envelope: Arc::new(|_, _| 0.0),
            shift: Arc::new(|_| 0.0),
            lower: Arc::new(|_, _| 0.0),
        }
    }

    #[test]
    fn reuse_quadratic_y_fades_with_m() {
        let xi_y = XiFunction::quadratic(2.0).unwrap();
        let xi_x = XiFunction::quadratic(1.0).unwrap();
        for &m in &[1u32, 4, 64] {
            let combined = reuse_xi(&xi_x, &xi_y, m).unwrap();
            for &lambda in &[0.3, 1.0, 2.5] {
                let expected = lambda * lambda * (1.0 + 2.0 / f64::from(m));
                assert!((combined.eval(lambda) - expected).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn reuse_m_one_is_pointwise_sum() {
        let xi_x = XiFunction::bernstein(0.5).unwrap();
        let xi_y = XiFunction::quadratic(0.7).unwrap();
        let combined = reuse_xi(&xi_x, &xi_y, 1).unwrap();
        for &lambda in &[0.1, 0.9, 1.7] {
            let expected = xi_x.eval(lambda) + xi_y.eval(lambda);
            assert!((combined.eval(lambda) - expected).abs() < 1e-12);
        }
    }

    #[test]
    fn reuse_bernstein_matches_direct_evaluation() {
        // With a finite K_Y the quadratic ξ_X must be restricted to m·K_Y.
        let xi_y = XiFunction::bernstein(0.8).unwrap();
        let m = 4u32;
        let xi_x = XiFunction::quadratic(0.2)
            .unwrap()
            .with_domain_limit(f64::from(m) * xi_y.domain_limit())
            .unwrap();
        let combined = reuse_xi(&xi_x, &xi_y, m).unwrap();
        assert_eq!(combined.domain_limit(), 4.0 / 0.8);
        for i in 1..20 {
            let lambda = 4.0 / 0.8 * f64::from(i) / 21.0;
            let direct = xi_x.eval(lambda) + 4.0 * xi_y.eval(lambda / 4.0);
            assert!((combined.eval(lambda) - direct).abs() < 1e-12);
        }
    }

    #[test]
    fn reuse_rejects_domain_mismatch() {
        // K_X = ∞ but K_Y finite: K_X/m = ∞ > K_Y.
        let xi_x = XiFunction::quadratic(1.0).unwrap();
        let xi_y = XiFunction::bernstein(1.0).unwrap();
        assert!(reuse_xi(&xi_x, &xi_y, 4).is_err());
    }

    #[test]
    fn ulln_tail_quadratic_closed_form() {
        let (a_x, a_y, n, m, t) = (0.4, 1.1, 50u32, 4u32, 0.3);
        let problem = quad_problem(a_x, a_y, n, m);
        let report = ulln_tail(&problem, t, 0.25).unwrap();
        let expected = f64::from(n) * t * t / (4.0 * (a_x + a_y / f64::from(m)));
        assert!(
            (report.exponent_value - expected).abs() < 1e-9 * expected,
            "{} vs {expected}",
            report.exponent_value
        );
        assert!((report.threshold - (t + 0.25)).abs() < 1e-15);

        let zero = ulln_tail(&problem, 0.0, 0.25).unwrap();
        assert_eq!(zero.bound, 1.0);
    }

    #[test]
    fn doubling_n_squares_the_bound() {
        let p1 = quad_problem(0.5, 0.5, 25, 2);
        let p2 = quad_problem(0.5, 0.5, 50, 2);
        let t = 0.6;
        let b1 = ulln_tail(&p1, t, 0.0).unwrap().bound;
        let b2 = ulln_tail(&p2, t, 0.0).unwrap().bound;
        assert!(
            (b2 - b1 * b1).abs() < 1e-10 * b2.max(1e-30),
            "{b2} vs {}",
            b1 * b1
        );
    }

    #[test]
    fn opt_l1_bound_examples() {
        assert!((opt_l1_bound(0.1, 0.0).unwrap() - 0.2).abs() < 1e-15);
        assert!((opt_l1_bound(0.1, 0.05).unwrap() - 0.25).abs() < 1e-15);
        assert!(opt_l1_bound(-0.1, 0.0).is_err());
    }

    #[test]
    fn opt_tail_is_ulln_tail_at_half_slope() {
        let problem = quad_problem(0.8, 0.3, 40, 2);
        for &t in &[0.0, 0.2, 1.0] {
            let opt = opt_tail(&problem, t, 0.1).unwrap();
            let ulln = ulln_tail(&problem, t / 2.0, 0.1).unwrap();
            assert!((opt.exponent_value - ulln.exponent_value).abs() < 1e-12);
        }
        let quad = opt_tail(&problem, 0.5, 0.0).unwrap();
        let expected = 40.0 * 0.5 * 0.5 / (16.0 * (0.8 + 0.3 / 2.0));
        assert!((quad.exponent_value - expected).abs() < 1e-9 * expected);
    }

    #[test]
    fn sup_deviation_examples() {
        // g constant in (x, y): φ = 0 for matching population means.
        let constant = StochOptProblem {
            objective: Arc::new(|theta, _, _| theta[0]),
            theta_grid: vec![vec![1.0], vec![2.0]],
            envelopes: trivial_envelopes(),
            xi_x: XiFunction::quadratic(1.0).unwrap(),
            xi_y: XiFunction::quadratic(1.0).unwrap(),
            m: 2,
            n: 3,
            eps_opt: 0.0,
        };
        let batch = SampleBatch::generate(
            &SamplerKind::Gaussian { dim: 1 },
            &SamplerKind::Gaussian { dim: 1 },
            3,
            2,
            0,
            0,
        );
        let phi = sup_deviation(&constant, &batch, &[1.0, 2.0], Sign::Plus).unwrap();
        assert!(phi.abs() < 1e-15);

        // Single θ with g(x,y) = x and E[g] = 0: φ₊ is the x sample mean.
        let linear = StochOptProblem {
            objective: Arc::new(|_, x, _| x[0]),
            theta_grid: vec![vec![0.0]],
            envelopes: trivial_envelopes(),
            xi_x: XiFunction::quadratic(1.0).unwrap(),
            xi_y: XiFunction::quadratic(1.0).unwrap(),
            m: 2,
            n: 3,
            eps_opt: 0.0,
        };
        let mean_x = batch.x.iter().map(|x| x[0]).sum::<f64>() / 3.0;
        let phi = sup_deviation(&linear, &batch, &[0.0], Sign::Plus).unwrap();
        assert!((phi - mean_x).abs() < 1e-15);
    }

    #[test]
    fn sup_deviation_matches_exhaustive_on_discrete_space() {
        let objective: Objective =
            Arc::new(|theta, x, y| theta[0] * x[0] * x[0] + theta[1] * y[0] + x[0] * y[0]);
        let xs = [[-1.0], [2.0]];
        let ys = [[0.5], [-0.5]];
        let grid = vec![vec![0.3, -0.2], vec![-1.0, 0.4], vec![0.0, 0.0]];
        let pop: Vec<f64> = grid
            .iter()
            .map(|theta| {
                let mut s = 0.0;
                for x in &xs {
                    for y in &ys {
                        s += objective(theta, x, y);
                    }
                }
                s / 4.0
            })
            .collect();
        let problem = StochOptProblem {
            objective: objective.clone(),
            theta_grid: grid.clone(),
            envelopes: trivial_envelopes(),
            xi_x: XiFunction::quadratic(1.0).unwrap(),
            xi_y: XiFunction::quadratic(1.0).unwrap(),
            m: 2,
            n: 4,
            eps_opt: 0.0,
        };
        let batch = SampleBatch {
            x: vec![vec![-1.0], vec![2.0], vec![2.0], vec![-1.0]],
            y: vec![
                vec![vec![0.5], vec![-0.5]],
                vec![vec![0.5], vec![0.5]],
                vec![vec![-0.5], vec![-0.5]],
                vec![vec![0.5], vec![-0.5]],
            ],
            seed: 0,
            trial: 0,
        };
        let mut oracle = f64::NEG_INFINITY;
        for (theta, p) in grid.iter().zip(&pop) {
            let mut emp = 0.0;
            for (x, yrow) in batch.x.iter().zip(&batch.y) {
                for y in yrow {
                    emp += objective(theta, x, y);
                }
            }
            emp /= 8.0;
            oracle = oracle.max(emp - p);
        }
        let phi = sup_deviation(&problem, &batch, &pop, Sign::Plus).unwrap();
        assert!((phi - oracle).abs() < 1e-14);
    }

    #[test]
    fn empirical_minimizer_tie_break_and_vertex() {
        let batch = SampleBatch::generate(
            &SamplerKind::Gaussian { dim: 1 },
            &SamplerKind::Gaussian { dim: 1 },
            2,
            1,
            1,
            0,
        );
        let constant = StochOptProblem {
            objective: Arc::new(|_, _, _| 1.0),
            theta_grid: vec![vec![0.0], vec![1.0], vec![2.0]],
            envelopes: trivial_envelopes(),
            xi_x: XiFunction::quadratic(1.0).unwrap(),
            xi_y: XiFunction::quadratic(1.0).unwrap(),
            m: 1,
            n: 2,
            eps_opt: 0.0,
        };
        assert_eq!(empirical_minimizer(&constant, &batch).unwrap().0, 0);

        let quad = StochOptProblem {
            objective: Arc::new(|theta, _, _| (theta[0] - 1.0) * (theta[0] - 1.0)),
            theta_grid: (0..5).map(|i| vec![f64::from(i) * 0.5]).collect(),
            envelopes: trivial_envelopes(),
            xi_x: XiFunction::quadratic(1.0).unwrap(),
            xi_y: XiFunction::quadratic(1.0).unwrap(),
            m: 1,
            n: 2,
            eps_opt: 0.0,
        };
        assert_eq!(empirical_minimizer(&quad, &batch).unwrap().0, 2);
    }

    #[test]
    fn batches_regenerate_bit_identically() {
        let x = SamplerKind::Mixture {
            atoms: vec![vec![-0.5], vec![1.0]],
            weights: vec![0.4, 0.6],
        };
        let y = SamplerKind::Gaussian { dim: 1 };
        let a = SampleBatch::generate(&x, &y, 5, 3, 42, 7);
        let b = SampleBatch::generate(&x, &y, 5, 3, 42, 7);
        assert_eq!(a.x, b.x);
        assert_eq!(a.y, b.y);
        let c = SampleBatch::generate(&x, &y, 5, 3, 42, 8);
        assert_ne!(a.y, c.y);
    }

    #[test]
    fn bilinear_family_constants_are_consistent() {
        let fam = BilinearFamily::new(
            vec![vec![-0.5], vec![1.0]],
            vec![0.5, 0.5],
            SamplerKind::Gaussian { dim: 1 },
            1.0,
            0.25,
            20,
            2,
        )
        .unwrap();
        assert!(fam.has_mgf());
        assert!(fam.c_nm > 0.0);
        assert_eq!(fam.population_means.len(), fam.problem.theta_grid.len());
        let mut rng = mc::trial_rng(3, streams::GENERIC, 0);
        for i in 0..5000 {
            let x = fam.x_kind.sample(&mut rng);
            let xt = fam.x_kind.sample(&mut rng);
            let y = fam.y_kind.sample(&mut rng);
            let yt = fam.y_kind.sample(&mut rng);
            let theta = &fam.problem.theta_grid[i % fam.problem.theta_grid.len()];
            let g = &fam.problem.objective;
            let dx = (g(theta, &x, &y) - g(theta, &xt, &y)).abs();
            assert!(dx <= (fam.problem.envelopes.h_x)(&x, &xt, &y) + 1e-12);
            let dy = (g(theta, &x, &y) - g(theta, &x, &yt)).abs();
            assert!(dy <= (fam.problem.envelopes.h_y)(&y, &yt) + 1e-12);
            let gv = g(theta, &x, &y);
            assert!(gv.abs() <= (fam.problem.envelopes.envelope)(&x, &y) + 1e-12);
            assert!(gv >= (fam.problem.envelopes.lower)(&x, &y) - 1e-12);
        }
    }

    #[test]
    fn auto_grid_spans_bound_range() {
        let problem = quad_problem(0.5, 0.5, 30, 2);
        let bound_at = |t: f64| ulln_tail(&problem, t, 0.0).map(|r| r.bound).unwrap_or(1.0);
        let grid = auto_t_grid(bound_at, 8);
        assert_eq!(grid.len(), 8);
        let b_first = bound_at(grid[0]);
        let b_last = bound_at(grid[grid.len() - 1]);
        assert!((b_first - 1e-3).abs() < 1e-4, "{b_first}");
        assert!((b_last - 0.8).abs() < 0.05, "{b_last}");
    }
}
