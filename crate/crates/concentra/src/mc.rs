//! Seeded distribution samplers and the Monte-Carlo falsification harness.
//!
//! Every random quantity in the crate flows through [`trial_rng`], a
//! counter-based construction `(seed, stream, counter) → ChaCha8`: trial `i`
//! is reproducible in isolation, so results are bit-identical for any number
//! of workers and any scheduling order.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use statrs::distribution::{Beta, ContinuousCDF};

use crate::error::{Error, Result};
use crate::xi::TailReport;

fn splitmix64(state: &mut u64) -> u64 {
    *state = state.wrapping_add(0x9E37_79B9_7F4A_7C15);
    let mut z = *state;
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Deterministic per-trial RNG keyed by `(seed, stream, counter)`.
pub fn trial_rng(seed: u64, stream: u64, counter: u64) -> ChaCha8Rng {
    let mut state = seed
        ^ stream.wrapping_mul(0xA076_1D64_78BD_642F)
        ^ counter.wrapping_mul(0xE703_7ED1_A0B4_28DB);
    let mut key = [0u8; 32];
    for chunk in key.chunks_exact_mut(8) {
        chunk.copy_from_slice(&splitmix64(&mut state).to_le_bytes());
    }
    ChaCha8Rng::from_seed(key)
}

/// Stream identifiers; distinct sub-experiments draw from distinct streams so
/// adding one never perturbs another.
pub mod streams {
    pub const X_SAMPLES: u64 = 1;
    pub const Y_SAMPLES: u64 = 2;
    pub const RADEMACHER: u64 = 3;
    pub const ENVELOPE: u64 = 4;
    pub const NORM_CALIBRATION: u64 = 5;
    pub const GENERIC: u64 = 6;
}

/// Distribution selectors for the sampling side of the certificates.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum SamplerKind {
    /// Point-mass mixture on the given atoms.
    Mixture {
        atoms: Vec<Vec<f64>>,
        weights: Vec<f64>,
    },
    /// Standard Gaussian on ℝ^dim.
    Gaussian { dim: usize },
    /// Standard Gaussian conditioned on `‖y‖ ≤ radius` (rejection sampling).
    TruncatedGaussian { dim: usize, radius: f64 },
    /// Exponential with the given rate, on [0, ∞).
    Exponential { rate: f64 },
    /// Pareto with scale 1: density `shape · y^{-shape-1}` on [1, ∞).
    Pareto { shape: f64 },
}

impl SamplerKind {
    pub fn validate(&self) -> Result<()> {
        match self {
            SamplerKind::Mixture { atoms, weights } => {
                if atoms.is_empty() || atoms.len() != weights.len() {
                    return Err(Error::invalid("mixture", "atoms/weights empty or mismatched"));
                }
                if weights.iter().any(|w| *w <= 0.0) {
                    return Err(Error::invalid("mixture", "weights must be positive"));
                }
                let s: f64 = weights.iter().sum();
                if (s - 1.0).abs() > 1e-9 {
                    return Err(Error::invalid("mixture", format!("weights sum to {s}, not 1")));
                }
                let d = atoms[0].len();
                if atoms.iter().any(|a| a.len() != d) {
                    return Err(Error::invalid("mixture", "atoms have mixed dimensions"));
                }
                Ok(())
            }
            SamplerKind::Gaussian { dim } => {
                if *dim == 0 {
                    return Err(Error::invalid("dim", "must be >= 1"));
                }
                Ok(())
            }
            SamplerKind::TruncatedGaussian { dim, radius } => {
                if *dim == 0 || !(*radius > 0.0) {
                    return Err(Error::invalid("truncated_gaussian", "need dim >= 1 and radius > 0"));
                }
                Ok(())
            }
            SamplerKind::Exponential { rate } => {
                if !(*rate > 0.0) {
                    return Err(Error::invalid("rate", "must be > 0"));
                }
                Ok(())
            }
            SamplerKind::Pareto { shape } => {
                if !(*shape > 0.0) {
                    return Err(Error::invalid("shape", "must be > 0"));
                }
                Ok(())
            }
        }
    }

    pub fn dim(&self) -> usize {
        match self {
            SamplerKind::Mixture { atoms, .. } => atoms[0].len(),
            SamplerKind::Gaussian { dim } | SamplerKind::TruncatedGaussian { dim, .. } => *dim,
            SamplerKind::Exponential { .. } | SamplerKind::Pareto { .. } => 1,
        }
    }

    /// Draws one point.
    pub fn sample(&self, rng: &mut ChaCha8Rng) -> Vec<f64> {
        match self {
            SamplerKind::Mixture { atoms, weights } => {
                let u: f64 = rng.gen();
                let mut acc = 0.0;
                for (atom, w) in atoms.iter().zip(weights) {
                    acc += w;
                    if u <= acc {
                        return atom.clone();
                    }
                }
                atoms.last().expect("nonempty").clone()
            }
            SamplerKind::Gaussian { dim } => standard_normal_vec(rng, *dim),
            SamplerKind::TruncatedGaussian { dim, radius } => loop {
                let y = standard_normal_vec(rng, *dim);
                if y.iter().map(|v| v * v).sum::<f64>().sqrt() <= *radius {
                    return y;
                }
            },
            SamplerKind::Exponential { rate } => {
                let u: f64 = rng.gen::<f64>().max(f64::MIN_POSITIVE);
                vec![-u.ln() / rate]
            }
            SamplerKind::Pareto { shape } => {
                let u: f64 = rng.gen::<f64>().max(f64::MIN_POSITIVE);
                vec![u.powf(-1.0 / shape)]
            }
        }
    }

    /// Closed-form `E[‖Y‖^p]` where available.
    pub fn norm_moment(&self, p: f64) -> Option<f64> {
        match self {
            SamplerKind::Mixture { atoms, weights } => Some(
                atoms
                    .iter()
                    .zip(weights)
                    .map(|(a, w)| w * crate::numeric::norm2(a).powf(p))
                    .sum(),
            ),
            SamplerKind::Gaussian { dim } => {
                Some(crate::complexity::gaussian_norm_moment(*dim as u32, p).ok()?)
            }
            SamplerKind::TruncatedGaussian { .. } => None,
            SamplerKind::Exponential { rate } => {
                Some(statrs::function::gamma::gamma(p + 1.0) / rate.powf(p))
            }
            SamplerKind::Pareto { shape } => {
                if p < *shape {
                    Some(shape / (shape - p))
                } else {
                    None
                }
            }
        }
    }

    /// Closed-form coordinate-wise mean where available.
    pub fn mean(&self) -> Option<Vec<f64>> {
        match self {
            SamplerKind::Mixture { atoms, weights } => {
                let d = atoms[0].len();
                let mut m = vec![0.0; d];
                for (a, w) in atoms.iter().zip(weights) {
                    for (mi, ai) in m.iter_mut().zip(a) {
                        *mi += w * ai;
                    }
                }
                Some(m)
            }
            SamplerKind::Gaussian { dim } | SamplerKind::TruncatedGaussian { dim, .. } => {
                Some(vec![0.0; *dim])
            }
            SamplerKind::Exponential { rate } => Some(vec![1.0 / rate]),
            SamplerKind::Pareto { shape } => {
                if *shape > 1.0 {
                    Some(vec![shape / (shape - 1.0)])
                } else {
                    None
                }
            }
        }
    }
}

fn standard_normal_vec(rng: &mut ChaCha8Rng, dim: usize) -> Vec<f64> {
    // Box-Muller; one pair of uniforms per pair of coordinates.
    let mut out = Vec::with_capacity(dim);
    while out.len() < dim {
        let u1: f64 = rng.gen::<f64>().max(f64::MIN_POSITIVE);
        let u2: f64 = rng.gen();
        let r = (-2.0 * u1.ln()).sqrt();
        let phi = 2.0 * std::f64::consts::PI * u2;
        out.push(r * phi.cos());
        if out.len() < dim {
            out.push(r * phi.sin());
        }
    }
    out
}

/// Exact (Clopper–Pearson) one-sided upper confidence limit for a binomial
/// proportion at the given confidence level.
pub fn binomial_upper_cl(successes: u64, trials: u64, confidence: f64) -> Result<f64> {
    check_counts(successes, trials, confidence)?;
    if successes == trials {
        return Ok(1.0);
    }
    let alpha = 1.0 - confidence;
    if successes == 0 {
        return Ok(1.0 - alpha.powf(1.0 / trials as f64));
    }
    let beta = Beta::new((successes + 1) as f64, (trials - successes) as f64)
        .map_err(|e| Error::Numeric(format!("beta distribution: {e}")))?;
    Ok(beta.inverse_cdf(confidence))
}

/// Exact one-sided lower confidence limit.
pub fn binomial_lower_cl(successes: u64, trials: u64, confidence: f64) -> Result<f64> {
    check_counts(successes, trials, confidence)?;
    if successes == 0 {
        return Ok(0.0);
    }
    let alpha = 1.0 - confidence;
    if successes == trials {
        return Ok(alpha.powf(1.0 / trials as f64));
    }
    let beta = Beta::new(successes as f64, (trials - successes + 1) as f64)
        .map_err(|e| Error::Numeric(format!("beta distribution: {e}")))?;
    Ok(beta.inverse_cdf(alpha))
}

fn check_counts(successes: u64, trials: u64, confidence: f64) -> Result<()> {
    if trials == 0 {
        return Err(Error::invalid("trials", "must be >= 1"));
    }
    if successes > trials {
        return Err(Error::invalid("successes", "exceeds trials"));
    }
    if !(confidence > 0.0 && confidence < 1.0) {
        return Err(Error::invalid("confidence", "must be in (0, 1)"));
    }
    Ok(())
}

/// Verdict of a Monte-Carlo certification run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Certified,
    Violated,
    Inconclusive,
}

impl std::fmt::Display for Verdict {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Verdict::Certified => write!(f, "certified"),
            Verdict::Violated => write!(f, "violated"),
            Verdict::Inconclusive => write!(f, "inconclusive"),
        }
    }
}

/// Tail-frequency estimate with exact binomial confidence limits against a
/// theoretical bound.
#[derive(Debug, Clone, Serialize)]
pub struct McReport {
    pub trials: u64,
    pub successes: u64,
    pub p_hat: f64,
    pub upper_cl: f64,
    pub lower_cl: f64,
    pub bound: f64,
    pub confidence: f64,
    pub verdict: Verdict,
}

/// Builds a certification report from event counts.
///
/// `violated` requires the *lower* confidence limit to exceed the bound; a
/// bound of at least 1 is trivially certified; bounds in [0.9, 1) are treated
/// as vacuous and reported inconclusive rather than certified.
pub fn certify_counts(successes: u64, trials: u64, bound: f64, confidence: f64) -> Result<McReport> {
    let upper_cl = binomial_upper_cl(successes, trials, confidence)?;
    let lower_cl = binomial_lower_cl(successes, trials, confidence)?;
    let p_hat = successes as f64 / trials as f64;
    let verdict = if lower_cl > bound {
        Verdict::Violated
    } else if bound >= 1.0 {
        Verdict::Certified
    } else if bound >= 0.9 {
        Verdict::Inconclusive
    } else if upper_cl <= bound {
        Verdict::Certified
    } else {
        Verdict::Inconclusive
    };
    Ok(McReport {
        trials,
        successes,
        p_hat,
        upper_cl,
        lower_cl,
        bound: bound.min(1.0),
        confidence,
        verdict,
    })
}

/// Runs a seeded event evaluator over `trials` independent trials and checks
/// the observed frequency against `bound.bound`.
pub fn certify(
    event: impl Fn(u64) -> bool + Sync,
    trials: u64,
    bound: &TailReport,
    confidence: f64,
    workers: Option<usize>,
) -> Result<McReport> {
    let outcomes = run_indexed(trials, workers, |i| event(i));
    let successes = outcomes.iter().filter(|b| **b).count() as u64;
    certify_counts(successes, trials, bound.bound, confidence)
}

/// Maps `f` over trial indices `0..trials` in parallel, preserving trial
/// order in the output. The result is identical for every worker count.
pub fn run_indexed<T: Send>(trials: u64, workers: Option<usize>, f: impl Fn(u64) -> T + Sync) -> Vec<T> {
    use rayon::prelude::*;
    let run = || (0..trials).into_par_iter().map(&f).collect();
    match workers {
        Some(w) => rayon::ThreadPoolBuilder::new()
            .num_threads(w.max(1))
            .build()
            .expect("thread pool")
            .install(run),
        None => run(),
    }
}
