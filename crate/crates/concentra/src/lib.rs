//! # concentra
//!
//! A desk-scale numerical toolkit for explicit concentration inequalities built
//! from centered-MGF exponent bounds ("ξ functions"), together with the
//! machinery needed to instantiate and *empirically certify* them:
//!
//! - [`xi`] — ξ functions, Legendre-type suprema `sup_λ {λt − ξ(λ)}`, and the
//!   generalized bounded-mean-difference tail bound they induce.
//! - [`orlicz`] — Luxemburg (Orlicz) norm estimation and the `Ψ_q`-series MGF
//!   envelopes for sub-Gaussian / sub-exponential tails.
//! - [`complexity`] — empirical Rademacher complexity, covering numbers, the
//!   entropy-integral (Dudley) bound with sample-dependent Lipschitz constants,
//!   and the sample-reuse mean constant `C_{n,m}`.
//! - [`ulln`] — uniform-law-of-large-numbers and stochastic-optimization tail
//!   bounds with sample reuse (`ξ_X(λ) + m·ξ_Y(λ/m)`).
//! - [`dsm`] — denoising score matching end to end: noise schedule, exact
//!   linear-model training, true-score oracle, the full constant ledger, and
//!   the DSM concentration certificate.
//! - [`gan`] — linear-family IPM GANs: dual-norm IPM, empirical training, and
//!   the GAN mean/tail bounds.
//! - [`mc`] — seeded samplers and the Monte-Carlo falsification harness with
//!   exact (Clopper–Pearson) binomial confidence limits.
//!
//! All computations are pure functions of their inputs; Monte-Carlo work uses
//! counter-based per-trial seeding so results are bit-identical regardless of
//! how trials are scheduled across workers.

pub mod complexity;
pub mod dsm;
pub mod error;
pub mod gan;
pub mod mc;
pub(crate) mod numeric;
pub mod orlicz;
pub mod ulln;
pub mod xi;

pub use error::{Error, Result};
