//! Dependent competing-risks inference for the Marshall-Olkin bivariate
//! Weibull model observed under adaptive Type-II progressive hybrid censoring.
//!
//! * [`distributions`]: latent Weibull triples, joint law, cause probabilities.
//! * [`censoring`]: plans, sample generation, masking, CSV IO.
//! * [`likelihood`]: log-likelihood, MLE, observed Fisher matrix, ACIs.
//! * [`bayes`]: Gibbs sampler, Bayes estimators, HPD intervals, diagnostics.
//! * [`experiments`]: Monte Carlo studies and plan optimality.
//! * [`data`] and [`gof`]: bundled soccer data and goodness of fit.

pub mod bayes;
pub mod censoring;
pub mod data;
pub mod distributions;
pub mod error;
pub mod experiments;
pub mod gof;
pub mod likelihood;

pub use censoring::{CensoredSample, CensoringPlan, CauseCounts};
pub use distributions::{Cause, MobwParams};
pub use error::{Error, Result};

pub use rand_chacha::ChaCha8Rng;

/// The generator used throughout: ChaCha8 keyed by a 64-bit seed.
pub fn seeded_rng(seed: u64) -> ChaCha8Rng {
    use rand::SeedableRng;
    ChaCha8Rng::seed_from_u64(seed)
}
