//! Bayesian inference under the gamma-Dirichlet prior.
//!
//! The total rate `lambda012` is Gamma(a, b), the rate proportions are
//! Dirichlet(d0, d1, d2), and the shape has a Gamma(a1, b1) prior. Given
//! `alpha` the posterior of the rates is again gamma-Dirichlet, and the
//! marginal posterior of `alpha` is log-concave, so each sweep draws
//! `alpha` exactly and then the rates exactly.

mod alpha;
mod diagnostics;
mod estimators;

use std::io::Write;

use rand::Rng;
use rand_distr::{Distribution, Gamma};
use serde::{Deserialize, Serialize};

pub use alpha::{log_marginal_posterior_alpha, sample_alpha, AlphaSampler};
pub use diagnostics::{gelman_g, gelman_g_standard, run_chains};
pub use estimators::{bayes_estimate, bayes_estimate_values, hpd_interval, HpdWindow, LossSpec, Param};

use crate::censoring::CensoredSample;
use crate::distributions::MobwParams;
use crate::error::{Error, Result};
use crate::likelihood::WeightedTimes;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PriorSpec {
    pub a: f64,
    pub b: f64,
    pub d0: f64,
    pub d1: f64,
    pub d2: f64,
    pub a1: f64,
    pub b1: f64,
}

impl PriorSpec {
    /// Every hyperparameter set to `v`.
    pub fn uniform(v: f64) -> Self {
        PriorSpec {
            a: v,
            b: v,
            d0: v,
            d1: v,
            d2: v,
            a1: v,
            b1: v,
        }
    }

    /// Vague prior used for simulation studies.
    pub fn simulation_default() -> Self {
        Self::uniform(0.001)
    }

    /// Vague prior used for real-data analysis.
    pub fn data_default() -> Self {
        Self::uniform(0.0001)
    }

    pub fn d012(&self) -> f64 {
        self.d0 + self.d1 + self.d2
    }

    pub fn validate(&self) -> Result<()> {
        let all = [self.a, self.b, self.d0, self.d1, self.d2, self.a1, self.b1];
        if all.iter().all(|v| v.is_finite() && *v > 0.0) {
            Ok(())
        } else {
            Err(Error::Domain(format!("hyperparameters must all be > 0, got {all:?}")))
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PosteriorDraws {
    pub draws: Vec<MobwParams>,
    pub burn_in: usize,
    pub seed: Option<u64>,
    /// Accepted alpha proposals over all proposals, burn-in included.
    pub acceptance_rate: f64,
}

impl PosteriorDraws {
    pub fn len(&self) -> usize {
        self.draws.len()
    }

    pub fn is_empty(&self) -> bool {
        self.draws.is_empty()
    }

    pub fn values(&self, param: Param) -> Vec<f64> {
        self.draws.iter().map(|d| param.get(d)).collect()
    }

    /// Trace dump `iter,alpha,lambda0,lambda1,lambda2`; `iter` counts
    /// retained draws from 1.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["iter", "alpha", "lambda0", "lambda1", "lambda2"])?;
        for (i, d) in self.draws.iter().enumerate() {
            w.write_record(&[
                (i + 1).to_string(),
                d.alpha.to_string(),
                d.lambda0.to_string(),
                d.lambda1.to_string(),
                d.lambda2.to_string(),
            ])?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Gamma(shape, 1) on the log scale. Small shapes use
/// `G(k) = G(k + 1) U^(1/k)` so that the log stays finite.
fn log_gamma_variate<R: Rng + ?Sized>(shape: f64, rng: &mut R) -> f64 {
    if shape >= 1.0 {
        let g: f64 = Gamma::new(shape, 1.0).expect("positive shape").sample(rng);
        g.ln()
    } else {
        let g: f64 = Gamma::new(shape + 1.0, 1.0).expect("positive shape").sample(rng);
        let u: f64 = 1.0 - rng.random::<f64>();
        g.ln() + u.ln() / shape
    }
}

fn draw_rates<R: Rng + ?Sized>(wt: &WeightedTimes, prior: &PriorSpec, alpha: f64, rng: &mut R) -> [f64; 3] {
    let m = wt.m as f64;
    let rate = prior.b + wt.a(alpha);
    let total: f64 = Gamma::new(prior.a + m, 1.0 / rate)
        .expect("positive gamma parameters")
        .sample(rng);
    let c = wt.counts;
    let logs = [
        log_gamma_variate(c.m0 as f64 + prior.d0, rng),
        log_gamma_variate(c.m1 as f64 + prior.d1, rng),
        log_gamma_variate(c.m2 as f64 + prior.d2, rng),
    ];
    let top = logs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let norm = top + logs.iter().map(|l| (l - top).exp()).sum::<f64>().ln();
    // Shares that underflow are held at the smallest positive double.
    logs.map(|l| (total * (l - norm).exp()).max(f64::MIN_POSITIVE))
}

/// Draws `(lambda0, lambda1, lambda2)` from the conditional posterior given
/// `alpha`: the total is Gamma(a + m, rate b + A(alpha)) and the proportions
/// `(lambda1, lambda2, lambda0) / total` are Dirichlet(m1 + d1, m2 + d2, m0 + d0).
pub fn sample_lambdas_given_alpha<R: Rng + ?Sized>(
    alpha: f64,
    s: &CensoredSample,
    prior: &PriorSpec,
    rng: &mut R,
) -> Result<[f64; 3]> {
    if !(alpha > 0.0) {
        return Err(Error::Domain(format!("alpha must be > 0, got {alpha}")));
    }
    prior.validate()?;
    Ok(draw_rates(&WeightedTimes::new(s)?, prior, alpha, rng))
}

/// Runs `burn_in + m_draws` sweeps and keeps the last `m_draws`.
pub fn run_gibbs<R: Rng + ?Sized>(
    s: &CensoredSample,
    prior: &PriorSpec,
    m_draws: usize,
    burn_in: usize,
    rng: &mut R,
) -> Result<PosteriorDraws> {
    if m_draws == 0 {
        return Err(Error::Domain("need at least one retained draw".into()));
    }
    let sampler = AlphaSampler::new(s, prior)?;
    let wt = WeightedTimes::new(s)?;
    let mut draws = Vec::with_capacity(m_draws);
    let mut proposals = 0usize;
    for k in 0..burn_in + m_draws {
        let (alpha, tries) = sampler.sample_counted(rng);
        proposals += tries;
        let [lambda0, lambda1, lambda2] = draw_rates(&wt, prior, alpha, rng);
        if k >= burn_in {
            draws.push(MobwParams {
                alpha,
                lambda0,
                lambda1,
                lambda2,
            });
        }
    }
    Ok(PosteriorDraws {
        draws,
        burn_in,
        seed: None,
        acceptance_rate: (burn_in + m_draws) as f64 / proposals as f64,
    })
}
