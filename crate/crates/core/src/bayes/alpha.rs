//! Marginal posterior of the shape parameter and an exact sampler for it.
//!
//! The density is log-concave, so draws come from Devroye's rejection
//! scheme: with `M` the normalised density at its mode, the density is
//! dominated by `M min(1, exp(1 - M |x - mode|))`, an envelope of total mass 4.

use rand::Rng;

use super::PriorSpec;
use crate::censoring::CensoredSample;
use crate::error::{Error, Result};
use crate::likelihood::{WeightedTimes, ALPHA_BRACKET};

/// Unnormalised log marginal posterior of `alpha`:
/// `(m + a1 - 1) log alpha - alpha (b1 - sum log y) - (a + m) log(b + A(alpha))`.
pub fn log_marginal_posterior_alpha(alpha: f64, s: &CensoredSample, prior: &PriorSpec) -> Result<f64> {
    if !(alpha > 0.0) {
        return Err(Error::Domain(format!("alpha must be > 0, got {alpha}")));
    }
    prior.validate()?;
    Ok(AlphaTarget::new(WeightedTimes::new(s)?, prior).log_density(alpha))
}

#[derive(Debug, Clone)]
pub(crate) struct AlphaTarget {
    pub(crate) wt: WeightedTimes,
    shape: f64,
    rate: f64,
    gamma_shape: f64,
    gamma_rate: f64,
}

impl AlphaTarget {
    pub(crate) fn new(wt: WeightedTimes, prior: &PriorSpec) -> Self {
        let m = wt.m as f64;
        AlphaTarget {
            shape: m + prior.a1 - 1.0,
            rate: prior.b1 - wt.sum_log,
            gamma_shape: prior.a + m,
            gamma_rate: prior.b,
            wt,
        }
    }

    pub(crate) fn log_density(&self, alpha: f64) -> f64 {
        let a = self.wt.a(alpha);
        self.shape * alpha.ln() - alpha * self.rate - self.gamma_shape * (self.gamma_rate + a).ln()
    }

    /// First and second derivatives.
    fn derivatives(&self, alpha: f64) -> (f64, f64) {
        let f = self.wt.functionals(alpha);
        let d = self.gamma_rate + f.a;
        let d1 = self.shape / alpha - self.rate - self.gamma_shape * f.a_prime / d;
        let d2 = -self.shape / (alpha * alpha)
            - self.gamma_shape * (d * f.a_double_prime - f.a_prime * f.a_prime) / (d * d);
        (d1, d2)
    }

    /// Safeguarded Newton on the derivative, bisection when a step leaves
    /// the current bracket.
    fn mode(&self) -> Result<f64> {
        let (mut lo, mut hi) = ALPHA_BRACKET;
        while self.derivatives(hi).0 > 0.0 {
            hi *= 2.0;
            if hi > 1e4 {
                return Err(Error::Sampler(format!(
                    "posterior mode of alpha lies beyond {hi}; derivative still positive"
                )));
            }
        }
        if self.derivatives(lo).0 < 0.0 {
            return Err(Error::Sampler(format!(
                "posterior mode of alpha lies below {lo}"
            )));
        }
        let mut x = 1.0f64.clamp(lo, hi);
        let mut trace = Vec::new();
        for _ in 0..200 {
            let (d1, d2) = self.derivatives(x);
            trace.push(x);
            if d1.abs() < 1e-10 {
                return Ok(x);
            }
            if d1 > 0.0 {
                lo = x;
            } else {
                hi = x;
            }
            let newton = x - d1 / d2;
            x = if newton > lo && newton < hi && d2 < 0.0 {
                newton
            } else {
                0.5 * (lo + hi)
            };
            if hi - lo < 1e-14 * hi {
                return Ok(x);
            }
        }
        Err(Error::Sampler(format!(
            "mode search did not converge; last iterates {:?}",
            &trace[trace.len().saturating_sub(5)..]
        )))
    }
}

/// Checks that the log density has non-positive curvature across a grid
/// spanning the bulk of the posterior.
pub(crate) fn check_log_concavity(target: &AlphaTarget, mode: f64, scale: f64) -> Result<()> {
    let lo = (mode - 12.0 * scale).max(1e-6);
    let hi = mode + 12.0 * scale;
    for i in 0..=64 {
        let x = lo + (hi - lo) * i as f64 / 64.0;
        let (_, d2) = target.derivatives(x);
        if d2 > 1e-9 {
            return Err(Error::Sampler(format!(
                "log marginal posterior of alpha is not concave at {x} (second derivative {d2})"
            )));
        }
    }
    Ok(())
}

/// Exact sampler for the marginal posterior of `alpha`.
#[derive(Debug, Clone)]
pub struct AlphaSampler {
    target: AlphaTarget,
    mode: f64,
    log_peak: f64,
    /// Lower bound on the normalised density at the mode.
    peak_density: f64,
}

impl AlphaSampler {
    pub fn new(s: &CensoredSample, prior: &PriorSpec) -> Result<Self> {
        prior.validate()?;
        Self::from_target(AlphaTarget::new(WeightedTimes::new(s)?, prior))
    }

    pub(crate) fn from_target(target: AlphaTarget) -> Result<Self> {
        let mode = target.mode()?;
        let (_, d2) = target.derivatives(mode);
        let scale = 1.0 / (-d2).sqrt();
        check_log_concavity(&target, mode, scale)?;
        let log_peak = target.log_density(mode);
        let z = normalising_constant(&target, mode, log_peak, scale);
        // Underestimating the peak density only widens the envelope.
        let peak_density = 1.0 / (z * (1.0 + 1e-6));
        Ok(AlphaSampler {
            target,
            mode,
            log_peak,
            peak_density,
        })
    }

    pub fn mode(&self) -> f64 {
        self.mode
    }

    /// Normalised marginal density.
    pub fn density(&self, alpha: f64) -> f64 {
        if alpha <= 0.0 {
            return 0.0;
        }
        self.peak_density * (self.target.log_density(alpha) - self.log_peak).exp()
    }

    /// One draw and the number of proposals it took.
    pub fn sample_counted<R: Rng + ?Sized>(&self, rng: &mut R) -> (f64, usize) {
        let mut tries = 0;
        loop {
            tries += 1;
            let u = 2.0 * rng.random::<f64>();
            let v: f64 = rng.random();
            let (x, z) = if u <= 1.0 {
                (u, v)
            } else {
                let tail = u - 1.0;
                if tail == 0.0 {
                    continue;
                }
                (1.0 - tail.ln(), v * tail)
            };
            let sign = if rng.random::<bool>() { 1.0 } else { -1.0 };
            let alpha = self.mode + sign * x / self.peak_density;
            if alpha <= 0.0 {
                continue;
            }
            if z.ln() <= self.target.log_density(alpha) - self.log_peak {
                return (alpha, tries);
            }
        }
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        self.sample_counted(rng).0
    }
}

/// `int_0^inf exp(log_density - log_peak)` by composite Simpson over the
/// region where the integrand exceeds 1e-300.
fn normalising_constant(target: &AlphaTarget, mode: f64, log_peak: f64, scale: f64) -> f64 {
    let rel = |x: f64| target.log_density(x) - log_peak;
    let cutoff = -690.0;
    let mut hi = mode + scale;
    while rel(hi) > cutoff {
        hi = mode + 2.0 * (hi - mode);
    }
    let mut lo = (mode - scale).max(0.0);
    while lo > 0.0 && rel(lo) > cutoff {
        lo = (mode - 2.0 * (mode - lo)).max(0.0);
    }
    let n = 4000;
    let h = (hi - lo) / n as f64;
    let f = |x: f64| if x <= 0.0 { 0.0 } else { rel(x).exp() };
    let mut acc = f(lo) + f(hi);
    for i in 1..n {
        let w = if i % 2 == 1 { 4.0 } else { 2.0 };
        acc += w * f(lo + i as f64 * h);
    }
    acc * h / 3.0
}

/// Single draw from the marginal posterior of `alpha`.
pub fn sample_alpha<R: Rng + ?Sized>(s: &CensoredSample, prior: &PriorSpec, rng: &mut R) -> Result<f64> {
    Ok(AlphaSampler::new(s, prior)?.sample(rng))
}
