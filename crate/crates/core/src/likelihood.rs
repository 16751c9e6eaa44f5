//! Log-likelihood, profile fixed-point MLE, observed Fisher information
//! and Wald-type approximate confidence intervals.
//!
//! Every quantity depends on the data through the cause counts, `sum log y_i`
//! and the weighted power sum `A(alpha) = sum_i w_i y_i^alpha`, where `w_i`
//! counts the failure plus the units withdrawn at it.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};

use crate::censoring::{CauseCounts, CensoredSample};
use crate::distributions::MobwParams;
use crate::error::{Error, Result};

pub type Matrix4 = [[f64; 4]; 4];

/// `A(alpha)` and its first two derivatives.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AlphaFunctionals {
    pub a: f64,
    pub a_prime: f64,
    pub a_double_prime: f64,
}

/// Precomputed sufficient statistics of a sample.
#[derive(Debug, Clone)]
pub struct WeightedTimes {
    log_times: Vec<f64>,
    weights: Vec<f64>,
    pub sum_log: f64,
    pub m: usize,
    pub counts: CauseCounts,
}

impl WeightedTimes {
    pub fn new(s: &CensoredSample) -> Result<Self> {
        if s.m() == 0 {
            return Err(Error::InvalidSample("empty sample".into()));
        }
        let log_times: Vec<f64> = s.times.iter().map(|t| t.ln()).collect();
        Ok(WeightedTimes {
            sum_log: log_times.iter().sum(),
            log_times,
            weights: s.weights(),
            m: s.m(),
            counts: s.counts(),
        })
    }

    pub fn a(&self, alpha: f64) -> f64 {
        self.log_times
            .iter()
            .zip(&self.weights)
            .map(|(l, w)| w * (alpha * l).exp())
            .sum()
    }

    /// `A(alpha)` and `A'(alpha)` in one pass.
    pub fn a_and_prime(&self, alpha: f64) -> (f64, f64) {
        let mut a = 0.0;
        let mut a1 = 0.0;
        for (l, w) in self.log_times.iter().zip(&self.weights) {
            let t = w * (alpha * l).exp();
            a += t;
            a1 += t * l;
        }
        (a, a1)
    }

    pub fn functionals(&self, alpha: f64) -> AlphaFunctionals {
        let mut f = AlphaFunctionals {
            a: 0.0,
            a_prime: 0.0,
            a_double_prime: 0.0,
        };
        for (l, w) in self.log_times.iter().zip(&self.weights) {
            let t = w * (alpha * l).exp();
            f.a += t;
            f.a_prime += t * l;
            f.a_double_prime += t * l * l;
        }
        f
    }

    /// Derivative of the profile log-likelihood in `alpha`:
    /// `m / alpha + sum log y - m A'(alpha) / A(alpha)`. Strictly decreasing.
    pub fn profile_score(&self, alpha: f64) -> f64 {
        let (a, a1) = self.a_and_prime(alpha);
        let m = self.m as f64;
        m / alpha + self.sum_log - m * a1 / a
    }

    /// Profile log-likelihood of `alpha` with the rates at their conditional MLE.
    pub fn profile_log_likelihood(&self, alpha: f64) -> Result<f64> {
        let lambdas = self.conditional_lambdas(alpha)?.lambdas;
        let p = MobwParams {
            alpha,
            lambda0: lambdas[0],
            lambda1: lambdas[1],
            lambda2: lambdas[2],
        };
        Ok(self.log_likelihood(&p))
    }

    fn conditional_lambdas(&self, alpha: f64) -> Result<ConditionalLambdas> {
        let m012 = self.counts.m012();
        if m012 == 0 {
            return Err(Error::NonIdentifiable(
                "all failure causes are masked (m012 = 0)".into(),
            ));
        }
        let total = self.m as f64 / self.a(alpha);
        let ids = self.counts.identified();
        let lambdas = ids.map(|mj| mj as f64 / m012 as f64 * total);
        Ok(ConditionalLambdas {
            lambdas,
            boundary: ids.iter().any(|&mj| mj == 0),
        })
    }

    pub fn log_likelihood(&self, p: &MobwParams) -> f64 {
        let c = &self.counts;
        let term = |mj: usize, lambda: f64| {
            if mj == 0 {
                0.0
            } else {
                mj as f64 * lambda.ln()
            }
        };
        let l012 = p.lambda012();
        self.m as f64 * p.alpha.ln()
            + term(c.m0, p.lambda0)
            + term(c.m1, p.lambda1)
            + term(c.m2, p.lambda2)
            + term(c.m3, l012)
            + (p.alpha - 1.0) * self.sum_log
            - l012 * self.a(p.alpha)
    }
}

pub fn alpha_functionals(s: &CensoredSample, alpha: f64) -> Result<AlphaFunctionals> {
    Ok(WeightedTimes::new(s)?.functionals(alpha))
}

/// Log-likelihood without the parameter-free constant. A zero rate with
/// failures attributed to it gives `-inf`.
pub fn log_likelihood(p: &MobwParams, s: &CensoredSample) -> Result<f64> {
    p.validate()?;
    Ok(WeightedTimes::new(s)?.log_likelihood(p))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConditionalLambdas {
    /// `(lambda0, lambda1, lambda2)`.
    pub lambdas: [f64; 3],
    /// Some identified cause was never observed, so its rate sits at 0.
    pub boundary: bool,
}

/// Rates maximising the likelihood for fixed `alpha`:
/// `lambda_j = m_j / m012 * m / A(alpha)`.
pub fn conditional_lambda_mle(
    alpha: f64,
    counts: &CauseCounts,
    s: &CensoredSample,
) -> Result<ConditionalLambdas> {
    let mut wt = WeightedTimes::new(s)?;
    wt.counts = *counts;
    wt.conditional_lambdas(alpha)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AlphaSolution {
    pub alpha: f64,
    pub iterations: usize,
    pub converged: bool,
    /// The fixed-point map failed and bisection on the profile score was used.
    pub used_bisection: bool,
}

pub const ALPHA_BRACKET: (f64, f64) = (1e-4, 50.0);

/// Solves `alpha = h(alpha)` with
/// `h(alpha) = m / (m A'(alpha) / A(alpha) - sum log y)`, stopping once
/// successive iterates differ by less than `eps`. Falls back to bisection
/// on the profile score over [`ALPHA_BRACKET`] if the map leaves the
/// bracket or exhausts `max_iter`.
pub fn solve_alpha_fixed_point(
    s: &CensoredSample,
    alpha0: f64,
    eps: f64,
    max_iter: usize,
) -> Result<AlphaSolution> {
    solve_alpha(&WeightedTimes::new(s)?, alpha0, eps, max_iter)
}

fn solve_alpha(wt: &WeightedTimes, alpha0: f64, eps: f64, max_iter: usize) -> Result<AlphaSolution> {
    if !(alpha0 > 0.0) || !(eps > 0.0) {
        return Err(Error::Domain("alpha0 and eps must be > 0".into()));
    }
    let m = wt.m as f64;
    let (lo, hi) = ALPHA_BRACKET;
    let mut trace = Vec::new();
    let mut alpha = alpha0;
    for k in 1..=max_iter {
        let (a, a1) = wt.a_and_prime(alpha);
        let denom = m * a1 / a - wt.sum_log;
        let next = m / denom;
        trace.push(next);
        if !(next.is_finite() && next > 0.0 && next <= hi) {
            break;
        }
        if (next - alpha).abs() < eps {
            return Ok(AlphaSolution {
                alpha: polish_root(wt, next),
                iterations: k,
                converged: true,
                used_bisection: false,
            });
        }
        alpha = next;
    }

    let (mut a, mut b) = (lo, hi);
    let (fa, fb) = (wt.profile_score(a), wt.profile_score(b));
    if !(fa > 0.0 && fb < 0.0) {
        let tail = trace.iter().rev().take(10).rev().copied().collect();
        return Err(Error::NoConvergence {
            iterations: trace.len(),
            trace: tail,
        });
    }
    let mut iterations = trace.len();
    while b - a > 1e-13 * b.max(1.0) {
        let mid = 0.5 * (a + b);
        if wt.profile_score(mid) > 0.0 {
            a = mid;
        } else {
            b = mid;
        }
        iterations += 1;
    }
    Ok(AlphaSolution {
        alpha: 0.5 * (a + b),
        iterations,
        converged: true,
        used_bisection: true,
    })
}

/// A few Newton steps on the profile score. The fixed-point stopping rule
/// bounds the step size, not the residual, and the map can contract slowly.
fn polish_root(wt: &WeightedTimes, alpha: f64) -> f64 {
    let m = wt.m as f64;
    let mut x = alpha;
    for _ in 0..8 {
        let f = wt.functionals(x);
        let score = m / x + wt.sum_log - m * f.a_prime / f.a;
        let slope = -m / (x * x) - m * (f.a * f.a_double_prime - f.a_prime * f.a_prime) / (f.a * f.a);
        let step = score / slope;
        let next = x - step;
        if !(next.is_finite() && next > 0.0) || (next - x).abs() > 0.1 * x {
            break;
        }
        x = next;
        if step.abs() < 1e-15 * x {
            break;
        }
    }
    x
}

/// Initial shape guess from a least-squares fit of
/// `log(-log S(y))` on `log y`, with `S` the product-limit estimate that
/// accounts for progressive withdrawals.
pub fn regression_initial_alpha(s: &CensoredSample) -> Option<f64> {
    let mut at_risk = s.n as f64;
    let mut surv = 1.0;
    let mut pts = Vec::new();
    let w = s.weights();
    for (t, wi) in s.times.iter().zip(&w) {
        surv *= 1.0 - 1.0 / at_risk;
        at_risk -= wi;
        if surv > 0.0 && surv < 1.0 {
            pts.push((t.ln(), (-surv.ln()).ln()));
        }
    }
    if pts.len() < 2 {
        return None;
    }
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let slope = sxy / sxx;
    (slope.is_finite() && slope > 0.0).then_some(slope)
}

/// Observed Fisher information in `(lambda0, lambda1, lambda2, alpha)` order.
pub fn observed_fisher(p: &MobwParams, s: &CensoredSample) -> Result<Matrix4> {
    p.validate()?;
    if !(p.lambda0 > 0.0) {
        return Err(Error::Domain("observed Fisher needs lambda0 > 0".into()));
    }
    Ok(fisher_from(&WeightedTimes::new(s)?, p))
}

fn fisher_from(wt: &WeightedTimes, p: &MobwParams) -> Matrix4 {
    let c = wt.counts;
    let l012 = p.lambda012();
    let cross = c.m3 as f64 / (l012 * l012);
    let f = wt.functionals(p.alpha);
    let lam = [p.lambda0, p.lambda1, p.lambda2];
    let ids = c.identified();
    let mut out = [[0.0; 4]; 4];
    for i in 0..3 {
        for j in 0..3 {
            out[i][j] = cross;
        }
        out[i][i] += if ids[i] == 0 {
            0.0
        } else {
            ids[i] as f64 / (lam[i] * lam[i])
        };
        out[i][3] = f.a_prime;
        out[3][i] = f.a_prime;
    }
    out[3][3] = wt.m as f64 / (p.alpha * p.alpha) + l012 * f.a_double_prime;
    out
}

/// How the shape iteration is started.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum AlphaStart {
    Fixed(f64),
    /// [`regression_initial_alpha`], falling back to 1.0.
    Regression,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MleConfig {
    pub alpha_start: AlphaStart,
    pub eps: f64,
    pub max_iter: usize,
    /// Significance level; intervals have nominal coverage `1 - gamma`.
    pub gamma: f64,
    /// Clip lower interval endpoints at zero.
    pub truncate_at_zero: bool,
}

impl Default for MleConfig {
    fn default() -> Self {
        MleConfig {
            alpha_start: AlphaStart::Fixed(1.0),
            eps: 1e-6,
            max_iter: 1000,
            gamma: 0.05,
            truncate_at_zero: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Interval {
    pub lower: f64,
    pub upper: f64,
}

impl Interval {
    pub fn width(&self) -> f64 {
        self.upper - self.lower
    }

    pub fn contains(&self, v: f64) -> bool {
        self.lower <= v && v <= self.upper
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitResult {
    pub estimates: MobwParams,
    /// Observed information, `(lambda0, lambda1, lambda2, alpha)` order.
    pub fisher: Matrix4,
    /// Inverse of the Fisher matrix restricted to the active coordinates;
    /// rows and columns of boundary coordinates are zero.
    pub covariance: Matrix4,
    /// Same order as `fisher`; `None` for boundary coordinates.
    pub intervals: [Option<Interval>; 4],
    pub gamma: f64,
    pub z: f64,
    pub iterations: usize,
    pub converged: bool,
    pub used_bisection: bool,
    /// Coordinates whose estimate is interior.
    pub active: [bool; 4],
    /// 2-norm condition number of the active Fisher block.
    pub condition_number: f64,
    pub warnings: Vec<String>,
}

/// Upper `gamma / 2` standard-normal quantile.
pub fn z_quantile(gamma: f64) -> Result<f64> {
    if !(gamma > 0.0 && gamma < 1.0) {
        return Err(Error::Domain(format!("gamma must lie in (0, 1), got {gamma}")));
    }
    let normal = Normal::new(0.0, 1.0).expect("standard normal");
    Ok(normal.inverse_cdf(1.0 - gamma / 2.0))
}

pub fn fit_mle(s: &CensoredSample, cfg: &MleConfig) -> Result<FitResult> {
    if s.m() < 2 {
        return Err(Error::InvalidSample(format!("need m >= 2, got {}", s.m())));
    }
    let wt = WeightedTimes::new(s)?;
    let alpha0 = match cfg.alpha_start {
        AlphaStart::Fixed(a) => a,
        AlphaStart::Regression => regression_initial_alpha(s).unwrap_or(1.0),
    };
    let sol = solve_alpha(&wt, alpha0, cfg.eps, cfg.max_iter)?;
    let cond = wt.conditional_lambdas(sol.alpha)?;
    let [l0, l1, l2] = cond.lambdas;
    let estimates = MobwParams {
        alpha: sol.alpha,
        lambda0: l0,
        lambda1: l1,
        lambda2: l2,
    };
    let fisher = fisher_from(&wt, &estimates);
    let theta = estimates.to_array();
    let active = [l0 > 0.0, l1 > 0.0, l2 > 0.0, true];
    let mut warnings = Vec::new();
    if cond.boundary {
        warnings.push(
            "some cause was never observed; its rate is 0 and intervals use the remaining sub-block"
                .to_string(),
        );
    }

    let idx: Vec<usize> = (0..4).filter(|&i| active[i]).collect();
    let k = idx.len();
    let sub = DMatrix::from_fn(k, k, |r, c| fisher[idx[r]][idx[c]]);
    let inv = sub
        .clone()
        .try_inverse()
        .ok_or_else(|| Error::Singular("observed Fisher information is singular".into()))?;
    let sv = sub.singular_values();
    let condition_number = sv.max() / sv.min();

    let z = z_quantile(cfg.gamma)?;
    let mut covariance = [[0.0; 4]; 4];
    let mut intervals: [Option<Interval>; 4] = [None, None, None, None];
    for (r, &i) in idx.iter().enumerate() {
        for (c, &j) in idx.iter().enumerate() {
            covariance[i][j] = inv[(r, c)];
        }
        let var = inv[(r, r)];
        if !(var > 0.0) {
            warnings.push(format!("non-positive variance for coordinate {i}"));
            continue;
        }
        let half = z * var.sqrt();
        let mut lower = theta[i] - half;
        if cfg.truncate_at_zero {
            lower = lower.max(0.0);
        }
        intervals[i] = Some(Interval {
            lower,
            upper: theta[i] + half,
        });
    }

    Ok(FitResult {
        estimates,
        fisher,
        covariance,
        intervals,
        gamma: cfg.gamma,
        z,
        iterations: sol.iterations,
        converged: sol.converged,
        used_bisection: sol.used_bisection,
        active,
        condition_number,
        warnings,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::distributions::Cause;

    fn sample(times: &[f64], causes: &[u8], n: usize, t: f64, plan: &[usize]) -> CensoredSample {
        CensoredSample::from_plan(
            n,
            t,
            times.to_vec(),
            causes.iter().map(|&c| Cause::from_code(c).unwrap()).collect(),
            plan.to_vec(),
        )
        .unwrap()
    }

    #[test]
    fn single_observation_log_likelihood() {
        let s = sample(&[1.0], &[1], 1, 2.0, &[0]);
        let p = MobwParams::new(1.0, 0.0, 1.0, 1.0).unwrap();
        assert_eq!(log_likelihood(&p, &s).unwrap(), -2.0);
    }

    #[test]
    fn zero_rate_with_observed_failures_is_impossible() {
        let s = sample(&[0.5, 1.0], &[0, 1], 2, 2.0, &[0, 0]);
        let p = MobwParams::new(1.0, 0.0, 1.0, 1.0).unwrap();
        assert_eq!(log_likelihood(&p, &s).unwrap(), f64::NEG_INFINITY);
    }

    #[test]
    fn conditional_rates_by_substitution() {
        // A(1) = sum of times when there is no censoring
        let times: Vec<f64> = vec![1.0; 30];
        let mut causes = vec![0u8; 10];
        causes.extend([1u8; 10]);
        causes.extend([2u8; 10]);
        let s = sample(&times, &causes, 30, f64::INFINITY, &[0; 30]);
        let c = conditional_lambda_mle(1.0, &s.counts(), &s).unwrap();
        for l in c.lambdas {
            assert!((l - 1.0 / 3.0).abs() < 1e-15);
        }
        assert!(!c.boundary);

        let counts = CauseCounts { m0: 5, m1: 10, m2: 5, m3: 10 };
        let times = vec![0.5; 30];
        let s = sample(&times, &[1; 30], 30, f64::INFINITY, &[0; 30]);
        let c = conditional_lambda_mle(1.0, &counts, &s).unwrap();
        assert_eq!(c.lambdas, [0.5, 1.0, 0.5]);
    }

    #[test]
    fn all_masked_is_not_identifiable() {
        let s = sample(&[0.2, 0.4], &[3, 3], 2, 1.0, &[0, 0]);
        assert!(matches!(
            conditional_lambda_mle(1.0, &s.counts(), &s),
            Err(Error::NonIdentifiable(_))
        ));
        assert!(fit_mle(&s, &MleConfig::default()).is_err());
    }

    #[test]
    fn boundary_rate_reported_and_intervals_suppressed() {
        let s = sample(&[0.1, 0.3, 0.4, 0.9], &[1, 2, 1, 2], 6, 1.0, &[1, 0, 0, 1]);
        let fit = fit_mle(&s, &MleConfig::default()).unwrap();
        assert_eq!(fit.estimates.lambda0, 0.0);
        assert!(fit.intervals[0].is_none());
        assert!(fit.intervals[1..].iter().all(|i| i.is_some()));
        assert!(!fit.warnings.is_empty());
        assert!(observed_fisher(&fit.estimates, &s).is_err());
    }

    #[test]
    fn fisher_lambda_block_is_diagonal_without_masking() {
        let s = sample(&[0.1, 0.3, 0.4, 0.9], &[0, 2, 1, 2], 4, 1.0, &[0; 4]);
        let p = MobwParams::new(1.2, 0.3, 0.6, 0.9).unwrap();
        let f = observed_fisher(&p, &s).unwrap();
        for i in 0..3 {
            for j in 0..3 {
                if i != j {
                    assert_eq!(f[i][j], 0.0);
                }
            }
        }
        for i in 0..4 {
            for j in 0..4 {
                assert_eq!(f[i][j], f[j][i]);
            }
        }
    }

    #[test]
    fn z_quantile_is_accurate() {
        assert!((z_quantile(0.05).unwrap() - 1.959_963_984_540_054).abs() < 1e-10);
        assert!((z_quantile(0.01).unwrap() - 2.575_829_303_548_901).abs() < 1e-10);
        assert!(z_quantile(0.0).is_err());
    }

    #[test]
    fn interval_width_is_twice_half_width() {
        let s = sample(
            &[0.1, 0.2, 0.25, 0.3, 0.45, 0.5, 0.7, 0.8],
            &[0, 1, 2, 3, 2, 1, 0, 2],
            12,
            0.6,
            &[1, 0, 1, 0, 0, 0, 0, 2],
        );
        let fit = fit_mle(&s, &MleConfig::default()).unwrap();
        for i in 0..4 {
            let iv = fit.intervals[i].as_ref().unwrap();
            let expect = 2.0 * fit.z * fit.covariance[i][i].sqrt();
            assert!((iv.width() - expect).abs() < 1e-12);
        }
    }

    #[test]
    fn regression_start_converges_to_same_root() {
        let s = sample(
            &[0.05, 0.11, 0.2, 0.26, 0.33, 0.41, 0.5, 0.62, 0.7, 0.95],
            &[1, 2, 0, 2, 1, 2, 0, 2, 1, 2],
            14,
            0.6,
            &[0, 2, 0, 0, 0, 0, 0, 0, 0, 2],
        );
        let a = fit_mle(&s, &MleConfig::default()).unwrap();
        let cfg = MleConfig {
            alpha_start: AlphaStart::Regression,
            ..MleConfig::default()
        };
        let b = fit_mle(&s, &cfg).unwrap();
        assert!((a.estimates.alpha - b.estimates.alpha).abs() < 1e-5);
    }
}
