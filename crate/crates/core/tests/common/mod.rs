#![allow(dead_code)]

use mobw_crisk::censoring::{generate, mask_causes};
use mobw_crisk::experiments::{expand_scheme, SchemeId};
use mobw_crisk::{Cause, CensoredSample, CensoringPlan, MobwParams};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Random parameters, moderate masking and a random plan; retried until
/// every identified cause shows up at least once.
pub fn random_dataset(seed: u64) -> (MobwParams, CensoredSample) {
    let mut r = rng(seed);
    loop {
        let p = MobwParams::new(
            r.random_range(0.5..2.5),
            r.random_range(0.3..1.5),
            r.random_range(0.3..1.5),
            r.random_range(0.3..1.5),
        )
        .unwrap();
        let n = r.random_range(30..80);
        let m = r.random_range(n / 2..n);
        let scheme = [SchemeId::I, SchemeId::II, SchemeId::III][r.random_range(0..3)];
        let Ok(removals) = expand_scheme(scheme, n, m) else { continue };
        let plan = CensoringPlan::new(n, m, removals, r.random_range(0.3..1.5)).unwrap();
        let s = generate(&p, &plan, &mut r).unwrap();
        let s = mask_causes(&s, 0.15, &mut r).unwrap();
        let c = s.counts();
        if c.m0 > 0 && c.m1 > 0 && c.m2 > 0 && c.m3 > 0 {
            return (p, s);
        }
    }
}

/// Weight of each failure: itself plus every unit withdrawn at it.
pub fn oracle_weights(s: &CensoredSample) -> Vec<f64> {
    let mut w: Vec<f64> = s.applied_removals.iter().map(|r| 1.0 + *r as f64).collect();
    *w.last_mut().unwrap() += s.r_star as f64;
    w
}

/// Log-likelihood summed failure by failure.
pub fn oracle_loglik(theta: [f64; 4], s: &CensoredSample) -> f64 {
    let [l0, l1, l2, alpha] = theta;
    let l012 = l0 + l1 + l2;
    let w = oracle_weights(s);
    let mut ll = 0.0;
    for ((y, c), wi) in s.times.iter().zip(&s.causes).zip(&w) {
        let rate = match c {
            Cause::Simultaneous => l0,
            Cause::First => l1,
            Cause::Second => l2,
            Cause::Masked => l012,
        };
        ll += alpha.ln() + (alpha - 1.0) * y.ln() + rate.ln() - l012 * wi * y.powf(alpha);
    }
    ll
}

/// Log-likelihood with every rate at its conditional optimum, up to a constant.
pub fn oracle_profile(alpha: f64, s: &CensoredSample) -> f64 {
    let m = s.times.len() as f64;
    let w = oracle_weights(s);
    let a: f64 = s.times.iter().zip(&w).map(|(y, wi)| wi * y.powf(alpha)).sum();
    let sl: f64 = s.times.iter().map(|y| y.ln()).sum();
    m * alpha.ln() + (alpha - 1.0) * sl - m * a.ln()
}

pub fn oracle_profile_score(alpha: f64, s: &CensoredSample) -> f64 {
    let m = s.times.len() as f64;
    let w = oracle_weights(s);
    let mut a = 0.0;
    let mut a1 = 0.0;
    for (y, wi) in s.times.iter().zip(&w) {
        let t = wi * y.powf(alpha);
        a += t;
        a1 += t * y.ln();
    }
    let sl: f64 = s.times.iter().map(|y| y.ln()).sum();
    m / alpha + sl - m * a1 / a
}

/// Golden-section maximiser on `[lo, hi]`.
pub fn golden_max(f: impl Fn(f64) -> f64, mut lo: f64, mut hi: f64, tol: f64) -> f64 {
    let g = (5f64.sqrt() - 1.0) / 2.0;
    let mut x1 = hi - g * (hi - lo);
    let mut x2 = lo + g * (hi - lo);
    let (mut f1, mut f2) = (f(x1), f(x2));
    while hi - lo > tol {
        if f1 < f2 {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + g * (hi - lo);
            f2 = f(x2);
        } else {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - g * (hi - lo);
            f1 = f(x1);
        }
    }
    0.5 * (lo + hi)
}

/// Tanh-sinh quadrature on `[a, b]`.
pub fn integrate(f: impl Fn(f64) -> f64, a: f64, b: f64) -> f64 {
    quadrature::double_exponential::integrate(f, a, b, 1e-12).integral
}

/// Quadrature on `[a, inf)` through `x = a + t / (1 - t)`.
pub fn integrate_to_inf(f: impl Fn(f64) -> f64, a: f64) -> f64 {
    integrate(
        |t| {
            let u = 1.0 - t;
            if u <= 0.0 {
                return 0.0;
            }
            let v = f(a + t / u) / (u * u);
            if v.is_finite() { v } else { 0.0 }
        },
        0.0,
        1.0,
    )
}
