//! Weibull primitives and the Marshall-Olkin bivariate Weibull (MOBW) law.
//!
//! The MOBW pair is built from three independent latent Weibull lifetimes
//! `V0, V1, V2` sharing the shape `alpha` with rates `lambda0, lambda1,
//! lambda2`: `Y1 = min(V0, V1)` and `Y2 = min(V0, V2)`. Under competing
//! risks only `min(Y1, Y2)` and the identity of the latent minimum are seen.

use rand::Rng;
use rand_distr::{Distribution, Exp1};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// The four model parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MobwParams {
    pub alpha: f64,
    pub lambda0: f64,
    pub lambda1: f64,
    pub lambda2: f64,
}

impl MobwParams {
    /// Validating constructor. `lambda0 = 0` is accepted (independent causes).
    pub fn new(alpha: f64, lambda0: f64, lambda1: f64, lambda2: f64) -> Result<Self> {
        let p = MobwParams {
            alpha,
            lambda0,
            lambda1,
            lambda2,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        let finite_pos = |v: f64| v.is_finite() && v > 0.0;
        if !finite_pos(self.alpha) {
            return Err(Error::Domain(format!("alpha must be > 0, got {}", self.alpha)));
        }
        if !(self.lambda0.is_finite() && self.lambda0 >= 0.0) {
            return Err(Error::Domain(format!(
                "lambda0 must be >= 0, got {}",
                self.lambda0
            )));
        }
        if !finite_pos(self.lambda1) || !finite_pos(self.lambda2) {
            return Err(Error::Domain(format!(
                "lambda1 and lambda2 must be > 0, got {} and {}",
                self.lambda1, self.lambda2
            )));
        }
        Ok(())
    }

    pub fn lambda01(&self) -> f64 {
        self.lambda0 + self.lambda1
    }

    pub fn lambda02(&self) -> f64 {
        self.lambda0 + self.lambda2
    }

    pub fn lambda012(&self) -> f64 {
        self.lambda0 + self.lambda1 + self.lambda2
    }

    /// Parameters in Fisher-matrix order `(lambda0, lambda1, lambda2, alpha)`.
    pub fn to_array(&self) -> [f64; 4] {
        [self.lambda0, self.lambda1, self.lambda2, self.alpha]
    }

    pub fn from_array(theta: [f64; 4]) -> Self {
        MobwParams {
            lambda0: theta[0],
            lambda1: theta[1],
            lambda2: theta[2],
            alpha: theta[3],
        }
    }
}

/// Failure cause label. `Masked` marks a failure whose cause was not identified.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[repr(u8)]
pub enum Cause {
    Simultaneous = 0,
    First = 1,
    Second = 2,
    Masked = 3,
}

impl Cause {
    pub fn code(self) -> u8 {
        self as u8
    }

    pub fn from_code(code: u8) -> Result<Self> {
        match code {
            0 => Ok(Cause::Simultaneous),
            1 => Ok(Cause::First),
            2 => Ok(Cause::Second),
            3 => Ok(Cause::Masked),
            other => Err(Error::Parse(format!("cause code must be 0..=3, got {other}"))),
        }
    }

    /// Label of a bivariate observation `(y1, y2)`; exact equality is simultaneous.
    pub fn from_pair(y1: f64, y2: f64) -> Self {
        if y1 == y2 {
            Cause::Simultaneous
        } else if y1 < y2 {
            Cause::First
        } else {
            Cause::Second
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WeibullFns {
    pub cdf: f64,
    pub pdf: f64,
    pub sf: f64,
}

/// CDF, PDF and survival function of Weibull(`alpha`, `lambda`) in the rate
/// parameterisation `F(v) = 1 - exp(-lambda v^alpha)`.
///
/// At `v = 0` with `alpha < 1` the density diverges and `pdf` is `+inf`.
pub fn weibull_fns(v: f64, alpha: f64, lambda: f64) -> Result<WeibullFns> {
    if !(alpha.is_finite() && alpha > 0.0) {
        return Err(Error::Domain(format!("alpha must be > 0, got {alpha}")));
    }
    if !(lambda.is_finite() && lambda > 0.0) {
        return Err(Error::Domain(format!("lambda must be > 0, got {lambda}")));
    }
    if v.is_nan() || v < 0.0 {
        return Err(Error::Domain(format!("time must be >= 0, got {v}")));
    }
    Ok(weibull_fns_unchecked(v, alpha, lambda))
}

pub(crate) fn weibull_fns_unchecked(v: f64, alpha: f64, lambda: f64) -> WeibullFns {
    let h = lambda * v.powf(alpha);
    let sf = (-h).exp();
    // -expm1 keeps the lower tail accurate.
    let cdf = -(-h).exp_m1();
    let pdf = if v == 0.0 {
        if alpha < 1.0 {
            f64::INFINITY
        } else if alpha == 1.0 {
            lambda
        } else {
            0.0
        }
    } else {
        alpha * lambda * v.powf(alpha - 1.0) * sf
    };
    WeibullFns { cdf, pdf, sf }
}

fn weibull_sf(v: f64, alpha: f64, lambda: f64) -> f64 {
    (-lambda * v.powf(alpha)).exp()
}

fn weibull_pdf(v: f64, alpha: f64, lambda: f64) -> f64 {
    if lambda == 0.0 {
        return 0.0;
    }
    weibull_fns_unchecked(v, alpha, lambda).pdf
}

/// Joint survival `P(Y1 > y1, Y2 > y2)`.
pub fn mobw_joint_sf(y1: f64, y2: f64, p: &MobwParams) -> Result<f64> {
    p.validate()?;
    if y1.is_nan() || y2.is_nan() || y1 < 0.0 || y2 < 0.0 {
        return Err(Error::Domain(format!("times must be >= 0, got ({y1}, {y2})")));
    }
    let a = p.alpha;
    Ok(if y1 < y2 {
        weibull_sf(y1, a, p.lambda1) * weibull_sf(y2, a, p.lambda02())
    } else if y2 < y1 {
        weibull_sf(y1, a, p.lambda01()) * weibull_sf(y2, a, p.lambda2)
    } else {
        weibull_sf(y1, a, p.lambda012())
    })
}

/// Joint density. Off the diagonal this is the absolutely continuous part
/// (w.r.t. 2-D Lebesgue measure); at `y1 == y2` it returns the singular
/// line density `lambda0 / lambda012 * f(y; alpha, lambda012)`.
pub fn mobw_joint_pdf(y1: f64, y2: f64, p: &MobwParams) -> Result<f64> {
    p.validate()?;
    if !(y1 > 0.0 && y2 > 0.0) {
        return Err(Error::Domain(format!("times must be > 0, got ({y1}, {y2})")));
    }
    let a = p.alpha;
    Ok(if y1 < y2 {
        weibull_pdf(y1, a, p.lambda1) * weibull_pdf(y2, a, p.lambda02())
    } else if y2 < y1 {
        weibull_pdf(y1, a, p.lambda01()) * weibull_pdf(y2, a, p.lambda2)
    } else {
        p.lambda0 / p.lambda012() * weibull_pdf(y1, a, p.lambda012())
    })
}

/// Evaluates the absolutely continuous part of the joint density on a
/// `k x k` grid over `(0, ymax]^2`. Rows are `(y1, y2, density)`.
pub fn joint_pdf_grid(p: &MobwParams, ymax: f64, k: usize) -> Result<Vec<(f64, f64, f64)>> {
    if !(ymax > 0.0) || k == 0 {
        return Err(Error::Domain("grid needs ymax > 0 and k >= 1".into()));
    }
    let step = ymax / k as f64;
    let mut out = Vec::with_capacity(k * k);
    for i in 1..=k {
        for j in 1..=k {
            let (y1, y2) = (i as f64 * step, j as f64 * step);
            out.push((y1, y2, mobw_joint_pdf(y1, y2, p)?));
        }
    }
    Ok(out)
}

/// Three independent latent Weibull lifetimes.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LatentTriple {
    pub v0: f64,
    pub v1: f64,
    pub v2: f64,
}

impl LatentTriple {
    /// Inverse-CDF draw: `V = (E / lambda)^(1/alpha)` with `E ~ Exp(1)`.
    /// A zero rate yields `V = +inf`.
    pub fn sample<R: Rng + ?Sized>(p: &MobwParams, rng: &mut R) -> Self {
        let inv = 1.0 / p.alpha;
        let mut draw = |lambda: f64| {
            let e: f64 = Exp1.sample(rng);
            if lambda == 0.0 {
                f64::INFINITY
            } else {
                (e / lambda).powf(inv)
            }
        };
        let v0 = draw(p.lambda0);
        let v1 = draw(p.lambda1);
        let v2 = draw(p.lambda2);
        LatentTriple { v0, v1, v2 }
    }

    pub fn bivariate(&self) -> (f64, f64) {
        (self.v0.min(self.v1), self.v0.min(self.v2))
    }

    /// Minimum lifetime and the cause attaining it. Any exact tie is
    /// reported as a simultaneous failure.
    pub fn min_and_cause(&self) -> (f64, Cause) {
        let LatentTriple { v0, v1, v2 } = *self;
        if v1 < v0 && v1 < v2 {
            (v1, Cause::First)
        } else if v2 < v0 && v2 < v1 {
            (v2, Cause::Second)
        } else {
            (v0.min(v1).min(v2), Cause::Simultaneous)
        }
    }
}

/// Draws `(min(V0, V1, V2), cause)`. The minimum is Weibull(alpha, lambda012).
pub fn sample_min_and_cause<R: Rng + ?Sized>(p: &MobwParams, rng: &mut R) -> (f64, Cause) {
    LatentTriple::sample(p, rng).min_and_cause()
}

/// Cause probabilities implied by the latent construction: `lambda_j / lambda012`
/// for `j = 0, 1, 2`.
pub fn cause_probabilities(p: &MobwParams) -> [f64; 3] {
    let s = p.lambda012();
    [p.lambda0 / s, p.lambda1 / s, p.lambda2 / s]
}

/// The alternative expression `lambda0 / g`, `lambda2 lambda01 / g`,
/// `lambda1 lambda02 / g` with `g = lambda0 + lambda1 lambda02 + lambda2 lambda01`.
///
/// It does not agree with [`cause_probabilities`] in general and is not used
/// for generation. Kept for side-by-side comparison.
pub fn cause_probabilities_alternative(p: &MobwParams) -> [f64; 3] {
    let g = p.lambda0 + p.lambda1 * p.lambda02() + p.lambda2 * p.lambda01();
    [
        p.lambda0 / g,
        p.lambda2 * p.lambda01() / g,
        p.lambda1 * p.lambda02() / g,
    ]
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn p(a: f64, l0: f64, l1: f64, l2: f64) -> MobwParams {
        MobwParams::new(a, l0, l1, l2).unwrap()
    }

    #[test]
    fn weibull_unit_exponential() {
        let w = weibull_fns(1.0, 1.0, 1.0).unwrap();
        assert!((w.cdf - (1.0 - (-1.0f64).exp())).abs() < 1e-15);
        assert!((w.cdf + w.sf - 1.0).abs() < 1e-15);
    }

    #[test]
    fn weibull_boundary_and_errors() {
        let w = weibull_fns(0.0, 2.5, 3.0).unwrap();
        assert_eq!(w.cdf, 0.0);
        assert_eq!(w.sf, 1.0);
        assert_eq!(weibull_fns(0.0, 0.5, 1.0).unwrap().pdf, f64::INFINITY);
        assert!(weibull_fns(1.0, 0.0, 1.0).is_err());
        assert!(weibull_fns(1.0, 1.0, -1.0).is_err());
        assert!(weibull_fns(-1.0, 1.0, 1.0).is_err());
    }

    #[test]
    fn weibull_cdf_matches_integrated_pdf() {
        // composite Simpson on [0, 2], pdf is smooth for alpha = 2
        let n = 2000;
        let h = 2.0 / n as f64;
        let f = |x: f64| weibull_fns(x, 2.0, 0.5).unwrap().pdf;
        let mut s = f(0.0) + f(2.0);
        for i in 1..n {
            s += if i % 2 == 1 { 4.0 } else { 2.0 } * f(i as f64 * h);
        }
        let integral = s * h / 3.0;
        let cdf = weibull_fns(2.0, 2.0, 0.5).unwrap().cdf;
        assert!((integral - cdf).abs() < 1e-10);
        assert!((cdf - 0.864_664_716_763_387_3).abs() < 1e-12);
    }

    #[test]
    fn joint_sf_branches() {
        let q = p(1.3, 0.5, 1.0, 1.5);
        let y = 0.7;
        let diag = mobw_joint_sf(y, y, &q).unwrap();
        assert!((diag - (-q.lambda012() * y.powf(1.3)).exp()).abs() < 1e-15);
        // off-diagonal branches approach the diagonal value
        let eps = 1e-13;
        let lo = mobw_joint_sf(y - eps, y, &q).unwrap();
        let hi = mobw_joint_sf(y, y - eps, &q).unwrap();
        assert!(((lo - diag) / diag).abs() < 1e-12);
        assert!(((hi - diag) / diag).abs() < 1e-12);
    }

    #[test]
    fn joint_sf_independence_and_mc_value() {
        let q = p(0.8, 0.0, 1.0, 2.0);
        let s = mobw_joint_sf(0.3, 0.9, &q).unwrap();
        let m1 = weibull_fns(0.3, 0.8, 1.0).unwrap().sf;
        let m2 = weibull_fns(0.9, 0.8, 2.0).unwrap().sf;
        assert!((s - m1 * m2).abs() < 1e-15);

        let q = p(1.0, 0.5, 1.0, 1.5);
        let v = mobw_joint_sf(0.5, 1.0, &q).unwrap();
        assert!((v - (-0.5f64 - 2.0).exp()).abs() < 1e-15);
        assert!((v - 0.082_085).abs() < 1e-6);
    }

    #[test]
    fn joint_pdf_diagonal_vanishes_when_independent() {
        let q = p(1.7, 0.0, 1.0, 2.0);
        assert_eq!(mobw_joint_pdf(0.4, 0.4, &q).unwrap(), 0.0);
        assert!(mobw_joint_pdf(0.0, 0.4, &q).is_err());
    }

    #[test]
    fn alpha_one_reduces_to_bivariate_exponential() {
        let q = p(1.0, 0.4, 0.9, 1.3);
        let (y1, y2) = (0.35, 0.8);
        let expected = (-q.lambda1 * y1 - q.lambda2 * y2 - q.lambda0 * y1.max(y2)).exp();
        assert!((mobw_joint_sf(y1, y2, &q).unwrap() - expected).abs() < 1e-15);
        let dens = q.lambda1 * q.lambda02() * (-q.lambda1 * y1 - q.lambda02() * y2).exp();
        assert!((mobw_joint_pdf(y1, y2, &q).unwrap() - dens).abs() < 1e-14);
    }

    #[test]
    fn tie_resolves_to_simultaneous() {
        let t = LatentTriple { v0: 2.0, v1: 1.0, v2: 1.0 };
        assert_eq!(t.min_and_cause(), (1.0, Cause::Simultaneous));
        let t = LatentTriple { v0: 2.0, v1: 1.0, v2: 3.0 };
        assert_eq!(t.min_and_cause(), (1.0, Cause::First));
        let t = LatentTriple { v0: f64::INFINITY, v1: 4.0, v2: 3.0 };
        assert_eq!(t.min_and_cause(), (3.0, Cause::Second));
    }

    #[test]
    fn no_simultaneous_failures_without_common_shock() {
        let q = p(1.4, 0.0, 1.0, 1.5);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..20_000 {
            assert_ne!(sample_min_and_cause(&q, &mut rng).1, Cause::Simultaneous);
        }
    }

    #[test]
    fn cause_probability_formulas_differ() {
        let q = p(1.0, 0.5, 1.0, 1.5);
        let exact = cause_probabilities(&q);
        let alt = cause_probabilities_alternative(&q);
        assert!((exact.iter().sum::<f64>() - 1.0).abs() < 1e-15);
        assert!((alt.iter().sum::<f64>() - 1.0).abs() > 1e-3 || (alt[1] - exact[1]).abs() > 1e-3);
    }

    #[test]
    fn derived_sums_are_exact() {
        let q = p(2.0, 0.25, 0.5, 0.125);
        assert_eq!(q.lambda012(), 0.875);
        assert_eq!(q.lambda01(), 0.75);
        assert_eq!(q.lambda02(), 0.375);
        assert!(MobwParams::new(1.0, -0.1, 1.0, 1.0).is_err());
    }
}
