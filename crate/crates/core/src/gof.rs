//! Univariate Weibull fit and Kolmogorov-Smirnov goodness of fit.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::distributions::weibull_fns_unchecked;
use crate::error::{Error, Result};

/// Weibull in the rate parameterisation `F(x) = 1 - exp(-rate x^shape)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WeibullFit {
    pub shape: f64,
    pub rate: f64,
}

impl WeibullFit {
    pub fn cdf(&self, x: f64) -> f64 {
        weibull_fns_unchecked(x.max(0.0), self.shape, self.rate).cdf
    }

    pub fn quantile(&self, p: f64) -> f64 {
        (-(-p).ln_1p() / self.rate).powf(1.0 / self.shape)
    }
}

/// Complete-sample maximum likelihood fit. The shape solves
/// `1/k + mean(log x) - sum x^k log x / sum x^k = 0`, which is strictly
/// decreasing in `k`.
pub fn fit_weibull(sample: &[f64]) -> Result<WeibullFit> {
    if sample.len() < 2 {
        return Err(Error::InvalidSample("need at least two observations".into()));
    }
    if sample.iter().any(|x| !(x.is_finite() && *x > 0.0)) {
        return Err(Error::InvalidSample("observations must be positive".into()));
    }
    let first = sample[0];
    if sample.iter().all(|&x| x == first) {
        return Err(Error::InvalidSample("all observations are equal".into()));
    }
    let logs: Vec<f64> = sample.iter().map(|x| x.ln()).collect();
    let n = sample.len() as f64;
    let mean_log = logs.iter().sum::<f64>() / n;
    // shift logs by their max so x^k stays in range for large k
    let top = logs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let score = |k: f64| {
        let mut s0 = 0.0;
        let mut s1 = 0.0;
        for l in &logs {
            let t = (k * (l - top)).exp();
            s0 += t;
            s1 += t * l;
        }
        1.0 / k + mean_log - s1 / s0
    };
    let (mut lo, mut hi) = (1e-3, 1.0);
    while score(hi) > 0.0 {
        hi *= 2.0;
        if hi > 1e4 {
            return Err(Error::InvalidSample("shape estimate diverges".into()));
        }
    }
    while hi - lo > 1e-14 * hi {
        let mid = 0.5 * (lo + hi);
        if score(mid) > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let shape = 0.5 * (lo + hi);
    let rate = n / sample.iter().map(|x| x.powf(shape)).sum::<f64>();
    Ok(WeibullFit { shape, rate })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KsResult {
    pub distance: f64,
    pub p_value: f64,
}

/// `P(K > z)` for the limiting Kolmogorov distribution.
pub fn kolmogorov_sf(z: f64) -> f64 {
    if z <= 0.0 {
        return 1.0;
    }
    if z < 0.3 {
        // theta-function form converges fast where the alternating series does not
        let s: f64 = (1..=20)
            .map(|k| {
                let j = (2 * k - 1) as f64;
                (-j * j * std::f64::consts::PI.powi(2) / (8.0 * z * z)).exp()
            })
            .sum();
        return (1.0 - (2.0 * std::f64::consts::PI).sqrt() / z * s).clamp(0.0, 1.0);
    }
    let mut acc = 0.0;
    for k in 1..=100 {
        let kf = k as f64;
        let term = (-2.0 * kf * kf * z * z).exp();
        acc += if k % 2 == 1 { term } else { -term };
    }
    (2.0 * acc).clamp(0.0, 1.0)
}

/// K-S distance between the ECDF of `sample` and `fitted`, with the
/// asymptotic p-value at `sqrt(n) D`. No correction for estimated parameters.
pub fn ks_gof(sample: &[f64], fitted: &WeibullFit) -> Result<KsResult> {
    if sample.len() < 2 {
        return Err(Error::InvalidSample("need at least two observations".into()));
    }
    let mut xs = sample.to_vec();
    xs.sort_by(f64::total_cmp);
    if xs[0] == xs[xs.len() - 1] {
        return Err(Error::InvalidSample("all observations are equal".into()));
    }
    let n = xs.len() as f64;
    let mut d: f64 = 0.0;
    for (i, x) in xs.iter().enumerate() {
        let f = fitted.cdf(*x);
        let i = i as f64;
        d = d.max((i + 1.0) / n - f).max(f - i / n);
    }
    Ok(KsResult {
        distance: d,
        p_value: kolmogorov_sf(n.sqrt() * d),
    })
}

/// Plot-ready rows `x, ecdf, fitted_cdf, pp_expected, qq_fitted`, sorted by
/// `x`. `pp_expected` and `qq_fitted` use plotting positions `(i - 0.5) / n`.
pub fn write_gof_points<W: Write>(sample: &[f64], fitted: &WeibullFit, out: W) -> Result<()> {
    let mut xs = sample.to_vec();
    xs.sort_by(f64::total_cmp);
    let n = xs.len() as f64;
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["x", "ecdf", "fitted_cdf", "pp_expected", "qq_fitted"])?;
    for (i, x) in xs.iter().enumerate() {
        let pos = (i as f64 + 0.5) / n;
        w.write_record(&[
            x.to_string(),
            ((i + 1) as f64 / n).to_string(),
            fitted.cdf(*x).to_string(),
            pos.to_string(),
            fitted.quantile(pos).to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}
