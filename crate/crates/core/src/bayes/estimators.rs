use serde::{Deserialize, Serialize};

use super::PosteriorDraws;
use crate::distributions::MobwParams;
use crate::error::{Error, Result};
use crate::likelihood::Interval;

/// Coordinate selector, listed in Fisher-matrix order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Param {
    Lambda0,
    Lambda1,
    Lambda2,
    Alpha,
}

impl Param {
    pub const ALL: [Param; 4] = [Param::Lambda0, Param::Lambda1, Param::Lambda2, Param::Alpha];

    pub fn get(self, p: &MobwParams) -> f64 {
        match self {
            Param::Lambda0 => p.lambda0,
            Param::Lambda1 => p.lambda1,
            Param::Lambda2 => p.lambda2,
            Param::Alpha => p.alpha,
        }
    }

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn name(self) -> &'static str {
        match self {
            Param::Lambda0 => "lambda0",
            Param::Lambda1 => "lambda1",
            Param::Lambda2 => "lambda2",
            Param::Alpha => "alpha",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum LossSpec {
    /// Squared error; the estimator is the posterior mean.
    SquaredError,
    /// LINEX with asymmetry `p != 0`.
    Linex { p: f64 },
}

impl LossSpec {
    pub fn validate(&self) -> Result<()> {
        match self {
            LossSpec::Linex { p } if !(p.is_finite() && *p != 0.0) => {
                Err(Error::Domain(format!("LINEX parameter must be finite and nonzero, got {p}")))
            }
            _ => Ok(()),
        }
    }
}

/// Bayes estimate from raw draws of a scalar estimand. LINEX evaluates
/// `-(1/p) log(mean(exp(-p w)))` through log-sum-exp.
pub fn bayes_estimate_values(values: &[f64], loss: &LossSpec) -> Result<f64> {
    if values.is_empty() {
        return Err(Error::Domain("no draws".into()));
    }
    loss.validate()?;
    let n = values.len() as f64;
    match *loss {
        LossSpec::SquaredError => Ok(values.iter().sum::<f64>() / n),
        LossSpec::Linex { p } => {
            let top = values
                .iter()
                .map(|w| -p * w)
                .fold(f64::NEG_INFINITY, f64::max);
            let sum: f64 = values.iter().map(|w| (-p * w - top).exp()).sum();
            Ok(-(top + (sum / n).ln()) / p)
        }
    }
}

pub fn bayes_estimate(draws: &PosteriorDraws, loss: &LossSpec, param: Param) -> Result<f64> {
    bayes_estimate_values(&draws.values(param), loss)
}

/// Window length used to build HPD intervals from sorted draws.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum HpdWindow {
    /// `floor((1 - gamma) M)` draws apart.
    Standard,
    /// `floor((1 - gamma / 2) M)` draws apart.
    Paper,
}

/// Shortest interval `(x_(j), x_(j+w))` over the sorted draws; ties go to
/// the smallest `j`. Widths within 1e-12 relative count as ties.
pub fn hpd_interval(values: &[f64], gamma: f64, window: HpdWindow) -> Result<Interval> {
    if !(gamma > 0.0 && gamma < 1.0) {
        return Err(Error::Domain(format!("gamma must lie in (0, 1), got {gamma}")));
    }
    let m = values.len();
    let frac = match window {
        HpdWindow::Standard => 1.0 - gamma,
        HpdWindow::Paper => 1.0 - gamma / 2.0,
    };
    // guard against 0.95 * 100 = 94.999...
    let w = (frac * m as f64 + 1e-9).floor() as usize;
    if w < 1 || w >= m {
        return Err(Error::Domain(format!(
            "HPD window of {w} draws does not fit in {m} draws"
        )));
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let mut best = 0;
    let mut best_width = f64::INFINITY;
    for j in 0..m - w {
        let width = sorted[j + w] - sorted[j];
        if width < best_width * (1.0 - 1e-12) {
            best_width = width;
            best = j;
        }
    }
    Ok(Interval {
        lower: sorted[best],
        upper: sorted[best + w],
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn constant_draws() {
        let v = vec![2.5; 40];
        assert!((bayes_estimate_values(&v, &LossSpec::SquaredError).unwrap() - 2.5).abs() < 1e-15);
        for p in [-3.0, 0.5, 40.0] {
            let e = bayes_estimate_values(&v, &LossSpec::Linex { p }).unwrap();
            assert!((e - 2.5).abs() < 1e-12);
        }
    }

    #[test]
    fn linex_handles_extreme_asymmetry() {
        let v: Vec<f64> = (1..=100).map(|i| i as f64).collect();
        let e = bayes_estimate_values(&v, &LossSpec::Linex { p: 1e3 }).unwrap();
        assert!(e.is_finite());
        assert!(e >= 1.0 && e < 1.01);
        assert!(bayes_estimate_values(&v, &LossSpec::Linex { p: 0.0 }).is_err());
        assert!(bayes_estimate_values(&[], &LossSpec::SquaredError).is_err());
    }

    #[test]
    fn hpd_on_uniform_grid() {
        let v: Vec<f64> = (1..=100).map(|i| i as f64 / 100.0).collect();
        let iv = hpd_interval(&v, 0.05, HpdWindow::Standard).unwrap();
        assert_eq!((iv.lower, iv.upper), (0.01, 0.96));
        assert!((iv.width() - 0.95).abs() < 1e-12);
        let iv = hpd_interval(&v, 0.05, HpdWindow::Paper).unwrap();
        assert_eq!(iv.lower, 0.01);
        assert_eq!(iv.upper, 0.98);
    }

    #[test]
    fn hpd_window_must_fit() {
        assert!(hpd_interval(&[1.0], 0.05, HpdWindow::Standard).is_err());
        assert!(hpd_interval(&[1.0, 2.0], 0.05, HpdWindow::Standard).is_ok());
        assert!(hpd_interval(&[1.0, 2.0, 3.0], 1.5, HpdWindow::Standard).is_err());
    }
}
