//! Convergence diagnostics for the Gibbs output.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::{run_gibbs, Param, PosteriorDraws, PriorSpec};
use crate::censoring::CensoredSample;
use crate::error::{Error, Result};

/// Scale-reduction statistic that treats each joint draw
/// `(alpha, lambda0, lambda1, lambda2)` as a four-element "chain":
///
/// * per-draw mean and variance (divisor 3) across the four coordinates,
/// * `W` = mean of the per-draw variances,
/// * `B` = `4 / (M - 1) * sum (mean_j - grand mean)^2`,
/// * `V = 3/4 W + (M + 1) / (4 M) B` and `G = sqrt(V / W)`.
///
/// With no spread between draws `G = sqrt(3/4)`.
pub fn gelman_g(draws: &PosteriorDraws) -> Result<f64> {
    let m = draws.len();
    if m < 2 {
        return Err(Error::Diagnostic(format!("need at least 2 draws, got {m}")));
    }
    let mut means = Vec::with_capacity(m);
    let mut w = 0.0;
    for d in &draws.draws {
        let x = [d.alpha, d.lambda0, d.lambda1, d.lambda2];
        let mean = x.iter().sum::<f64>() / 4.0;
        w += x.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / 3.0;
        means.push(mean);
    }
    let mf = m as f64;
    w /= mf;
    if !(w > 0.0) {
        return Err(Error::Diagnostic(
            "within-draw variance is zero; G is undefined".into(),
        ));
    }
    let grand = means.iter().sum::<f64>() / mf;
    let b = 4.0 / (mf - 1.0) * means.iter().map(|v| (v - grand).powi(2)).sum::<f64>();
    let v = 0.75 * w + (mf + 1.0) / (4.0 * mf) * b;
    Ok((v / w).sqrt())
}

/// Conventional potential scale reduction per parameter, in
/// `(lambda0, lambda1, lambda2, alpha)` order, across independent chains.
/// Chains are truncated to the shortest length.
pub fn gelman_g_standard(chains: &[PosteriorDraws]) -> Result<[f64; 4]> {
    let k = chains.len();
    if k < 2 {
        return Err(Error::Diagnostic(format!("need at least 2 chains, got {k}")));
    }
    let n = chains.iter().map(|c| c.len()).min().unwrap_or(0);
    if n < 2 {
        return Err(Error::Diagnostic("every chain needs at least 2 draws".into()));
    }
    let nf = n as f64;
    let mut out = [0.0; 4];
    for param in Param::ALL {
        let mut chain_means = Vec::with_capacity(k);
        let mut chain_vars = Vec::with_capacity(k);
        for c in chains {
            let vals: Vec<f64> = c.draws[..n].iter().map(|d| param.get(d)).collect();
            let mean = vals.iter().sum::<f64>() / nf;
            let var = vals.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (nf - 1.0);
            chain_means.push(mean);
            chain_vars.push(var);
        }
        let kf = k as f64;
        let grand = chain_means.iter().sum::<f64>() / kf;
        let between = nf / (kf - 1.0) * chain_means.iter().map(|v| (v - grand).powi(2)).sum::<f64>();
        let within = chain_vars.iter().sum::<f64>() / kf;
        if !(within > 0.0) {
            return Err(Error::Diagnostic(format!(
                "zero within-chain variance for {}",
                param.name()
            )));
        }
        let pooled = (nf - 1.0) / nf * within + between / nf;
        out[param.index()] = (pooled / within).sqrt();
    }
    Ok(out)
}

/// `k` independent Gibbs chains; chain `i` uses a ChaCha stream `i` keyed by `seed`.
pub fn run_chains(
    s: &CensoredSample,
    prior: &PriorSpec,
    m_draws: usize,
    burn_in: usize,
    k: usize,
    seed: u64,
) -> Result<Vec<PosteriorDraws>> {
    (0..k)
        .map(|i| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(i as u64);
            let mut d = run_gibbs(s, prior, m_draws, burn_in, &mut rng)?;
            d.seed = Some(seed);
            Ok(d)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::distributions::MobwParams;

    fn draws(v: Vec<MobwParams>) -> PosteriorDraws {
        PosteriorDraws {
            draws: v,
            burn_in: 0,
            seed: None,
            acceptance_rate: 1.0,
        }
    }

    #[test]
    fn identical_draws_give_root_three_quarters() {
        let p = MobwParams::new(1.0, 0.5, 1.0, 1.5).unwrap();
        let g = gelman_g(&draws(vec![p; 50])).unwrap();
        assert!((g - 0.75f64.sqrt()).abs() < 1e-15);
    }

    #[test]
    fn degenerate_inputs() {
        let p = MobwParams::new(1.0, 1.0, 1.0, 1.0).unwrap();
        assert!(gelman_g(&draws(vec![p; 10])).is_err());
        assert!(gelman_g(&draws(vec![p])).is_err());
        assert!(gelman_g_standard(&[draws(vec![p; 10])]).is_err());
    }

    #[test]
    fn standard_rhat_detects_shifted_chains() {
        let mk = |shift: f64| {
            draws(
                (0..200)
                    .map(|i| {
                        let e = ((i * 37) % 101) as f64 / 101.0;
                        MobwParams::new(1.0 + shift + e, 0.5 + e, 1.0 + e, 1.5 + e).unwrap()
                    })
                    .collect(),
            )
        };
        let same = gelman_g_standard(&[mk(0.0), mk(0.0)]).unwrap();
        assert!(same.iter().all(|r| (r - 1.0).abs() < 0.01));
        let apart = gelman_g_standard(&[mk(0.0), mk(3.0)]).unwrap();
        assert!(apart[3] > 1.5);
    }
}
