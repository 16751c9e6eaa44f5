//! Browser bindings: the joint density surface, one simulated censored
//! sample, and the shape posterior against the profile likelihood.

use mobw_crisk::bayes::{log_marginal_posterior_alpha, PriorSpec};
use mobw_crisk::censoring::{generate, mask_causes};
use mobw_crisk::distributions::joint_pdf_grid;
use mobw_crisk::experiments::{expand_scheme, SchemeId};
use mobw_crisk::likelihood::WeightedTimes;
use mobw_crisk::{seeded_rng, CensoredSample, CensoringPlan, MobwParams};
use wasm_bindgen::prelude::*;

fn js(e: mobw_crisk::Error) -> JsError {
    JsError::new(&e.to_string())
}

/// Absolutely continuous joint density on a `k x k` grid over `(0, ymax]^2`,
/// row-major with `y1` varying slowest. The diagonal holds the singular
/// line density instead.
#[wasm_bindgen]
pub fn joint_density(alpha: f64, lambda0: f64, lambda1: f64, lambda2: f64, ymax: f64, k: usize) -> Result<Vec<f64>, JsError> {
    let p = MobwParams::new(alpha, lambda0, lambda1, lambda2).map_err(js)?;
    Ok(joint_pdf_grid(&p, ymax, k).map_err(js)?.into_iter().map(|r| r.2).collect())
}

/// One censored, masked sample as CSV text (metadata line plus `y,delta,removal`).
#[wasm_bindgen]
#[allow(clippy::too_many_arguments)]
pub fn simulate_sample(
    alpha: f64,
    lambda0: f64,
    lambda1: f64,
    lambda2: f64,
    n: usize,
    m: usize,
    scheme: &str,
    threshold: f64,
    q: f64,
    seed: u64,
) -> Result<String, JsError> {
    let p = MobwParams::new(alpha, lambda0, lambda1, lambda2).map_err(js)?;
    let id: SchemeId = scheme.parse().map_err(js)?;
    let plan = CensoringPlan::new(n, m, expand_scheme(id, n, m).map_err(js)?, threshold).map_err(js)?;
    let mut rng = seeded_rng(seed);
    let s = generate(&p, &plan, &mut rng).map_err(js)?;
    let mut s = mask_causes(&s, q, &mut rng).map_err(js)?;
    s.seed = Some(seed);
    let mut buf = Vec::new();
    s.write_csv(&mut buf).map_err(js)?;
    Ok(String::from_utf8(buf).expect("CSV output is UTF-8"))
}

/// Shape curves for a sample given as CSV text, on `k` points of
/// `[amin, amax]`: the first `k` values are the marginal posterior density
/// (vague prior), the next `k` the profile likelihood rescaled to the same
/// peak height.
#[wasm_bindgen]
pub fn alpha_curves(csv: &str, amin: f64, amax: f64, k: usize) -> Result<Vec<f64>, JsError> {
    if !(amin > 0.0 && amax > amin && k >= 2) {
        return Err(JsError::new("need 0 < amin < amax and k >= 2"));
    }
    let s = CensoredSample::read_csv(csv.as_bytes()).map_err(js)?;
    let wt = WeightedTimes::new(&s).map_err(js)?;
    let prior = PriorSpec::data_default();
    let grid: Vec<f64> = (0..k).map(|i| amin + (amax - amin) * i as f64 / (k - 1) as f64).collect();
    let post = grid
        .iter()
        .map(|&a| log_marginal_posterior_alpha(a, &s, &prior))
        .collect::<Result<Vec<_>, _>>()
        .map_err(js)?;
    let prof = grid
        .iter()
        .map(|&a| wt.profile_log_likelihood(a))
        .collect::<Result<Vec<_>, _>>()
        .map_err(js)?;
    let h = (amax - amin) / (k - 1) as f64;
    let top = post.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let dens: Vec<f64> = post.iter().map(|v| (v - top).exp()).collect();
    // trapezoid normalisation over the visible range
    let area = h * (dens.iter().sum::<f64>() - 0.5 * (dens[0] + dens[k - 1]));
    let dens: Vec<f64> = dens.iter().map(|d| d / area).collect();
    let peak = dens.iter().copied().fold(0.0, f64::max);
    let ptop = prof.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut out = dens;
    out.extend(prof.iter().map(|v| peak * (v - ptop).exp()));
    Ok(out)
}
