mod common;

use common::*;
use mobw_crisk::bayes::{
    bayes_estimate_values, gelman_g_standard, hpd_interval, run_chains, HpdWindow, LossSpec, PriorSpec,
};
use mobw_crisk::censoring::{count_causes, generate};
use mobw_crisk::data::{soccer, soccer_censored, to_competing_risks};
use mobw_crisk::distributions::{mobw_joint_sf, LatentTriple};
use mobw_crisk::likelihood::{fit_mle, AlphaStart, MleConfig};
use mobw_crisk::{Cause, CauseCounts, CensoringPlan, MobwParams};
use rand::seq::index::sample as sample_indices;
use rand::Rng;
use rand_distr::{Distribution, Gamma, Normal};

fn truth() -> MobwParams {
    MobwParams::new(1.0, 0.5, 1.0, 1.5).unwrap()
}

#[test]
fn joint_survival_matches_monte_carlo() {
    let p = MobwParams::new(1.7, 0.4, 0.9, 0.6).unwrap();
    let mut r = rng(3);
    let pairs: Vec<(f64, f64)> = (0..200_000).map(|_| LatentTriple::sample(&p, &mut r).bivariate()).collect();
    for (y1, y2) in [(0.3, 0.5), (0.8, 0.2), (0.6, 0.6), (1.1, 0.9)] {
        let exact = mobw_joint_sf(y1, y2, &p).unwrap();
        let n = pairs.len() as f64;
        let hits = pairs.iter().filter(|(a, b)| *a > y1 && *b > y2).count() as f64;
        let sd = (exact * (1.0 - exact) / n).sqrt();
        assert!((hits / n - exact).abs() < 4.0 * sd, "({y1},{y2}): {} vs {exact}", hits / n);
    }
}

/// Runs the life test unit by unit: all `n` lifetimes are drawn up front,
/// and withdrawals pick survivors uniformly at random.
fn brute_force(p: &MobwParams, plan: &CensoringPlan, r: &mut impl Rng) -> (Vec<f64>, usize) {
    let mut alive: Vec<f64> = (0..plan.n)
        .map(|_| LatentTriple::sample(p, r).min_and_cause().0)
        .collect();
    let mut times = Vec::new();
    let mut j = 0;
    for i in 0..plan.m {
        let (k, &t) = alive
            .iter()
            .enumerate()
            .min_by(|a, b| a.1.total_cmp(b.1))
            .unwrap();
        alive.swap_remove(k);
        times.push(t);
        if t < plan.threshold {
            j = i + 1;
            let drop = sample_indices(r, alive.len(), plan.removals[i]).into_vec();
            let mut keep = vec![true; alive.len()];
            for d in drop {
                keep[d] = false;
            }
            let mut it = keep.iter();
            alive.retain(|_| *it.next().unwrap());
        }
    }
    (times, j)
}

#[test]
fn generator_agrees_with_unit_level_simulation() {
    let p = truth();
    let plan = CensoringPlan::new(30, 15, [vec![1; 10], vec![0; 4], vec![5]].concat(), 0.25).unwrap();
    let reps = 20_000;
    let mut r = rng(8);
    let mut fast_case2 = 0.0;
    let mut slow_case2 = 0.0;
    let mut fast_last = Vec::with_capacity(reps);
    let mut slow_last = Vec::with_capacity(reps);
    for _ in 0..reps {
        let s = generate(&p, &plan, &mut r).unwrap();
        fast_case2 += f64::from(u8::from(s.j < plan.m));
        fast_last.push(*s.times.last().unwrap());
        let (t, j) = brute_force(&p, &plan, &mut r);
        slow_case2 += f64::from(u8::from(j < plan.m));
        slow_last.push(*t.last().unwrap());
    }
    let n = reps as f64;
    let (pf, ps) = (fast_case2 / n, slow_case2 / n);
    let sd = (pf * (1.0 - pf) * 2.0 / n).sqrt();
    assert!((pf - ps).abs() < 4.0 * sd, "P(case II) {pf} vs {ps}");
    let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
    let var = |v: &[f64]| {
        let m = mean(v);
        v.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (v.len() as f64 - 1.0)
    };
    let se = ((var(&fast_last) + var(&slow_last)) / n).sqrt();
    assert!((mean(&fast_last) - mean(&slow_last)).abs() < 4.0 * se);
}

#[test]
fn exponential_normalised_spacings_are_standard_exponential() {
    // alpha = 1, no threshold: (units at risk) * lambda012 * (y_i - y_{i-1}) ~ Exp(1) iid
    let p = truth();
    let removals = vec![2, 0, 1, 0, 3, 0, 0, 4];
    let plan = CensoringPlan::new(18, 8, removals.clone(), f64::INFINITY).unwrap();
    let mut r = rng(21);
    let mut z = Vec::new();
    for _ in 0..20_000 {
        let s = generate(&p, &plan, &mut r).unwrap();
        let mut at_risk = plan.n as f64;
        let mut prev = 0.0;
        for (i, t) in s.times.iter().enumerate() {
            z.push(at_risk * p.lambda012() * (t - prev));
            prev = *t;
            at_risk -= 1.0 + removals[i] as f64;
        }
    }
    let n = z.len() as f64;
    let mean = z.iter().sum::<f64>() / n;
    let second = z.iter().map(|v| v * v).sum::<f64>() / n;
    assert!((mean - 1.0).abs() < 4.0 / n.sqrt(), "mean {mean}");
    assert!((second - 2.0).abs() < 4.0 * 20f64.sqrt() / n.sqrt(), "second moment {second}");
}

#[test]
fn first_subset_is_regenerated_from_the_bivariate_data() {
    // no withdrawals before the last failure, so the subset is the 28 smallest minima
    let mut cr = to_competing_risks(&soccer());
    cr.sort_by(|a, b| a.0.total_cmp(&b.0));
    let s = soccer_censored(1).unwrap();
    let expect: Vec<(f64, Cause)> = cr.into_iter().take(28).collect();
    let got: Vec<(f64, Cause)> = s.times.iter().copied().zip(s.causes.iter().copied()).collect();
    assert_eq!(got, expect);
    assert_eq!((s.j, s.r_star), (24, 9));
    assert_eq!(count_causes(&s), CauseCounts { m0: 10, m1: 4, m2: 14, m3: 0 });
}

#[test]
fn other_subsets_draw_their_times_from_the_bivariate_data() {
    let mut pool: Vec<f64> = soccer().minima();
    pool.sort_by(f64::total_cmp);
    for k in [2, 3] {
        let s = soccer_censored(k).unwrap();
        let mut left = pool.clone();
        for t in &s.times {
            let at = left.iter().position(|v| v == t).unwrap_or_else(|| panic!("{t} not in data"));
            left.remove(at);
        }
    }
}

#[test]
fn mle_is_consistent_on_a_large_sample() {
    let p = truth();
    let plan = CensoringPlan::new(4000, 3000, [vec![0; 2999], vec![1000]].concat(), 0.8).unwrap();
    let s = generate(&p, &plan, &mut rng(31)).unwrap();
    for start in [AlphaStart::Fixed(1.0), AlphaStart::Regression] {
        let cfg = MleConfig {
            alpha_start: start,
            ..MleConfig::default()
        };
        let fit = fit_mle(&s, &cfg).unwrap();
        let est = fit.estimates.to_array();
        for (i, want) in p.to_array().iter().enumerate() {
            let iv = fit.intervals[i].as_ref().unwrap();
            let se = iv.width() / (2.0 * fit.z);
            assert!((est[i] - want).abs() < 4.0 * se, "coordinate {i}: {} vs {want}", est[i]);
        }
    }
}

#[test]
fn hpd_matches_shortest_gamma_interval() {
    // Gamma(3, 1): the shortest 90% interval has equal density at both ends
    let g = Gamma::new(3.0, 1.0).unwrap();
    let mut r = rng(5);
    let draws: Vec<f64> = (0..200_000).map(|_| g.sample(&mut r)).collect();
    let iv = hpd_interval(&draws, 0.1, HpdWindow::Standard).unwrap();
    let dens = |x: f64| x * x * (-x).exp() / 2.0;
    let mass = integrate(dens, iv.lower, iv.upper);
    assert!((mass - 0.9).abs() < 0.005, "mass {mass}");
    assert!((dens(iv.lower) - dens(iv.upper)).abs() < 0.01);
}

#[test]
fn linex_matches_normal_closed_form() {
    // for N(mu, s^2) draws the estimate is mu - p s^2 / 2
    let d = Normal::new(1.5, 0.4).unwrap();
    let mut r = rng(6);
    let draws: Vec<f64> = (0..400_000).map(|_| d.sample(&mut r)).collect();
    for p in [-1.0, 0.5, 2.0] {
        let e = bayes_estimate_values(&draws, &LossSpec::Linex { p }).unwrap();
        let want = 1.5 - p * 0.16 / 2.0;
        assert!((e - want).abs() < 0.005, "p={p}: {e} vs {want}");
    }
}

#[test]
fn independent_chains_have_unit_scale_reduction() {
    let (_, s) = random_dataset(4);
    let chains = run_chains(&s, &PriorSpec::simulation_default(), 2000, 100, 4, 17).unwrap();
    let g = gelman_g_standard(&chains).unwrap();
    assert!(g.iter().all(|v| (v - 1.0).abs() < 0.01), "{g:?}");
}
