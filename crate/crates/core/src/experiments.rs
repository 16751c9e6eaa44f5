//! Monte Carlo study harness and censoring-plan optimality criteria.

use std::fmt;
use std::io::Write;
use std::str::FromStr;

use nalgebra::Matrix4 as NaMatrix4;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::bayes::{
    bayes_estimate_values, gelman_g, hpd_interval, run_gibbs, HpdWindow, LossSpec, Param, PriorSpec,
};
use crate::censoring::{generate, mask_causes, CensoringPlan};
use crate::distributions::MobwParams;
use crate::error::{Error, Result};
use crate::likelihood::{fit_mle, Matrix4, MleConfig};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum SchemeId {
    I,
    II,
    III,
}

impl fmt::Display for SchemeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            SchemeId::I => "I",
            SchemeId::II => "II",
            SchemeId::III => "III",
        })
    }
}

impl FromStr for SchemeId {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "I" | "1" => Ok(SchemeId::I),
            "II" | "2" => Ok(SchemeId::II),
            "III" | "3" => Ok(SchemeId::III),
            other => Err(Error::Parse(format!("unknown scheme `{other}`; use I, II or III"))),
        }
    }
}

/// Removal vector for a named scheme.
///
/// * I: everything withdrawn at the last failure.
/// * II: everything withdrawn at the first failure.
/// * III: one unit after each of the last `n - m` failures.
pub fn expand_scheme(id: SchemeId, n: usize, m: usize) -> Result<Vec<usize>> {
    if m == 0 || m > n {
        return Err(Error::InvalidPlan(format!("need 1 <= m <= n, got n={n}, m={m}")));
    }
    let k = n - m;
    let mut r = vec![0; m];
    match id {
        SchemeId::I => r[m - 1] = k,
        SchemeId::II => r[0] = k,
        SchemeId::III => {
            if k > m {
                return Err(Error::InvalidPlan(format!(
                    "scheme III needs n - m <= m, got n={n}, m={m}"
                )));
            }
            for v in &mut r[m - k..] {
                *v = 1;
            }
        }
    }
    Ok(r)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StudyCell {
    pub n: usize,
    pub m: usize,
    pub scheme: SchemeId,
    pub threshold: f64,
}

impl StudyCell {
    pub fn plan(&self) -> Result<CensoringPlan> {
        CensoringPlan::new(
            self.n,
            self.m,
            expand_scheme(self.scheme, self.n, self.m)?,
            self.threshold,
        )
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StudyConfig {
    pub true_params: MobwParams,
    pub cells: Vec<StudyCell>,
    /// Masking probability.
    pub q: f64,
    pub replications: usize,
    pub gamma: f64,
    /// Retained Gibbs draws per replication.
    pub m_draws: usize,
    pub burn_in: usize,
    /// Asymmetry of the LINEX estimator; the SELF estimator is always reported too.
    pub linex_p: f64,
    pub prior: PriorSpec,
    pub hpd_window: HpdWindow,
    pub seed: u64,
}

impl Default for StudyConfig {
    fn default() -> Self {
        let mut cells = Vec::new();
        for (n, m) in [(50, 30), (50, 40), (80, 40), (80, 60)] {
            for threshold in [0.5, 1.0] {
                for scheme in [SchemeId::I, SchemeId::II, SchemeId::III] {
                    cells.push(StudyCell {
                        n,
                        m,
                        scheme,
                        threshold,
                    });
                }
            }
        }
        StudyConfig {
            true_params: MobwParams {
                alpha: 1.0,
                lambda0: 0.5,
                lambda1: 1.0,
                lambda2: 1.5,
            },
            cells,
            q: 0.1,
            replications: 2000,
            gamma: 0.05,
            m_draws: 10_000,
            burn_in: 1000,
            linex_p: 0.5,
            prior: PriorSpec::simulation_default(),
            hpd_window: HpdWindow::Standard,
            seed: 2024,
        }
    }
}

impl StudyConfig {
    pub fn validate(&self) -> Result<()> {
        self.true_params.validate()?;
        if self.replications == 0 {
            return Err(Error::Domain("need at least one replication".into()));
        }
        if self.cells.is_empty() {
            return Err(Error::Domain("no study cells".into()));
        }
        for c in &self.cells {
            c.plan()?;
        }
        if !(0.0..=1.0).contains(&self.q) {
            return Err(Error::Domain(format!("q must lie in [0, 1], got {}", self.q)));
        }
        if !(self.gamma > 0.0 && self.gamma < 1.0) {
            return Err(Error::Domain(format!("gamma must lie in (0, 1), got {}", self.gamma)));
        }
        if self.m_draws < 2 {
            return Err(Error::Domain("need at least two retained draws".into()));
        }
        LossSpec::Linex { p: self.linex_p }.validate()?;
        self.prior.validate()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Estimator {
    Mle,
    BayesSelf,
    BayesLinex,
}

impl Estimator {
    pub const ALL: [Estimator; 3] = [Estimator::Mle, Estimator::BayesSelf, Estimator::BayesLinex];

    pub fn name(self) -> &'static str {
        match self {
            Estimator::Mle => "MLE",
            Estimator::BayesSelf => "SELF",
            Estimator::BayesLinex => "LINEX",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum IntervalMethod {
    Aci,
    Hpd,
}

impl IntervalMethod {
    pub const ALL: [IntervalMethod; 2] = [IntervalMethod::Aci, IntervalMethod::Hpd];

    pub fn name(self) -> &'static str {
        match self {
            IntervalMethod::Aci => "ACI",
            IntervalMethod::Hpd => "HPD",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PointMetric {
    pub estimator: Estimator,
    pub param: Param,
    /// Mean absolute error.
    pub ab: f64,
    pub mse: f64,
    /// Mean signed error, estimate minus truth.
    pub bias: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IntervalMetric {
    pub method: IntervalMethod,
    pub param: Param,
    pub aw: f64,
    pub cp: f64,
    /// Replications that produced this interval. ACIs are missing for a
    /// rate whose cause was never observed.
    pub count: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellResult {
    pub cell: StudyCell,
    pub used: usize,
    /// Replications with no identified cause at all.
    pub degenerate: usize,
    /// Replications where the MLE or the sampler failed.
    pub failed: usize,
    pub points: Vec<PointMetric>,
    pub intervals: Vec<IntervalMetric>,
    pub mean_g: f64,
    /// Mean of `|G - 1|` over replications.
    pub mean_abs_g_dev: f64,
}

impl CellResult {
    pub fn point(&self, est: Estimator, param: Param) -> &PointMetric {
        self.points
            .iter()
            .find(|p| p.estimator == est && p.param == param)
            .expect("every estimator/parameter pair is present")
    }

    pub fn interval(&self, method: IntervalMethod, param: Param) -> &IntervalMetric {
        self.intervals
            .iter()
            .find(|p| p.method == method && p.param == param)
            .expect("every method/parameter pair is present")
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricTable {
    pub q: f64,
    pub replications: usize,
    pub cells: Vec<CellResult>,
}

struct Replication {
    /// `[estimator][param]`
    points: [[f64; 4]; 3],
    /// `[method][param]`
    intervals: [[Option<(f64, f64)>; 4]; 2],
    g: f64,
}

enum Outcome {
    Done(Box<Replication>),
    Degenerate,
    Failed,
}

fn replication_rng(seed: u64, cell: usize, rep: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(((cell as u64) << 32) | rep as u64);
    rng
}

fn run_replication(cfg: &StudyConfig, plan: &CensoringPlan, cell: usize, rep: usize) -> Outcome {
    let mut rng = replication_rng(cfg.seed, cell, rep);
    let sample = match generate(&cfg.true_params, plan, &mut rng).and_then(|s| mask_causes(&s, cfg.q, &mut rng)) {
        Ok(s) => s,
        Err(_) => return Outcome::Failed,
    };
    if sample.counts().m012() == 0 {
        return Outcome::Degenerate;
    }
    let mle_cfg = MleConfig {
        gamma: cfg.gamma,
        ..MleConfig::default()
    };
    let Ok(fit) = fit_mle(&sample, &mle_cfg) else {
        return Outcome::Failed;
    };
    let Ok(draws) = run_gibbs(&sample, &cfg.prior, cfg.m_draws, cfg.burn_in, &mut rng) else {
        return Outcome::Failed;
    };
    let linex = LossSpec::Linex { p: cfg.linex_p };
    let mut out = Replication {
        points: [[0.0; 4]; 3],
        intervals: [[None; 4]; 2],
        g: gelman_g(&draws).unwrap_or(f64::NAN),
    };
    let mle = fit.estimates.to_array();
    for param in Param::ALL {
        let i = param.index();
        let values = draws.values(param);
        out.points[0][i] = mle[i];
        out.points[1][i] = bayes_estimate_values(&values, &LossSpec::SquaredError).unwrap_or(f64::NAN);
        out.points[2][i] = bayes_estimate_values(&values, &linex).unwrap_or(f64::NAN);
        out.intervals[0][i] = fit.intervals[i].as_ref().map(|iv| (iv.lower, iv.upper));
        out.intervals[1][i] = hpd_interval(&values, cfg.gamma, cfg.hpd_window)
            .ok()
            .map(|iv| (iv.lower, iv.upper));
    }
    Outcome::Done(Box::new(out))
}

fn run_cell(cfg: &StudyConfig, cell_index: usize) -> Result<CellResult> {
    let cell = cfg.cells[cell_index];
    let plan = cell.plan()?;
    let run = |rep: usize| run_replication(cfg, &plan, cell_index, rep);

    #[cfg(feature = "parallel")]
    let outcomes: Vec<Outcome> = {
        use rayon::prelude::*;
        (0..cfg.replications).into_par_iter().map(run).collect()
    };
    #[cfg(not(feature = "parallel"))]
    let outcomes: Vec<Outcome> = (0..cfg.replications).map(run).collect();

    let truth = cfg.true_params.to_array();
    let mut used = 0usize;
    let mut degenerate = 0usize;
    let mut failed = 0usize;
    let mut abs = [[0.0; 4]; 3];
    let mut sq = [[0.0; 4]; 3];
    let mut signed = [[0.0; 4]; 3];
    let mut width = [[0.0; 4]; 2];
    let mut cover = [[0usize; 4]; 2];
    let mut count = [[0usize; 4]; 2];
    let mut g_sum = 0.0;
    let mut g_dev = 0.0;
    let mut g_count = 0usize;

    // summed in replication order so the result does not depend on scheduling
    for o in outcomes {
        let r = match o {
            Outcome::Done(r) => r,
            Outcome::Degenerate => {
                degenerate += 1;
                continue;
            }
            Outcome::Failed => {
                failed += 1;
                continue;
            }
        };
        used += 1;
        for e in 0..3 {
            for i in 0..4 {
                let d = r.points[e][i] - truth[i];
                abs[e][i] += d.abs();
                sq[e][i] += d * d;
                signed[e][i] += d;
            }
        }
        for k in 0..2 {
            for i in 0..4 {
                if let Some((lo, hi)) = r.intervals[k][i] {
                    width[k][i] += hi - lo;
                    cover[k][i] += usize::from(lo <= truth[i] && truth[i] <= hi);
                    count[k][i] += 1;
                }
            }
        }
        if r.g.is_finite() {
            g_sum += r.g;
            g_dev += (r.g - 1.0).abs();
            g_count += 1;
        }
    }

    let nu = used as f64;
    let mut points = Vec::with_capacity(12);
    for (e, est) in Estimator::ALL.into_iter().enumerate() {
        for param in Param::ALL {
            let i = param.index();
            points.push(PointMetric {
                estimator: est,
                param,
                ab: abs[e][i] / nu,
                mse: sq[e][i] / nu,
                bias: signed[e][i] / nu,
            });
        }
    }
    let mut intervals = Vec::with_capacity(8);
    for (k, method) in IntervalMethod::ALL.into_iter().enumerate() {
        for param in Param::ALL {
            let i = param.index();
            let c = count[k][i] as f64;
            intervals.push(IntervalMetric {
                method,
                param,
                aw: width[k][i] / c,
                cp: cover[k][i] as f64 / c,
                count: count[k][i],
            });
        }
    }
    Ok(CellResult {
        cell,
        used,
        degenerate,
        failed,
        points,
        intervals,
        mean_g: g_sum / g_count as f64,
        mean_abs_g_dev: g_dev / g_count as f64,
    })
}

/// Runs every cell of the study. Replication `r` of cell `c` draws from
/// ChaCha stream `(c << 32) | r` keyed by `cfg.seed`, so results are
/// reproducible regardless of thread count.
pub fn run_study(cfg: &StudyConfig) -> Result<MetricTable> {
    cfg.validate()?;
    let cells = (0..cfg.cells.len())
        .map(|c| run_cell(cfg, c))
        .collect::<Result<Vec<_>>>()?;
    Ok(MetricTable {
        q: cfg.q,
        replications: cfg.replications,
        cells,
    })
}

fn cell_prefix(q: f64, c: &CellResult) -> Vec<String> {
    vec![
        c.cell.n.to_string(),
        c.cell.m.to_string(),
        c.cell.threshold.to_string(),
        c.cell.scheme.to_string(),
        q.to_string(),
        c.used.to_string(),
        c.degenerate.to_string(),
        c.failed.to_string(),
    ]
}

const CELL_HEADER: [&str; 8] = ["n", "m", "T", "scheme", "q", "used", "degenerate", "failed"];

/// One row per cell; `AB` and `MSE` for every estimator and parameter.
pub fn write_point_csv<W: Write>(t: &MetricTable, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let mut header: Vec<String> = CELL_HEADER.iter().map(|s| s.to_string()).collect();
    for est in Estimator::ALL {
        for param in Param::ALL {
            for stat in ["AB", "MSE"] {
                header.push(format!("{}_{}_{}", est.name(), param.name(), stat));
            }
        }
    }
    w.write_record(&header)?;
    for c in &t.cells {
        let mut row = cell_prefix(t.q, c);
        for est in Estimator::ALL {
            for param in Param::ALL {
                let p = c.point(est, param);
                row.push(p.ab.to_string());
                row.push(p.mse.to_string());
            }
        }
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

/// One row per cell; `AW` and `CP` for ACI and HPD, then the mean G.
pub fn write_interval_csv<W: Write>(t: &MetricTable, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let mut header: Vec<String> = CELL_HEADER.iter().map(|s| s.to_string()).collect();
    for method in IntervalMethod::ALL {
        for param in Param::ALL {
            for stat in ["AW", "CP"] {
                header.push(format!("{}_{}_{}", method.name(), param.name(), stat));
            }
        }
    }
    header.push("mean_G".into());
    header.push("mean_abs_G_minus_1".into());
    w.write_record(&header)?;
    for c in &t.cells {
        let mut row = cell_prefix(t.q, c);
        for method in IntervalMethod::ALL {
            for param in Param::ALL {
                let iv = c.interval(method, param);
                row.push(iv.aw.to_string());
                row.push(iv.cp.to_string());
            }
        }
        row.push(c.mean_g.to_string());
        row.push(c.mean_abs_g_dev.to_string());
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OptimalityCriteria {
    /// `tr(I^-1)`, smaller is better.
    pub a: f64,
    /// `det(I^-1)`, smaller is better.
    pub d: f64,
    /// `tr(I)`, larger is better.
    pub f: f64,
}

pub fn optimality_criteria(fisher: &Matrix4) -> Result<OptimalityCriteria> {
    let m = NaMatrix4::from_fn(|r, c| fisher[r][c]);
    let inv = m
        .try_inverse()
        .ok_or_else(|| Error::Singular("Fisher matrix is singular".into()))?;
    let d = inv.determinant();
    if !(inv.iter().all(|v| v.is_finite()) && d.is_finite()) {
        return Err(Error::Singular("Fisher matrix is numerically singular".into()));
    }
    Ok(OptimalityCriteria {
        a: inv.trace(),
        d,
        f: m.trace(),
    })
}

/// Index of the best plan under each criterion, `[A, D, F]`. Ties go to the
/// earliest plan.
pub fn rank_plans(criteria: &[OptimalityCriteria]) -> Result<[usize; 3]> {
    if criteria.is_empty() {
        return Err(Error::Domain("no plans to rank".into()));
    }
    let argbest = |key: &dyn Fn(&OptimalityCriteria) -> f64| {
        let mut best = 0;
        for (i, c) in criteria.iter().enumerate() {
            if key(c) < key(&criteria[best]) {
                best = i;
            }
        }
        best
    };
    Ok([argbest(&|c| c.a), argbest(&|c| c.d), argbest(&|c| -c.f)])
}

/// Ranking table: one row per labelled plan with a `*` marking the best.
pub fn write_ranking_csv<W: Write>(labels: &[String], criteria: &[OptimalityCriteria], out: W) -> Result<()> {
    if labels.len() != criteria.len() {
        return Err(Error::Domain("one label per plan required".into()));
    }
    let best = rank_plans(criteria)?;
    let mark = |k: usize, i: usize| if best[k] == i { "*" } else { "" }.to_string();
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["plan", "A_trace_inv", "D_det_inv", "F_trace", "best_A", "best_D", "best_F"])?;
    for (i, (l, c)) in labels.iter().zip(criteria).enumerate() {
        w.write_record(&[
            l.clone(),
            c.a.to_string(),
            c.d.to_string(),
            c.f.to_string(),
            mark(0, i),
            mark(1, i),
            mark(2, i),
        ])?;
    }
    w.flush()?;
    Ok(())
}
