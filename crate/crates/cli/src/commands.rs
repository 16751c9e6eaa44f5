use std::fs::File;
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};

use mobw_crisk::bayes::{
    bayes_estimate, gelman_g, hpd_interval, run_gibbs, HpdWindow, LossSpec, Param, PriorSpec,
};
use mobw_crisk::censoring::{generate, mask_causes};
use mobw_crisk::data::{
    from_competing_risks, read_competing_risks_csv, soccer, soccer_censored, to_competing_risks,
    write_competing_risks_csv, BivariateDataset,
};
use mobw_crisk::experiments::{
    expand_scheme, optimality_criteria, run_study, write_interval_csv, write_point_csv, write_ranking_csv,
    SchemeId, StudyCell, StudyConfig,
};
use mobw_crisk::gof::{fit_weibull, ks_gof, write_gof_points};
use mobw_crisk::likelihood::{fit_mle, MleConfig};
use mobw_crisk::{seeded_rng, CensoredSample, CensoringPlan, MobwParams};
use serde_json::{json, Value};

use crate::config::Config;
use crate::error::CliError;
use crate::{
    BayesArgs, Command, ConvertArgs, FitArgs, GofArgs, LossArg, OptimalArgs, SimulateArgs, StudyArgs, WindowArg,
};

pub fn run(cmd: Command) -> Result<(), CliError> {
    match cmd {
        Command::Simulate(a) => simulate(a),
        Command::Fit(a) => fit(a),
        Command::Bayes(a) => bayes(a),
        Command::Study(a) => study(a),
        Command::Optimal(a) => optimal(a),
        Command::Gof(a) => gof(a),
        Command::Convert(a) => convert(a),
    }
}

/// Routes files into `--out` or the main result to stdout.
struct Sink {
    dir: Option<PathBuf>,
    written: Vec<String>,
}

impl Sink {
    fn new(dir: Option<PathBuf>) -> Result<Self, CliError> {
        if let Some(d) = &dir {
            std::fs::create_dir_all(d)?;
        }
        Ok(Sink { dir, written: Vec::new() })
    }

    /// `primary` output goes to stdout when no directory was given;
    /// secondary output is only written to the directory.
    fn emit(&mut self, name: &str, bytes: &[u8], primary: bool) -> Result<(), CliError> {
        match &self.dir {
            Some(d) => {
                let path = d.join(name);
                std::fs::write(&path, bytes)?;
                self.written.push(path.display().to_string());
            }
            None if primary => std::io::stdout().write_all(bytes)?,
            None => {}
        }
        Ok(())
    }

    fn finish(self) -> Result<(), CliError> {
        if self.dir.is_some() {
            println!("{}", json!({ "written": self.written }));
        }
        Ok(())
    }
}

fn pretty(v: &Value) -> Vec<u8> {
    let mut s = serde_json::to_string_pretty(v).expect("json values serialise");
    s.push('\n');
    s.into_bytes()
}

fn bundled_index(path: &Path) -> Option<usize> {
    match path.file_name()?.to_str()? {
        "data1.csv" => Some(1),
        "data2.csv" => Some(2),
        "data3.csv" => Some(3),
        _ => None,
    }
}

/// Reads a competing-risks sample. A missing file named `data1.csv`,
/// `data2.csv` or `data3.csv` resolves to the bundled soccer subsets.
fn load_sample(path: &Path) -> Result<CensoredSample, CliError> {
    if !path.exists() {
        if let Some(k) = bundled_index(path) {
            return Ok(soccer_censored(k)?);
        }
        return Err(CliError::Usage(format!("no such file: {}", path.display())));
    }
    let file = File::open(path)?;
    CensoredSample::read_csv(file).map_err(|e| CliError::Input(format!("{}: {e}", path.display())))
}

fn load_bivariate(path: Option<&Path>) -> Result<BivariateDataset, CliError> {
    match path {
        None => Ok(soccer()),
        Some(p) if !p.exists() && p.file_name().and_then(|f| f.to_str()) == Some("soccer.csv") => Ok(soccer()),
        Some(p) => {
            let file = File::open(p).map_err(|e| CliError::Usage(format!("{}: {e}", p.display())))?;
            BivariateDataset::read_csv(file).map_err(|e| CliError::Input(format!("{}: {e}", p.display())))
        }
    }
}

fn true_params(cfg: &Config) -> Result<MobwParams, CliError> {
    Ok(MobwParams::new(
        cfg.pick(None, "alpha", 1.0)?,
        cfg.pick(None, "lambda0", 0.5)?,
        cfg.pick(None, "lambda1", 1.0)?,
        cfg.pick(None, "lambda2", 1.5)?,
    )?)
}

fn prior(cfg: &Config, default: PriorSpec) -> Result<PriorSpec, CliError> {
    Ok(PriorSpec {
        a: cfg.pick(None, "a", default.a)?,
        b: cfg.pick(None, "b", default.b)?,
        d0: cfg.pick(None, "d0", default.d0)?,
        d1: cfg.pick(None, "d1", default.d1)?,
        d2: cfg.pick(None, "d2", default.d2)?,
        a1: cfg.pick(None, "a1", default.a1)?,
        b1: cfg.pick(None, "b1", default.b1)?,
    })
}

fn scheme(flag: Option<SchemeId>, cfg: &Config) -> Result<SchemeId, CliError> {
    match flag {
        Some(s) => Ok(s),
        None => match cfg.raw("scheme") {
            Some(v) => Ok(v.parse()?),
            None => Ok(SchemeId::I),
        },
    }
}

fn window(flag: Option<WindowArg>, cfg: &Config) -> Result<HpdWindow, CliError> {
    let name = match flag {
        Some(WindowArg::Standard) => "standard".to_string(),
        Some(WindowArg::Paper) => "paper".to_string(),
        None => cfg.raw("hpd_window").unwrap_or("standard").to_string(),
    };
    match name.as_str() {
        "standard" => Ok(HpdWindow::Standard),
        "paper" => Ok(HpdWindow::Paper),
        other => Err(CliError::Usage(format!("unknown HPD window `{other}`"))),
    }
}

fn interval_json(iv: Option<&mobw_crisk::likelihood::Interval>) -> Value {
    match iv {
        Some(iv) => json!({ "lower": iv.lower, "upper": iv.upper, "width": iv.width() }),
        None => Value::Null,
    }
}

fn simulate(a: SimulateArgs) -> Result<(), CliError> {
    let cfg = Config::load(a.common.config.as_deref())?;
    let n = cfg.pick(a.n, "n", 50)?;
    let m = cfg.pick(a.m, "m", 30)?;
    let threshold = cfg.pick(a.t, "T", 0.5)?;
    let q = cfg.pick(a.q, "q", 0.1)?;
    let seed = cfg.pick(a.seed, "seed", 1)?;
    let id = scheme(a.scheme, &cfg)?;
    let p = true_params(&cfg)?;
    let plan = CensoringPlan::new(n, m, expand_scheme(id, n, m)?, threshold)?;
    let mut rng = seeded_rng(seed);
    let s = generate(&p, &plan, &mut rng)?;
    let mut s = mask_causes(&s, q, &mut rng)?;
    s.seed = Some(seed);
    let mut buf = Vec::new();
    s.write_csv(&mut buf)?;
    let mut sink = Sink::new(a.common.out)?;
    sink.emit("sample.csv", &buf, true)?;
    sink.finish()
}

fn fit(a: FitArgs) -> Result<(), CliError> {
    let cfg = Config::load(a.common.config.as_deref())?;
    let s = load_sample(&a.data)?;
    let mle_cfg = MleConfig {
        gamma: cfg.pick(a.gamma, "gamma", 0.05)?,
        eps: cfg.pick(None, "eps", 1e-6)?,
        max_iter: cfg.pick(None, "max_iter", 1000)?,
        ..MleConfig::default()
    };
    let f = fit_mle(&s, &mle_cfg)?;
    let est = f.estimates.to_array();
    let params: serde_json::Map<String, Value> = Param::ALL
        .iter()
        .map(|p| {
            let i = p.index();
            (
                p.name().to_string(),
                json!({ "mle": est[i], "aci": interval_json(f.intervals[i].as_ref()) }),
            )
        })
        .collect();
    let out = json!({
        "n": s.n,
        "m": s.m(),
        "T": if s.threshold.is_finite() { json!(s.threshold) } else { Value::Null },
        "J": s.j,
        "Rstar": s.r_star,
        "counts": s.counts(),
        "gamma": f.gamma,
        "parameters": params,
        "fisher": f.fisher,
        "condition_number": f.condition_number,
        "iterations": f.iterations,
        "converged": f.converged,
        "used_bisection": f.used_bisection,
        "warnings": f.warnings,
    });
    let mut sink = Sink::new(a.common.out)?;
    sink.emit("fit.json", &pretty(&out), true)?;
    sink.finish()
}

fn bayes(a: BayesArgs) -> Result<(), CliError> {
    let cfg = Config::load(a.common.config.as_deref())?;
    let s = load_sample(&a.data)?;
    let pr = prior(&cfg, PriorSpec::data_default())?;
    let gamma = cfg.pick(a.gamma, "gamma", 0.05)?;
    let draws_n = cfg.pick(a.draws, "M", 10_000)?;
    let burn = cfg.pick(a.burn, "burn", 1000)?;
    let seed = cfg.pick(a.seed, "seed", 1)?;
    let p = cfg.pick(a.p, "p", 0.5)?;
    let loss_name = match a.loss {
        Some(LossArg::SquaredError) => "self".to_string(),
        Some(LossArg::Linex) => "linex".to_string(),
        None => cfg.raw("loss").unwrap_or("self").to_string(),
    };
    let loss = match loss_name.as_str() {
        "self" => LossSpec::SquaredError,
        "linex" => LossSpec::Linex { p },
        other => return Err(CliError::Usage(format!("unknown loss `{other}`"))),
    };
    let win = window(a.hpd_window, &cfg)?;
    let mut rng = seeded_rng(seed);
    let mut draws = run_gibbs(&s, &pr, draws_n, burn, &mut rng)?;
    draws.seed = Some(seed);
    let mut params = serde_json::Map::new();
    for param in Param::ALL {
        let est = bayes_estimate(&draws, &loss, param)?;
        let hpd = hpd_interval(&draws.values(param), gamma, win)?;
        params.insert(
            param.name().to_string(),
            json!({ "estimate": est, "hpd": interval_json(Some(&hpd)) }),
        );
    }
    let out = json!({
        "loss": loss_name,
        "p": if matches!(loss, LossSpec::Linex { .. }) { json!(p) } else { Value::Null },
        "gamma": gamma,
        "draws": draws_n,
        "burn_in": burn,
        "seed": seed,
        "prior": pr,
        "acceptance_rate": draws.acceptance_rate,
        "G": gelman_g(&draws).ok(),
        "parameters": params,
    });
    let mut sink = Sink::new(a.common.out)?;
    sink.emit("bayes.json", &pretty(&out), true)?;
    let mut trace = Vec::new();
    draws.write_csv(&mut trace)?;
    sink.emit("trace.csv", &trace, false)?;
    sink.finish()
}

/// `cells = 50x30:I:0.5, 80x60:III:1`
fn parse_cells(spec: &str) -> Result<Vec<StudyCell>, CliError> {
    spec.split([',', ';'])
        .map(str::trim)
        .filter(|c| !c.is_empty())
        .map(|c| {
            let bad = || CliError::Usage(format!("bad cell `{c}`; expected NxM:SCHEME:T"));
            let mut parts = c.split(':');
            let nm = parts.next().ok_or_else(bad)?;
            let (n, m) = nm.split_once('x').ok_or_else(bad)?;
            let cell = StudyCell {
                n: n.trim().parse().map_err(|_| bad())?,
                m: m.trim().parse().map_err(|_| bad())?,
                scheme: parts.next().ok_or_else(bad)?.parse()?,
                threshold: parts.next().ok_or_else(bad)?.trim().parse().map_err(|_| bad())?,
            };
            if parts.next().is_some() {
                return Err(bad());
            }
            Ok(cell)
        })
        .collect()
}

fn study(a: StudyArgs) -> Result<(), CliError> {
    let cfg = Config::load(a.common.config.as_deref())?;
    let defaults = StudyConfig::default();
    let single = a.n.is_some() || a.m.is_some() || a.scheme.is_some() || a.t.is_some();
    let cells = if single || cfg.raw("cells").is_none() && (cfg.raw("n").is_some() || cfg.raw("m").is_some()) {
        vec![StudyCell {
            n: cfg.pick(a.n, "n", 50)?,
            m: cfg.pick(a.m, "m", 30)?,
            scheme: scheme(a.scheme, &cfg)?,
            threshold: cfg.pick(a.t, "T", 0.5)?,
        }]
    } else if let Some(spec) = cfg.raw("cells") {
        parse_cells(spec)?
    } else {
        defaults.cells.clone()
    };
    let sc = StudyConfig {
        true_params: true_params(&cfg)?,
        cells,
        q: cfg.pick(a.q, "q", defaults.q)?,
        replications: cfg.pick(None, "N", defaults.replications)?,
        gamma: cfg.pick(a.gamma, "gamma", defaults.gamma)?,
        m_draws: cfg.pick(a.draws, "M", defaults.m_draws)?,
        burn_in: cfg.pick(a.burn, "burn", defaults.burn_in)?,
        linex_p: cfg.pick(a.p, "p", defaults.linex_p)?,
        prior: prior(&cfg, defaults.prior)?,
        hpd_window: window(a.hpd_window, &cfg)?,
        seed: cfg.pick(a.seed, "seed", defaults.seed)?,
    };
    let table = run_study(&sc)?;
    let mut points = Vec::new();
    write_point_csv(&table, &mut points)?;
    let mut intervals = Vec::new();
    write_interval_csv(&table, &mut intervals)?;
    let mut sink = Sink::new(a.common.out)?;
    sink.emit("points.csv", &points, true)?;
    sink.emit("intervals.csv", &intervals, false)?;
    sink.emit("study.json", &pretty(&json!(table)), false)?;
    sink.finish()
}

fn optimal(a: OptimalArgs) -> Result<(), CliError> {
    let _cfg = Config::load(a.common.config.as_deref())?;
    let mut labels = Vec::new();
    let mut criteria = Vec::new();
    for path in &a.data {
        let s = load_sample(path)?;
        let f = fit_mle(&s, &MleConfig::default())?;
        criteria.push(optimality_criteria(&f.fisher)?);
        labels.push(path.display().to_string());
    }
    let mut buf = Vec::new();
    write_ranking_csv(&labels, &criteria, &mut buf)?;
    let mut sink = Sink::new(a.common.out)?;
    sink.emit("ranking.csv", &buf, true)?;
    sink.finish()
}

fn gof(a: GofArgs) -> Result<(), CliError> {
    let d = load_bivariate(a.data.as_deref())?;
    let mut sink = Sink::new(a.common.out)?;
    let mut summary = serde_json::Map::new();
    for (name, x) in [("y1", d.first()), ("y2", d.second()), ("min", d.minima())] {
        let fit = fit_weibull(&x)?;
        let ks = ks_gof(&x, &fit)?;
        summary.insert(
            name.to_string(),
            json!({ "shape": fit.shape, "rate": fit.rate, "D": ks.distance, "p_value": ks.p_value }),
        );
        let mut pts = Vec::new();
        write_gof_points(&x, &fit, &mut pts)?;
        sink.emit(&format!("gof_{name}.csv"), &pts, false)?;
    }
    sink.emit("gof.json", &pretty(&Value::Object(summary)), true)?;
    sink.finish()
}

fn convert(a: ConvertArgs) -> Result<(), CliError> {
    let path = &a.data;
    let file = File::open(path).map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))?;
    let mut header = String::new();
    for line in BufReader::new(file).lines() {
        let line = line?;
        if !line.trim_start().starts_with('#') && !line.trim().is_empty() {
            header = line;
            break;
        }
    }
    let cols: Vec<&str> = header.split(',').map(str::trim).collect();
    let input = |e: mobw_crisk::Error| CliError::Input(format!("{}: {e}", path.display()));
    let mut buf = Vec::new();
    let name = if cols.starts_with(&["y1", "y2"]) {
        let d = BivariateDataset::read_csv(File::open(path)?).map_err(input)?;
        write_competing_risks_csv(&to_competing_risks(&d), &mut buf)?;
        "competing_risks.csv"
    } else if cols.starts_with(&["y", "delta"]) {
        let rows = read_competing_risks_csv(File::open(path)?).map_err(input)?;
        from_competing_risks(&rows)?.write_csv(&mut buf)?;
        "bivariate.csv"
    } else {
        return Err(CliError::Input(format!(
            "{}: header must start with `y1,y2` or `y,delta`",
            path.display()
        )));
    };
    let mut sink = Sink::new(a.common.out)?;
    sink.emit(name, &buf, true)?;
    sink.finish()
}
