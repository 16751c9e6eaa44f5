mod commands;
mod config;
mod error;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use mobw_crisk::experiments::SchemeId;

use crate::error::CliError;

/// Competing-risks inference for the Marshall-Olkin bivariate Weibull model
/// under adaptive Type-II progressive hybrid censoring.
#[derive(Debug, Parser)]
#[command(name = "mobw", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Simulate one censored, masked competing-risks sample.
    Simulate(SimulateArgs),
    /// Maximum likelihood fit with approximate confidence intervals.
    Fit(FitArgs),
    /// Gibbs sampling, Bayes estimates and HPD intervals.
    Bayes(BayesArgs),
    /// Monte Carlo study over censoring plans.
    Study(StudyArgs),
    /// Rank censored datasets by A, D and F optimality.
    Optimal(OptimalArgs),
    /// Marginal Weibull fits and Kolmogorov-Smirnov statistics for bivariate data.
    Gof(GofArgs),
    /// Convert between bivariate and competing-risks CSV.
    Convert(ConvertArgs),
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum LossArg {
    #[value(name = "self")]
    SquaredError,
    Linex,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum WindowArg {
    Standard,
    Paper,
}

fn parse_scheme(s: &str) -> Result<SchemeId, String> {
    s.parse().map_err(|e: mobw_crisk::Error| e.to_string())
}

#[derive(Debug, Args)]
struct Common {
    /// Flat `key = value` configuration file; flags take precedence.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Directory for output files; without it the main result goes to stdout.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct SimulateArgs {
    #[command(flatten)]
    common: Common,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    n: Option<usize>,
    #[arg(long)]
    m: Option<usize>,
    #[arg(long, value_parser = parse_scheme)]
    scheme: Option<SchemeId>,
    #[arg(long = "T")]
    t: Option<f64>,
    /// Masking probability.
    #[arg(long)]
    q: Option<f64>,
}

#[derive(Debug, Args)]
struct FitArgs {
    #[command(flatten)]
    common: Common,
    /// Competing-risks CSV (`y,delta,removal`).
    #[arg(long)]
    data: PathBuf,
    /// Intervals have nominal coverage `1 - gamma`.
    #[arg(long)]
    gamma: Option<f64>,
}

#[derive(Debug, Args)]
struct BayesArgs {
    #[command(flatten)]
    common: Common,
    #[arg(long)]
    data: PathBuf,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    gamma: Option<f64>,
    /// Retained draws.
    #[arg(long = "M")]
    draws: Option<usize>,
    #[arg(long)]
    burn: Option<usize>,
    #[arg(long, value_enum)]
    loss: Option<LossArg>,
    /// LINEX asymmetry.
    #[arg(long)]
    p: Option<f64>,
    #[arg(long, value_enum)]
    hpd_window: Option<WindowArg>,
}

#[derive(Debug, Args)]
struct StudyArgs {
    #[command(flatten)]
    common: Common,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    gamma: Option<f64>,
    #[arg(long)]
    q: Option<f64>,
    #[arg(long, value_parser = parse_scheme)]
    scheme: Option<SchemeId>,
    #[arg(long = "T")]
    t: Option<f64>,
    #[arg(long)]
    n: Option<usize>,
    #[arg(long)]
    m: Option<usize>,
    #[arg(long = "M")]
    draws: Option<usize>,
    #[arg(long)]
    burn: Option<usize>,
    #[arg(long)]
    p: Option<f64>,
    #[arg(long, value_enum)]
    hpd_window: Option<WindowArg>,
}

#[derive(Debug, Args)]
struct OptimalArgs {
    #[command(flatten)]
    common: Common,
    /// One competing-risks CSV per candidate plan.
    #[arg(long, num_args = 1.., required = true)]
    data: Vec<PathBuf>,
}

#[derive(Debug, Args)]
struct GofArgs {
    #[command(flatten)]
    common: Common,
    /// Bivariate CSV (`y1,y2`); defaults to the bundled soccer data.
    #[arg(long)]
    data: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct ConvertArgs {
    #[command(flatten)]
    common: Common,
    /// Bivariate CSV (`y1,y2`) or competing-risks CSV (`y,delta,...`).
    #[arg(long)]
    data: PathBuf,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            use clap::error::ErrorKind;
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                print!("{e}");
                return ExitCode::SUCCESS;
            }
            let text = e.to_string();
            let first = text.lines().next().unwrap_or("usage error");
            let err = CliError::Usage(first.trim_start_matches("error: ").to_string());
            eprintln!("{}", err.record());
            return ExitCode::from(2);
        }
    };
    match commands::run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("{}", e.record());
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
