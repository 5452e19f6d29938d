//! Command-line front end.
//!
//! All commands read samples as CSV (one observation per row) and write JSON
//! or CSV to stdout or `--out`. Exit codes: 0 success, 2 invalid input or
//! configuration, 3 solver failure.

use std::path::{Path, PathBuf};

use clap::{Parser, ValueEnum};
use serde::Serialize;

use crate::bartlett::estimate_bartlett_bootstrap;
use crate::chisq::chisq_quantile;
use crate::data::{RowMatrix, TwoSampleData};
use crate::eel::delta_default;
use crate::error::{ElError, Result};
use crate::oel::SolverOptions;
use crate::regions::{contains, contour_2d, interval_1d, method_statistic, Method};
use crate::simulate::{coverage_study, MethodKind, StudyConfig};

pub const EXIT_OK: i32 = 0;
pub const EXIT_INVALID: i32 = 2;
pub const EXIT_SOLVER: i32 = 3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Command {
    /// Statistic and membership at one difference.
    Eval,
    /// Confidence interval (d = 1).
    Region,
    /// Confidence contour polyline (d = 2).
    Contour,
    /// Monte Carlo coverage study from a TOML config.
    Coverage,
    /// Bootstrap Bartlett constant.
    Bartlett,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Json,
    Csv,
}

#[derive(Debug, Clone, Parser)]
#[command(name = "eel", version, about = "Two-sample empirical likelihood for mean differences")]
pub struct CliConfig {
    #[arg(value_enum)]
    pub command: Command,
    /// CSV file with the first sample (one observation per row).
    #[arg(long = "x")]
    pub x_path: Option<PathBuf>,
    /// CSV file with the second sample.
    #[arg(long = "y")]
    pub y_path: Option<PathBuf>,
    /// Mean difference E[Y] - E[X], comma separated.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    pub theta: Option<Vec<f64>>,
    #[arg(long, default_value_t = 0.05)]
    pub alpha: f64,
    /// oel, eel1, bel or eel2.
    #[arg(long, default_value = "eel1")]
    pub method: MethodKind,
    /// Bartlett constant; estimated by bootstrap when omitted.
    #[arg(long)]
    pub eta: Option<f64>,
    /// Second-order exponent; min(m, n)^(-1/2) when omitted.
    #[arg(long)]
    pub delta: Option<f64>,
    #[arg(long = "bootstrap-b", default_value_t = 400)]
    pub bootstrap_b: usize,
    /// Replicate count (overrides the study config).
    #[arg(long)]
    pub reps: Option<usize>,
    /// Random seed [default: 0, or the study config's seed].
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long, default_value_t = 360)]
    pub angles: usize,
    /// Study configuration (TOML) for `coverage`.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = Format::Json)]
    pub format: Format,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CliOutcome {
    pub code: i32,
    /// Serialized result (empty on error).
    pub output: String,
    pub error: Option<String>,
}

pub fn exit_code(err: &ElError) -> i32 {
    match err {
        ElError::InvalidData(_)
        | ElError::DimensionMismatch(_)
        | ElError::Domain(_)
        | ElError::Config(_)
        | ElError::Io(_) => EXIT_INVALID,
        ElError::RankDeficient
        | ElError::NotConverged { .. }
        | ElError::LinearProgram(_)
        | ElError::TooFewReplicates { .. }
        | ElError::BracketFailure { .. } => EXIT_SOLVER,
    }
}

/// Runs one command; writes the output to `--out` when given.
pub fn run(config: &CliConfig) -> CliOutcome {
    let result = validate(config).and_then(|()| dispatch(config)).and_then(|text| {
        if let Some(path) = &config.out {
            std::fs::write(path, &text).map_err(|e| ElError::Io(format!("{}: {e}", path.display())))?;
        }
        Ok(text)
    });
    match result {
        Ok(output) => CliOutcome { code: EXIT_OK, output, error: None },
        Err(e) => CliOutcome { code: exit_code(&e), output: String::new(), error: Some(e.to_string()) },
    }
}

fn validate(config: &CliConfig) -> Result<()> {
    let needs_samples = config.command != Command::Coverage;
    if needs_samples && (config.x_path.is_none() || config.y_path.is_none()) {
        return Err(ElError::Config("--x and --y are required".into()));
    }
    match config.command {
        Command::Eval if config.theta.is_none() => Err(ElError::Config("eval requires --theta".into())),
        Command::Coverage if config.config.is_none() => Err(ElError::Config("coverage requires --config".into())),
        Command::Contour if config.angles < 8 => Err(ElError::Config("--angles must be at least 8".into())),
        _ if !(config.alpha > 0.0 && config.alpha < 1.0) => Err(ElError::Config("--alpha must lie in (0, 1)".into())),
        _ => Ok(()),
    }
}

fn load_data(config: &CliConfig) -> Result<TwoSampleData> {
    let x = RowMatrix::read_csv(config.x_path.as_deref().unwrap_or(Path::new("")))?;
    let y = RowMatrix::read_csv(config.y_path.as_deref().unwrap_or(Path::new("")))?;
    if x.cols() != y.cols() {
        return Err(ElError::DimensionMismatch(format!(
            "X has {} columns but Y has {} columns",
            x.cols(),
            y.cols()
        )));
    }
    TwoSampleData::new(x, y)
}

fn resolve_method(config: &CliConfig, data: &TwoSampleData, opts: &SolverOptions) -> Result<Method> {
    let eta = if config.method.needs_eta() {
        match config.eta {
            Some(eta) => eta,
            None => estimate_bartlett_bootstrap(data, config.bootstrap_b, config.seed.unwrap_or(0), opts)?.eta,
        }
    } else {
        0.0
    };
    let delta = config.delta.unwrap_or_else(|| delta_default(data.m(), data.n()));
    Ok(config.method.with_params(eta, delta))
}

#[derive(Serialize)]
struct EvalReport {
    method: &'static str,
    alpha: f64,
    theta: Vec<f64>,
    statistic: f64,
    threshold: f64,
    contained: bool,
    eta: Option<f64>,
    seed: u64,
}

#[derive(Serialize)]
struct IntervalReport {
    method: &'static str,
    alpha: f64,
    threshold: f64,
    center: f64,
    lo: f64,
    hi: f64,
    eta: Option<f64>,
    seed: u64,
}

#[derive(Serialize)]
struct ContourRow {
    phi: f64,
    r: f64,
    theta1: f64,
    theta2: f64,
}

#[derive(Serialize)]
struct ContourReport {
    method: &'static str,
    alpha: f64,
    level: f64,
    center: Vec<f64>,
    eta: Option<f64>,
    seed: u64,
    points: Vec<ContourRow>,
}

#[derive(Serialize)]
struct BartlettReport {
    eta: f64,
    raw_eta: f64,
    bootstrap_b: usize,
    discarded: usize,
    clamped: bool,
    seed: u64,
}

fn to_json<T: Serialize>(value: &T) -> Result<String> {
    serde_json::to_string_pretty(value)
        .map(|mut s| {
            s.push('\n');
            s
        })
        .map_err(|e| ElError::Io(e.to_string()))
}

fn dispatch(config: &CliConfig) -> Result<String> {
    let opts = SolverOptions::default();
    let seed = config.seed.unwrap_or(0);
    match config.command {
        Command::Eval => {
            let data = load_data(config)?;
            let theta = config.theta.clone().unwrap_or_default();
            data.check_theta(&theta)?;
            let method = resolve_method(config, &data, &opts)?;
            let report = EvalReport {
                method: method.name(),
                alpha: config.alpha,
                statistic: method_statistic(&data, &theta, &method, &opts)?,
                threshold: chisq_quantile(data.d(), 1.0 - config.alpha)?,
                contained: contains(&data, &theta, config.alpha, &method, &opts)?,
                theta,
                eta: method.eta(),
                seed,
            };
            match config.format {
                Format::Json => to_json(&report),
                Format::Csv => Ok(format!(
                    "method,alpha,statistic,threshold,contained\n{},{},{},{},{}\n",
                    report.method, report.alpha, report.statistic, report.threshold, report.contained
                )),
            }
        }
        Command::Region => {
            let data = load_data(config)?;
            let method = resolve_method(config, &data, &opts)?;
            let region = interval_1d(&data, config.alpha, &method, &opts)?;
            let (lo, hi) = region.d1_interval.expect("interval present for d = 1");
            let report = IntervalReport {
                method: method.name(),
                alpha: config.alpha,
                threshold: region.level,
                center: region.center[0],
                lo,
                hi,
                eta: method.eta(),
                seed,
            };
            match config.format {
                Format::Json => to_json(&report),
                Format::Csv => Ok(format!("lo,hi\n{lo},{hi}\n")),
            }
        }
        Command::Contour => {
            let data = load_data(config)?;
            if data.d() != 2 {
                return Err(ElError::DimensionMismatch(format!("contour requires d = 2, data have d = {}", data.d())));
            }
            let method = resolve_method(config, &data, &opts)?;
            let level = chisq_quantile(2, 1.0 - config.alpha)?;
            let region = contour_2d(&data, level, &method, config.angles, &opts)?;
            let points: Vec<ContourRow> = region
                .d2_polyline
                .unwrap_or_default()
                .into_iter()
                .map(|p| ContourRow { phi: p.phi, r: p.r, theta1: p.theta[0], theta2: p.theta[1] })
                .collect();
            match config.format {
                Format::Csv => {
                    let mut out = String::from("phi,r,theta1,theta2\n");
                    for p in &points {
                        out.push_str(&format!("{},{},{},{}\n", p.phi, p.r, p.theta1, p.theta2));
                    }
                    Ok(out)
                }
                Format::Json => to_json(&ContourReport {
                    method: method.name(),
                    alpha: config.alpha,
                    level,
                    center: region.center,
                    eta: method.eta(),
                    seed,
                    points,
                }),
            }
        }
        Command::Coverage => {
            let path = config.config.as_deref().unwrap_or(Path::new(""));
            let text = std::fs::read_to_string(path).map_err(|e| ElError::Io(format!("{}: {e}", path.display())))?;
            let mut study = StudyConfig::from_toml(&text)?;
            if let Some(reps) = config.reps {
                study.reps = reps;
            }
            if let Some(seed) = config.seed {
                study.seed = seed;
            }
            let table = coverage_study(&study, &opts)?;
            match config.format {
                Format::Csv => Ok(table.to_csv()),
                Format::Json => to_json(&table),
            }
        }
        Command::Bartlett => {
            let data = load_data(config)?;
            let est = estimate_bartlett_bootstrap(&data, config.bootstrap_b, seed, &opts)?;
            let report = BartlettReport {
                eta: est.eta,
                raw_eta: est.raw_eta,
                bootstrap_b: est.replicates,
                discarded: est.discarded,
                clamped: est.clamped,
                seed,
            };
            match config.format {
                Format::Json => to_json(&report),
                Format::Csv => Ok(format!(
                    "eta,raw_eta,bootstrap_b,discarded,clamped\n{},{},{},{},{}\n",
                    report.eta, report.raw_eta, report.bootstrap_b, report.discarded, report.clamped
                )),
            }
        }
    }
}
