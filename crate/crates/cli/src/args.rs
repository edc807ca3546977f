use std::collections::BTreeMap;
use std::ffi::OsString;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use crate::error::CliError;

#[derive(Debug, Parser)]
#[command(
    name = "scanopt",
    version,
    about = "Random-scan Gibbs selection probabilities: rates, variances, simulation"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum CommandKind {
    Rate,
    Avar,
    Optimize,
    Simulate,
    Validate,
    TwoPhase,
    EstimateAvar,
    Series,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Convergence rate of the random scan at the given selection probabilities
    Rate(RunArgs),
    /// Exact asymptotic variance of the ergodic average of h
    Avar(RunArgs),
    /// Selection probabilities minimizing the rate or the asymptotic variance
    Optimize(RunArgs),
    /// Run the random-scan sampler and write its trace
    Simulate(RunArgs),
    /// Compare theoretical and simulated quantities against tolerances
    Validate(RunArgs),
    /// Equal-probability phase, tuning, then a tuned phase
    TwoPhase(RunArgs),
    /// Batch-means asymptotic variance of h over a trace file
    EstimateAvar(RunArgs),
    /// Plot-ready curves: tv against t, rate or avar against alpha1
    Series(RunArgs),
}

impl CommandKind {
    pub fn name(self) -> &'static str {
        match self {
            CommandKind::Rate => "rate",
            CommandKind::Avar => "avar",
            CommandKind::Optimize => "optimize",
            CommandKind::Simulate => "simulate",
            CommandKind::Validate => "validate",
            CommandKind::TwoPhase => "two-phase",
            CommandKind::EstimateAvar => "estimate-avar",
            CommandKind::Series => "series",
        }
    }
}

impl Command {
    pub fn split(self) -> (CommandKind, RunArgs) {
        match self {
            Command::Rate(a) => (CommandKind::Rate, a),
            Command::Avar(a) => (CommandKind::Avar, a),
            Command::Optimize(a) => (CommandKind::Optimize, a),
            Command::Simulate(a) => (CommandKind::Simulate, a),
            Command::Validate(a) => (CommandKind::Validate, a),
            Command::TwoPhase(a) => (CommandKind::TwoPhase, a),
            Command::EstimateAvar(a) => (CommandKind::EstimateAvar, a),
            Command::Series(a) => (CommandKind::Series, a),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum CriterionArg {
    Rate,
    Avar,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum SeriesKind {
    Tv,
    Rate,
    Avar,
}

/// Flags shared by every subcommand. Values not given on the command line
/// fall back to `--config`, then to `SCANOPT_SEED` for the seed.
#[derive(Debug, Clone, Args, Serialize)]
#[command(args_override_self = true)]
pub struct RunArgs {
    /// Exchangeable Gaussian: comma-separated standard deviations
    #[arg(long, value_name = "S1,S2,..")]
    pub gaussian_exchangeable: Option<String>,
    /// Bivariate Gaussian: sigma1,sigma2,rho
    #[arg(long, value_name = "S1,S2,RHO")]
    pub gaussian_biv: Option<String>,
    /// Gaussian with dispersion matrix read from a square CSV file
    #[arg(long, value_name = "CSV")]
    pub gaussian_file: Option<PathBuf>,
    /// Binomial-hypergeometric model: n1,n2,p
    #[arg(long, value_name = "N1,N2,P")]
    pub discrete: Option<String>,
    /// Discrete joint pmf from a CSV file with columns x,theta,prob
    #[arg(long, value_name = "CSV")]
    pub pmf_file: Option<PathBuf>,

    /// Selection probabilities: a comma-separated list or `equal`
    #[arg(long, allow_hyphen_values = true)]
    pub alpha: Option<String>,
    /// First selection probability of a two-coordinate scan
    #[arg(long, allow_hyphen_values = true)]
    pub alpha1: Option<f64>,
    /// Function of the state: sum, const, coord:NAME, or file:CSV
    #[arg(long)]
    pub h: Option<String>,

    #[arg(long, value_enum)]
    pub criterion: Option<CriterionArg>,
    /// Grid spacing for optimization and curves
    #[arg(long)]
    pub resolution: Option<f64>,

    #[arg(long)]
    pub iterations: Option<usize>,
    #[arg(long)]
    pub burn_in: Option<usize>,
    #[arg(long, env = "SCANOPT_SEED")]
    pub seed: Option<u64>,
    #[arg(long)]
    pub phase1: Option<usize>,
    #[arg(long)]
    pub phase2: Option<usize>,
    /// Relative tolerance for Monte Carlo comparisons in `validate`
    #[arg(long)]
    pub tolerance: Option<f64>,
    /// Batch count for batch means (default floor(sqrt(m)))
    #[arg(long)]
    pub batches: Option<usize>,

    /// Trace CSV written by `simulate`
    #[arg(long, value_name = "CSV")]
    pub trace: Option<PathBuf>,
    #[arg(long, value_enum)]
    pub kind: Option<SeriesKind>,
    /// Last time index of a tv curve
    #[arg(long)]
    pub t_max: Option<usize>,
    /// Index of the starting state of a tv curve, in lexicographic (x, theta) order
    #[arg(long)]
    pub start_state: Option<usize>,

    /// Output directory for CSV/JSON artifacts
    #[arg(long)]
    #[serde(skip)]
    pub out: Option<PathBuf>,
    /// key=value or JSON file of flag defaults
    #[arg(long)]
    #[serde(skip)]
    pub config: Option<PathBuf>,
}

/// Parses a config file into `flag -> value` pairs. JSON objects and
/// `key = value` lines are accepted; keys use flag spelling with `-` or `_`.
pub fn load_config(path: &std::path::Path) -> Result<BTreeMap<String, String>, CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Config(format!("cannot read config {}: {e}", path.display())))?;
    let mut out = BTreeMap::new();
    if text.trim_start().starts_with('{') {
        let value: serde_json::Value = serde_json::from_str(&text).map_err(|e| {
            CliError::Config(format!("config {} is not valid JSON: {e}", path.display()))
        })?;
        let obj = value
            .as_object()
            .ok_or_else(|| CliError::Config("JSON config must be an object".into()))?;
        for (k, v) in obj {
            let s = match v {
                serde_json::Value::String(s) => s.clone(),
                serde_json::Value::Number(n) => n.to_string(),
                serde_json::Value::Bool(b) => b.to_string(),
                serde_json::Value::Array(items) => items
                    .iter()
                    .map(|i| match i {
                        serde_json::Value::String(s) => s.clone(),
                        other => other.to_string(),
                    })
                    .collect::<Vec<_>>()
                    .join(","),
                other => {
                    return Err(CliError::Config(format!(
                        "unsupported value for {k}: {other}"
                    )))
                }
            };
            out.insert(normalize_key(k), s);
        }
    } else {
        for (n, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (k, v) = line.split_once('=').ok_or_else(|| {
                CliError::Config(format!("config line {} is not key=value: {line}", n + 1))
            })?;
            out.insert(
                normalize_key(k.trim()),
                v.trim().trim_matches('"').to_string(),
            );
        }
    }
    for forbidden in ["config", "out"] {
        if out.contains_key(forbidden) {
            return Err(CliError::Config(format!(
                "`{forbidden}` cannot be set from a config file"
            )));
        }
    }
    Ok(out)
}

fn normalize_key(k: &str) -> String {
    k.trim_start_matches("--").replace('_', "-")
}

/// Parses the command line, then re-parses with config entries placed ahead
/// of the user's flags so that explicit flags win.
pub fn parse_with_config(argv: Vec<OsString>) -> Result<Cli, clap::Error> {
    let cli = Cli::try_parse_from(&argv)?;
    let config = match &cli.command {
        Command::Rate(a)
        | Command::Avar(a)
        | Command::Optimize(a)
        | Command::Simulate(a)
        | Command::Validate(a)
        | Command::TwoPhase(a)
        | Command::EstimateAvar(a)
        | Command::Series(a) => a.config.clone(),
    };
    let Some(path) = config else {
        return Ok(cli);
    };
    let pairs = load_config(&path).map_err(|e| {
        use clap::CommandFactory;
        Cli::command().error(clap::error::ErrorKind::InvalidValue, e.to_string())
    })?;
    let sub = argv
        .iter()
        .skip(1)
        .position(|a| !a.to_string_lossy().starts_with('-'))
        .map(|p| p + 1)
        .unwrap_or(1);
    let mut merged: Vec<OsString> = argv[..=sub].to_vec();
    for (k, v) in pairs {
        merged.push(format!("--{k}={v}").into());
    }
    merged.extend_from_slice(&argv[sub + 1..]);
    Cli::try_parse_from(merged)
}
