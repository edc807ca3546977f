//! Resolution of model, selection-probability and `h` flags.

use std::path::Path;

use scanopt::discrete::FunctionOnStates;
use scanopt::gaussian::GaussianTarget;
use scanopt::{
    build_binomial_model, build_custom_model, exchangeable_sigma, BivariateGaussian, JointModel,
    Matrix, Selection,
};

use crate::args::RunArgs;
use crate::error::{CliError, CliResult};
use crate::format::io_err;

pub enum Model {
    Gaussian {
        target: GaussianTarget,
        /// Set when the model came from `--gaussian-biv`, or any 2×2 dispersion.
        biv: Option<BivariateGaussian>,
        label: String,
    },
    Discrete(JointModel),
}

impl Model {
    pub fn dim(&self) -> usize {
        match self {
            Model::Gaussian { target, .. } => target.dim(),
            Model::Discrete(_) => 2,
        }
    }

    pub fn label(&self) -> String {
        match self {
            Model::Gaussian { label, .. } => label.clone(),
            Model::Discrete(m) => m.label().to_string(),
        }
    }
}

fn config(msg: impl Into<String>) -> CliError {
    CliError::Config(msg.into())
}

fn parse_list(flag: &str, s: &str) -> CliResult<Vec<f64>> {
    s.split(',')
        .map(|t| {
            t.trim()
                .parse::<f64>()
                .map_err(|_| config(format!("--{flag}: `{}` is not a number", t.trim())))
        })
        .collect()
}

fn read_text(path: &Path) -> CliResult<String> {
    std::fs::read_to_string(path).map_err(|e| io_err(path, e))
}

/// Non-comment, non-empty lines split on commas.
fn csv_records(text: &str) -> impl Iterator<Item = (usize, Vec<&str>)> {
    text.lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim()))
        .filter(|(_, l)| !l.is_empty() && !l.starts_with('#'))
        .map(|(i, l)| (i, l.split(',').map(str::trim).collect()))
}

fn gaussian(sigma: Matrix, label: String) -> CliResult<Model> {
    let target = GaussianTarget::new(sigma)?;
    let biv = if target.dim() == 2 {
        Some(BivariateGaussian::from_sigma(target.sigma())?)
    } else {
        None
    };
    Ok(Model::Gaussian { target, biv, label })
}

pub fn resolve_model(args: &RunArgs) -> CliResult<Model> {
    let given = [
        args.gaussian_exchangeable.is_some(),
        args.gaussian_biv.is_some(),
        args.gaussian_file.is_some(),
        args.discrete.is_some(),
        args.pmf_file.is_some(),
    ]
    .iter()
    .filter(|&&b| b)
    .count();
    if given != 1 {
        return Err(config(format!(
            "exactly one model must be given (--gaussian-exchangeable, --gaussian-biv, --gaussian-file, --discrete, --pmf-file); found {given}"
        )));
    }
    if let Some(s) = &args.gaussian_exchangeable {
        let sig = parse_list("gaussian-exchangeable", s)?;
        if sig.len() < 2 {
            return Err(config(
                "--gaussian-exchangeable needs at least two standard deviations",
            ));
        }
        let label = format!(
            "gaussian-exchangeable({})",
            crate::format::join_g(&sig, ";")
        );
        return gaussian(exchangeable_sigma(&sig)?, label);
    }
    if let Some(s) = &args.gaussian_biv {
        let v = parse_list("gaussian-biv", s)?;
        let [s1, s2, rho] = v[..] else {
            return Err(config("--gaussian-biv expects sigma1,sigma2,rho"));
        };
        let spec = BivariateGaussian::new(s1, s2, rho)?;
        let target = spec.target()?;
        let label = format!("gaussian-biv({};{};{})", s1, s2, rho);
        return Ok(Model::Gaussian {
            target,
            biv: Some(spec),
            label,
        });
    }
    if let Some(p) = &args.gaussian_file {
        let text = read_text(p)?;
        let mut rows = Vec::new();
        for (line, rec) in csv_records(&text) {
            let row: CliResult<Vec<f64>> = rec
                .iter()
                .map(|t| {
                    t.parse::<f64>().map_err(|_| {
                        config(format!("{}:{line}: `{t}` is not a number", p.display()))
                    })
                })
                .collect();
            rows.push(row?);
        }
        let sigma = Matrix::from_rows(&rows)?;
        let label = format!("gaussian-file(d={})", sigma.rows());
        return gaussian(sigma, label);
    }
    if let Some(s) = &args.discrete {
        let parts: Vec<&str> = s.split(',').map(str::trim).collect();
        let [n1, n2, p] = parts[..] else {
            return Err(config("--discrete expects n1,n2,p"));
        };
        let n1: u32 = n1.parse().map_err(|_| {
            config(format!(
                "--discrete: n1 `{n1}` is not a non-negative integer"
            ))
        })?;
        let n2: u32 = n2.parse().map_err(|_| {
            config(format!(
                "--discrete: n2 `{n2}` is not a non-negative integer"
            ))
        })?;
        let p: f64 = p
            .parse()
            .map_err(|_| config(format!("--discrete: p `{p}` is not a number")))?;
        return Ok(Model::Discrete(build_binomial_model(n1, n2, p)?));
    }
    let p = args.pmf_file.as_ref().expect("one model flag is set");
    let text = read_text(p)?;
    let mut entries = Vec::new();
    for (line, rec) in csv_records(&text) {
        if rec.first().is_some_and(|c| c.eq_ignore_ascii_case("x")) {
            continue;
        }
        let [x, t, q] = rec[..] else {
            return Err(config(format!(
                "{}:{line}: expected x,theta,prob",
                p.display()
            )));
        };
        let bad = |what: &str| config(format!("{}:{line}: bad {what}", p.display()));
        entries.push((
            (
                x.parse::<i64>().map_err(|_| bad("x"))?,
                t.parse::<i64>().map_err(|_| bad("theta"))?,
            ),
            q.parse::<f64>().map_err(|_| bad("prob"))?,
        ));
    }
    Ok(Model::Discrete(build_custom_model(&entries)?))
}

/// Selection probabilities from `--alpha` or `--alpha1`.
pub fn resolve_alpha(args: &RunArgs, d: usize) -> CliResult<Selection> {
    match (&args.alpha, args.alpha1) {
        (Some(_), Some(_)) => Err(config("give either --alpha or --alpha1, not both")),
        (None, None) => Err(config(
            "selection probabilities required: --alpha LIST|equal or --alpha1 VALUE",
        )),
        (None, Some(a1)) => {
            if d != 2 {
                return Err(config(format!(
                    "--alpha1 needs a two-coordinate model, this one has {d}"
                )));
            }
            Ok(Selection::bivariate(a1)?)
        }
        (Some(s), None) if s.trim().eq_ignore_ascii_case("equal") => Ok(Selection::equal(d)),
        (Some(s), None) => {
            let v = parse_list("alpha", s)?;
            if v.len() != d {
                return Err(config(format!(
                    "--alpha has {} entries, model has {d} coordinates",
                    v.len()
                )));
            }
            Ok(Selection::new(v)?)
        }
    }
}

pub type ColumnFn = Box<dyn Fn(&[f64]) -> f64>;

/// Parsed `--h` specification.
#[derive(Debug, Clone, PartialEq)]
pub enum HSpec {
    Sum,
    Const,
    Coord(String),
    File(std::path::PathBuf),
}

pub fn parse_h(args: &RunArgs) -> CliResult<HSpec> {
    let s = args.h.as_deref().unwrap_or("sum").trim();
    Ok(match s {
        "sum" => HSpec::Sum,
        "const" => HSpec::Const,
        _ if s.starts_with("coord:") => HSpec::Coord(s["coord:".len()..].to_string()),
        _ if s.starts_with("file:") => HSpec::File(s["file:".len()..].into()),
        _ => {
            return Err(config(format!(
                "--h `{s}` is not one of sum, const, coord:NAME, file:CSV"
            )))
        }
    })
}

impl HSpec {
    pub fn name(&self) -> String {
        match self {
            HSpec::Sum => "sum".into(),
            HSpec::Const => "const".into(),
            HSpec::Coord(c) => format!("coord:{c}"),
            HSpec::File(p) => format!("file:{}", p.display()),
        }
    }

    /// Tabulates `h` on a discrete model.
    pub fn on_states(&self, m: &JointModel) -> CliResult<FunctionOnStates> {
        match self {
            HSpec::Sum => Ok(FunctionOnStates::coordinate_sum(m)),
            HSpec::Const => Ok(FunctionOnStates::constant(m, 1.0)),
            HSpec::Coord(c) => match c.as_str() {
                "x" | "1" => Ok(FunctionOnStates::from_fn(m, |(x, _)| x as f64)),
                "theta" | "0" => Ok(FunctionOnStates::from_fn(m, |(_, t)| t as f64)),
                _ => Err(config(format!(
                    "coord:{c} is not a coordinate of a discrete model (use x or theta)"
                ))),
            },
            HSpec::File(p) => {
                let text = read_text(p)?;
                let mut values = vec![None; m.len()];
                for (line, rec) in csv_records(&text) {
                    if rec.first().is_some_and(|c| c.eq_ignore_ascii_case("x")) {
                        continue;
                    }
                    let [x, t, v] = rec[..] else {
                        return Err(config(format!(
                            "{}:{line}: expected x,theta,value",
                            p.display()
                        )));
                    };
                    let bad = || config(format!("{}:{line}: malformed row", p.display()));
                    let state = (
                        x.parse::<i64>().map_err(|_| bad())?,
                        t.parse::<i64>().map_err(|_| bad())?,
                    );
                    let i = m.index_of(state).ok_or_else(|| {
                        config(format!(
                            "{}:{line}: state {state:?} is outside the support",
                            p.display()
                        ))
                    })?;
                    values[i] = Some(v.parse::<f64>().map_err(|_| bad())?);
                }
                let values: Option<Vec<f64>> = values.into_iter().collect();
                let values = values
                    .ok_or_else(|| config(format!("{} does not cover every state", p.display())))?;
                Ok(FunctionOnStates::new(m, values)?)
            }
        }
    }

    /// `h` over named columns of a state vector.
    pub fn on_columns(&self, names: &[String]) -> CliResult<ColumnFn> {
        match self {
            HSpec::Sum => Ok(Box::new(|s: &[f64]| s.iter().sum())),
            HSpec::Const => Ok(Box::new(|_: &[f64]| 1.0)),
            HSpec::Coord(c) => {
                let j = names
                    .iter()
                    .position(|n| n == c)
                    .or_else(|| c.parse::<usize>().ok().filter(|&j| j < names.len()))
                    .ok_or_else(|| config(format!("coord:{c} matches no column of {names:?}")))?;
                Ok(Box::new(move |s: &[f64]| s[j]))
            }
            HSpec::File(_) => Err(config("file-based h is only available for discrete models")),
        }
    }
}
