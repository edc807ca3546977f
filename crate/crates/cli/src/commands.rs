use serde::Serialize;

use scanopt::diagnostics::{point_mass, AvarEstimate};
use scanopt::optimize::{grid_points, DEFAULT_GRID_STEP};
use scanopt::sampler::{
    discrete_state_function, DiscreteGibbs, GaussianGibbs, GibbsTarget, TuneReport,
};
use scanopt::{
    assemble_scan_matrix, batch_means_avar, bivariate_avar_sum, discrete_scan_rate,
    gaussian_scan_rate, optimize_1d, optimize_simplex, peskun_avar, relative_gain, run_chain,
    tv_curve, two_phase_run, ChainTrace, Criterion, Error, LineSearch, OptimizationResult,
    RngStream, Selection, SimplexSearch, TwoPhaseTarget,
};

use crate::args::{CommandKind, CriterionArg, RunArgs, SeriesKind};
use crate::error::{CliError, CliResult};
use crate::format::{fmt_g, io_err, join_g, round_sig, Header, Sink, Table};
use crate::model::{parse_h, resolve_alpha, resolve_model, HSpec, Model};

pub const DEFAULT_VALIDATE_ITERATIONS: usize = 1_000_000;
pub const DEFAULT_AVAR_TOLERANCE: f64 = 0.10;
pub const TV_TOLERANCE: f64 = 0.01;
pub const DEFAULT_PHASE_ITERATIONS: usize = 100_000;
pub const DEFAULT_T_MAX: usize = 100;
const AVAR_RANGE: (f64, f64) = (0.01, 0.99);

pub fn run(kind: CommandKind, args: RunArgs) -> CliResult<()> {
    let sink = Sink::new(args.out.clone(), Header::new(kind, &args))?;
    match kind {
        CommandKind::Rate => cmd_rate(&args, &sink),
        CommandKind::Avar => cmd_avar(&args, &sink),
        CommandKind::Optimize => cmd_optimize(&args, &sink),
        CommandKind::Simulate => cmd_simulate(&args, &sink),
        CommandKind::Validate => cmd_validate(&args, &sink),
        CommandKind::TwoPhase => cmd_two_phase(&args, &sink),
        CommandKind::EstimateAvar => cmd_estimate_avar(&args, &sink),
        CommandKind::Series => cmd_series(&args, &sink),
    }
}

fn config(msg: impl Into<String>) -> CliError {
    CliError::Config(msg.into())
}

fn require_seed(args: &RunArgs) -> CliResult<u64> {
    args.seed
        .ok_or_else(|| config("a seed is required: pass --seed or set SCANOPT_SEED"))
}

fn alpha_cell(a: &Selection) -> String {
    join_g(a.as_slice(), ";")
}

fn emit(sink: &Sink, name: &str, table: &Table, extra: &[(&str, String)]) -> CliResult<()> {
    print!("{}", table.to_csv());
    sink.write_csv(name, table, extra)
}

fn rate_at(model: &Model, alpha: &Selection) -> CliResult<f64> {
    Ok(match model {
        Model::Gaussian { target, .. } => gaussian_scan_rate(target, alpha)?,
        Model::Discrete(m) => discrete_scan_rate(&assemble_scan_matrix(m, alpha.get(0))?)?,
    })
}

/// Exact asymptotic variance where one is available.
fn avar_at(model: &Model, h: &HSpec, alpha1: f64) -> CliResult<f64> {
    match model {
        Model::Discrete(m) => {
            let f = h.on_states(m)?;
            Ok(peskun_avar(&assemble_scan_matrix(m, alpha1)?, &f)?)
        }
        Model::Gaussian { biv: Some(spec), .. } if *h == HSpec::Sum => {
            Selection::bivariate(alpha1)?;
            Ok(bivariate_avar_sum(spec, alpha1))
        }
        Model::Gaussian { target, .. } => Err(Error::UnsupportedCombination(format!(
            "no exact asymptotic variance for a {}-dimensional Gaussian with h = {}; only bivariate targets with h = sum have one. \
             Run `simulate` and then `estimate-avar` on the trace instead",
            target.dim(),
            h.name()
        ))
        .into()),
    }
}

fn cmd_rate(args: &RunArgs, sink: &Sink) -> CliResult<()> {
    let model = resolve_model(args)?;
    let alpha = resolve_alpha(args, model.dim())?;
    let rate = rate_at(&model, &alpha)?;
    let mut t = Table::new(&["model", "alpha", "rate"]);
    t.push(vec![model.label(), alpha_cell(&alpha), fmt_g(rate)]);
    emit(sink, "rate.csv", &t, &[])
}

fn cmd_avar(args: &RunArgs, sink: &Sink) -> CliResult<()> {
    let model = resolve_model(args)?;
    let alpha = resolve_alpha(args, model.dim())?;
    let h = parse_h(args)?;
    if model.dim() != 2 {
        avar_at(&model, &h, 0.5)?;
    }
    let v = avar_at(&model, &h, alpha.get(0))?;
    let mut t = Table::new(&["model", "alpha", "h", "avar"]);
    t.push(vec![model.label(), alpha_cell(&alpha), h.name(), fmt_g(v)]);
    emit(sink, "avar.csv", &t, &[])
}

#[derive(Serialize)]
struct OptimizeDoc<'a> {
    model: String,
    h: Option<String>,
    result: &'a OptimizationResult,
    value_at_equal_alpha: f64,
    relative_gain: Option<f64>,
}

fn cmd_optimize(args: &RunArgs, sink: &Sink) -> CliResult<()> {
    let model = resolve_model(args)?;
    let criterion = args
        .criterion
        .ok_or_else(|| config("--criterion rate|avar is required"))?;
    let resolution = args.resolution.unwrap_or(DEFAULT_GRID_STEP);
    if !(resolution > 0.0 && resolution <= 0.5) {
        return Err(config(format!(
            "--resolution must lie in (0, 0.5], got {resolution}"
        )));
    }
    let line = LineSearch {
        grid_step: resolution,
        ..LineSearch::default()
    };
    let h = parse_h(args)?;
    let (result, h_name) = match (criterion, &model) {
        (CriterionArg::Rate, Model::Gaussian { target, .. }) => {
            let search = SimplexSearch {
                resolution,
                ..SimplexSearch::default()
            };
            (
                optimize_simplex(
                    Criterion::Rate,
                    |a| gaussian_scan_rate(target, a),
                    target.dim(),
                    &search,
                )?,
                None,
            )
        }
        (CriterionArg::Rate, Model::Discrete(m)) => (
            optimize_1d(
                Criterion::Rate,
                |a| discrete_scan_rate(&assemble_scan_matrix(m, a)?),
                AVAR_RANGE.0,
                AVAR_RANGE.1,
                &line,
            )?,
            None,
        ),
        (CriterionArg::Avar, _) => {
            if model.dim() != 2 {
                avar_at(&model, &h, 0.5)?;
            }
            let (lo, hi) = match model {
                Model::Gaussian { .. } => (0.0, 1.0),
                Model::Discrete(_) => AVAR_RANGE,
            };
            let r = optimize_1d(
                Criterion::Avar,
                |a| avar_at(&model, &h, a).map_err(into_core),
                lo,
                hi,
                &line,
            )?;
            (r, Some(h.name()))
        }
    };
    let equal = Selection::equal(model.dim());
    let value_eq = match criterion {
        CriterionArg::Rate => rate_at(&model, &equal)?,
        CriterionArg::Avar => avar_at(&model, &h, equal.get(0))?,
    };
    let gain = match relative_gain(result.value, value_eq) {
        Ok(g) => Some(g),
        Err(Error::DivisionByZero(_)) => None,
        Err(e) => return Err(e.into()),
    };
    let mut t = Table::new(&[
        "model",
        "criterion",
        "h",
        "method",
        "alpha_star",
        "value",
        "value_equal",
        "relative_gain",
        "evaluations",
        "grid_resolution",
        "convergence_tolerance",
    ]);
    t.push(vec![
        model.label(),
        result.criterion.name().into(),
        h_name.clone().unwrap_or_else(|| "-".into()),
        serde_json::to_value(result.method)
            .unwrap()
            .as_str()
            .unwrap()
            .to_string(),
        alpha_cell(&result.alpha_star),
        fmt_g(result.value),
        fmt_g(value_eq),
        gain.map_or_else(|| "nan".into(), fmt_g),
        result.evaluations.to_string(),
        fmt_g(result.grid_resolution),
        fmt_g(result.convergence_tolerance),
    ]);
    emit(sink, "optimize.csv", &t, &[])?;
    let rounded = OptimizationResult {
        alpha_star: Selection::new(
            result
                .alpha_star
                .as_slice()
                .iter()
                .map(|&v| round_sig(v))
                .collect(),
        )
        .unwrap_or_else(|_| result.alpha_star.clone()),
        value: round_sig(result.value),
        ..result.clone()
    };
    sink.write_json(
        "optimize.json",
        &OptimizeDoc {
            model: model.label(),
            h: h_name,
            result: &rounded,
            value_at_equal_alpha: round_sig(value_eq),
            relative_gain: gain.map(round_sig),
        },
    )
}

fn into_core(e: CliError) -> Error {
    match e {
        CliError::Core(e) => e,
        other => Error::UnsupportedCombination(other.to_string()),
    }
}

fn trace_table(trace: &ChainTrace) -> Table {
    let mut cols: Vec<&str> = trace.coordinate_names.iter().map(String::as_str).collect();
    cols.push("coordinate");
    let mut t = Table::new(&cols);
    t.rows.reserve(trace.len());
    for (s, &v) in trace.states().zip(&trace.visits) {
        let mut row: Vec<String> = s.iter().map(|&x| fmt_g(x)).collect();
        row.push(v.to_string());
        t.rows.push(row);
    }
    t
}

fn trace_extra(trace: &ChainTrace) -> Vec<(&'static str, String)> {
    vec![
        ("model", trace.label.clone()),
        ("alpha", alpha_cell(&trace.alpha)),
        ("burn_in", trace.burn_in.to_string()),
        ("stream_id", trace.stream_id.to_string()),
    ]
}

fn simulate_model(
    model: &Model,
    alpha: &Selection,
    iterations: usize,
    burn_in: Option<usize>,
    rng: &mut RngStream,
) -> CliResult<ChainTrace> {
    Ok(match model {
        Model::Gaussian { target, .. } => {
            let g = GaussianGibbs::new(target);
            let b = burn_in.unwrap_or(g.default_burn_in());
            run_chain(&g, alpha, iterations, b, rng)?
        }
        Model::Discrete(m) => {
            let g = DiscreteGibbs::new(m);
            let b = burn_in.unwrap_or(g.default_burn_in());
            run_chain(&g, alpha, iterations, b, rng)?
        }
    })
}

fn h_series(model: &Model, h: &HSpec, trace: &ChainTrace) -> CliResult<Vec<f64>> {
    match model {
        Model::Discrete(m) => {
            let f = h.on_states(m)?;
            Ok(trace.h_series(discrete_state_function(m, &f)))
        }
        Model::Gaussian { .. } => Ok(trace.h_series(h.on_columns(&trace.coordinate_names)?)),
    }
}

fn cmd_simulate(args: &RunArgs, sink: &Sink) -> CliResult<()> {
    let model = resolve_model(args)?;
    let alpha = resolve_alpha(args, model.dim())?;
    let seed = require_seed(args)?;
    let iterations = args
        .iterations
        .ok_or_else(|| config("--iterations is required"))?;
    let h = parse_h(args)?;
    let mut rng = RngStream::new(seed, 0);
    let trace = simulate_model(&model, &alpha, iterations, args.burn_in, &mut rng)?;
    let series = h_series(&model, &h, &trace)?;
    sink.write_csv("trace.csv", &trace_table(&trace), &trace_extra(&trace))?;
    let mut t = Table::new(&["quantity", "value"]);
    for (name, f) in trace.coordinate_names.iter().zip(trace.visit_frequencies()) {
        t.push(vec![format!("visit_frequency_{name}"), fmt_g(f)]);
    }
    let mean = series.iter().sum::<f64>() / series.len() as f64;
    t.push(vec![format!("mean_h({})", h.name()), fmt_g(mean)]);
    t.push(vec!["iterations".into(), trace.len().to_string()]);
    emit(sink, "summary.csv", &t, &trace_extra(&trace))
}

struct Check {
    name: String,
    theory: f64,
    empirical: f64,
    error: f64,
    tolerance: f64,
    pass: bool,
}

fn cmd_validate(args: &RunArgs, sink: &Sink) -> CliResult<()> {
    let model = resolve_model(args)?;
    let alpha = resolve_alpha(args, model.dim())?;
    let seed = require_seed(args)?;
    let h = parse_h(args)?;
    let iterations = args.iterations.unwrap_or(DEFAULT_VALIDATE_ITERATIONS);
    let tol = args.tolerance.unwrap_or(DEFAULT_AVAR_TOLERANCE);
    if tol.is_nan() || tol <= 0.0 {
        return Err(config(format!("--tolerance must be positive, got {tol}")));
    }
    if model.dim() != 2 {
        return Err(Error::UnsupportedCombination(format!(
            "validate needs a discrete model or a bivariate Gaussian, got dimension {}",
            model.dim()
        ))
        .into());
    }
    let theory = avar_at(&model, &h, alpha.get(0))?;
    let mut rng = RngStream::new(seed, 0);
    let trace = simulate_model(&model, &alpha, iterations, args.burn_in, &mut rng)?;
    let est = batch_means_avar(&h_series(&model, &h, &trace)?, args.batches)?;
    let mut checks = Vec::new();
    let avar_err = if theory == 0.0 {
        est.point.abs()
    } else {
        (est.point - theory).abs() / theory.abs()
    };
    checks.push(Check {
        name: format!("avar({})", h.name()),
        theory,
        empirical: est.point,
        error: avar_err,
        tolerance: tol,
        pass: avar_err < tol || (theory == 0.0 && est.point == 0.0),
    });
    if let Model::Discrete(m) = &model {
        let scan = assemble_scan_matrix(m, alpha.get(0))?;
        let rho2 = discrete_scan_rate(&scan)?;
        let t_max = args.t_max.unwrap_or(DEFAULT_T_MAX).max(51);
        let curve = tv_curve(
            &scan,
            &point_mass(m.len(), args.start_state.unwrap_or(0)),
            t_max,
        )?;
        // latest t ≥ 50 whose ratio is not dominated by rounding
        let t = (50..t_max).rev().find(|&t| curve[t + 1].1 > 1e-9);
        match t {
            Some(t) => {
                let ratio = curve[t + 1].1 / curve[t].1;
                let err = (ratio - rho2).abs();
                checks.push(Check {
                    name: format!("tv_ratio(t={t})"),
                    theory: rho2,
                    empirical: ratio,
                    error: err,
                    tolerance: TV_TOLERANCE,
                    pass: err < TV_TOLERANCE,
                });
            }
            None => eprintln!("tv ratio skipped: distance below 1e-9 before t = 51"),
        }
    }
    let mut t = Table::new(&[
        "check",
        "theory",
        "empirical",
        "error",
        "tolerance",
        "status",
    ]);
    for c in &checks {
        t.push(vec![
            c.name.clone(),
            fmt_g(c.theory),
            fmt_g(c.empirical),
            fmt_g(c.error),
            fmt_g(c.tolerance),
            if c.pass { "pass" } else { "FAIL" }.into(),
        ]);
    }
    let extra = vec![
        ("model", model.label()),
        ("alpha", alpha_cell(&alpha)),
        ("iterations", iterations.to_string()),
        ("batch_count", est.batch_count.to_string()),
        ("batch_size", est.batch_size.to_string()),
    ];
    print!("{}", t.to_aligned());
    sink.write_csv("validate.csv", &t, &extra)?;
    let failed: Vec<&str> = checks
        .iter()
        .filter(|c| !c.pass)
        .map(|c| c.name.as_str())
        .collect();
    if failed.is_empty() {
        Ok(())
    } else {
        Err(CliError::Validation(format!(
            "tolerance breached by {}",
            failed.join(", ")
        )))
    }
}

fn report_table(r: &TuneReport) -> Table {
    let mut t = Table::new(&["field", "value"]);
    t.push(vec!["pilot_length".into(), r.pilot_length.to_string()]);
    t.push(vec![
        "criterion".into(),
        serde_json::to_value(r.criterion)
            .unwrap()
            .as_str()
            .unwrap()
            .into(),
    ]);
    t.push(vec![
        "source".into(),
        serde_json::to_value(r.source)
            .unwrap()
            .as_str()
            .unwrap()
            .into(),
    ]);
    t.push(vec!["alpha_hat".into(), alpha_cell(&r.alpha_hat)]);
    t.push(vec!["value".into(), fmt_g(r.value)]);
    t.push(vec![
        "reference_alpha".into(),
        r.reference_alpha
            .as_ref()
            .map_or_else(|| "-".into(), alpha_cell),
    ]);
    let s = &r.estimated_sigma;
    for i in 0..s.rows() {
        t.push(vec![
            format!("estimated_sigma_row{}", i + 1),
            join_g(s.row(i), ";"),
        ]);
    }
    t
}

fn cmd_two_phase(args: &RunArgs, sink: &Sink) -> CliResult<()> {
    let model = resolve_model(args)?;
    let seed = require_seed(args)?;
    let h = parse_h(args)?;
    let phase1 = args.phase1.unwrap_or(DEFAULT_PHASE_ITERATIONS);
    let phase2 = args.phase2.unwrap_or(phase1);
    let mut rng = RngStream::new(seed, 0);
    let outcome = match &model {
        Model::Gaussian { target, .. } => {
            if h != HSpec::Sum {
                return Err(Error::UnsupportedCombination(format!(
                    "Gaussian two-phase tuning optimizes the variance of the coordinate sum; got h = {}",
                    h.name()
                ))
                .into());
            }
            two_phase_run(&TwoPhaseTarget::Gaussian(target), phase1, phase2, &mut rng)?
        }
        Model::Discrete(m) => {
            let f = h.on_states(m)?;
            two_phase_run(
                &TwoPhaseTarget::Discrete { model: m, h: &f },
                phase1,
                phase2,
                &mut rng,
            )?
        }
    };
    sink.write_csv(
        "phase1_trace.csv",
        &trace_table(&outcome.phase1),
        &trace_extra(&outcome.phase1),
    )?;
    sink.write_csv("tune_report.csv", &report_table(&outcome.report), &[])?;
    let mut t = Table::new(&[
        "phase",
        "alpha",
        "iterations",
        "avar_batch_means",
        "standard_error",
    ]);
    let mut row = |name: &str, trace: &ChainTrace| -> CliResult<()> {
        let est = estimate_or_short(&h_series(&model, &h, trace)?, args.batches)?;
        t.push(vec![
            name.into(),
            alpha_cell(&trace.alpha),
            trace.len().to_string(),
            est.map_or_else(|| "nan".into(), |e| fmt_g(e.point)),
            est.map_or_else(|| "nan".into(), |e| fmt_g(e.standard_error)),
        ]);
        Ok(())
    };
    row("1", &outcome.phase1)?;
    if let Some(p2) = &outcome.phase2 {
        row("2", p2)?;
        sink.write_csv("phase2_trace.csv", &trace_table(p2), &trace_extra(p2))?;
    }
    print!("{}", report_table(&outcome.report).to_csv());
    emit(
        sink,
        "comparison.csv",
        &t,
        &[("model", model.label()), ("h", h.name())],
    )
}

fn estimate_or_short(series: &[f64], batches: Option<usize>) -> CliResult<Option<AvarEstimate>> {
    match batch_means_avar(series, batches) {
        Ok(e) => Ok(Some(e)),
        Err(Error::TraceTooShort(_)) => Ok(None),
        Err(e) => Err(e.into()),
    }
}

/// Reads a trace written by `simulate`: comment lines, a header row, then
/// numeric rows. The trailing `coordinate` column is dropped.
fn read_trace(path: &std::path::Path) -> CliResult<(Vec<String>, Vec<Vec<f64>>)> {
    let text = std::fs::read_to_string(path).map_err(|e| io_err(path, e))?;
    let mut lines = text
        .lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty() && !l.starts_with('#'));
    let (_, header) = lines
        .next()
        .ok_or_else(|| config(format!("{} has no header row", path.display())))?;
    let mut names: Vec<String> = header.split(',').map(|s| s.trim().to_string()).collect();
    let keep = if names.last().map(String::as_str) == Some("coordinate") {
        names.pop();
        names.len()
    } else {
        names.len()
    };
    let mut rows = Vec::new();
    for (i, l) in lines {
        let row: CliResult<Vec<f64>> = l
            .split(',')
            .take(keep)
            .map(|t| {
                t.trim().parse::<f64>().map_err(|_| {
                    config(format!(
                        "{}:{}: `{t}` is not a number",
                        path.display(),
                        i + 1
                    ))
                })
            })
            .collect();
        let row = row?;
        if row.len() != keep {
            return Err(config(format!(
                "{}:{}: expected {keep} values",
                path.display(),
                i + 1
            )));
        }
        rows.push(row);
    }
    Ok((names, rows))
}

fn cmd_estimate_avar(args: &RunArgs, sink: &Sink) -> CliResult<()> {
    let path = args
        .trace
        .as_ref()
        .ok_or_else(|| config("--trace CSV is required"))?;
    let h = parse_h(args)?;
    let (names, rows) = read_trace(path)?;
    let f = h.on_columns(&names)?;
    let series: Vec<f64> = rows.iter().map(|r| f(r)).collect();
    let est = batch_means_avar(&series, args.batches)?;
    let mut t = Table::new(&["h", "point", "batch_count", "batch_size", "standard_error"]);
    t.push(vec![
        h.name(),
        fmt_g(est.point),
        est.batch_count.to_string(),
        est.batch_size.to_string(),
        fmt_g(est.standard_error),
    ]);
    emit(
        sink,
        "estimate.csv",
        &t,
        &[("trace_rows", series.len().to_string())],
    )
}

fn cmd_series(args: &RunArgs, sink: &Sink) -> CliResult<()> {
    let model = resolve_model(args)?;
    let kind = args
        .kind
        .ok_or_else(|| config("--kind tv|rate|avar is required"))?;
    let step = args.resolution.unwrap_or(DEFAULT_GRID_STEP);
    if !(step > 0.0 && step <= 0.5) {
        return Err(config(format!(
            "--resolution must lie in (0, 0.5], got {step}"
        )));
    }
    if kind != SeriesKind::Tv && model.dim() != 2 {
        return Err(Error::UnsupportedCombination(format!(
            "curves against alpha1 need a two-coordinate model, got dimension {}",
            model.dim()
        ))
        .into());
    }
    let t = match kind {
        SeriesKind::Tv => {
            let Model::Discrete(m) = &model else {
                return Err(Error::UnsupportedCombination(
                    "tv curves are exact only for discrete models".into(),
                )
                .into());
            };
            let alpha = resolve_alpha(args, 2)?;
            let start = args.start_state.unwrap_or(0);
            if start >= m.len() {
                return Err(config(format!(
                    "--start-state {start} exceeds the {} states",
                    m.len()
                )));
            }
            let scan = assemble_scan_matrix(m, alpha.get(0))?;
            let mut t = Table::new(&["t", "tv"]);
            for (k, v) in tv_curve(
                &scan,
                &point_mass(m.len(), start),
                args.t_max.unwrap_or(DEFAULT_T_MAX),
            )? {
                t.push(vec![k.to_string(), fmt_g(v)]);
            }
            t
        }
        SeriesKind::Rate => {
            let mut t = Table::new(&["alpha1", "rate"]);
            for a in grid_points(0.0, 1.0, step) {
                t.push(vec![
                    fmt_g(a),
                    fmt_g(rate_at(&model, &Selection::bivariate(a)?)?),
                ]);
            }
            t
        }
        SeriesKind::Avar => {
            let h = parse_h(args)?;
            let mut t = Table::new(&["alpha1", "avar"]);
            for a in grid_points(AVAR_RANGE.0, AVAR_RANGE.1, step) {
                t.push(vec![fmt_g(a), fmt_g(avar_at(&model, &h, a)?)]);
            }
            t
        }
    };
    emit(sink, "series.csv", &t, &[("model", model.label())])
}
