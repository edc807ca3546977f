//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! nonzero if any criterion fails.

use std::path::Path;
use std::process::{Command, ExitCode, Output};
use std::time::{Duration, Instant};

use scanopt::diagnostics::point_mass;
use scanopt::discrete::FunctionOnStates;
use scanopt::gaussian::GaussianTarget;
use scanopt::optimize::scan_1d;
use scanopt::sampler::{discrete_state_function, DiscreteGibbs, GaussianGibbs, GibbsTarget};
use scanopt::{
    assemble_scan_matrix, autocov_series_avar, batch_means_avar, bivariate_avar_sum,
    bivariate_rate_closed_form, build_binomial_model, build_custom_model, default_max_lag,
    discrete_scan_rate, exchangeable_sigma, gaussian_scan_rate, peskun_avar, run_chain, tune_pilot,
    tv_curve, BivariateGaussian, JointModel, RngStream, Selection, TuneCriterion,
};

type Outcome = Result<String, String>;

struct Criterion {
    id: u8,
    name: &'static str,
    limit: Duration,
    run: fn() -> Outcome,
}

const SEED: u64 = 1;

fn scanopt(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_scanopt"))
        .args(args)
        .env_remove("SCANOPT_SEED")
        .output()
        .expect("scanopt binary runs")
}

fn csv_field(o: &Output, column: &str) -> Result<String, String> {
    if !o.status.success() {
        return Err(format!(
            "exit {:?}: {}",
            o.status.code(),
            String::from_utf8_lossy(&o.stderr).trim()
        ));
    }
    let text = String::from_utf8_lossy(&o.stdout).into_owned();
    let mut lines = text.lines().filter(|l| !l.starts_with('#'));
    let header: Vec<&str> = lines.next().ok_or("no output")?.split(',').collect();
    let j = header
        .iter()
        .position(|h| *h == column)
        .ok_or(format!("no column {column}"))?;
    let row = lines.next().ok_or("no data row")?;
    let cells: Vec<&str> = if let Some(rest) = row.strip_prefix('"') {
        let end = rest.find('"').ok_or("unterminated quote")?;
        std::iter::once(&rest[..end])
            .chain(rest[end + 2..].split(','))
            .collect()
    } else {
        row.split(',').collect()
    };
    Ok(cells[j].to_string())
}

fn alpha_field(o: &Output) -> Result<Vec<f64>, String> {
    csv_field(o, "alpha_star")?
        .split(';')
        .map(|v| v.parse::<f64>().map_err(|e| e.to_string()))
        .collect()
}

fn check(ok: bool, detail: String) -> Outcome {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn c01_bivariate_avar_optimum() -> Outcome {
    let o = scanopt(&[
        "optimize",
        "--criterion",
        "avar",
        "--gaussian-biv",
        "2,1,0.5",
        "--h",
        "sum",
    ]);
    let a = alpha_field(&o)?[0];
    check(
        (a - 0.9286).abs() <= 0.005,
        format!("alpha1 = {a:.6}, target 0.9286 ± 0.005"),
    )
}

fn c02_trivariate_rate_optimum() -> Outcome {
    let o = scanopt(&[
        "optimize",
        "--criterion",
        "rate",
        "--gaussian-exchangeable",
        "10,1,1",
        "--resolution",
        "0.01",
    ]);
    let a = alpha_field(&o)?;
    let gain: f64 = csv_field(&o, "relative_gain")?
        .parse()
        .map_err(|_| "bad gain")?;
    let worst = a
        .iter()
        .zip([0.22, 0.39, 0.39])
        .map(|(x, w)| (x - w).abs())
        .fold(0.0, f64::max);
    check(
        worst <= 0.02 && gain > 0.0 && gain < 0.10,
        format!("alpha = ({:.4}, {:.4}, {:.4}), max deviation {worst:.4} ≤ 0.02, gain {gain:.4} in (0, 0.10)", a[0], a[1], a[2]),
    )
}

fn c03_discrete_avar_optimum() -> Outcome {
    let o = scanopt(&[
        "optimize",
        "--criterion",
        "avar",
        "--discrete",
        "6,3,0.5",
        "--h",
        "sum",
    ]);
    let a = alpha_field(&o)?[0];
    let m = build_binomial_model(6, 3, 0.5).map_err(|e| e.to_string())?;
    let mut others = Vec::new();
    for (name, h) in [
        ("x", FunctionOnStates::from_fn(&m, |(x, _)| x as f64)),
        ("theta", FunctionOnStates::from_fn(&m, |(_, t)| t as f64)),
    ] {
        let (pts, best) = scan_1d(
            |b| peskun_avar(&assemble_scan_matrix(&m, b)?, &h),
            0.01,
            0.99,
            0.01,
        )
        .map_err(|e| e.to_string())?;
        others.push(format!("h={name}: {:.2}", pts[best].0));
    }
    check(
        (a - 0.56).abs() <= 0.05,
        format!(
            "achieved argmin alpha1 = {a:.6} for h = x + theta, target 0.56 ± 0.05 (other h on the 0.01 grid: {})",
            others.join(", ")
        ),
    )
}

fn c04_discrete_rate_flat_at_half() -> Outcome {
    let mut found = Vec::new();
    for (n1, n2, p) in [(3, 2, 0.5), (6, 3, 0.5), (5, 5, 0.3)] {
        let m = build_binomial_model(n1, n2, p).map_err(|e| e.to_string())?;
        let (pts, best) = scan_1d(
            |a| discrete_scan_rate(&assemble_scan_matrix(&m, a)?),
            0.01,
            0.99,
            0.01,
        )
        .map_err(|e| e.to_string())?;
        found.push((format!("({n1},{n2},{p})"), pts[best].0));
    }
    let ok = found.iter().all(|(_, a)| (a - 0.5).abs() < 1e-9);
    check(
        ok,
        found
            .iter()
            .map(|(m, a)| format!("{m} → {a:.2}"))
            .collect::<Vec<_>>()
            .join(", "),
    )
}

fn c05_closed_form_identity() -> Outcome {
    let mut worst: f64 = 0.0;
    let mut count = 0;
    for rho in [-0.95, -0.7, -0.4, -0.1, 0.0, 0.2, 0.5, 0.8, 0.99] {
        for s1 in [0.5, 1.0, 7.0] {
            for s2 in [0.5, 1.0, 7.0] {
                let t = BivariateGaussian::new(s1, s2, rho)
                    .and_then(|b| b.target())
                    .map_err(|e| e.to_string())?;
                for i in 0..=100 {
                    let a = i as f64 / 100.0;
                    let s = gaussian_scan_rate(&t, &Selection::bivariate(a).unwrap())
                        .map_err(|e| e.to_string())?;
                    let c = bivariate_rate_closed_form(rho, a).map_err(|e| e.to_string())?;
                    worst = worst.max((s - c).abs());
                    count += 1;
                }
            }
        }
    }
    check(
        worst < 1e-9,
        format!("max |closed − spectral| = {worst:.2e} over {count} points"),
    )
}

fn c06_scale_invariance() -> Outcome {
    let t = GaussianTarget::new(exchangeable_sigma(&[10.0, 1.0, 1.0]).map_err(|e| e.to_string())?)
        .map_err(|e| e.to_string())?;
    let mut worst: f64 = 0.0;
    for scales in [
        [0.1, 5.0, 2.0],
        [3.0, 3.0, 0.01],
        [20.0, 1.0, 0.05],
        [1e-3, 1e-3, 1e-3],
    ] {
        let r = t.rescaled(&scales).map_err(|e| e.to_string())?;
        for alpha in [
            vec![0.22, 0.39, 0.39],
            vec![0.6, 0.2, 0.2],
            vec![1.0 / 3.0; 3],
            vec![0.05, 0.05, 0.9],
        ] {
            let a = Selection::new(alpha).unwrap();
            let d = gaussian_scan_rate(&t, &a).unwrap() - gaussian_scan_rate(&r, &a).unwrap();
            worst = worst.max(d.abs());
        }
    }
    check(
        worst < 1e-9,
        format!("max rate change under rescaling = {worst:.2e}"),
    )
}

fn testbeds() -> Vec<JointModel> {
    let mut v: Vec<JointModel> = [
        (1, 1, 0.5),
        (3, 2, 0.5),
        (6, 3, 0.5),
        (5, 5, 0.3),
        (2, 7, 0.8),
        (8, 6, 0.4),
    ]
    .into_iter()
    .map(|(a, b, p)| build_binomial_model(a, b, p).unwrap())
    .collect();
    let custom = [
        ((0, 0), 0.1),
        ((1, 0), 0.2),
        ((1, 1), 0.15),
        ((2, 1), 0.25),
        ((2, 2), 0.05),
        ((0, 2), 0.25),
    ];
    v.push(build_custom_model(&custom).unwrap());
    v
}

fn c07_oracle_equivalence() -> Outcome {
    let mut worst: f64 = 0.0;
    let mut cases = 0;
    for m in testbeds() {
        for a in [0.3, 0.5, 0.7] {
            let s = assemble_scan_matrix(&m, a).map_err(|e| e.to_string())?;
            let lag = default_max_lag(&s).map_err(|e| e.to_string())?;
            for h in [
                FunctionOnStates::coordinate_sum(&m),
                FunctionOnStates::from_fn(&m, |(x, t)| ((x * 3 + t) % 5) as f64),
            ] {
                let p = peskun_avar(&s, &h).map_err(|e| e.to_string())?;
                let q = autocov_series_avar(&s, &h, lag).map_err(|e| e.to_string())?;
                worst = worst.max((p - q).abs());
                cases += 1;
            }
        }
    }
    check(
        worst < 1e-8,
        format!("max |Peskun − series| = {worst:.2e} over {cases} cases"),
    )
}

fn c08_constant_null() -> Outcome {
    let m = build_binomial_model(6, 3, 0.5).unwrap();
    let c = FunctionOnStates::constant(&m, 2.5);
    let p: f64 =
        peskun_avar(&assemble_scan_matrix(&m, 0.5).unwrap(), &c).map_err(|e| e.to_string())?;
    let g = DiscreteGibbs::new(&m);
    let trace = run_chain(
        &g,
        &Selection::equal(2),
        100_000,
        0,
        &mut RngStream::new(SEED, 0),
    )
    .map_err(|e| e.to_string())?;
    let b = batch_means_avar(&trace.h_series(discrete_state_function(&m, &c)), None)
        .map_err(|e| e.to_string())?;
    check(
        p.abs() <= 1e-10 && b.point == 0.0,
        format!("Peskun {p:e}, batch means {:e}", b.point),
    )
}

fn c09_theory_vs_simulation() -> Outcome {
    let m = build_binomial_model(6, 3, 0.5).unwrap();
    let h = FunctionOnStates::coordinate_sum(&m);
    let g = DiscreteGibbs::new(&m);
    let mut parts = Vec::new();
    let mut ok = true;
    let mut stream = 0;
    for a in [0.5, 0.56] {
        let exact = peskun_avar(&assemble_scan_matrix(&m, a).unwrap(), &h).unwrap();
        let trace = run_chain(
            &g,
            &Selection::bivariate(a).unwrap(),
            1_000_000,
            0,
            &mut RngStream::new(SEED, stream),
        )
        .map_err(|e| e.to_string())?;
        stream += 1;
        let est = batch_means_avar(&trace.h_series(discrete_state_function(&m, &h)), None)
            .unwrap()
            .point;
        let rel = (est - exact).abs() / exact;
        ok &= rel < 0.10;
        parts.push(format!(
            "discrete α₁={a}: {est:.3} vs {exact:.3} ({:.1}%)",
            100.0 * rel
        ));
    }
    let spec = BivariateGaussian::new(2.0, 1.0, 0.5).unwrap();
    let t = spec.target().unwrap();
    let gg = GaussianGibbs::new(&t);
    for a in [0.5, 0.93] {
        let poly = bivariate_avar_sum(&spec, a);
        let trace = run_chain(
            &gg,
            &Selection::bivariate(a).unwrap(),
            1_000_000,
            gg.default_burn_in(),
            &mut RngStream::new(SEED, stream),
        )
        .map_err(|e| e.to_string())?;
        stream += 1;
        let est = batch_means_avar(&trace.h_series(|s| s[0] + s[1]), None)
            .unwrap()
            .point;
        let rel = (est - poly).abs() / poly;
        ok &= rel < 0.10;
        parts.push(format!(
            "Gaussian α₁={a}: {est:.3} vs {poly:.3} ({:.1}%)",
            100.0 * rel
        ));
    }
    check(ok, parts.join("; "))
}

fn c10_tv_decay() -> Outcome {
    let m = build_binomial_model(1, 1, 0.5).unwrap();
    let s = assemble_scan_matrix(&m, 0.5).unwrap();
    let rho2 = discrete_scan_rate(&s).map_err(|e| e.to_string())?;
    let mut worst: f64 = 0.0;
    for start in 0..m.len() {
        let curve = tv_curve(&s, &point_mass(m.len(), start), 120).map_err(|e| e.to_string())?;
        for t in 50..120 {
            worst = worst.max((curve[t + 1].1 / curve[t].1 - rho2).abs());
        }
    }
    check(
        worst < 0.01,
        format!("max |tv(t+1)/tv(t) − ρ₂| = {worst:.2e} for 50 ≤ t < 120, ρ₂ = {rho2:.6}"),
    )
}

fn c11_tuning_pipeline() -> Outcome {
    let t = BivariateGaussian::new(2.0, 1.0, 0.5)
        .unwrap()
        .target()
        .unwrap();
    let g = GaussianGibbs::new(&t);
    let pilot = run_chain(
        &g,
        &Selection::equal(2),
        100_000,
        g.default_burn_in(),
        &mut RngStream::new(SEED, 0),
    )
    .map_err(|e| e.to_string())?;
    let r = tune_pilot(&pilot, TuneCriterion::AvarSum, None).map_err(|e| e.to_string())?;
    let a = r.alpha_hat.get(0);
    check(
        (a - 0.9286).abs() < 0.05,
        format!("alpha_hat = {a:.4}, target 0.9286 ± 0.05"),
    )
}

fn run_into(args: &[&str], dir: &Path) -> Result<Vec<u8>, String> {
    let mut full: Vec<&str> = args.to_vec();
    let d = dir.to_str().unwrap();
    full.extend(["--out", d]);
    let o = scanopt(&full);
    if !matches!(o.status.code(), Some(0) | Some(4)) {
        return Err(format!("{args:?} exited {:?}", o.status.code()));
    }
    Ok(o.stdout)
}

fn c12_reproducibility() -> Outcome {
    let scratch = tempfile::tempdir().map_err(|e| e.to_string())?;
    let trace_dir = scratch.path().join("trace");
    let trace = trace_dir.join("trace.csv");
    let trace = trace.to_str().unwrap();
    let commands: Vec<Vec<&str>> = vec![
        vec![
            "rate",
            "--gaussian-exchangeable",
            "10,1,1",
            "--alpha",
            "equal",
        ],
        vec![
            "avar",
            "--discrete",
            "6,3,0.5",
            "--alpha1",
            "0.56",
            "--h",
            "sum",
        ],
        vec![
            "optimize",
            "--criterion",
            "rate",
            "--gaussian-exchangeable",
            "10,1,1",
        ],
        vec![
            "optimize",
            "--criterion",
            "avar",
            "--discrete",
            "6,3,0.5",
            "--h",
            "sum",
        ],
        vec![
            "simulate",
            "--gaussian-biv",
            "2,1,0.5",
            "--alpha1",
            "0.93",
            "--iterations",
            "20000",
            "--seed",
            "5",
        ],
        vec![
            "validate",
            "--discrete",
            "6,3,0.5",
            "--alpha1",
            "0.5",
            "--iterations",
            "100000",
            "--seed",
            "5",
        ],
        vec![
            "two-phase",
            "--discrete",
            "6,3,0.5",
            "--h",
            "sum",
            "--phase1",
            "20000",
            "--phase2",
            "20000",
            "--seed",
            "5",
        ],
        vec![
            "two-phase",
            "--gaussian-biv",
            "2,1,0.5",
            "--phase1",
            "20000",
            "--phase2",
            "5000",
            "--seed",
            "5",
        ],
        vec![
            "series",
            "--kind",
            "tv",
            "--discrete",
            "1,1,0.5",
            "--alpha1",
            "0.5",
        ],
        vec!["series", "--kind", "avar", "--gaussian-biv", "2,1,0.5"],
    ];
    run_into(
        &[
            "simulate",
            "--discrete",
            "3,2,0.5",
            "--alpha",
            "equal",
            "--iterations",
            "20000",
            "--seed",
            "5",
        ],
        &trace_dir,
    )?;
    let mut commands = commands;
    commands.push(vec!["estimate-avar", "--trace", trace, "--h", "sum"]);
    let mut files = 0;
    for (i, args) in commands.iter().enumerate() {
        let a = scratch.path().join(format!("{i}a"));
        let b = scratch.path().join(format!("{i}b"));
        let (oa, ob) = (run_into(args, &a)?, run_into(args, &b)?);
        if oa != ob {
            return Err(format!("stdout differs for {}", args[0]));
        }
        let mut names: Vec<_> = std::fs::read_dir(&a)
            .map_err(|e| e.to_string())?
            .map(|e| e.unwrap().file_name())
            .collect();
        names.sort();
        for n in names {
            let (x, y) = (std::fs::read(a.join(&n)), std::fs::read(b.join(&n)));
            if x.map_err(|e| e.to_string())? != y.map_err(|e| e.to_string())? {
                return Err(format!("{} differs for {}", n.to_string_lossy(), args[0]));
            }
            files += 1;
        }
    }
    Ok(format!(
        "{} commands, {files} files byte-identical across reruns",
        commands.len()
    ))
}

fn main() -> ExitCode {
    let criteria = [
        Criterion {
            id: 1,
            name: "bivariate Gaussian avar optimum",
            limit: Duration::from_secs(1),
            run: c01_bivariate_avar_optimum,
        },
        Criterion {
            id: 2,
            name: "trivariate Gaussian rate optimum",
            limit: Duration::from_secs(30),
            run: c02_trivariate_rate_optimum,
        },
        Criterion {
            id: 3,
            name: "discrete avar optimum",
            limit: Duration::from_secs(10),
            run: c03_discrete_avar_optimum,
        },
        Criterion {
            id: 4,
            name: "discrete rate flat at 0.5",
            limit: Duration::from_secs(30),
            run: c04_discrete_rate_flat_at_half,
        },
        Criterion {
            id: 5,
            name: "closed-form/spectral identity",
            limit: Duration::from_secs(1),
            run: c05_closed_form_identity,
        },
        Criterion {
            id: 6,
            name: "scale invariance",
            limit: Duration::from_secs(1),
            run: c06_scale_invariance,
        },
        Criterion {
            id: 7,
            name: "oracle equivalence",
            limit: Duration::from_secs(10),
            run: c07_oracle_equivalence,
        },
        Criterion {
            id: 8,
            name: "constant-function null",
            limit: Duration::from_secs(1),
            run: c08_constant_null,
        },
        Criterion {
            id: 9,
            name: "theory vs simulation",
            limit: Duration::from_secs(120),
            run: c09_theory_vs_simulation,
        },
        Criterion {
            id: 10,
            name: "tv geometric decay",
            limit: Duration::from_secs(1),
            run: c10_tv_decay,
        },
        Criterion {
            id: 11,
            name: "tuning pipeline",
            limit: Duration::from_secs(30),
            run: c11_tuning_pipeline,
        },
        Criterion {
            id: 12,
            name: "reproducibility",
            limit: Duration::from_secs(120),
            run: c12_reproducibility,
        },
    ];
    let mut failed = 0;
    for c in &criteria {
        let start = Instant::now();
        let outcome = (c.run)();
        let elapsed = start.elapsed();
        let (mut pass, mut detail) = match outcome {
            Ok(d) => (true, d),
            Err(d) => (false, d),
        };
        if elapsed > c.limit {
            pass = false;
            detail.push_str(&format!("; over time limit {:?}", c.limit));
        }
        failed += usize::from(!pass);
        println!(
            "{} [{:02}] {}: {} ({:.2} s)",
            if pass { "PASS" } else { "FAIL" },
            c.id,
            c.name,
            detail,
            elapsed.as_secs_f64()
        );
    }
    println!(
        "acceptance: {} passed, {failed} failed",
        criteria.len() - failed
    );
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
