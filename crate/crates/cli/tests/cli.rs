use std::path::Path;
use std::process::{Command, Output};

fn scanopt(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_scanopt"))
        .args(args)
        .env_remove("SCANOPT_SEED")
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

/// Last field of the first data row of a CSV on stdout.
fn field(o: &Output, column: &str) -> String {
    let text = stdout(o);
    let mut lines = text.lines().filter(|l| !l.starts_with('#'));
    let header: Vec<&str> = lines.next().unwrap().split(',').collect();
    let j = header.iter().position(|h| *h == column).unwrap();
    let row = lines.next().unwrap();
    // labels may be quoted and contain commas; columns after the first are plain
    let cells: Vec<&str> = if let Some(rest) = row.strip_prefix('"') {
        let end = rest.find('"').unwrap();
        std::iter::once(&rest[..end])
            .chain(rest[end + 2..].split(','))
            .collect()
    } else {
        row.split(',').collect()
    };
    cells[j].to_string()
}

fn num(o: &Output, column: &str) -> f64 {
    field(o, column).parse().unwrap()
}

fn read(dir: &Path, name: &str) -> String {
    std::fs::read_to_string(dir.join(name)).unwrap()
}

#[test]
fn rate_examples() {
    let tuned = scanopt(&[
        "rate",
        "--gaussian-exchangeable",
        "10,1,1",
        "--alpha",
        "0.22,0.39,0.39",
    ]);
    let equal = scanopt(&[
        "rate",
        "--gaussian-exchangeable",
        "10,1,1",
        "--alpha",
        "equal",
    ]);
    assert!(tuned.status.success());
    assert!(num(&tuned, "rate") < num(&equal, "rate"));
    let r = scanopt(&["rate", "--discrete", "6,3,0.5", "--alpha", "0.5,0.5"]);
    assert!((num(&r, "rate") - 0.908248290464).abs() < 1e-11);
    let frozen = scanopt(&["rate", "--discrete", "6,3,0.5", "--alpha", "1,0"]);
    assert_eq!(field(&frozen, "rate"), "1");
}

#[test]
fn avar_examples() {
    let g = scanopt(&[
        "avar",
        "--gaussian-biv",
        "2,1,0.5",
        "--alpha1",
        "0.93",
        "--h",
        "sum",
    ]);
    assert_eq!(field(&g, "avar"), "14.973225");
    let c = scanopt(&[
        "avar",
        "--discrete",
        "6,3,0.5",
        "--alpha1",
        "0.5",
        "--h",
        "const",
    ]);
    assert_eq!(field(&c, "avar"), "0");
    let d = scanopt(&[
        "avar",
        "--discrete",
        "6,3,0.5",
        "--alpha1",
        "0.5",
        "--h",
        "sum",
    ]);
    assert_eq!(field(&d, "avar"), "140.25");
    let unsupported = scanopt(&[
        "avar",
        "--gaussian-exchangeable",
        "10,1,1",
        "--alpha",
        "equal",
    ]);
    assert_eq!(unsupported.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&unsupported.stderr).contains("estimate-avar"));
}

#[test]
fn optimize_writes_csv_and_json() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_str().unwrap();
    let o = scanopt(&[
        "optimize",
        "--criterion",
        "avar",
        "--gaussian-biv",
        "2,1,0.5",
        "--h",
        "sum",
        "--out",
        out,
    ]);
    assert!(o.status.success());
    let a: f64 = field(&o, "alpha_star")
        .split(';')
        .next()
        .unwrap()
        .parse()
        .unwrap();
    assert!((a - 0.9286).abs() < 0.005);
    let json: serde_json::Value = serde_json::from_str(&read(dir.path(), "optimize.json")).unwrap();
    assert_eq!(json["header"]["rng"], "ChaCha8Rng");
    assert_eq!(json["result"]["criterion"], "avar");
    let csv = read(dir.path(), "optimize.csv");
    assert!(csv.starts_with("# scanopt "));
    assert!(csv.contains("# config: {"));

    let o = scanopt(&[
        "optimize",
        "--criterion",
        "rate",
        "--gaussian-exchangeable",
        "10,1,1",
    ]);
    let alpha: Vec<f64> = field(&o, "alpha_star")
        .split(';')
        .map(|v| v.parse().unwrap())
        .collect();
    for (a, w) in alpha.iter().zip([0.22, 0.39, 0.39]) {
        assert!((a - w).abs() <= 0.02);
    }
    let gain = num(&o, "relative_gain");
    assert!(gain > 0.0 && gain < 0.10);
}

#[test]
fn exit_codes() {
    assert_eq!(
        scanopt(&["rate", "--alpha", "equal"]).status.code(),
        Some(2)
    );
    assert_eq!(
        scanopt(&["rate", "--discrete", "6,3", "--alpha", "equal"])
            .status
            .code(),
        Some(2)
    );
    assert_eq!(
        scanopt(&["rate", "--discrete", "6,3,0.5", "--alpha", "0.2,0.2"])
            .status
            .code(),
        Some(2)
    );
    assert_eq!(
        scanopt(&["rate", "--discrete", "6,3,0.5"]).status.code(),
        Some(2)
    );
    assert_eq!(scanopt(&["bogus"]).status.code(), Some(2));
    assert_eq!(
        scanopt(&[
            "simulate",
            "--discrete",
            "1,1,0.5",
            "--alpha",
            "equal",
            "--iterations",
            "5"
        ])
        .status
        .code(),
        Some(2)
    );
    let dir = tempfile::tempdir().unwrap();
    let f = dir.path().join("sigma.csv");
    std::fs::write(&f, "1,1\n1,1\n").unwrap();
    let o = scanopt(&[
        "rate",
        "--gaussian-file",
        f.to_str().unwrap(),
        "--alpha",
        "equal",
    ]);
    assert_eq!(o.status.code(), Some(3));
    let v = scanopt(&[
        "validate",
        "--gaussian-biv",
        "2,1,0.5",
        "--alpha1",
        "0.5",
        "--seed",
        "1",
        "--iterations",
        "100000",
    ]);
    assert_eq!(v.status.code(), Some(4));
}

#[test]
fn config_file_and_flag_precedence() {
    let dir = tempfile::tempdir().unwrap();
    let kv = dir.path().join("run.conf");
    std::fs::write(&kv, "# comment\ndiscrete = 6,3,0.5\nalpha1 = 0.3\n").unwrap();
    let kv = kv.to_str().unwrap();
    let from_file = scanopt(&["rate", "--config", kv]);
    let direct = scanopt(&["rate", "--discrete", "6,3,0.5", "--alpha1", "0.3"]);
    assert_eq!(field(&from_file, "rate"), field(&direct, "rate"));
    let overridden = scanopt(&["rate", "--config", kv, "--alpha1", "0.5"]);
    assert_eq!(field(&overridden, "alpha"), "0.5;0.5");

    let js = dir.path().join("run.json");
    std::fs::write(&js, r#"{"gaussian_biv": "2,1,0.5", "alpha": [0.5, 0.5]}"#).unwrap();
    let o = scanopt(&["rate", "--config", js.to_str().unwrap()]);
    assert_eq!(field(&o, "rate"), "0.75");

    std::fs::write(dir.path().join("bad.conf"), "no equals sign\n").unwrap();
    let bad = scanopt(&[
        "rate",
        "--config",
        dir.path().join("bad.conf").to_str().unwrap(),
    ]);
    assert_eq!(bad.status.code(), Some(2));
}

#[test]
fn seed_from_environment() {
    let dir = tempfile::tempdir().unwrap();
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    let base = [
        "simulate",
        "--discrete",
        "3,2,0.5",
        "--alpha",
        "equal",
        "--iterations",
        "500",
    ];
    let mut args = base.to_vec();
    args.extend(["--seed", "12", "--out", a.to_str().unwrap()]);
    assert!(scanopt(&args).status.success());
    let mut args = base.to_vec();
    args.extend(["--out", b.to_str().unwrap()]);
    let o = Command::new(env!("CARGO_BIN_EXE_scanopt"))
        .args(&args)
        .env("SCANOPT_SEED", "12")
        .output()
        .unwrap();
    assert!(o.status.success());
    assert_eq!(read(&a, "trace.csv"), read(&b, "trace.csv"));
    assert!(read(&a, "trace.csv").contains("# seed: 12"));
}

#[test]
fn simulate_then_estimate() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_str().unwrap();
    let o = scanopt(&[
        "simulate",
        "--gaussian-biv",
        "2,1,0.5",
        "--alpha1",
        "0.5",
        "--iterations",
        "20000",
        "--seed",
        "4",
        "--out",
        out,
    ]);
    assert!(o.status.success());
    let trace = read(dir.path(), "trace.csv");
    let body: Vec<&str> = trace.lines().filter(|l| !l.starts_with('#')).collect();
    assert_eq!(body[0], "x1,x2,coordinate");
    assert_eq!(body.len(), 20_001);
    let tr = dir.path().join("trace.csv");
    let e = scanopt(&[
        "estimate-avar",
        "--trace",
        tr.to_str().unwrap(),
        "--h",
        "coord:x1",
    ]);
    assert!(e.status.success());
    assert_eq!(field(&e, "batch_count"), "141");
    assert!(num(&e, "point") > 0.0);
}

#[test]
fn two_phase_without_second_phase() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_str().unwrap();
    let o = scanopt(&[
        "two-phase",
        "--discrete",
        "6,3,0.5",
        "--h",
        "sum",
        "--phase1",
        "5000",
        "--phase2",
        "0",
        "--seed",
        "2",
        "--out",
        out,
    ]);
    assert!(o.status.success());
    assert!(dir.path().join("phase1_trace.csv").exists());
    assert!(dir.path().join("tune_report.csv").exists());
    assert!(!dir.path().join("phase2_trace.csv").exists());
}

#[test]
fn series_curves() {
    let o = scanopt(&[
        "series",
        "--kind",
        "tv",
        "--discrete",
        "1,1,0.5",
        "--alpha1",
        "0.5",
        "--t-max",
        "3",
    ]);
    assert_eq!(stdout(&o), "t,tv\n0,0.75\n1,0.5\n2,0.4375\n3,0.375\n");
    let o = scanopt(&[
        "series",
        "--kind",
        "rate",
        "--gaussian-biv",
        "2,1,0.5",
        "--resolution",
        "0.5",
    ]);
    assert_eq!(stdout(&o), "alpha1,rate\n0,1\n0.5,0.75\n1,1\n");
}

#[test]
fn reruns_are_byte_identical() {
    let runs: [&[&str]; 3] = [
        &[
            "simulate",
            "--discrete",
            "6,3,0.5",
            "--alpha1",
            "0.3",
            "--iterations",
            "3000",
            "--seed",
            "9",
        ],
        &[
            "two-phase",
            "--gaussian-biv",
            "2,1,0.5",
            "--phase1",
            "3000",
            "--phase2",
            "1000",
            "--seed",
            "9",
        ],
        &[
            "validate",
            "--discrete",
            "1,1,0.5",
            "--alpha1",
            "0.5",
            "--iterations",
            "20000",
            "--seed",
            "9",
            "--tolerance",
            "0.5",
        ],
    ];
    for args in runs {
        let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
        for d in [&a, &b] {
            let mut full = args.to_vec();
            full.extend(["--out", d.path().to_str().unwrap()]);
            assert!(scanopt(&full).status.success(), "{args:?}");
        }
        let mut names: Vec<_> = std::fs::read_dir(a.path())
            .unwrap()
            .map(|e| e.unwrap().file_name())
            .collect();
        names.sort();
        assert!(!names.is_empty());
        for n in names {
            assert_eq!(
                std::fs::read(a.path().join(&n)).unwrap(),
                std::fs::read(b.path().join(&n)).unwrap(),
                "{n:?}"
            );
        }
    }
}
