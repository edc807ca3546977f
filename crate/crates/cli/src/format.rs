//! Deterministic text output: 12-significant-digit numbers, CSV tables with
//! comment headers, and aligned plain-text tables.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::args::{CommandKind, RunArgs};
use crate::error::{CliError, CliResult};

pub const SIG_DIGITS: usize = 12;

/// `%.12g`: fixed notation for exponents in `[-5, 12)`, scientific otherwise,
/// trailing zeros removed.
pub fn fmt_g(x: f64) -> String {
    if x == 0.0 {
        return "0".into();
    }
    if !x.is_finite() {
        return if x.is_nan() {
            "nan".into()
        } else if x > 0.0 {
            "inf".into()
        } else {
            "-inf".into()
        };
    }
    let sci = format!("{:.*e}", SIG_DIGITS - 1, x);
    let (mantissa, exp) = sci.split_once('e').expect("exponent present");
    let exp: i32 = exp.parse().expect("integer exponent");
    if exp < -5 || exp >= SIG_DIGITS as i32 {
        let m = trim_zeros(mantissa);
        let sign = if exp < 0 { '-' } else { '+' };
        format!("{m}e{sign}{:02}", exp.abs())
    } else {
        let decimals = (SIG_DIGITS as i32 - 1 - exp).max(0) as usize;
        trim_zeros(&format!("{x:.decimals$}")).to_string()
    }
}

fn trim_zeros(s: &str) -> &str {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.')
    } else {
        s
    }
}

/// Value rounded to the printed precision, for JSON output.
pub fn round_sig(x: f64) -> f64 {
    fmt_g(x).parse().unwrap_or(x)
}

pub fn join_g(xs: &[f64], sep: &str) -> String {
    xs.iter().map(|&v| fmt_g(v)).collect::<Vec<_>>().join(sep)
}

#[derive(Serialize)]
struct ResolvedConfig<'a> {
    command: &'a str,
    #[serde(flatten)]
    args: &'a RunArgs,
}

/// Provenance recorded at the top of every artifact.
#[derive(Debug, Clone, Serialize)]
pub struct Header {
    pub tool: String,
    pub version: String,
    pub command: String,
    pub config: serde_json::Value,
    pub seed: Option<u64>,
    pub rng: String,
}

impl Header {
    pub fn new(kind: CommandKind, args: &RunArgs) -> Self {
        let config = serde_json::to_value(ResolvedConfig {
            command: kind.name(),
            args,
        })
        .expect("config serializes");
        Self {
            tool: "scanopt".into(),
            version: env!("CARGO_PKG_VERSION").into(),
            command: kind.name().into(),
            config,
            seed: args.seed,
            rng: scanopt::sampler::RNG_ALGORITHM.into(),
        }
    }

    pub fn comment_lines(&self, extra: &[(&str, String)]) -> String {
        let mut s = String::new();
        let seed = self
            .seed
            .map_or_else(|| "none".to_string(), |v| v.to_string());
        writeln!(s, "# {} {}", self.tool, self.version).unwrap();
        writeln!(s, "# command: {}", self.command).unwrap();
        writeln!(s, "# config: {}", self.config).unwrap();
        writeln!(s, "# seed: {seed}").unwrap();
        writeln!(s, "# rng: {}", self.rng).unwrap();
        for (k, v) in extra {
            writeln!(s, "# {k}: {v}").unwrap();
        }
        s
    }
}

/// A CSV table with string cells.
#[derive(Debug, Clone, Default)]
pub struct Table {
    pub columns: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new(columns: &[&str]) -> Self {
        Self {
            columns: columns.iter().map(|c| c.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<String>) {
        debug_assert_eq!(row.len(), self.columns.len());
        self.rows.push(row);
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::new();
        writeln!(
            s,
            "{}",
            self.columns
                .iter()
                .map(|c| csv_cell(c))
                .collect::<Vec<_>>()
                .join(",")
        )
        .unwrap();
        for r in &self.rows {
            writeln!(
                s,
                "{}",
                r.iter().map(|c| csv_cell(c)).collect::<Vec<_>>().join(",")
            )
            .unwrap();
        }
        s
    }

    pub fn to_aligned(&self) -> String {
        let widths: Vec<usize> = (0..self.columns.len())
            .map(|j| {
                self.rows
                    .iter()
                    .map(|r| r[j].chars().count())
                    .chain([self.columns[j].chars().count()])
                    .max()
                    .unwrap_or(0)
            })
            .collect();
        let line = |cells: &[String]| {
            cells
                .iter()
                .zip(&widths)
                .map(|(c, w)| format!("{c:<w$}"))
                .collect::<Vec<_>>()
                .join("  ")
                .trim_end()
                .to_string()
        };
        let mut s = String::new();
        writeln!(s, "{}", line(&self.columns)).unwrap();
        for r in &self.rows {
            writeln!(s, "{}", line(r)).unwrap();
        }
        s
    }
}

fn csv_cell(c: &str) -> String {
    if c.contains([',', '"', '\n']) {
        format!("\"{}\"", c.replace('"', "\"\""))
    } else {
        c.to_string()
    }
}

/// Writes artifacts into the optional output directory.
pub struct Sink {
    dir: Option<PathBuf>,
    header: Header,
}

impl Sink {
    pub fn new(dir: Option<PathBuf>, header: Header) -> CliResult<Self> {
        if let Some(d) = &dir {
            std::fs::create_dir_all(d).map_err(|e| io_err(d, e))?;
        }
        Ok(Self { dir, header })
    }

    pub fn write_csv(&self, name: &str, table: &Table, extra: &[(&str, String)]) -> CliResult<()> {
        let body = format!("{}{}", self.header.comment_lines(extra), table.to_csv());
        self.write(name, &body)
    }

    pub fn write_json<T: Serialize>(&self, name: &str, payload: &T) -> CliResult<()> {
        #[derive(Serialize)]
        struct Doc<'a, T> {
            header: &'a Header,
            #[serde(flatten)]
            payload: &'a T,
        }
        let text = serde_json::to_string_pretty(&Doc {
            header: &self.header,
            payload,
        })
        .expect("payload serializes");
        self.write(name, &(text + "\n"))
    }

    fn write(&self, name: &str, body: &str) -> CliResult<()> {
        if let Some(d) = &self.dir {
            let path = d.join(name);
            std::fs::write(&path, body).map_err(|e| io_err(&path, e))?;
        }
        Ok(())
    }
}

pub fn io_err(path: &Path, source: std::io::Error) -> CliError {
    CliError::Io {
        path: path.display().to_string(),
        source,
    }
}
