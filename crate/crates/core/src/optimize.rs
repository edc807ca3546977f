//! Minimization of a scalar criterion over selection probabilities.
//!
//! Both searches are grid-first: rate surfaces can be non-smooth where the
//! dominant eigenvalues cross, so a local method alone can settle in the
//! wrong basin. The grid winner is then refined locally.

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::gaussian::SelectionProbabilities;

pub const DEFAULT_GRID_STEP: f64 = 0.01;
pub const DEFAULT_LINE_TOL: f64 = 1e-6;
pub const DEFAULT_SIMPLEX_RESOLUTION: f64 = 0.01;
pub const DEFAULT_GRID_CAP: u128 = 10_000_000;
const SIMPLEX_FINAL_STEP: f64 = 1e-4;
const MAX_REFINE_EVALS: usize = 100_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Criterion {
    Rate,
    Avar,
}

impl Criterion {
    pub fn name(self) -> &'static str {
        match self {
            Criterion::Rate => "rate",
            Criterion::Avar => "avar",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Grid,
    GoldenSection,
    SimplexSearch,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OptimizationResult {
    pub alpha_star: SelectionProbabilities,
    pub value: f64,
    pub criterion: Criterion,
    pub method: Method,
    pub evaluations: usize,
    /// Grid spacing of the initial scan.
    pub grid_resolution: f64,
    /// Final bracket width or pattern step of the refinement.
    pub convergence_tolerance: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LineSearch {
    pub grid_step: f64,
    pub tol: f64,
}

impl Default for LineSearch {
    fn default() -> Self {
        Self {
            grid_step: DEFAULT_GRID_STEP,
            tol: DEFAULT_LINE_TOL,
        }
    }
}

fn round_grid(x: f64) -> f64 {
    (x * 1e12).round() / 1e12
}

/// Points `lo, lo + step, …` up to and including `hi`.
pub fn grid_points(lo: f64, hi: f64, step: f64) -> Vec<f64> {
    let k = ((hi - lo) / step + 1e-9).floor() as usize;
    let mut pts: Vec<f64> = (0..=k).map(|i| round_grid(lo + i as f64 * step)).collect();
    if let Some(&last) = pts.last() {
        if hi - last > 1e-12 {
            pts.push(hi);
        }
    }
    pts
}

/// Evaluates `f` on [`grid_points`] and returns every `(α₁, value)` pair
/// together with the index of the smallest value (first on ties).
pub fn scan_1d<F>(mut f: F, lo: f64, hi: f64, step: f64) -> Result<(Vec<(f64, f64)>, usize)>
where
    F: FnMut(f64) -> Result<f64>,
{
    check_interval(lo, hi)?;
    if !(step > 0.0) {
        return Err(Error::ParameterOutOfRange(format!(
            "grid step must be positive, got {step}"
        )));
    }
    let mut values = Vec::new();
    let mut best = 0;
    for x in grid_points(lo, hi, step) {
        let v = f(x)?;
        if v < values.get(best).map_or(f64::INFINITY, |b: &(f64, f64)| b.1) {
            best = values.len();
        }
        values.push((x, v));
    }
    Ok((values, best))
}

fn check_interval(lo: f64, hi: f64) -> Result<()> {
    if !(0.0 <= lo && lo < hi && hi <= 1.0) {
        return Err(Error::ParameterOutOfRange(format!(
            "need 0 <= lo < hi <= 1, got [{lo}, {hi}]"
        )));
    }
    Ok(())
}

/// Minimizes `f(α₁)` on `[lo, hi]`: grid scan, then golden-section search
/// inside the bracket around the best grid point. Ties go to the smaller α₁.
pub fn optimize_1d<F>(
    criterion: Criterion,
    mut f: F,
    lo: f64,
    hi: f64,
    search: &LineSearch,
) -> Result<OptimizationResult>
where
    F: FnMut(f64) -> Result<f64>,
{
    if !(search.tol > 0.0) {
        return Err(Error::ParameterOutOfRange(format!(
            "tol must be positive, got {}",
            search.tol
        )));
    }
    let (grid, best) = scan_1d(&mut f, lo, hi, search.grid_step)?;
    let mut evaluations = grid.len();
    let (mut x_best, mut v_best) = grid[best];

    let a0 = grid[best.saturating_sub(1)].0;
    let b0 = grid[(best + 1).min(grid.len() - 1)].0;
    if b0 - a0 > search.tol {
        let (x, v, n) = golden_section(&mut f, a0, b0, search.tol)?;
        evaluations += n;
        if v < v_best || (v == v_best && x < x_best) {
            x_best = x;
            v_best = v;
        }
    }

    Ok(OptimizationResult {
        alpha_star: SelectionProbabilities::bivariate(x_best)?,
        value: v_best,
        criterion,
        method: Method::GoldenSection,
        evaluations,
        grid_resolution: search.grid_step,
        convergence_tolerance: search.tol,
    })
}

fn golden_section<F>(f: &mut F, mut a: f64, mut b: f64, tol: f64) -> Result<(f64, f64, usize)>
where
    F: FnMut(f64) -> Result<f64>,
{
    let inv_phi = (5f64.sqrt() - 1.0) / 2.0;
    let mut c = b - inv_phi * (b - a);
    let mut d = a + inv_phi * (b - a);
    let mut fc = f(c)?;
    let mut fd = f(d)?;
    let mut evals = 2;
    while b - a > tol {
        if fc <= fd {
            b = d;
            d = c;
            fd = fc;
            c = b - inv_phi * (b - a);
            fc = f(c)?;
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + inv_phi * (b - a);
            fd = f(d)?;
        }
        evals += 1;
    }
    let x = 0.5 * (a + b);
    let v = f(x)?;
    Ok((x, v, evals + 1))
}

fn count_compositions(total: u128, parts: u128) -> u128 {
    // C(total − 1, parts − 1), saturating
    if parts == 0 || total < parts {
        return 0;
    }
    let (n, k) = (total - 1, (parts - 1).min(total - parts));
    let mut c: u128 = 1;
    for i in 0..k {
        c = match c.checked_mul(n - i) {
            Some(v) => v / (i + 1),
            None => return u128::MAX,
        };
    }
    c
}

/// All `k ∈ ℕ^d` with every `k_i ≥ 1` and `Σk_i = total`, in lexicographic order.
fn compositions(total: usize, d: usize) -> Vec<Vec<usize>> {
    fn rec(prefix: &mut Vec<usize>, remaining: usize, slots: usize, out: &mut Vec<Vec<usize>>) {
        if slots == 1 {
            prefix.push(remaining);
            out.push(prefix.clone());
            prefix.pop();
            return;
        }
        for k in 1..=remaining - (slots - 1) {
            prefix.push(k);
            rec(prefix, remaining - k, slots - 1, out);
            prefix.pop();
        }
    }
    let mut out = Vec::new();
    rec(&mut Vec::with_capacity(d), total, d, &mut out);
    out
}

fn lex_less(a: &[f64], b: &[f64]) -> bool {
    a.iter()
        .zip(b)
        .find(|(x, y)| x != y)
        .is_some_and(|(x, y)| x < y)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SimplexSearch {
    pub resolution: f64,
    pub grid_cap: u128,
}

impl Default for SimplexSearch {
    fn default() -> Self {
        Self {
            resolution: DEFAULT_SIMPLEX_RESOLUTION,
            grid_cap: DEFAULT_GRID_CAP,
        }
    }
}

/// Minimizes `f(α)` over the interior of the `d`-simplex.
///
/// Every grid point with coordinates in multiples of `1/N` (`N = round(1/resolution)`)
/// and each `αᵢ ≥ 1/N` is evaluated, plus the equal scan. The winner is then
/// polished by a pattern search over pairwise transfers `eᵢ − eⱼ` and
/// one-against-the-rest transfers, halving the step down to `1e-4`.
/// Grid evaluations run in parallel; the reduction is order-independent.
pub fn optimize_simplex<F>(
    criterion: Criterion,
    f: F,
    d: usize,
    search: &SimplexSearch,
) -> Result<OptimizationResult>
where
    F: Fn(&SelectionProbabilities) -> Result<f64> + Sync,
{
    if d < 2 {
        return Err(Error::ParameterOutOfRange(format!(
            "dimension must be at least 2, got {d}"
        )));
    }
    let res = search.resolution;
    if !(res > 0.0 && res <= 0.5) {
        return Err(Error::ParameterOutOfRange(format!(
            "resolution must lie in (0, 0.5], got {res}"
        )));
    }
    let total = (1.0 / res).round() as usize;
    if total < d {
        return Err(Error::ParameterOutOfRange(format!(
            "resolution {res} leaves no interior grid point in dimension {d}"
        )));
    }
    let points = count_compositions(total as u128, d as u128);
    if points > search.grid_cap {
        return Err(Error::GridTooLarge {
            points,
            cap: search.grid_cap,
        });
    }
    let step = 1.0 / total as f64;

    let mut candidates: Vec<Vec<f64>> = compositions(total, d)
        .into_iter()
        .map(|k| k.into_iter().map(|ki| ki as f64 / total as f64).collect())
        .collect();
    candidates.push(SelectionProbabilities::<f64>::equal(d).into_vec());

    let values: Vec<Result<f64>> = candidates
        .par_iter()
        .map(|a| f(&SelectionProbabilities::new(a.clone())?))
        .collect();
    let mut evaluations = values.len();

    let mut best: Option<(usize, f64)> = None;
    for (i, v) in values.into_iter().enumerate() {
        let v = v?;
        let better = match best {
            None => true,
            Some((j, bv)) => v < bv || (v == bv && lex_less(&candidates[i], &candidates[j])),
        };
        if better {
            best = Some((i, v));
        }
    }
    let (bi, mut best_value) = best.expect("non-empty grid");
    let mut alpha = candidates.swap_remove(bi);

    // pattern refinement
    let mut directions: Vec<Vec<f64>> = Vec::new();
    for i in 0..d {
        for j in 0..d {
            if i != j {
                let mut v = vec![0.0; d];
                v[i] = 1.0;
                v[j] = -1.0;
                directions.push(v);
            }
        }
    }
    if d > 2 {
        for i in 0..d {
            let mut v = vec![-1.0 / (d - 1) as f64; d];
            v[i] = 1.0;
            directions.push(v.clone());
            directions.push(v.into_iter().map(|x| -x).collect());
        }
    }
    let mut s = step / 2.0;
    let mut refine_evals = 0;
    while s >= SIMPLEX_FINAL_STEP && refine_evals < MAX_REFINE_EVALS {
        let mut improved = false;
        for dir in &directions {
            let cand: Vec<f64> = alpha.iter().zip(dir).map(|(a, v)| a + s * v).collect();
            if cand.iter().any(|&a| a <= 0.0) {
                continue;
            }
            let Ok(sp) = SelectionProbabilities::new(cand.clone()) else {
                continue;
            };
            let v = f(&sp)?;
            refine_evals += 1;
            if v < best_value {
                best_value = v;
                alpha = cand;
                improved = true;
            }
        }
        if !improved {
            s /= 2.0;
        }
    }
    evaluations += refine_evals;

    let alpha_star = SelectionProbabilities::new(alpha)?;
    let value = f(&alpha_star)?;
    Ok(OptimizationResult {
        alpha_star,
        value,
        criterion,
        method: Method::SimplexSearch,
        evaluations: evaluations + 1,
        grid_resolution: step,
        convergence_tolerance: SIMPLEX_FINAL_STEP,
    })
}

/// `(at_equal − at_optimum) / at_equal`.
pub fn relative_gain(value_at_optimum: f64, value_at_equal_alpha: f64) -> Result<f64> {
    if value_at_equal_alpha == 0.0 {
        return Err(Error::DivisionByZero(
            "criterion at equal alpha is zero".into(),
        ));
    }
    Ok((value_at_equal_alpha - value_at_optimum) / value_at_equal_alpha)
}
