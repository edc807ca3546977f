//! Empirical asymptotic variance and mixing diagnostics, and exact
//! total-variation decay for finite chains.

use serde::Serialize;

use crate::discrete::ScanTransitionMatrix;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct AvarEstimate {
    pub point: f64,
    pub batch_count: usize,
    pub batch_size: usize,
    /// Approximate standard error, `point·√(2/(batch_count − 1))`.
    pub standard_error: f64,
}

/// Nonoverlapping batch-means estimate of `lim m·Var(mean of h)`.
///
/// Splits `series` into `batch_count` contiguous batches (default `⌊√m⌋`),
/// drops the remainder, and returns `batch_size × sample variance of the
/// batch means`.
pub fn batch_means_avar(series: &[f64], batch_count: Option<usize>) -> Result<AvarEstimate> {
    let m = series.len();
    let k = batch_count.unwrap_or_else(|| (m as f64).sqrt().floor() as usize);
    if k < 2 || m < 2 * k {
        return Err(Error::TraceTooShort(format!(
            "{m} values cannot form {k} batches of at least 2"
        )));
    }
    let b = m / k;
    let means: Vec<f64> = series[..k * b]
        .chunks_exact(b)
        .map(|c| c.iter().sum::<f64>() / b as f64)
        .collect();
    // deviations from the first batch mean keep identical batches exactly zero
    let shift = means[0];
    let (s1, s2) = means.iter().fold((0.0, 0.0), |(s1, s2), &v| {
        let d = v - shift;
        (s1 + d, s2 + d * d)
    });
    let var = ((s2 - s1 * s1 / k as f64) / (k - 1) as f64).max(0.0);
    let point = b as f64 * var;
    Ok(AvarEstimate {
        point,
        batch_count: k,
        batch_size: b,
        standard_error: point * (2.0 / (k - 1) as f64).sqrt(),
    })
}

/// `(1/(m−lag)) Σ (h_t − h̄)(h_{t+lag} − h̄)` with `h̄` the full-series mean.
pub fn empirical_autocov(series: &[f64], lag: usize) -> Result<f64> {
    let m = series.len();
    if lag >= m {
        return Err(Error::TraceTooShort(format!(
            "lag {lag} needs more than {m} values"
        )));
    }
    let mean = series.iter().sum::<f64>() / m as f64;
    let s: f64 = series[..m - lag]
        .iter()
        .zip(&series[lag..])
        .map(|(a, b)| (a - mean) * (b - mean))
        .sum();
    Ok(s / (m - lag) as f64)
}

/// Side-by-side lag-2 autocorrelation and squared rate. Purely descriptive.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Lag2Report {
    pub gamma0: f64,
    pub gamma2: f64,
    /// `γ̂₂/γ̂₀`, or 0 when `γ̂₀` vanishes.
    pub lag2_ratio: f64,
    pub rate_squared: f64,
}

pub fn rate_lag2_report(series: &[f64], exact_rate: f64) -> Result<Lag2Report> {
    let gamma0 = empirical_autocov(series, 0)?;
    let gamma2 = empirical_autocov(series, 2)?;
    let lag2_ratio = if gamma0 > 0.0 { gamma2 / gamma0 } else { 0.0 };
    Ok(Lag2Report {
        gamma0,
        gamma2,
        lag2_ratio,
        rate_squared: exact_rate * exact_rate,
    })
}

fn check_initial(scan: &ScanTransitionMatrix<'_>, initial: &[f64]) -> Result<()> {
    let n = scan.model.len();
    if initial.len() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            found: initial.len(),
        });
    }
    let total: f64 = initial.iter().sum();
    if initial.iter().any(|&v| !(v >= 0.0) || !v.is_finite()) || (total - 1.0).abs() > 1e-9 {
        return Err(Error::InvalidPmf(format!(
            "initial distribution sums to {total}"
        )));
    }
    Ok(())
}

fn tv_to_stationary(dist: &[f64], pi: &[f64]) -> f64 {
    0.5 * dist.iter().zip(pi).map(|(a, b)| (a - b).abs()).sum::<f64>()
}

/// `½‖initial·Pᵗ − π‖₁` with `Pᵗ` formed by repeated squaring.
pub fn tv_distance_exact(
    scan: &ScanTransitionMatrix<'_>,
    t: usize,
    initial: &[f64],
) -> Result<f64> {
    check_initial(scan, initial)?;
    let dist = scan.p_rs.pow(t)?.vec_mul(initial)?;
    Ok(tv_to_stationary(&dist, scan.model.pi()))
}

/// `(t, tv(t))` for `t = 0..=t_max`, propagating the distribution one step at
/// a time.
pub fn tv_curve(
    scan: &ScanTransitionMatrix<'_>,
    initial: &[f64],
    t_max: usize,
) -> Result<Vec<(usize, f64)>> {
    check_initial(scan, initial)?;
    let pi = scan.model.pi();
    let mut dist = initial.to_vec();
    let mut out = Vec::with_capacity(t_max + 1);
    for t in 0..=t_max {
        out.push((t, tv_to_stationary(&dist, pi)));
        dist = scan.p_rs.vec_mul(&dist)?;
    }
    Ok(out)
}

pub fn point_mass(n: usize, at: usize) -> Vec<f64> {
    let mut v = vec![0.0; n];
    v[at] = 1.0;
    v
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::discrete::{assemble_scan_matrix, build_binomial_model};
    use approx::assert_abs_diff_eq;

    #[test]
    fn constant_series_is_exactly_zero() {
        let s = vec![0.1; 10_000];
        let e = batch_means_avar(&s, None).unwrap();
        assert_eq!(e.point, 0.0);
        assert_eq!(e.batch_count, 100);
        assert_eq!(e.batch_size, 100);
    }

    #[test]
    fn batch_layout_truncates_remainder() {
        let s: Vec<f64> = (0..103).map(|i| i as f64).collect();
        let e = batch_means_avar(&s, Some(10)).unwrap();
        assert_eq!(e.batch_size, 10);
        // batch means 4.5, 14.5, …, 94.5 → sample variance 916.67
        assert_abs_diff_eq!(e.point, 10.0 * 9166.666666666666 / 10.0, epsilon = 1e-9);
        assert!(batch_means_avar(&s, Some(60)).is_err());
        assert!(batch_means_avar(&[1.0, 2.0, 3.0], None).is_err());
    }

    #[test]
    fn autocov_lag_zero_is_variance() {
        let s = [1.0, 3.0, 2.0, 6.0];
        let mean = 3.0;
        let var = s.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / 4.0;
        assert_abs_diff_eq!(empirical_autocov(&s, 0).unwrap(), var, epsilon = 1e-15);
        assert!(empirical_autocov(&s, 4).is_err());
    }

    #[test]
    fn lag2_report_fields() {
        let s: Vec<f64> = (0..50).map(|i| ((i * 7) % 11) as f64).collect();
        let r = rate_lag2_report(&s, 1.0).unwrap();
        assert_eq!(r.rate_squared, 1.0);
        assert!(r.lag2_ratio.is_finite());
        let c = rate_lag2_report(&[2.0; 10], 0.5).unwrap();
        assert_eq!(c.lag2_ratio, 0.0);
        assert_eq!(c.rate_squared, 0.25);
    }

    #[test]
    fn tv_examples() {
        let m = build_binomial_model(1, 1, 0.5).unwrap();
        let s = assemble_scan_matrix(&m, 0.5).unwrap();
        for t in [0, 1, 5, 40] {
            assert_abs_diff_eq!(
                tv_distance_exact(&s, t, m.pi()).unwrap(),
                0.0,
                epsilon = 1e-15
            );
        }
        for i in 0..m.len() {
            let start = point_mass(m.len(), i);
            assert_abs_diff_eq!(
                tv_distance_exact(&s, 0, &start).unwrap(),
                1.0 - m.pi()[i],
                epsilon = 1e-15
            );
        }
        assert!(tv_distance_exact(&s, 1, &[0.5, 0.5, 0.5, 0.0]).is_err());
    }

    #[test]
    fn curve_matches_squaring() {
        let m = build_binomial_model(3, 2, 0.4).unwrap();
        let s = assemble_scan_matrix(&m, 0.3).unwrap();
        let start = point_mass(m.len(), 0);
        let curve = tv_curve(&s, &start, 30).unwrap();
        for &(t, v) in curve.iter().step_by(7) {
            assert_abs_diff_eq!(
                v,
                tv_distance_exact(&s, t, &start).unwrap(),
                epsilon = 1e-12
            );
        }
    }
}
