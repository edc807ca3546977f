//! Exact finite-state analysis of two-coordinate random-scan Gibbs samplers.
//!
//! A [`DiscreteJointModel`] enumerates the support of a joint pmf on integer
//! pairs `(x, θ)` in lexicographic order and carries the two single-coordinate
//! Gibbs kernels: `p_theta` redraws θ from `π(θ | x)` and `p_x` redraws x from
//! `π(x | θ)`. The random scan with probability `α₁` of updating θ has the
//! transition matrix `α₁·p_theta + (1 − α₁)·p_x`.

use std::fmt;

use num_traits::pow;

use crate::error::{Error, Result};
use crate::linalg::{second_eigenvalue_modulus, DenseMatrix, LuDecomposition};
use crate::scalar::{Real, Scalar};

/// A support point `(x, θ)`.
pub type State = (i64, i64);

const PMF_SUM_TOL: f64 = 1e-9;
const SERIES_RTOL: f64 = 1e-12;

/// Binomial coefficient through the exact integer product when it fits in
/// `u128`, otherwise through log-gamma.
pub fn binomial_coefficient<T: Scalar>(n: u64, k: u64) -> T {
    if k > n {
        return T::zero();
    }
    exact_choose(n, k)
        .and_then(T::from_u128)
        .unwrap_or_else(|| T::lit(ln_choose(n, k).exp()))
}

/// Exact `C(n, k)`, or `None` on overflow.
pub fn exact_choose(n: u64, k: u64) -> Option<u128> {
    if k > n {
        return Some(0);
    }
    let k = k.min(n - k);
    let mut c: u128 = 1;
    for i in 0..k {
        // c·(n−i) is divisible by (i+1) at every step
        c = c.checked_mul(u128::from(n - i))? / u128::from(i + 1);
    }
    Some(c)
}

pub fn ln_choose(n: u64, k: u64) -> f64 {
    if k > n {
        return f64::NEG_INFINITY;
    }
    let lg = |v: u64| libm::lgamma(v as f64 + 1.0);
    lg(n) - lg(k) - lg(n - k)
}

/// `P(K = k)` for `K ~ Binomial(n, p)`.
pub fn binomial_pmf<T: Scalar>(n: u64, k: u64, p: T) -> T {
    if k > n {
        return T::zero();
    }
    binomial_coefficient::<T>(n, k) * pow(p, k as usize) * pow(T::one() - p, (n - k) as usize)
}

/// `P(θ = j | x)` for the hypergeometric law `C(n1,j)C(n2,x−j)/C(n1+n2,x)`.
pub fn hypergeometric_pmf<T: Scalar>(n1: u64, n2: u64, x: u64, j: u64) -> T {
    if j > n1 || j > x || x - j > n2 {
        return T::zero();
    }
    binomial_coefficient::<T>(n1, j) * binomial_coefficient::<T>(n2, x - j)
        / binomial_coefficient::<T>(n1 + n2, x)
}

#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize)]
pub struct BinomialParams {
    pub n1: u32,
    pub n2: u32,
    pub p: f64,
}

/// Enumerated joint model with its coordinate-update kernels.
#[derive(Clone, PartialEq)]
pub struct DiscreteJointModel<T = f64> {
    states: Vec<State>,
    pi: Vec<T>,
    p_theta: DenseMatrix<T>,
    p_x: DenseMatrix<T>,
    label: String,
    binomial: Option<BinomialParams>,
}

impl<T> fmt::Debug for DiscreteJointModel<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("DiscreteJointModel")
            .field("label", &self.label)
            .field("states", &self.states.len())
            .finish()
    }
}

impl<T: Scalar> DiscreteJointModel<T> {
    pub fn states(&self) -> &[State] {
        &self.states
    }

    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    pub fn pi(&self) -> &[T] {
        &self.pi
    }

    pub fn p_theta(&self) -> &DenseMatrix<T> {
        &self.p_theta
    }

    pub fn p_x(&self) -> &DenseMatrix<T> {
        &self.p_x
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    /// Set for models built by [`build_binomial_model`].
    pub fn binomial_params(&self) -> Option<BinomialParams> {
        self.binomial
    }

    pub fn index_of(&self, state: State) -> Option<usize> {
        self.states.binary_search(&state).ok()
    }

    /// Checks the structural invariants: pmf, stochastic kernels, coordinate
    /// sparsity and π-invariance of both kernels.
    pub fn check_invariants(&self, tol: T) -> Result<()> {
        let total = self.pi.iter().fold(T::zero(), |a, &b| a + b);
        if (total - T::one()).abs() > tol || self.pi.iter().any(|&v| v < T::zero()) {
            return Err(Error::InvalidPmf(format!("pi sums to {total}")));
        }
        for (name, k, same) in [
            ("p_theta", &self.p_theta, 0usize),
            ("p_x", &self.p_x, 1usize),
        ] {
            k.check_stochastic(tol, tol)?;
            for (i, si) in self.states.iter().enumerate() {
                for (j, sj) in self.states.iter().enumerate() {
                    let fixed = if same == 0 {
                        si.0 == sj.0
                    } else {
                        si.1 == sj.1
                    };
                    if !fixed && !k[(i, j)].is_zero() {
                        return Err(Error::NotStochastic(format!(
                            "{name} moves the held coordinate from {si:?} to {sj:?}"
                        )));
                    }
                }
            }
            let moved = k.vec_mul(&self.pi)?;
            if let Some(i) = (0..self.len()).find(|&i| (moved[i] - self.pi[i]).abs() > tol) {
                return Err(Error::NotStochastic(format!(
                    "{name} does not preserve pi at state {:?}",
                    self.states[i]
                )));
            }
        }
        Ok(())
    }
}

/// Binomial-hypergeometric model: `θ ~ Binomial(n1, p)`, `x = θ + ε` with
/// `ε ~ Binomial(n2, p)`, so that `θ | x` is hypergeometric.
pub fn build_binomial_model<T: Scalar>(n1: u32, n2: u32, p: T) -> Result<DiscreteJointModel<T>> {
    if n1 == 0 || n2 == 0 {
        return Err(Error::ParameterOutOfRange(format!(
            "n1 and n2 must be positive, got ({n1}, {n2})"
        )));
    }
    if !(p > T::zero() && p < T::one()) {
        return Err(Error::ParameterOutOfRange(format!(
            "p must lie in (0, 1), got {p}"
        )));
    }
    let (n1u, n2u) = (u64::from(n1), u64::from(n2));
    let states: Vec<State> = (0..=i64::from(n1 + n2))
        .flat_map(|x| {
            let lo = (x - i64::from(n2)).max(0);
            let hi = x.min(i64::from(n1));
            (lo..=hi).map(move |t| (x, t))
        })
        .collect();
    let n = states.len();
    let index = |s: State| states.binary_search(&s).expect("state in support");

    let pi = states
        .iter()
        .map(|&(x, t)| binomial_pmf(n1u, t as u64, p) * binomial_pmf(n2u, (x - t) as u64, p))
        .collect();

    let mut p_theta = DenseMatrix::zeros(n, n);
    let mut p_x = DenseMatrix::zeros(n, n);
    for (i, &(x, t)) in states.iter().enumerate() {
        let lo = (x - i64::from(n2)).max(0);
        for j in lo..=x.min(i64::from(n1)) {
            p_theta[(i, index((x, j)))] = hypergeometric_pmf(n1u, n2u, x as u64, j as u64);
        }
        for e in 0..=i64::from(n2) {
            p_x[(i, index((t + e, t)))] = binomial_pmf(n2u, e as u64, p);
        }
    }

    let p64 = p.as_f64();
    Ok(DiscreteJointModel {
        states,
        pi,
        p_theta,
        p_x,
        label: format!("binomial(n1={n1},n2={n2},p={p64})"),
        binomial: Some(BinomialParams { n1, n2, p: p64 }),
    })
}

/// Model from an arbitrary finite joint pmf. Zero-probability pairs are
/// dropped from the support; π is renormalized to sum to one.
pub fn build_custom_model<T: Scalar>(joint: &[(State, T)]) -> Result<DiscreteJointModel<T>> {
    if let Some((s, v)) = joint
        .iter()
        .find(|(_, v)| !v.is_finite_value() || *v < T::zero())
    {
        return Err(Error::InvalidPmf(format!("probability {v} at {s:?}")));
    }
    let total = joint.iter().fold(T::zero(), |a, (_, v)| a + *v);
    if (total - T::one()).abs() > T::lit(PMF_SUM_TOL) {
        return Err(Error::InvalidPmf(format!("probabilities sum to {total}")));
    }
    let mut support: Vec<(State, T)> = joint
        .iter()
        .copied()
        .filter(|(_, v)| *v > T::zero())
        .collect();
    support.sort_by_key(|e| e.0);
    if let Some(w) = support.windows(2).find(|w| w[0].0 == w[1].0) {
        return Err(Error::InvalidPmf(format!("duplicate state {:?}", w[0].0)));
    }
    if support.is_empty() {
        return Err(Error::InvalidPmf("empty support".into()));
    }
    let states: Vec<State> = support.iter().map(|(s, _)| *s).collect();
    let pi: Vec<T> = support.iter().map(|(_, v)| *v / total).collect();
    let n = states.len();

    let mut p_theta = DenseMatrix::zeros(n, n);
    let mut p_x = DenseMatrix::zeros(n, n);
    for (i, si) in states.iter().enumerate() {
        let x_mass = (0..n)
            .filter(|&j| states[j].0 == si.0)
            .fold(T::zero(), |a, j| a + pi[j]);
        let t_mass = (0..n)
            .filter(|&j| states[j].1 == si.1)
            .fold(T::zero(), |a, j| a + pi[j]);
        for (j, sj) in states.iter().enumerate() {
            if sj.0 == si.0 {
                p_theta[(i, j)] = pi[j] / x_mass;
            }
            if sj.1 == si.1 {
                p_x[(i, j)] = pi[j] / t_mass;
            }
        }
    }
    Ok(DiscreteJointModel {
        states,
        pi,
        p_theta,
        p_x,
        label: format!("custom({n} states)"),
        binomial: None,
    })
}

/// A function `h` tabulated on the model's states.
#[derive(Debug, Clone, PartialEq)]
pub struct FunctionOnStates<T = f64> {
    values: Vec<T>,
}

impl<T: Scalar> FunctionOnStates<T> {
    pub fn new(model: &DiscreteJointModel<T>, values: Vec<T>) -> Result<Self> {
        if values.len() != model.len() {
            return Err(Error::DimensionMismatch {
                expected: model.len(),
                found: values.len(),
            });
        }
        if values.iter().any(|v| !v.is_finite_value()) {
            return Err(Error::ParameterOutOfRange("h has non-finite values".into()));
        }
        Ok(Self { values })
    }

    pub fn from_fn(model: &DiscreteJointModel<T>, f: impl Fn(State) -> T) -> Self {
        Self {
            values: model.states().iter().map(|&s| f(s)).collect(),
        }
    }

    /// `h(x, θ) = x + θ`.
    pub fn coordinate_sum(model: &DiscreteJointModel<T>) -> Self {
        Self::from_fn(model, |(x, t)| T::from_i64(x + t).expect("small integer"))
    }

    pub fn constant(model: &DiscreteJointModel<T>, c: T) -> Self {
        Self::from_fn(model, |_| c)
    }

    pub fn values(&self) -> &[T] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn map(&self, f: impl Fn(T) -> T) -> Self {
        Self {
            values: self.values.iter().map(|&v| f(v)).collect(),
        }
    }
}

/// Random-scan transition matrix `α₁·p_theta + (1 − α₁)·p_x`.
#[derive(Debug, Clone)]
pub struct ScanTransitionMatrix<'m, T = f64> {
    pub p_rs: DenseMatrix<T>,
    pub alpha1: T,
    pub model: &'m DiscreteJointModel<T>,
}

pub fn assemble_scan_matrix<T: Scalar>(
    model: &DiscreteJointModel<T>,
    alpha1: T,
) -> Result<ScanTransitionMatrix<'_, T>> {
    if !(alpha1 >= T::zero() && alpha1 <= T::one()) {
        return Err(Error::ParameterOutOfRange(format!(
            "alpha1 must lie in [0, 1], got {alpha1}"
        )));
    }
    let p_rs = model
        .p_theta()
        .scale(alpha1)
        .add(&model.p_x().scale(T::one() - alpha1))?;
    Ok(ScanTransitionMatrix {
        p_rs,
        alpha1,
        model,
    })
}

/// Second-largest eigenvalue modulus of the scan matrix.
pub fn discrete_scan_rate<T: Real>(scan: &ScanTransitionMatrix<'_, T>) -> Result<T> {
    second_eigenvalue_modulus(&scan.p_rs)
}

fn check_h<T: Scalar>(scan: &ScanTransitionMatrix<'_, T>, h: &FunctionOnStates<T>) -> Result<()> {
    if h.len() != scan.model.len() {
        return Err(Error::DimensionMismatch {
            expected: scan.model.len(),
            found: h.len(),
        });
    }
    Ok(())
}

/// Fundamental matrix `Z = {I − (P − A)}⁻¹`, with `A` stacking π in every row.
pub fn fundamental_matrix<T: Scalar>(scan: &ScanTransitionMatrix<'_, T>) -> Result<DenseMatrix<T>> {
    let n = scan.model.len();
    let a = DenseMatrix::stacked_rows(scan.model.pi(), n);
    let m = DenseMatrix::identity(n).sub(&scan.p_rs.sub(&a)?)?;
    Ok(LuDecomposition::new(&m)?.inverse())
}

/// Asymptotic variance `h(2BZ − B − BA)hᵀ` with `B = diag(π)`.
///
/// Fails with `SingularMatrix` when the chain is reducible (for instance
/// `α₁ ∈ {0, 1}`).
pub fn peskun_avar<T: Scalar>(
    scan: &ScanTransitionMatrix<'_, T>,
    h: &FunctionOnStates<T>,
) -> Result<T> {
    check_h(scan, h)?;
    let v = h.values();
    if v.iter().all(|&x| x == v[0]) {
        return Ok(T::zero());
    }
    let pi = scan.model.pi();
    let n = pi.len();
    let z = fundamental_matrix(scan)?;
    let a = DenseMatrix::stacked_rows(pi, n);
    let b = DenseMatrix::diagonal(pi);
    let two = T::one() + T::one();
    let q = b.matmul(&z)?.scale(two).sub(&b)?.sub(&b.matmul(&a)?)?;
    let qh = q.mul_vec(h.values())?;
    Ok(h.values()
        .iter()
        .zip(&qh)
        .fold(T::zero(), |acc, (&x, &y)| acc + x * y))
}

fn pi_mean<T: Scalar>(pi: &[T], v: &[T]) -> T {
    pi.iter()
        .zip(v)
        .fold(T::zero(), |acc, (&p, &x)| acc + p * x)
}

/// Exact lag-`lag` autocovariance `Σ π(s)h(s)(Pᵏh)(s) − μ²` under stationarity.
pub fn exact_autocov<T: Scalar>(
    scan: &ScanTransitionMatrix<'_, T>,
    h: &FunctionOnStates<T>,
    lag: usize,
) -> Result<T> {
    check_h(scan, h)?;
    let pi = scan.model.pi();
    let mu = pi_mean(pi, h.values());
    let mut v = h.values().to_vec();
    for _ in 0..lag {
        v = scan.p_rs.mul_vec(&v)?;
    }
    let ph: Vec<T> = pi.iter().zip(h.values()).map(|(&p, &x)| p * x).collect();
    Ok(ph
        .iter()
        .zip(&v)
        .fold(T::zero(), |acc, (&a, &b)| acc + a * b)
        - mu * mu)
}

/// Lag budget `40·⌈1/(1 − ρ₂)⌉` for [`autocov_series_avar`], enough for
/// `ρ₂ᵏ` to fall below the relative truncation threshold.
pub fn default_max_lag<T: Real>(scan: &ScanTransitionMatrix<'_, T>) -> Result<usize> {
    let rho2 = discrete_scan_rate(scan)?.as_f64();
    let gap = 1.0 - rho2;
    if gap <= 1e-9 {
        return Err(Error::ParameterOutOfRange(format!(
            "chain is reducible or nearly so (rho2 = {rho2})"
        )));
    }
    Ok(40 * (1.0 / gap).ceil() as usize)
}

/// Asymptotic variance as the autocovariance series `γ₀ + 2Σ_{k≥1} γ_k`,
/// with `γ_k` from exact powers of the scan matrix. The sum stops once two
/// consecutive `|γ_k|` fall below `1e-12·γ₀`.
pub fn autocov_series_avar<T: Real>(
    scan: &ScanTransitionMatrix<'_, T>,
    h: &FunctionOnStates<T>,
    max_lag: usize,
) -> Result<T> {
    check_h(scan, h)?;
    if max_lag == 0 {
        return Err(Error::ParameterOutOfRange(
            "max_lag must be at least 1".into(),
        ));
    }
    let pi = scan.model.pi();
    let mu = pi_mean(pi, h.values());
    let ph: Vec<T> = pi.iter().zip(h.values()).map(|(&p, &x)| p * x).collect();
    let gamma = |v: &[T]| {
        ph.iter()
            .zip(v)
            .fold(T::zero(), |acc, (&a, &b)| acc + a * b)
            - mu * mu
    };

    let mut v = h.values().to_vec();
    let gamma0 = gamma(&v);
    let threshold = T::lit(SERIES_RTOL) * gamma0.abs();
    if gamma0.abs() <= T::min_positive_value() {
        return Ok(T::zero());
    }
    let two = T::lit(2.0);
    let mut total = gamma0;
    let mut small_run = 0;
    for _ in 1..=max_lag {
        v = scan.p_rs.mul_vec(&v)?;
        let g = gamma(&v);
        total = total + two * g;
        if g.abs() < threshold {
            small_run += 1;
            if small_run == 2 {
                return Ok(total);
            }
        } else {
            small_run = 0;
        }
    }
    Err(Error::TruncationNotConverged {
        lags: max_lag,
        partial: total.as_f64(),
    })
}
