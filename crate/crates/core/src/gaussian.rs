//! Convergence rate and coordinate-sum asymptotic variance for random-scan
//! Gibbs samplers on zero-mean Gaussian targets.
//!
//! For a target `N(0, Σ)` with precision `R = Σ⁻¹` and conditional variances
//! `S = diag(1/r_ii)`, a random scan with selection probabilities `α`
//! contracts the mean like the matrix `I − diag(α)·S·R`; its spectral radius
//! is the convergence rate.

use crate::error::{Error, Result};
use crate::linalg::{eigenvalues, invert, spectral_radius, DenseMatrix};
use crate::scalar::Real;

const SUM_TOL: f64 = 1e-12;
const SYMMETRY_TOL: f64 = 1e-10;
const PD_RTOL: f64 = 1e-10;

/// Coordinate selection probabilities, a point on the probability simplex.
#[derive(Debug, Clone, PartialEq, serde::Serialize)]
#[serde(transparent)]
pub struct SelectionProbabilities<T = f64> {
    alpha: Vec<T>,
}

impl<T: Real> SelectionProbabilities<T> {
    pub fn new(alpha: Vec<T>) -> Result<Self> {
        if alpha.is_empty() {
            return Err(Error::InvalidSelection("no coordinates".into()));
        }
        let zero = T::zero();
        let one = T::one();
        if let Some((i, a)) = alpha
            .iter()
            .enumerate()
            .find(|(_, &a)| !(a >= zero && a <= one))
        {
            return Err(Error::InvalidSelection(format!(
                "alpha[{i}] = {a} is outside [0, 1]"
            )));
        }
        let sum = alpha.iter().fold(zero, |acc, &a| acc + a);
        let tol = T::lit(SUM_TOL).max(T::epsilon() * T::from_count(4 * alpha.len()));
        if (sum - one).abs() > tol {
            return Err(Error::InvalidSelection(format!(
                "entries sum to {sum}, not 1"
            )));
        }
        Ok(Self { alpha })
    }

    /// Uniform scan `(1/d, …, 1/d)`.
    pub fn equal(d: usize) -> Self {
        assert!(d > 0, "dimension must be positive");
        Self {
            alpha: vec![T::one() / T::from_count(d); d],
        }
    }

    /// Two-coordinate scan `(α₁, 1 − α₁)`.
    pub fn bivariate(alpha1: T) -> Result<Self> {
        Self::new(vec![alpha1, T::one() - alpha1])
    }

    pub fn dim(&self) -> usize {
        self.alpha.len()
    }

    pub fn as_slice(&self) -> &[T] {
        &self.alpha
    }

    pub fn get(&self, i: usize) -> T {
        self.alpha[i]
    }

    pub fn into_vec(self) -> Vec<T> {
        self.alpha
    }
}

/// `N_d(0, Σ)` together with the derived precision and conditional variances.
#[derive(Debug, Clone, PartialEq)]
pub struct GaussianTarget<T = f64> {
    sigma: DenseMatrix<T>,
    precision: DenseMatrix<T>,
    cond_var_diag: Vec<T>,
}

impl<T: Real> GaussianTarget<T> {
    pub fn new(sigma: DenseMatrix<T>) -> Result<Self> {
        sigma.ensure_square()?;
        let scale = T::one().max(sigma.max_abs());
        if !sigma.is_symmetric(T::lit(SYMMETRY_TOL) * scale) {
            return Err(Error::InvalidMatrix(
                "dispersion matrix is not symmetric".into(),
            ));
        }
        check_positive_definite(&sigma)?;
        let precision = invert(&sigma)?;
        let cond_var_diag = precision
            .diag()
            .into_iter()
            .enumerate()
            .map(|(i, r)| {
                if r > T::zero() {
                    Ok(T::one() / r)
                } else {
                    Err(Error::NotPositiveDefinite(format!(
                        "precision[{i}][{i}] = {r}"
                    )))
                }
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            sigma,
            precision,
            cond_var_diag,
        })
    }

    pub fn dim(&self) -> usize {
        self.sigma.rows()
    }

    pub fn sigma(&self) -> &DenseMatrix<T> {
        &self.sigma
    }

    pub fn precision(&self) -> &DenseMatrix<T> {
        &self.precision
    }

    /// Full-conditional variances `1/r_ii`.
    pub fn cond_var_diag(&self) -> &[T] {
        &self.cond_var_diag
    }

    /// Target with dispersion `D Σ D` for `D = diag(scales)`.
    pub fn rescaled(&self, scales: &[T]) -> Result<Self> {
        let d = DenseMatrix::diagonal(scales);
        Self::new(d.matmul(&self.sigma)?.matmul(&d)?)
    }

    /// Mean and variance of coordinate `i` given the others, read off the
    /// precision matrix: mean `−(1/r_ii) Σ_{j≠i} r_ij x_j`, variance `1/r_ii`.
    pub fn full_conditional(&self, i: usize, x: &[T]) -> (T, T) {
        let row = self.precision.row(i);
        let dot = row
            .iter()
            .zip(x)
            .enumerate()
            .filter(|(j, _)| *j != i)
            .fold(T::zero(), |acc, (_, (&r, &xj))| acc + r * xj);
        let var = self.cond_var_diag[i];
        (-var * dot, var)
    }
}

/// Rejects matrices whose smallest eigenvalue is not above `1e-10` times the
/// largest.
pub fn check_positive_definite<T: Real>(sigma: &DenseMatrix<T>) -> Result<()> {
    let spec = eigenvalues(sigma)?;
    let (lo, hi) = spec
        .eigenvalues
        .iter()
        .map(|z| z.re)
        .fold((T::infinity(), T::neg_infinity()), |(lo, hi), v| {
            (lo.min(v), hi.max(v))
        });
    if hi <= T::zero() || lo <= T::lit(PD_RTOL) * hi {
        return Err(Error::NotPositiveDefinite(format!(
            "eigenvalues span [{lo}, {hi}]"
        )));
    }
    Ok(())
}

/// Two-dimensional target described by standard deviations and correlation.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize)]
pub struct BivariateGaussianSpec<T = f64> {
    pub sigma1: T,
    pub sigma2: T,
    pub rho: T,
}

impl<T: Real> BivariateGaussianSpec<T> {
    pub fn new(sigma1: T, sigma2: T, rho: T) -> Result<Self> {
        if !(sigma1 > T::zero() && sigma2 > T::zero()) || !sigma1.is_finite() || !sigma2.is_finite()
        {
            return Err(Error::ParameterOutOfRange(format!(
                "standard deviations must be positive, got ({sigma1}, {sigma2})"
            )));
        }
        if !(rho.abs() < T::one()) {
            return Err(Error::ParameterOutOfRange(format!(
                "correlation must lie in (-1, 1), got {rho}"
            )));
        }
        Ok(Self {
            sigma1,
            sigma2,
            rho,
        })
    }

    /// Covariance `ρσ₁σ₂`.
    pub fn tau(&self) -> T {
        self.rho * self.sigma1 * self.sigma2
    }

    pub fn sigma_matrix(&self) -> DenseMatrix<T> {
        let tau = self.tau();
        DenseMatrix::from_row_major(
            2,
            2,
            vec![
                self.sigma1 * self.sigma1,
                tau,
                tau,
                self.sigma2 * self.sigma2,
            ],
        )
        .expect("finite 2x2")
    }

    pub fn target(&self) -> Result<GaussianTarget<T>> {
        GaussianTarget::new(self.sigma_matrix())
    }

    /// Recovers the spec from a 2×2 dispersion matrix.
    pub fn from_sigma(sigma: &DenseMatrix<T>) -> Result<Self> {
        if sigma.rows() != 2 || sigma.cols() != 2 {
            return Err(Error::DimensionMismatch {
                expected: 2,
                found: sigma.rows(),
            });
        }
        let (v1, v2) = (sigma[(0, 0)], sigma[(1, 1)]);
        if !(v1 > T::zero() && v2 > T::zero()) {
            return Err(Error::NotPositiveDefinite(format!(
                "variances ({v1}, {v2})"
            )));
        }
        let (s1, s2) = (v1.sqrt(), v2.sqrt());
        let cov = T::lit(0.5) * (sigma[(0, 1)] + sigma[(1, 0)]);
        Self::new(s1, s2, cov / (s1 * s2)).map_err(|e| Error::NotPositiveDefinite(e.to_string()))
    }
}

/// `I − diag(α)·S·R`.
pub fn scan_operator<T: Real>(
    target: &GaussianTarget<T>,
    alpha: &SelectionProbabilities<T>,
) -> Result<DenseMatrix<T>> {
    let d = target.dim();
    if alpha.dim() != d {
        return Err(Error::DimensionMismatch {
            expected: d,
            found: alpha.dim(),
        });
    }
    let mut op = DenseMatrix::identity(d);
    for i in 0..d {
        let w = alpha.get(i) * target.cond_var_diag()[i];
        for j in 0..d {
            op[(i, j)] = op[(i, j)] - w * target.precision()[(i, j)];
        }
    }
    Ok(op)
}

/// Convergence rate `ρ(I − ΨSR)` of the random scan.
pub fn gaussian_scan_rate<T: Real>(
    target: &GaussianTarget<T>,
    alpha: &SelectionProbabilities<T>,
) -> Result<T> {
    spectral_radius(&scan_operator(target, alpha)?)
}

/// Bivariate rate `0.5{1 + √(1 + 4α₁²(1−ρ²) − 4α₁(1−ρ²))}`.
pub fn bivariate_rate_closed_form<T: Real>(rho: T, alpha1: T) -> Result<T> {
    if !(rho.abs() < T::one()) {
        return Err(Error::ParameterOutOfRange(format!(
            "|rho| must be < 1, got {rho}"
        )));
    }
    if !(alpha1 >= T::zero() && alpha1 <= T::one()) {
        return Err(Error::ParameterOutOfRange(format!(
            "alpha1 must lie in [0, 1], got {alpha1}"
        )));
    }
    let four = T::lit(4.0);
    let c = T::one() - rho * rho;
    let disc = T::one() + four * alpha1 * alpha1 * c - four * alpha1 * c;
    // disc = 1 − 4α₁(1−α₁)(1−ρ²) ≥ 0; clamp rounding
    Ok(T::lit(0.5) * (T::one() + disc.max(T::zero()).sqrt()))
}

/// Exchangeable dispersion `diag(σᵢ²) − J/(d + 0.005)`.
pub fn exchangeable_sigma<T: Real>(sigmas: &[T]) -> Result<DenseMatrix<T>> {
    let d = sigmas.len();
    if d == 0 {
        return Err(Error::ParameterOutOfRange(
            "no standard deviations given".into(),
        ));
    }
    if let Some(s) = sigmas.iter().find(|&&s| !(s > T::zero()) || !s.is_finite()) {
        return Err(Error::ParameterOutOfRange(format!(
            "standard deviation {s} must be positive"
        )));
    }
    let c = T::one() / (T::from_count(d) + T::lit(0.005));
    let mut sigma = DenseMatrix::filled(d, d, -c);
    for (i, &s) in sigmas.iter().enumerate() {
        sigma[(i, i)] = s * s - c;
    }
    check_positive_definite(&sigma)?;
    Ok(sigma)
}

/// Asymptotic variance polynomial for `h(x) = x₁ + x₂` on a bivariate target,
/// with `a = ρσ₁ + σ₂` and `b = σ₁ + ρσ₂`:
///
/// `σ₁² + σ₂² + 2ρσ₁σ₂ + α₁a² + (1−α₁)b² + α₁²a² + (1−α₁)²b² + 2α₁(1−α₁)abρ`.
pub fn bivariate_avar_sum<T: Real>(spec: &BivariateGaussianSpec<T>, alpha1: T) -> T {
    let BivariateGaussianSpec {
        sigma1: s1,
        sigma2: s2,
        rho,
    } = *spec;
    let two = T::lit(2.0);
    let a = rho * s1 + s2;
    let b = s1 + rho * s2;
    let beta = T::one() - alpha1;
    s1 * s1
        + s2 * s2
        + two * rho * s1 * s2
        + alpha1 * a * a
        + beta * b * b
        + alpha1 * alpha1 * a * a
        + beta * beta * b * b
        + two * alpha1 * beta * a * b * rho
}
