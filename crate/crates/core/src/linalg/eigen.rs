//! Eigenvalues of real nonsymmetric matrices.
//!
//! The matrix is balanced by powers of two, reduced to upper Hessenberg form
//! by stabilized elementary similarity transforms, and the Hessenberg matrix
//! is driven to quasi-triangular form by the Francis double-shift QR
//! iteration (EISPACK `balanc`/`elmhes`/`hqr`). Only eigenvalues are
//! produced.

use num_complex::Complex;

use crate::error::{Error, Result};
use crate::linalg::DenseMatrix;
use crate::scalar::{Real, Scalar};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct EigenOptions {
    /// Largest accepted dimension.
    pub max_dim: usize,
    /// Total QR iteration cap is `iterations_per_dim * n`.
    pub iterations_per_dim: usize,
    pub balance: bool,
}

impl Default for EigenOptions {
    fn default() -> Self {
        Self {
            max_dim: 2000,
            iterations_per_dim: 100,
            balance: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Spectrum<T> {
    /// Sorted by decreasing real part, then decreasing imaginary part.
    pub eigenvalues: Vec<Complex<T>>,
    pub converged: bool,
    pub iterations: usize,
}

impl<T: Real> Spectrum<T> {
    pub fn moduli(&self) -> Vec<T> {
        self.eigenvalues.iter().map(|z| z.norm()).collect()
    }

    pub fn spectral_radius(&self) -> T {
        self.eigenvalues
            .iter()
            .map(|z| z.norm())
            .fold(T::zero(), Scalar::max_of)
    }

    pub fn sum(&self) -> Complex<T> {
        self.eigenvalues
            .iter()
            .fold(Complex::new(T::zero(), T::zero()), |acc, &z| acc + z)
    }

    pub fn product(&self) -> Complex<T> {
        self.eigenvalues
            .iter()
            .fold(Complex::new(T::one(), T::zero()), |acc, &z| acc * z)
    }

    fn into_result(self) -> Result<Self> {
        if self.converged {
            Ok(self)
        } else {
            Err(Error::NoConvergence {
                iterations: self.iterations,
                partial: self
                    .eigenvalues
                    .iter()
                    .map(|z| (z.re.as_f64(), z.im.as_f64()))
                    .collect(),
            })
        }
    }
}

/// Runs the solver and reports non-convergence through [`Spectrum::converged`]
/// instead of an error, so partial results stay inspectable.
pub fn spectrum<T: Real>(a: &DenseMatrix<T>, opts: &EigenOptions) -> Result<Spectrum<T>> {
    let n = a.ensure_square()?;
    if n > opts.max_dim {
        return Err(Error::TooLarge {
            dim: n,
            limit: opts.max_dim,
        });
    }
    let mut h = a.clone();
    if opts.balance {
        balance(&mut h);
    }
    reduce_to_hessenberg(&mut h);
    let (mut eigenvalues, converged, iterations) =
        hessenberg_qr(&mut h, opts.iterations_per_dim * n);
    eigenvalues.sort_by(|x, y| {
        y.re.partial_cmp(&x.re)
            .unwrap_or(std::cmp::Ordering::Equal)
            .then(y.im.partial_cmp(&x.im).unwrap_or(std::cmp::Ordering::Equal))
    });
    Ok(Spectrum {
        eigenvalues,
        converged,
        iterations,
    })
}

pub fn eigenvalues_with<T: Real>(a: &DenseMatrix<T>, opts: &EigenOptions) -> Result<Spectrum<T>> {
    spectrum(a, opts)?.into_result()
}

/// All eigenvalues of `a` with the default options.
pub fn eigenvalues<T: Real>(a: &DenseMatrix<T>) -> Result<Spectrum<T>> {
    eigenvalues_with(a, &EigenOptions::default())
}

/// Maximum eigenvalue modulus.
pub fn spectral_radius<T: Real>(a: &DenseMatrix<T>) -> Result<T> {
    Ok(eigenvalues(a)?.spectral_radius())
}

/// Largest eigenvalue modulus of a row-stochastic matrix once the single
/// eigenvalue closest to 1 is set aside. Other unit-modulus eigenvalues are
/// kept, so reducible or periodic chains report 1.
pub fn second_eigenvalue_modulus<T: Real>(p: &DenseMatrix<T>) -> Result<T> {
    p.check_stochastic(T::lit(1e-10), T::lit(1e-12))?;
    let spec = eigenvalues(p)?;
    let one = Complex::new(T::one(), T::zero());
    let excluded = spec
        .eigenvalues
        .iter()
        .enumerate()
        .min_by(|(_, a), (_, b)| {
            let da = (**a - one).norm();
            let db = (**b - one).norm();
            da.partial_cmp(&db)
                .unwrap_or(std::cmp::Ordering::Equal)
                .then(b.re.partial_cmp(&a.re).unwrap_or(std::cmp::Ordering::Equal))
        })
        .map(|(i, _)| i);
    Ok(spec
        .eigenvalues
        .iter()
        .enumerate()
        .filter(|(i, _)| Some(*i) != excluded)
        .map(|(_, z)| z.norm())
        .fold(T::zero(), Scalar::max_of))
}

fn balance<T: Real>(a: &mut DenseMatrix<T>) {
    const MAX_SWEEPS: usize = 200;
    let n = a.rows();
    let radix = T::lit(2.0);
    let radix_sq = radix * radix;
    let threshold = T::lit(0.95);
    for _ in 0..MAX_SWEEPS {
        let mut done = true;
        for i in 0..n {
            let mut c = T::zero();
            let mut r = T::zero();
            for j in (0..n).filter(|&j| j != i) {
                c = c + a[(j, i)].abs();
                r = r + a[(i, j)].abs();
            }
            if c.is_zero() || r.is_zero() {
                continue;
            }
            let s = c + r;
            let mut f = T::one();
            let mut g = r / radix;
            while c < g {
                f = f * radix;
                c = c * radix_sq;
            }
            g = r * radix;
            while c > g {
                f = f / radix;
                c = c / radix_sq;
            }
            if (c + r) / f < threshold * s {
                done = false;
                let inv = T::one() / f;
                for j in 0..n {
                    a[(i, j)] = a[(i, j)] * inv;
                }
                for j in 0..n {
                    a[(j, i)] = a[(j, i)] * f;
                }
            }
        }
        if done {
            break;
        }
    }
}

fn reduce_to_hessenberg<T: Real>(a: &mut DenseMatrix<T>) {
    let n = a.rows();
    for m in 1..n.saturating_sub(1) {
        let mut x = T::zero();
        let mut pivot_row = m;
        for j in m..n {
            if a[(j, m - 1)].abs() > x.abs() {
                x = a[(j, m - 1)];
                pivot_row = j;
            }
        }
        if pivot_row != m {
            for j in m - 1..n {
                let tmp = a[(pivot_row, j)];
                a[(pivot_row, j)] = a[(m, j)];
                a[(m, j)] = tmp;
            }
            for j in 0..n {
                let tmp = a[(j, pivot_row)];
                a[(j, pivot_row)] = a[(j, m)];
                a[(j, m)] = tmp;
            }
        }
        if x.is_zero() {
            continue;
        }
        for i in m + 1..n {
            let y = a[(i, m - 1)];
            if y.is_zero() {
                continue;
            }
            let y = y / x;
            a[(i, m - 1)] = y;
            for j in m..n {
                let v = a[(m, j)];
                a[(i, j)] = a[(i, j)] - y * v;
            }
            for j in 0..n {
                let v = a[(j, i)];
                a[(j, m)] = a[(j, m)] + y * v;
            }
        }
    }
    // drop the stored multipliers
    for i in 2..n {
        for j in 0..i - 1 {
            a[(i, j)] = T::zero();
        }
    }
}

#[inline]
fn sign<T: Real>(magnitude: T, s: T) -> T {
    if s >= T::zero() {
        magnitude.abs()
    } else {
        -magnitude.abs()
    }
}

/// Francis double-shift QR on an upper Hessenberg matrix. Returns the
/// eigenvalues, whether every one was isolated, and the iteration count.
fn hessenberg_qr<T: Real>(a: &mut DenseMatrix<T>, cap: usize) -> (Vec<Complex<T>>, bool, usize) {
    let n = a.rows();
    let zero = T::zero();
    let half = T::lit(0.5);
    let mut wr = vec![zero; n];
    let mut wi = vec![zero; n];

    let mut anorm = zero;
    for i in 0..n {
        for j in i.saturating_sub(1)..n {
            anorm = anorm + a[(i, j)].abs();
        }
    }

    let mut shift = zero;
    let mut total = 0usize;
    let mut converged = true;
    let mut hi = n;

    'deflate: while hi > 0 {
        let nn = hi - 1;
        let mut its = 0usize;
        loop {
            // look for a negligible subdiagonal element
            let mut l = 0;
            for ll in (1..=nn).rev() {
                let mut s = a[(ll - 1, ll - 1)].abs() + a[(ll, ll)].abs();
                if s.is_zero() {
                    s = anorm;
                }
                if a[(ll, ll - 1)].abs() + s == s {
                    a[(ll, ll - 1)] = zero;
                    l = ll;
                    break;
                }
            }

            let mut x = a[(nn, nn)];
            if l == nn {
                wr[nn] = x + shift;
                wi[nn] = zero;
                hi -= 1;
                continue 'deflate;
            }
            let mut y = a[(nn - 1, nn - 1)];
            let mut w = a[(nn, nn - 1)] * a[(nn - 1, nn)];
            if l + 1 == nn {
                let p = half * (y - x);
                let q = p * p + w;
                let z = q.abs().sqrt();
                x = x + shift;
                if q >= zero {
                    let z = p + sign(z, p);
                    wr[nn - 1] = x + z;
                    wr[nn] = if z.is_zero() { x + z } else { x - w / z };
                    wi[nn - 1] = zero;
                    wi[nn] = zero;
                } else {
                    wr[nn - 1] = x + p;
                    wr[nn] = x + p;
                    wi[nn - 1] = -z;
                    wi[nn] = z;
                }
                hi -= 2;
                continue 'deflate;
            }

            if total >= cap {
                converged = false;
                for i in 0..hi {
                    wr[i] = a[(i, i)] + shift;
                    wi[i] = zero;
                }
                break 'deflate;
            }
            if its > 0 && its.is_multiple_of(10) {
                // exceptional shift
                shift = shift + x;
                for i in 0..=nn {
                    a[(i, i)] = a[(i, i)] - x;
                }
                let s = a[(nn, nn - 1)].abs() + a[(nn - 1, nn - 2)].abs();
                x = T::lit(0.75) * s;
                y = x;
                w = T::lit(-0.4375) * s * s;
            }
            its += 1;
            total += 1;

            // find two consecutive small subdiagonal elements
            let mut m = nn - 2;
            let (mut p, mut q, mut r, mut z);
            loop {
                z = a[(m, m)];
                let rr = x - z;
                let ss = y - z;
                p = (rr * ss - w) / a[(m + 1, m)] + a[(m, m + 1)];
                q = a[(m + 1, m + 1)] - z - rr - ss;
                r = a[(m + 2, m + 1)];
                let s = p.abs() + q.abs() + r.abs();
                p = p / s;
                q = q / s;
                r = r / s;
                if m == l {
                    break;
                }
                let u = a[(m, m - 1)].abs() * (q.abs() + r.abs());
                let v = p.abs() * (a[(m - 1, m - 1)].abs() + z.abs() + a[(m + 1, m + 1)].abs());
                if u + v == v {
                    break;
                }
                m -= 1;
            }
            for i in m + 2..=nn {
                a[(i, i - 2)] = zero;
                if i != m + 2 {
                    a[(i, i - 3)] = zero;
                }
            }

            // double QR step on rows l..=nn and columns m..=nn
            for k in m..nn {
                if k != m {
                    p = a[(k, k - 1)];
                    q = a[(k + 1, k - 1)];
                    r = if k + 1 != nn { a[(k + 2, k - 1)] } else { zero };
                    x = p.abs() + q.abs() + r.abs();
                    if !x.is_zero() {
                        p = p / x;
                        q = q / x;
                        r = r / x;
                    }
                }
                let s = sign((p * p + q * q + r * r).sqrt(), p);
                if s.is_zero() {
                    continue;
                }
                if k == m {
                    if l != m {
                        a[(k, k - 1)] = -a[(k, k - 1)];
                    }
                } else {
                    a[(k, k - 1)] = -s * x;
                }
                p = p + s;
                x = p / s;
                y = q / s;
                z = r / s;
                q = q / p;
                r = r / p;
                for j in k..=nn {
                    p = a[(k, j)] + q * a[(k + 1, j)];
                    if k + 1 != nn {
                        p = p + r * a[(k + 2, j)];
                        a[(k + 2, j)] = a[(k + 2, j)] - p * z;
                    }
                    a[(k + 1, j)] = a[(k + 1, j)] - p * y;
                    a[(k, j)] = a[(k, j)] - p * x;
                }
                let upper = nn.min(k + 3);
                for i in l..=upper {
                    p = x * a[(i, k)] + y * a[(i, k + 1)];
                    if k + 1 != nn {
                        p = p + z * a[(i, k + 2)];
                        a[(i, k + 2)] = a[(i, k + 2)] - p * r;
                    }
                    a[(i, k + 1)] = a[(i, k + 1)] - p * q;
                    a[(i, k)] = a[(i, k)] - p;
                }
            }
        }
    }

    let eigenvalues = wr
        .into_iter()
        .zip(wi)
        .map(|(re, im)| Complex::new(re, im))
        .collect();
    (eigenvalues, converged, total)
}
