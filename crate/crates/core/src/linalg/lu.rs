//! LU factorization with partial pivoting.

use crate::error::{Error, Result};
use crate::linalg::DenseMatrix;
use crate::scalar::Scalar;

/// Pivots smaller than this fraction of the largest entry are treated as zero.
pub const SINGULAR_PIVOT_RTOL: f64 = 1e-12;

/// Packed `PA = LU` factors (unit lower triangle stored below the diagonal).
#[derive(Debug, Clone)]
pub struct LuDecomposition<T> {
    lu: DenseMatrix<T>,
    perm: Vec<usize>,
    swaps: usize,
}

impl<T: Scalar> LuDecomposition<T> {
    pub fn new(a: &DenseMatrix<T>) -> Result<Self> {
        let n = a.ensure_square()?;
        let scale = a.max_abs();
        let threshold = scale * T::lit(SINGULAR_PIVOT_RTOL);
        let mut lu = a.clone();
        let mut perm: Vec<usize> = (0..n).collect();
        let mut swaps = 0;

        for k in 0..n {
            let (p, pivot_abs) =
                (k..n)
                    .map(|i| (i, lu[(i, k)].abs()))
                    .fold(
                        (k, T::zero()),
                        |best, cur| if cur.1 > best.1 { cur } else { best },
                    );
            if scale.is_zero() || pivot_abs <= threshold {
                return Err(Error::SingularMatrix {
                    pivot: pivot_abs.as_f64(),
                    threshold: threshold.as_f64(),
                });
            }
            if p != k {
                lu.swap_rows(p, k);
                perm.swap(p, k);
                swaps += 1;
            }
            let pivot = lu[(k, k)];
            for i in k + 1..n {
                let factor = lu[(i, k)] / pivot;
                lu[(i, k)] = factor;
                if factor.is_zero() {
                    continue;
                }
                for j in k + 1..n {
                    let u = lu[(k, j)];
                    lu[(i, j)] = lu[(i, j)] - factor * u;
                }
            }
        }
        Ok(Self { lu, perm, swaps })
    }

    pub fn dim(&self) -> usize {
        self.perm.len()
    }

    pub fn solve(&self, b: &[T]) -> Result<Vec<T>> {
        let n = self.dim();
        if b.len() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                found: b.len(),
            });
        }
        let mut x: Vec<T> = self.perm.iter().map(|&p| b[p]).collect();
        for i in 0..n {
            let row = self.lu.row(i);
            let s = (0..i).fold(x[i], |acc, j| acc - row[j] * x[j]);
            x[i] = s;
        }
        for i in (0..n).rev() {
            let row = self.lu.row(i);
            let s = (i + 1..n).fold(x[i], |acc, j| acc - row[j] * x[j]);
            x[i] = s / row[i];
        }
        Ok(x)
    }

    pub fn inverse(&self) -> DenseMatrix<T> {
        let n = self.dim();
        let mut inv = DenseMatrix::zeros(n, n);
        let mut e = vec![T::zero(); n];
        for j in 0..n {
            e[j] = T::one();
            let col = self.solve(&e).expect("dimension checked");
            for (i, v) in col.into_iter().enumerate() {
                inv[(i, j)] = v;
            }
            e[j] = T::zero();
        }
        inv
    }

    pub fn determinant(&self) -> T {
        let d = self.lu.diag().into_iter().fold(T::one(), |acc, v| acc * v);
        if self.swaps % 2 == 1 {
            -d
        } else {
            d
        }
    }
}

/// Solves `a x = b` with partial pivoting.
pub fn solve<T: Scalar>(a: &DenseMatrix<T>, b: &[T]) -> Result<Vec<T>> {
    let n = a.ensure_square()?;
    if b.len() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            found: b.len(),
        });
    }
    LuDecomposition::new(a)?.solve(b)
}

pub fn invert<T: Scalar>(a: &DenseMatrix<T>) -> Result<DenseMatrix<T>> {
    Ok(LuDecomposition::new(a)?.inverse())
}

/// Determinant; zero for matrices the factorization deems singular.
pub fn determinant<T: Scalar>(a: &DenseMatrix<T>) -> Result<T> {
    a.ensure_square()?;
    match LuDecomposition::new(a) {
        Ok(lu) => Ok(lu.determinant()),
        Err(Error::SingularMatrix { .. }) => Ok(T::zero()),
        Err(e) => Err(e),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use num_rational::Ratio;

    fn m(rows: &[&[f64]]) -> DenseMatrix<f64> {
        DenseMatrix::from_rows(&rows.iter().map(|r| r.to_vec()).collect::<Vec<_>>()).unwrap()
    }

    #[test]
    fn solve_identity() {
        let x = solve(&DenseMatrix::identity(3), &[1.0, 2.0, 3.0]).unwrap();
        assert_eq!(x, vec![1.0, 2.0, 3.0]);
    }

    #[test]
    fn solve_diagonal() {
        let x = solve(&m(&[&[2.0, 0.0], &[0.0, 4.0]]), &[2.0, 8.0]).unwrap();
        assert_eq!(x, vec![1.0, 2.0]);
    }

    #[test]
    fn solve_rank_deficient_is_singular() {
        let err = solve(&m(&[&[1.0, 1.0], &[1.0, 1.0]]), &[1.0, 0.0]).unwrap_err();
        assert!(matches!(err, Error::SingularMatrix { .. }));
    }

    #[test]
    fn solve_needs_pivoting() {
        let x = solve(&m(&[&[0.0, 1.0], &[1.0, 0.0]]), &[3.0, 5.0]).unwrap();
        assert_eq!(x, vec![5.0, 3.0]);
    }

    #[test]
    fn solve_checks_lengths() {
        assert!(matches!(
            solve(&DenseMatrix::<f64>::identity(2), &[1.0]),
            Err(Error::DimensionMismatch { .. })
        ));
        assert!(matches!(
            solve(&DenseMatrix::<f64>::zeros(2, 3), &[1.0, 2.0]),
            Err(Error::NotSquare { .. })
        ));
    }

    #[test]
    fn invert_examples() {
        assert_eq!(
            invert(&DenseMatrix::<f64>::identity(4)).unwrap(),
            DenseMatrix::identity(4)
        );
        let inv = invert(&DenseMatrix::diagonal(&[2.0, 5.0])).unwrap();
        assert_abs_diff_eq!(inv[(0, 0)], 0.5, epsilon = 1e-15);
        assert_abs_diff_eq!(inv[(1, 1)], 0.2, epsilon = 1e-15);
        assert_eq!(inv[(0, 1)], 0.0);

        // [[1, r], [r, 1]]^-1 = 1/(1 - r^2) [[1, -r], [-r, 1]]
        let inv = invert(&m(&[&[1.0, 0.5], &[0.5, 1.0]])).unwrap();
        let expected = m(&[&[1.0, -0.5], &[-0.5, 1.0]]).scale(1.0 / 0.75);
        assert!(inv.max_abs_diff(&expected) < 1e-14);
    }

    #[test]
    fn exact_rational_inverse() {
        let r = |a, b| Ratio::<i64>::new(a, b);
        let a = DenseMatrix::from_rows(&[vec![r(1, 1), r(1, 2)], vec![r(1, 2), r(1, 1)]]).unwrap();
        let inv = invert(&a).unwrap();
        assert_eq!(inv[(0, 0)], r(4, 3));
        assert_eq!(inv[(0, 1)], r(-2, 3));
        assert_eq!(a.matmul(&inv).unwrap(), DenseMatrix::identity(2));
    }

    #[test]
    fn determinant_signs() {
        assert_abs_diff_eq!(
            determinant(&m(&[&[0.0, 1.0], &[1.0, 0.0]])).unwrap(),
            -1.0,
            epsilon = 1e-15
        );
        assert_eq!(determinant(&m(&[&[1.0, 2.0], &[2.0, 4.0]])).unwrap(), 0.0);
    }
}
