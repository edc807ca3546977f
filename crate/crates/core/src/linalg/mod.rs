//! Dense real linear algebra: pivoted solves, inversion and the full
//! eigenvalue set of nonsymmetric matrices.

mod eigen;
mod lu;
mod matrix;

pub use eigen::{
    eigenvalues, eigenvalues_with, second_eigenvalue_modulus, spectral_radius, spectrum,
    EigenOptions, Spectrum,
};
pub use lu::{determinant, invert, solve, LuDecomposition, SINGULAR_PIVOT_RTOL};
pub use matrix::DenseMatrix;
