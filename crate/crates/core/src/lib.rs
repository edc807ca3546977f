//! Convergence rates, asymptotic variances and optimal selection
//! probabilities for random-scan Gibbs samplers.
//!
//! The numerical core is generic over the scalar type; the aliases below fix
//! it to `f64`.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod diagnostics;
pub mod discrete;
pub mod error;
pub mod gaussian;
pub mod linalg;
pub mod optimize;
pub mod sampler;
pub mod scalar;

pub use error::{Error, Result};
pub use scalar::{Real, Scalar};

pub use diagnostics::{
    batch_means_avar, empirical_autocov, rate_lag2_report, tv_curve, tv_distance_exact,
    AvarEstimate, Lag2Report,
};
pub use discrete::{
    assemble_scan_matrix, autocov_series_avar, build_binomial_model, build_custom_model,
    default_max_lag, discrete_scan_rate, exact_autocov, peskun_avar, State,
};
pub use gaussian::{
    bivariate_avar_sum, bivariate_rate_closed_form, exchangeable_sigma, gaussian_scan_rate,
};
pub use optimize::{
    optimize_1d, optimize_simplex, relative_gain, Criterion, LineSearch, Method,
    OptimizationResult, SimplexSearch,
};
pub use sampler::{
    run_chain, run_chain_from, tune_pilot, two_phase_run, ChainTrace, RngStream, TuneCriterion,
    TuneReport, TwoPhaseTarget,
};

pub type Matrix = linalg::DenseMatrix<f64>;
pub type Selection = gaussian::SelectionProbabilities<f64>;
pub type Gaussian = gaussian::GaussianTarget<f64>;
pub type BivariateGaussian = gaussian::BivariateGaussianSpec<f64>;
pub type JointModel = discrete::DiscreteJointModel<f64>;
pub type StateFunction = discrete::FunctionOnStates<f64>;
pub type ScanMatrix<'m> = discrete::ScanTransitionMatrix<'m, f64>;

/// Exact rational scalar for small-model checks.
pub type Rational = num_rational::Ratio<i64>;
pub type RationalMatrix = linalg::DenseMatrix<Rational>;
pub type RationalJointModel = discrete::DiscreteJointModel<Rational>;
