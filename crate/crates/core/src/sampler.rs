//! Random-scan Gibbs samplers for Gaussian and finite bivariate targets,
//! pilot-run tuning and the equal-then-tuned two-phase run.

use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::Serialize;

use crate::discrete::{
    assemble_scan_matrix, hypergeometric_pmf, peskun_avar, DiscreteJointModel, FunctionOnStates,
};
use crate::error::{Error, Result};
use crate::gaussian::{
    bivariate_avar_sum, gaussian_scan_rate, BivariateGaussianSpec, GaussianTarget,
    SelectionProbabilities,
};
use crate::linalg::DenseMatrix;
use crate::optimize::{optimize_1d, optimize_simplex, Criterion, LineSearch, SimplexSearch};

pub const RNG_ALGORITHM: &str = "ChaCha8Rng";
pub const DEFAULT_GAUSSIAN_BURN_IN: usize = 1000;

/// Seeded ChaCha8 stream. Distinct `stream_id`s select disjoint keystreams
/// under the same seed.
#[derive(Debug, Clone)]
pub struct RngStream {
    seed: u64,
    stream_id: u64,
    rng: ChaCha8Rng,
}

impl RngStream {
    pub fn new(seed: u64, stream_id: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(stream_id);
        Self {
            seed,
            stream_id,
            rng,
        }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn stream_id(&self) -> u64 {
        self.stream_id
    }

    pub fn algorithm(&self) -> &'static str {
        RNG_ALGORITHM
    }

    pub fn uniform(&mut self) -> f64 {
        self.rng.random::<f64>()
    }

    pub fn standard_normal(&mut self) -> f64 {
        self.rng.sample(StandardNormal)
    }
}

impl RngCore for RngStream {
    fn next_u32(&mut self) -> u32 {
        self.rng.next_u32()
    }

    fn next_u64(&mut self) -> u64 {
        self.rng.next_u64()
    }

    fn fill_bytes(&mut self, dst: &mut [u8]) {
        self.rng.fill_bytes(dst)
    }
}

/// Inverse-CDF draw from `Binomial(n, p)`.
pub fn sample_binomial(n: u64, p: f64, rng: &mut RngStream) -> u64 {
    if n == 0 || p <= 0.0 {
        return 0;
    }
    if p >= 1.0 {
        return n;
    }
    let u = rng.uniform();
    let q = 1.0 - p;
    let start = (n as f64) * q.ln();
    let ratio = p / q;
    if start > -700.0 {
        let mut pmf = start.exp();
        let mut cdf = pmf;
        let mut k = 0;
        while u >= cdf && k < n {
            pmf *= ratio * (n - k) as f64 / (k + 1) as f64;
            k += 1;
            cdf += pmf;
        }
        k
    } else {
        // pmf(0) underflows; walk in log space
        let (lp, lr) = (start, ratio.ln());
        let mut log_pmf = lp;
        let mut cdf = 0.0;
        for k in 0..=n {
            cdf += log_pmf.exp();
            if u < cdf {
                return k;
            }
            if k < n {
                log_pmf += lr + ((n - k) as f64).ln() - ((k + 1) as f64).ln();
            }
        }
        n
    }
}

/// Inverse-CDF draw of θ from `hypergeometric(n1, n2, x)`, supported on
/// `max(0, x − n2) ≤ θ ≤ min(n1, x)`.
pub fn sample_hypergeometric(n1: u64, n2: u64, x: u64, rng: &mut RngStream) -> Result<u64> {
    if x > n1 + n2 {
        return Err(Error::ParameterOutOfRange(format!(
            "x = {x} exceeds n1 + n2 = {}",
            n1 + n2
        )));
    }
    let lo = x.saturating_sub(n2);
    let hi = n1.min(x);
    if lo == hi {
        return Ok(lo);
    }
    let u = rng.uniform();
    let mut pmf: f64 = hypergeometric_pmf(n1, n2, x, lo);
    let mut cdf = pmf;
    let mut j = lo;
    while u >= cdf && j < hi {
        // P(j+1)/P(j) = (n1−j)(x−j) / ((j+1)(n2−x+j+1))
        pmf *= ((n1 - j) * (x - j)) as f64 / ((j + 1) * (n2 + j + 1 - x)) as f64;
        j += 1;
        cdf += pmf;
    }
    Ok(j)
}

fn inverse_cdf(weights: impl IntoIterator<Item = f64>, u: f64) -> usize {
    let mut cdf = 0.0;
    let mut last_positive = 0;
    for (i, w) in weights.into_iter().enumerate() {
        if w > 0.0 {
            last_positive = i;
        }
        cdf += w;
        if u < cdf {
            return i;
        }
    }
    last_positive
}

/// A target whose full conditionals can be sampled one coordinate at a time.
/// States are stored as `f64` vectors; discrete targets use integral values.
pub trait GibbsTarget {
    fn dim(&self) -> usize;
    fn label(&self) -> String;
    fn coordinate_names(&self) -> Vec<String>;
    fn initial_state(&self, rng: &mut RngStream) -> Vec<f64>;
    /// Redraws `state[coord]` from its full conditional.
    fn update(&self, state: &mut [f64], coord: usize, rng: &mut RngStream);
    fn default_burn_in(&self) -> usize {
        0
    }
}

pub struct GaussianGibbs<'a> {
    target: &'a GaussianTarget,
    cond_sd: Vec<f64>,
}

impl<'a> GaussianGibbs<'a> {
    pub fn new(target: &'a GaussianTarget) -> Self {
        let cond_sd = target.cond_var_diag().iter().map(|v| v.sqrt()).collect();
        Self { target, cond_sd }
    }
}

impl GibbsTarget for GaussianGibbs<'_> {
    fn dim(&self) -> usize {
        self.target.dim()
    }

    fn label(&self) -> String {
        format!("gaussian(d={})", self.target.dim())
    }

    fn coordinate_names(&self) -> Vec<String> {
        (1..=self.dim()).map(|i| format!("x{i}")).collect()
    }

    fn initial_state(&self, _rng: &mut RngStream) -> Vec<f64> {
        vec![0.0; self.dim()]
    }

    fn update(&self, state: &mut [f64], coord: usize, rng: &mut RngStream) {
        let (mean, _) = self.target.full_conditional(coord, state);
        state[coord] = mean + self.cond_sd[coord] * rng.standard_normal();
    }

    fn default_burn_in(&self) -> usize {
        DEFAULT_GAUSSIAN_BURN_IN
    }
}

/// Gibbs sampler on a [`DiscreteJointModel`]. Coordinate 0 is θ and
/// coordinate 1 is x, so the state vector reads `[θ, x]` and `α₁` is the
/// probability of redrawing θ.
pub struct DiscreteGibbs<'m> {
    model: &'m DiscreteJointModel,
    label: String,
}

impl<'m> DiscreteGibbs<'m> {
    pub fn new(model: &'m DiscreteJointModel) -> Self {
        Self {
            model,
            label: model.label().to_string(),
        }
    }

    fn index(&self, state: &[f64]) -> usize {
        let s = (state[1] as i64, state[0] as i64);
        self.model
            .index_of(s)
            .expect("chain stays on the model support")
    }
}

impl GibbsTarget for DiscreteGibbs<'_> {
    fn dim(&self) -> usize {
        2
    }

    fn label(&self) -> String {
        self.label.clone()
    }

    fn coordinate_names(&self) -> Vec<String> {
        vec!["theta".into(), "x".into()]
    }

    fn initial_state(&self, rng: &mut RngStream) -> Vec<f64> {
        let i = inverse_cdf(self.model.pi().iter().copied(), rng.uniform());
        let (x, t) = self.model.states()[i];
        vec![t as f64, x as f64]
    }

    fn update(&self, state: &mut [f64], coord: usize, rng: &mut RngStream) {
        match (coord, self.model.binomial_params()) {
            (0, Some(b)) => {
                let x = state[1] as u64;
                state[0] = sample_hypergeometric(u64::from(b.n1), u64::from(b.n2), x, rng)
                    .expect("x within support") as f64;
            }
            (1, Some(b)) => {
                state[1] = state[0] + sample_binomial(u64::from(b.n2), b.p, rng) as f64;
            }
            (c, None) => {
                let i = self.index(state);
                let kernel = if c == 0 {
                    self.model.p_theta()
                } else {
                    self.model.p_x()
                };
                let j = inverse_cdf(kernel.row(i).iter().copied(), rng.uniform());
                let (x, t) = self.model.states()[j];
                state[0] = t as f64;
                state[1] = x as f64;
            }
            (c, _) => panic!("coordinate {c} out of range"),
        }
    }
}

/// Tabulated `h` as a function of a `[θ, x]` state vector.
pub fn discrete_state_function<'a>(
    model: &'a DiscreteJointModel,
    h: &'a FunctionOnStates,
) -> impl Fn(&[f64]) -> f64 + 'a {
    move |s: &[f64]| {
        let i = model
            .index_of((s[1] as i64, s[0] as i64))
            .expect("state on the model support");
        h.values()[i]
    }
}

fn choose_coordinate(alpha: &SelectionProbabilities, rng: &mut RngStream) -> usize {
    inverse_cdf(alpha.as_slice().iter().copied(), rng.uniform())
}

/// One random-scan move: picks coordinate `i` with probability `αᵢ` and
/// redraws it in place. Returns the chosen coordinate.
pub fn random_scan_step<G: GibbsTarget + ?Sized>(
    target: &G,
    state: &mut [f64],
    alpha: &SelectionProbabilities,
    rng: &mut RngStream,
) -> usize {
    let i = choose_coordinate(alpha, rng);
    target.update(state, i, rng);
    i
}

/// Post-burn-in output of a chain.
#[derive(Debug, Clone, PartialEq)]
pub struct ChainTrace {
    pub coordinate_names: Vec<String>,
    /// Row-major states, `dim` values per iteration.
    pub values: Vec<f64>,
    pub visits: Vec<u16>,
    pub alpha: SelectionProbabilities,
    pub burn_in: usize,
    pub seed: u64,
    pub stream_id: u64,
    pub algorithm: String,
    pub label: String,
}

impl ChainTrace {
    pub fn dim(&self) -> usize {
        self.coordinate_names.len()
    }

    pub fn len(&self) -> usize {
        self.visits.len()
    }

    pub fn is_empty(&self) -> bool {
        self.visits.is_empty()
    }

    pub fn state(&self, t: usize) -> &[f64] {
        let d = self.dim();
        &self.values[t * d..(t + 1) * d]
    }

    pub fn states(&self) -> impl Iterator<Item = &[f64]> {
        self.values.chunks_exact(self.dim())
    }

    pub fn last_state(&self) -> Option<&[f64]> {
        self.len().checked_sub(1).map(|t| self.state(t))
    }

    pub fn h_series(&self, h: impl Fn(&[f64]) -> f64) -> Vec<f64> {
        self.states().map(h).collect()
    }

    pub fn visit_frequencies(&self) -> Vec<f64> {
        let mut counts = vec![0usize; self.dim()];
        for &v in &self.visits {
            counts[v as usize] += 1;
        }
        let m = self.len().max(1) as f64;
        counts.into_iter().map(|c| c as f64 / m).collect()
    }

    pub fn mean(&self) -> Vec<f64> {
        let d = self.dim();
        let mut m = vec![0.0; d];
        for s in self.states() {
            for (a, b) in m.iter_mut().zip(s) {
                *a += b;
            }
        }
        let n = self.len().max(1) as f64;
        m.iter_mut().for_each(|v| *v /= n);
        m
    }

    /// Sample covariance with the `m − 1` normalization.
    pub fn sample_covariance(&self) -> Result<DenseMatrix<f64>> {
        let (d, m) = (self.dim(), self.len());
        if m < 2 {
            return Err(Error::TraceTooShort(format!("{m} states, need at least 2")));
        }
        let mean = self.mean();
        let mut cov = DenseMatrix::zeros(d, d);
        for s in self.states() {
            for i in 0..d {
                let di = s[i] - mean[i];
                for j in i..d {
                    cov[(i, j)] += di * (s[j] - mean[j]);
                }
            }
        }
        for i in 0..d {
            for j in i..d {
                let v = cov[(i, j)] / (m - 1) as f64;
                cov[(i, j)] = v;
                cov[(j, i)] = v;
            }
        }
        Ok(cov)
    }
}

/// Runs `burn_in + iterations` random-scan moves from the target's default
/// start and records the last `iterations` states.
pub fn run_chain<G: GibbsTarget + ?Sized>(
    target: &G,
    alpha: &SelectionProbabilities,
    iterations: usize,
    burn_in: usize,
    rng: &mut RngStream,
) -> Result<ChainTrace> {
    let init = target.initial_state(rng);
    run_chain_from(target, alpha, iterations, burn_in, init, rng)
}

pub fn run_chain_from<G: GibbsTarget + ?Sized>(
    target: &G,
    alpha: &SelectionProbabilities,
    iterations: usize,
    burn_in: usize,
    initial: Vec<f64>,
    rng: &mut RngStream,
) -> Result<ChainTrace> {
    let d = target.dim();
    if iterations == 0 {
        return Err(Error::ParameterOutOfRange(
            "iterations must be at least 1".into(),
        ));
    }
    if alpha.dim() != d {
        return Err(Error::DimensionMismatch {
            expected: d,
            found: alpha.dim(),
        });
    }
    if initial.len() != d {
        return Err(Error::DimensionMismatch {
            expected: d,
            found: initial.len(),
        });
    }
    let mut state = initial;
    for _ in 0..burn_in {
        random_scan_step(target, &mut state, alpha, rng);
    }
    let mut values = Vec::with_capacity(iterations * d);
    let mut visits = Vec::with_capacity(iterations);
    for _ in 0..iterations {
        let c = random_scan_step(target, &mut state, alpha, rng);
        visits.push(c as u16);
        values.extend_from_slice(&state);
    }
    Ok(ChainTrace {
        coordinate_names: target.coordinate_names(),
        values,
        visits,
        alpha: alpha.clone(),
        burn_in,
        seed: rng.seed(),
        stream_id: rng.stream_id(),
        algorithm: rng.algorithm().to_string(),
        label: target.label(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum TuneCriterion {
    Rate,
    AvarSum,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum TuneSource {
    /// Gaussian approximation fitted to a pilot trace.
    GaussianPilot,
    /// Exact Peskun variance on the known discrete model.
    ExactDiscrete,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TuneReport {
    pub pilot_length: usize,
    pub estimated_sigma: DenseMatrix<f64>,
    pub alpha_hat: SelectionProbabilities,
    pub criterion: TuneCriterion,
    pub source: TuneSource,
    /// Criterion value at `alpha_hat`.
    pub value: f64,
    pub reference_alpha: Option<SelectionProbabilities>,
}

/// Fits `N(0, Σ̂)` to a continuous-state pilot trace and optimizes the
/// chosen criterion under that approximation. The sum-variance criterion is
/// only available in two dimensions.
pub fn tune_pilot(
    trace: &ChainTrace,
    criterion: TuneCriterion,
    reference_alpha: Option<SelectionProbabilities>,
) -> Result<TuneReport> {
    let d = trace.dim();
    if trace.len() < 10 * d {
        return Err(Error::TraceTooShort(format!(
            "pilot has {} states, need at least {}",
            trace.len(),
            10 * d
        )));
    }
    let sigma = trace.sample_covariance()?;
    let target = GaussianTarget::new(sigma.clone()).map_err(|e| match e {
        Error::SingularMatrix { .. } | Error::NotPositiveDefinite(_) => {
            Error::NotPositiveDefinite(format!("pilot covariance: {e}"))
        }
        other => other,
    })?;
    let result = match criterion {
        TuneCriterion::Rate => optimize_simplex(
            Criterion::Rate,
            |a| gaussian_scan_rate(&target, a),
            d,
            &SimplexSearch::default(),
        )?,
        TuneCriterion::AvarSum => {
            if d != 2 {
                return Err(Error::UnsupportedCombination(format!(
                    "sum-variance tuning needs a bivariate target, got d = {d}"
                )));
            }
            let spec = BivariateGaussianSpec::from_sigma(&sigma)?;
            optimize_1d(
                Criterion::Avar,
                |a| Ok(bivariate_avar_sum(&spec, a)),
                0.01,
                0.99,
                &LineSearch::default(),
            )?
        }
    };
    Ok(TuneReport {
        pilot_length: trace.len(),
        estimated_sigma: sigma,
        alpha_hat: result.alpha_star,
        criterion,
        source: TuneSource::GaussianPilot,
        value: result.value,
        reference_alpha,
    })
}

pub enum TwoPhaseTarget<'a> {
    /// Bivariate Gaussian with `h` the coordinate sum.
    Gaussian(&'a GaussianTarget),
    Discrete {
        model: &'a DiscreteJointModel,
        h: &'a FunctionOnStates,
    },
}

#[derive(Debug, Clone)]
pub struct TwoPhaseOutcome {
    pub phase1: ChainTrace,
    pub report: TuneReport,
    pub phase2: Option<ChainTrace>,
}

/// Equal selection probabilities for `phase1_iters` (after the target's
/// default burn-in), then selection probabilities minimizing the asymptotic
/// variance for `phase2_iters`, continuing from the last phase-1 state.
pub fn two_phase_run(
    target: &TwoPhaseTarget<'_>,
    phase1_iters: usize,
    phase2_iters: usize,
    rng: &mut RngStream,
) -> Result<TwoPhaseOutcome> {
    match target {
        TwoPhaseTarget::Gaussian(t) => {
            if t.dim() != 2 {
                return Err(Error::UnsupportedCombination(format!(
                    "variance-optimal tuning needs a bivariate Gaussian, got d = {}; use the rate criterion",
                    t.dim()
                )));
            }
            let g = GaussianGibbs::new(t);
            let phase1 = run_chain(
                &g,
                &SelectionProbabilities::equal(2),
                phase1_iters,
                g.default_burn_in(),
                rng,
            )?;
            let exact = BivariateGaussianSpec::from_sigma(t.sigma())?;
            let reference = optimize_1d(
                Criterion::Avar,
                |a| Ok(bivariate_avar_sum(&exact, a)),
                0.01,
                0.99,
                &LineSearch::default(),
            )?
            .alpha_star;
            let report = tune_pilot(&phase1, TuneCriterion::AvarSum, Some(reference))?;
            let phase2 = continue_phase(&g, &phase1, &report.alpha_hat, phase2_iters, rng)?;
            Ok(TwoPhaseOutcome {
                phase1,
                report,
                phase2,
            })
        }
        TwoPhaseTarget::Discrete { model, h } => {
            let g = DiscreteGibbs::new(model);
            let phase1 = run_chain(&g, &SelectionProbabilities::equal(2), phase1_iters, 0, rng)?;
            let result = optimize_1d(
                Criterion::Avar,
                |a| peskun_avar(&assemble_scan_matrix(model, a)?, h),
                0.01,
                0.99,
                &LineSearch::default(),
            )?;
            let report = TuneReport {
                pilot_length: phase1.len(),
                estimated_sigma: phase1.sample_covariance()?,
                alpha_hat: result.alpha_star,
                criterion: TuneCriterion::AvarSum,
                source: TuneSource::ExactDiscrete,
                value: result.value,
                reference_alpha: None,
            };
            let phase2 = continue_phase(&g, &phase1, &report.alpha_hat, phase2_iters, rng)?;
            Ok(TwoPhaseOutcome {
                phase1,
                report,
                phase2,
            })
        }
    }
}

fn continue_phase<G: GibbsTarget>(
    g: &G,
    phase1: &ChainTrace,
    alpha: &SelectionProbabilities,
    iterations: usize,
    rng: &mut RngStream,
) -> Result<Option<ChainTrace>> {
    if iterations == 0 {
        return Ok(None);
    }
    let start = phase1.last_state().expect("phase 1 is non-empty").to_vec();
    run_chain_from(g, alpha, iterations, 0, start, rng).map(Some)
}
