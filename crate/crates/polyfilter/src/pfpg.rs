//! Polynomial-filtered proximal gradient solver.
//!
//! The smooth objective term is a spectral function of a symmetric operator
//! `B(x)`; its gradient only needs the eigenpairs whose mapped weight
//! `phi'(lambda)` is nonzero. Each iteration therefore evaluates the
//! gradient by Rayleigh-Ritz extraction on a tracked subspace instead of a
//! full eigendecomposition: the proximal step runs first on the current
//! subspace, then the subspace is refreshed with one Chebyshev filter pass
//! on the operator at the new point. An exact dense-eigendecomposition mode
//! serves as the reference solver, and exact safeguard iterations bound the
//! drift of pure filtered runs.

use std::time::Instant;

use ndarray::{Array1, Array2, ArrayView1};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::chebyshev::{stable_degree, DegreeSchedule, FilterSpec};
use crate::linalg::{small_sym_eig, EigenPairs, SymmetricOperator};
use crate::subspace::{
    adapt_dimension, choose_interval, filter_update, gap_diagnostics, project_and_map,
    rayleigh_ritz, resize_from_ritz, IntervalMode, LowRankFactors, RitzPairs, Subspace,
};
use crate::{Error, Result};

/// A composite problem `min F(x) + R(x)` whose smooth part is a spectral
/// function of a symmetric operator `B(x)` plus a linear term.
pub trait SpectralProblem: Send + Sync {
    /// Number of optimization variables.
    fn dim_x(&self) -> usize;

    /// Ambient dimension of `B(x)`.
    fn matrix_dim(&self) -> usize;

    /// The symmetric operator `B(x)`.
    fn operator_at(&self, x: &ArrayView1<f64>) -> SymmetricOperator;

    /// The linear map `A` applied to a factored symmetric matrix; together
    /// with the gradient offset this yields `grad F = A(Phi(...)) + offset`.
    fn adjoint_map(&self, factors: &LowRankFactors) -> Array1<f64>;

    /// Scalar spectral weight `phi'(lambda)` entering the gradient.
    fn phi_prime(&self, lambda: f64) -> f64;

    /// Constant gradient contribution of the linear objective term.
    fn gradient_offset(&self) -> Array1<f64>;

    /// Proximal map of `t * R`.
    fn prox_r(&self, v: Array1<f64>, t: f64) -> Array1<f64>;

    /// Objective evaluated from eigenvalue estimates; exact when the full
    /// spectrum is supplied.
    fn objective(&self, x: &ArrayView1<f64>, eigs: &Array1<f64>) -> f64;

    /// Starting point.
    fn initial_point(&self) -> Array1<f64>;

    /// Gradient Lipschitz constant when known; drives the default step.
    fn lipschitz(&self) -> Option<f64> {
        None
    }

    /// Which part of the spectrum carries nonzero weights, as an interval
    /// mode for the given safety factor.
    fn interval_mode(&self, eta: f64) -> IntervalMode;

    /// Dense-eigendecomposition objective, for reporting and oracles.
    fn exact_objective(&self, x: &ArrayView1<f64>) -> Result<f64> {
        let dense = self.operator_at(x).to_dense();
        let eig = small_sym_eig(&dense.view())?;
        Ok(self.objective(x, &eig.values))
    }
}

/// Whether the gradient uses the filtered subspace or a dense
/// eigendecomposition every iteration.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SolveMode {
    Exact,
    Filtered,
}

/// Initial subspace construction.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum InitStrategy {
    /// Random Gaussian basis, orthonormalized.
    RandomBasis,
    /// Leading eigenvectors of `B(x0)` from the startup eigendecomposition.
    ExactEvd,
}

/// Iterate extrapolation settings.
#[derive(Debug, Clone, Copy)]
pub enum Acceleration {
    Off,
    /// Regularized difference extrapolation over a sliding window of
    /// `window + 2` iterates with ridge parameter
    /// `lambda_scale * ||U^T U||_F`.
    Extrapolation { window: usize, lambda_scale: f64 },
}

#[derive(Debug, Clone)]
pub struct PfpgConfig {
    pub mode: SolveMode,
    /// Step size; defaults to `1 / L` when the problem supplies `L`.
    pub tau: Option<f64>,
    /// Stop when the exact gradient norm falls to `tol` times its starting
    /// value.
    pub tol: f64,
    pub max_iter: usize,
    pub degree: DegreeSchedule,
    pub repeats: usize,
    /// Interval safety factor in `[0.05, 0.5]`.
    pub eta: f64,
    /// Extra subspace columns beyond the active count.
    pub guard: usize,
    /// Dimension over-allocation factor for top-r problems.
    pub q_dim: f64,
    pub acceleration: Acceleration,
    pub seed: u64,
    /// Force an exact-eigendecomposition iteration every this many steps;
    /// 0 disables the safeguard (pure filtered run).
    pub exact_every: usize,
    /// Refresh the suppression interval every this many steps.
    pub refresh_every: usize,
    pub init: InitStrategy,
}

impl Default for PfpgConfig {
    fn default() -> Self {
        PfpgConfig {
            mode: SolveMode::Filtered,
            tau: None,
            tol: 1e-7,
            max_iter: 1000,
            degree: DegreeSchedule::Constant(6),
            repeats: 1,
            eta: 0.1,
            guard: 5,
            q_dim: 1.5,
            acceleration: Acceleration::Off,
            seed: 0,
            exact_every: 25,
            refresh_every: 10,
            init: InitStrategy::RandomBasis,
        }
    }
}

impl PfpgConfig {
    pub fn validate(&self, problem: &dyn SpectralProblem) -> Result<()> {
        if !(self.tol > 0.0) {
            return Err(Error::InvalidConfig(format!("tol must be > 0, got {}", self.tol)));
        }
        if self.max_iter == 0 {
            return Err(Error::InvalidConfig("max_iter must be >= 1".into()));
        }
        if !(1..=10).contains(&self.repeats) {
            return Err(Error::InvalidConfig(format!(
                "filter repeats q = {} outside 1..=10",
                self.repeats
            )));
        }
        problem.interval_mode(self.eta).validate()?;
        if let Some(tau) = self.tau {
            if !(tau > 0.0) || !tau.is_finite() {
                return Err(Error::InvalidConfig(format!("step tau = {tau} must be positive")));
            }
            if let Some(l) = problem.lipschitz() {
                if tau > 1.0 / l + 1e-12 {
                    return Err(Error::InvalidConfig(format!(
                        "step tau = {tau} exceeds 1/L = {}",
                        1.0 / l
                    )));
                }
            }
        } else if problem.lipschitz().is_none() {
            return Err(Error::InvalidConfig(
                "no step size: problem has no Lipschitz estimate and tau is unset".into(),
            ));
        }
        if let Acceleration::Extrapolation { window, lambda_scale } = self.acceleration {
            if window == 0 || !(lambda_scale > 0.0) {
                return Err(Error::InvalidConfig(
                    "extrapolation needs window >= 1 and a positive ridge scale".into(),
                ));
            }
        }
        Ok(())
    }

    fn resolved_tau(&self, problem: &dyn SpectralProblem) -> f64 {
        self.tau
            .unwrap_or_else(|| 1.0 / problem.lipschitz().expect("validated"))
    }
}

/// How a solve ended.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TerminalStatus {
    Converged,
    MaxIter,
    /// The suppression interval collapsed (e.g. no negative spectrum left)
    /// and no exact fallback was allowed.
    DegenerateInterval,
}

impl TerminalStatus {
    pub fn as_str(&self) -> &'static str {
        match self {
            TerminalStatus::Converged => "converged",
            TerminalStatus::MaxIter => "max_iter",
            TerminalStatus::DegenerateInterval => "degenerate_interval",
        }
    }
}

/// One row of the per-iteration trace.
#[derive(Debug, Clone)]
pub struct IterRecord {
    pub k: usize,
    pub objective: f64,
    /// Relative gradient norm from the subspace estimate (exact in exact
    /// mode).
    pub rel_grad: f64,
    /// Relative exact gradient norm when this iteration computed one.
    pub rel_grad_exact: Option<f64>,
    pub p: usize,
    pub degree: usize,
    pub repeats: usize,
    pub relative_gap: f64,
    pub eta_k: f64,
    pub wall_ms: f64,
}

#[derive(Debug, Clone)]
pub struct SolverTrace {
    pub records: Vec<IterRecord>,
    pub status: TerminalStatus,
}

/// Final report of a solve.
#[derive(Debug, Clone)]
pub struct PfpgOutcome {
    pub x: Array1<f64>,
    pub objective: f64,
    /// `||grad F(x)|| / ||grad F(x0)||` from the final exact check.
    pub rel_grad_exact: f64,
    pub iterations: usize,
    pub exact_evd_count: usize,
    pub trace: SolverTrace,
}

/// Mutable solver state exposed for step-level tests and custom loops.
#[derive(Debug, Clone)]
pub struct PfpgState {
    pub x: Array1<f64>,
    pub sub: Subspace,
    pub interval: (f64, f64),
    pub lambda_min_est: f64,
    pub iteration: usize,
    margin: f64,
}

/// Diagnostics emitted by one filtered step.
#[derive(Debug, Clone)]
pub struct StepDiag {
    pub rel_grad: f64,
    pub objective: f64,
    pub p: usize,
    pub degree: usize,
    pub relative_gap: f64,
    pub eta_k: f64,
}

fn l2(v: &Array1<f64>) -> f64 {
    v.dot(v).sqrt()
}

fn active_count(ritz: &RitzPairs, mode: &IntervalMode) -> usize {
    match *mode {
        IntervalMode::AllPositive { .. } => ritz.values.iter().filter(|&&v| v > 0.0).count(),
        IntervalMode::TopR { r, .. } => r.min(ritz.values.len()),
    }
}

/// Gradient estimate on a subspace: Rayleigh-Ritz extraction, spectral
/// weights, then the linear map plus offset. Equals the exact gradient when
/// the subspace spans the active eigenspace.
pub fn inexact_gradient(
    problem: &dyn SpectralProblem,
    x: &ArrayView1<f64>,
    sub: &Subspace,
) -> Result<(Array1<f64>, RitzPairs)> {
    let op = problem.operator_at(x);
    let ritz = rayleigh_ritz(&op, sub)?;
    let factors = project_and_map(&ritz, |l| problem.phi_prime(l));
    let mut g = problem.adjoint_map(&factors);
    g += &problem.gradient_offset();
    Ok((g, ritz))
}

/// Exact gradient via a dense eigendecomposition of `B(x)`; also returns
/// the eigenpairs for reuse (interval anchors, subspace rebuilds).
pub fn exact_gradient(
    problem: &dyn SpectralProblem,
    x: &ArrayView1<f64>,
) -> Result<(Array1<f64>, EigenPairs)> {
    let dense = problem.operator_at(x).to_dense();
    let eig = small_sym_eig(&dense.view())?;
    let ritz = RitzPairs {
        values: eig.values.clone(),
        vectors: eig.vectors.clone(),
    };
    let factors = project_and_map(&ritz, |l| problem.phi_prime(l));
    let mut g = problem.adjoint_map(&factors);
    g += &problem.gradient_offset();
    Ok((g, eig))
}

/// Result of the regularized difference extrapolation.
#[derive(Debug, Clone)]
pub struct AndersonResult {
    pub x: Array1<f64>,
    /// Mixing coefficients over the oldest `len - 1` history points; they
    /// sum to one by construction.
    pub coefficients: Array1<f64>,
}

/// Regularized extrapolation from the last `l + 2` iterates.
///
/// Builds the difference matrix `U = [x1-x0, ..., x_{l+1}-x_l]`, solves
/// `(U^T U + lambda I) z = 1`, normalizes `c = z / (1^T z)`, and returns
/// `sum_i c_i x_i` over the first `l + 1` points.
pub fn anderson_extrapolate(history: &[Array1<f64>], lambda_reg: f64) -> Result<AndersonResult> {
    if history.len() < 2 {
        return Err(Error::InvalidConfig(
            "extrapolation needs at least two iterates".into(),
        ));
    }
    if !(lambda_reg > 0.0) {
        return Err(Error::InvalidConfig(format!(
            "extrapolation ridge must be positive, got {lambda_reg}"
        )));
    }
    let cols = history.len() - 1;
    let dim = history[0].len();
    let mut diffs = Array2::zeros((dim, cols));
    for j in 0..cols {
        let d = &history[j + 1] - &history[j];
        diffs.column_mut(j).assign(&d);
    }
    let mut gram = diffs.t().dot(&diffs);
    for i in 0..cols {
        gram[[i, i]] += lambda_reg;
    }
    let ones = Array2::ones((cols, 1));
    let z = crate::linalg::factor::solve_spd(&gram.view(), &ones.view())?;
    let total: f64 = z.iter().sum();
    if total == 0.0 || !total.is_finite() {
        return Err(Error::Factorization(
            "extrapolation weights degenerate".into(),
        ));
    }
    let coefficients = Array1::from_iter(z.iter().map(|&v| v / total));
    let mut x = Array1::zeros(dim);
    for (i, c) in coefficients.iter().enumerate() {
        x.scaled_add(*c, &history[i]);
    }
    Ok(AndersonResult { x, coefficients })
}

/// Ridge parameter for the extrapolation: `scale * ||U^T U||_F` with a tiny
/// absolute floor so stalled (all-equal) histories stay solvable.
fn extrapolation_ridge(history: &[Array1<f64>], scale: f64) -> f64 {
    let cols = history.len() - 1;
    let diffs: Vec<Array1<f64>> = (0..cols).map(|i| &history[i + 1] - &history[i]).collect();
    let mut frob = 0.0;
    for i in 0..cols {
        for j in 0..cols {
            let g = diffs[i].dot(&diffs[j]);
            frob += g * g;
        }
    }
    (scale * frob.sqrt()).max(1e-300)
}

/// Build filtered state from a startup eigendecomposition at `x0`.
fn state_from_eig(
    problem: &dyn SpectralProblem,
    config: &PfpgConfig,
    x0: Array1<f64>,
    eig: &EigenPairs,
    rng: &mut impl Rng,
) -> Result<PfpgState> {
    let n = problem.matrix_dim();
    let lambda_min = eig.values[eig.values.len() - 1];
    let margin = 1e-3 * (1.0 + lambda_min.abs());
    let mode = problem.interval_mode(config.eta);
    let full = RitzPairs {
        values: eig.values.clone(),
        vectors: eig.vectors.clone(),
    };
    let p0 = adapt_dimension(&full, &mode, config.guard, config.q_dim, n);
    let interval = choose_interval(&full, lambda_min - margin, &mode)?;
    let sub = match config.init {
        InitStrategy::RandomBasis => Subspace::random(n, p0, rng)?,
        InitStrategy::ExactEvd => resize_from_ritz(&full, 0, p0, rng)?,
    };
    Ok(PfpgState {
        x: x0,
        sub,
        interval,
        lambda_min_est: lambda_min,
        iteration: 0,
        margin,
    })
}

/// Build the initial state: one dense eigendecomposition at `x0` anchors
/// the interval, sizes the subspace, and provides the reference gradient
/// norm (second return value).
pub fn pfpg_init(
    problem: &dyn SpectralProblem,
    config: &PfpgConfig,
    rng: &mut impl Rng,
) -> Result<(PfpgState, f64)> {
    pfpg_init_at(problem, config, problem.initial_point(), rng)
}

/// Build a solver state at an arbitrary starting point (warm start);
/// [`pfpg_init`] is this at the problem's own initial point. The returned
/// norm is the exact gradient norm at `x0`, the usual relative-gradient
/// denominator.
pub fn pfpg_init_at(
    problem: &dyn SpectralProblem,
    config: &PfpgConfig,
    x0: Array1<f64>,
    rng: &mut impl Rng,
) -> Result<(PfpgState, f64)> {
    config.validate(problem)?;
    let (g0, eig) = exact_gradient(problem, &x0.view())?;
    let g0_norm = l2(&g0);
    let state = state_from_eig(problem, config, x0, &eig, rng)?;
    Ok((state, g0_norm))
}

/// Top eigenvalue paired with the smallest one the interval mode keeps.
/// Their amplification spread bounds the filter degree the kept directions
/// can absorb before the weakest sinks below roundoff.
fn kept_band(values: &Array1<f64>, interval: (f64, f64), mode: &IntervalMode) -> (f64, f64) {
    let top = values[0];
    let keep = match *mode {
        IntervalMode::AllPositive { .. } => {
            let above = values
                .iter()
                .copied()
                .filter(|&v| v > interval.1)
                .fold(f64::INFINITY, f64::min);
            if above.is_finite() {
                above
            } else {
                top
            }
        }
        IntervalMode::TopR { r, .. } => values[r.clamp(1, values.len()) - 1],
    };
    (top, keep)
}

/// One filtered proximal-gradient step: prox update on the current
/// subspace, then interval/dimension maintenance, then one filter pass on
/// the operator at the new point. A collapsed suppression interval
/// surfaces as [`Error::DegenerateInterval`]; the solve loop decides
/// whether to fall back to an exact iteration.
pub fn pfpg_step(
    problem: &dyn SpectralProblem,
    state: &PfpgState,
    config: &PfpgConfig,
    g0_norm: f64,
    rng: &mut impl Rng,
) -> Result<(PfpgState, StepDiag)> {
    let k = state.iteration;
    let tau = config.resolved_tau(problem);
    let mode = problem.interval_mode(config.eta);
    let (g, ritz) = inexact_gradient(problem, &state.x.view(), &state.sub)?;
    let objective = problem.objective(&state.x.view(), &ritz.values);
    let rel_grad = if g0_norm > 0.0 { l2(&g) / g0_norm } else { 0.0 };

    let mut v = state.x.clone();
    v.scaled_add(-tau, &g);
    let x_next = problem.prox_r(v, tau);

    let degree = config.degree.degree_at(k);
    let diag_spec = FilterSpec::new(state.interval.0, state.interval.1, degree, config.repeats)?;
    let wanted = active_count(&ritz, &mode);
    let diags = gap_diagnostics(&ritz, &diag_spec, wanted);

    let mut interval = state.interval;
    let mut margin = state.margin;
    let p = ritz.values.len();
    let ritz_min = ritz.values[p - 1];
    let escaped = ritz_min < interval.0;
    if escaped {
        margin *= 10.0;
    }
    if escaped || diags.relative_gap < 0.0 || (k + 1) % config.refresh_every.max(1) == 0 {
        let anchor = state.lambda_min_est.min(ritz_min) - margin;
        interval = choose_interval(&ritz, anchor, &mode)?;
    }

    let n = problem.matrix_dim();
    let p_next = adapt_dimension(&ritz, &mode, config.guard, config.q_dim, n);
    // Carry the Ritz-rotated basis (same span) into the filter pass: with
    // eigen-aligned columns, each survives its own amplification, while a
    // raw orthonormal mixture loses weakly amplified directions to rounding
    // once the filter's dynamic range passes 1/eps.
    let carried = resize_from_ritz(&ritz, state.sub.generation(), p_next, rng)?;

    // Cap the degree to the amplification spread the kept Ritz values can
    // absorb in floating point; past that, the filter destroys the weakly
    // amplified directions instead of refining them.
    let (top, keep_min) = kept_band(&ritz.values, interval, &mode);
    let degree = stable_degree(interval.0, interval.1, top, keep_min, config.repeats, degree);

    let op_next = problem.operator_at(&x_next.view());
    let spec = FilterSpec::new(interval.0, interval.1, degree, config.repeats)?;
    let sub_next = filter_update(&op_next, &carried, &spec, rng)?;

    Ok((
        PfpgState {
            x: x_next,
            sub: sub_next,
            interval,
            lambda_min_est: state.lambda_min_est,
            iteration: k + 1,
            margin,
        },
        StepDiag {
            rel_grad,
            objective,
            p: p_next,
            degree,
            relative_gap: diags.relative_gap,
            eta_k: diags.eta_k,
        },
    ))
}

/// Objective estimate at `x` via Rayleigh-Ritz on the given subspace.
fn estimated_objective(
    problem: &dyn SpectralProblem,
    x: &ArrayView1<f64>,
    sub: &Subspace,
) -> Result<f64> {
    let op = problem.operator_at(x);
    let ritz = rayleigh_ritz(&op, sub)?;
    Ok(problem.objective(x, &ritz.values))
}

/// Exact-eigendecomposition iteration used by exact mode, safeguards, and
/// the degenerate-interval fallback. Returns the stepped point plus
/// everything the caller needs to refresh filtered state.
struct ExactIteration {
    x_next: Array1<f64>,
    grad_norm: f64,
    objective: f64,
    eig: EigenPairs,
}

fn exact_iteration(
    problem: &dyn SpectralProblem,
    x: &Array1<f64>,
    tau: f64,
) -> Result<ExactIteration> {
    let (g, eig) = exact_gradient(problem, &x.view())?;
    let grad_norm = l2(&g);
    let objective = problem.objective(&x.view(), &eig.values);
    let mut v = x.clone();
    v.scaled_add(-tau, &g);
    let x_next = problem.prox_r(v, tau);
    Ok(ExactIteration {
        x_next,
        grad_norm,
        objective,
        eig,
    })
}

/// Rebuild filtered state from a dense eigendecomposition at the current
/// point: refresh the interval anchor, the margin, and the basis.
fn refresh_from_eig(
    state: &mut PfpgState,
    eig: &EigenPairs,
    config: &PfpgConfig,
    mode: &IntervalMode,
    n: usize,
    rng: &mut impl Rng,
) -> Result<()> {
    let lambda_min = eig.values[eig.values.len() - 1];
    state.lambda_min_est = lambda_min;
    state.margin = 1e-3 * (1.0 + lambda_min.abs());
    let full = RitzPairs {
        values: eig.values.clone(),
        vectors: eig.vectors.clone(),
    };
    state.interval = choose_interval(&full, lambda_min - state.margin, mode)?;
    let p = adapt_dimension(&full, mode, config.guard, config.q_dim, n);
    state.sub = resize_from_ritz(&full, state.sub.generation(), p, rng)?;
    Ok(())
}

/// Run the solver to convergence on the exact gradient criterion.
pub fn pfpg_solve(problem: &dyn SpectralProblem, config: &PfpgConfig) -> Result<PfpgOutcome> {
    config.validate(problem)?;
    let started = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let tau = config.resolved_tau(problem);
    let mode = problem.interval_mode(config.eta);
    let n = problem.matrix_dim();

    let mut records: Vec<IterRecord> = Vec::new();
    let mut exact_evd_count = 1usize;
    let mut last_wall = 0.0f64;
    let record =
        |records: &mut Vec<IterRecord>, last_wall: &mut f64, mut row: IterRecord| {
            let now = started.elapsed().as_secs_f64() * 1e3;
            row.wall_ms = now - *last_wall;
            *last_wall = now;
            records.push(row);
        };

    // Startup eigendecomposition: reference gradient norm, interval, basis.
    let x0 = problem.initial_point();
    let (g0, eig0) = exact_gradient(problem, &x0.view())?;
    let g0_norm = l2(&g0);
    if g0_norm == 0.0 {
        let objective = problem.objective(&x0.view(), &eig0.values);
        return Ok(PfpgOutcome {
            x: x0,
            objective,
            rel_grad_exact: 0.0,
            iterations: 0,
            exact_evd_count,
            trace: SolverTrace {
                records,
                status: TerminalStatus::Converged,
            },
        });
    }

    let mut history: Vec<Array1<f64>> = Vec::new();
    let accel_window = match config.acceleration {
        Acceleration::Extrapolation { window, .. } => Some(window),
        Acceleration::Off => None,
    };

    if config.mode == SolveMode::Exact {
        let mut x = x0;
        let mut status = TerminalStatus::MaxIter;
        let mut iterations = config.max_iter;
        let mut last_rel = f64::NAN;
        let mut last_obj = f64::NAN;
        for k in 0..=config.max_iter {
            let it = exact_iteration(problem, &x, tau)?;
            exact_evd_count += 1;
            let rel = it.grad_norm / g0_norm;
            last_rel = rel;
            last_obj = it.objective;
            let active = it.eig.values.iter().filter(|&&v| problem.phi_prime(v) != 0.0).count();
            record(
                &mut records,
                &mut last_wall,
                IterRecord {
                    k,
                    objective: it.objective,
                    rel_grad: rel,
                    rel_grad_exact: Some(rel),
                    p: active,
                    degree: 0,
                    repeats: 0,
                    relative_gap: f64::NAN,
                    eta_k: f64::NAN,
                    wall_ms: 0.0,
                },
            );
            if rel <= config.tol {
                status = TerminalStatus::Converged;
                iterations = k;
                break;
            }
            if k == config.max_iter {
                iterations = k;
                break;
            }
            let mut x_next = it.x_next;
            if let Some(window) = accel_window {
                history.push(x_next.clone());
                if history.len() > window + 2 {
                    history.remove(0);
                }
                if history.len() == window + 2 {
                    if let Acceleration::Extrapolation { lambda_scale, .. } = config.acceleration {
                        let ridge = extrapolation_ridge(&history, lambda_scale);
                        let cand = anderson_extrapolate(&history, ridge)?;
                        // Safeguard against the objective at the current
                        // iterate, which this iteration already paid for; a
                        // candidate below it keeps the sequence monotone
                        // because plain steps never increase the objective.
                        let f_cand = problem.exact_objective(&cand.x.view())?;
                        exact_evd_count += 1;
                        if f_cand <= it.objective {
                            x_next = cand.x;
                            history.clear();
                        }
                    }
                }
            }
            x = x_next;
        }
        return Ok(PfpgOutcome {
            x,
            objective: last_obj,
            rel_grad_exact: last_rel,
            iterations,
            exact_evd_count,
            trace: SolverTrace { records, status },
        });
    }

    // Filtered mode: reuse the startup eigendecomposition for the state.
    let mut state = match state_from_eig(problem, config, x0, &eig0, &mut rng) {
        Ok(state) => state,
        Err(Error::DegenerateInterval { .. }) => {
            // Nothing to suppress at the starting point; a filtered run
            // cannot proceed. Callers should use exact mode here.
            let x = problem.initial_point();
            let objective = problem.objective(&x.view(), &eig0.values);
            return Ok(PfpgOutcome {
                x,
                objective,
                rel_grad_exact: 1.0,
                iterations: 0,
                exact_evd_count,
                trace: SolverTrace {
                    records,
                    status: TerminalStatus::DegenerateInterval,
                },
            });
        }
        Err(e) => return Err(e),
    };
    let mut status = TerminalStatus::MaxIter;
    let mut iterations = config.max_iter;
    let mut final_rel_exact = f64::NAN;
    let mut final_obj = f64::NAN;

    for k in 0..=config.max_iter {
        let safeguard_due = config.exact_every > 0 && k > 0 && k % config.exact_every == 0;

        // Cheap filtered gradient at the current point decides whether an
        // exact check is worth paying for this iteration.
        let step = pfpg_step(problem, &state, config, g0_norm, &mut rng);
        let (candidate, diag) = match step {
            Ok(pair) => pair,
            Err(Error::DegenerateInterval { .. }) if config.exact_every > 0 => {
                // Interval collapsed: take one exact iteration and rebuild.
                let it = exact_iteration(problem, &state.x, tau)?;
                exact_evd_count += 1;
                let rel = it.grad_norm / g0_norm;
                final_rel_exact = rel;
                final_obj = it.objective;
                record(
                    &mut records,
                    &mut last_wall,
                    IterRecord {
                        k,
                        objective: it.objective,
                        rel_grad: rel,
                        rel_grad_exact: Some(rel),
                        p: state.sub.p(),
                        degree: 0,
                        repeats: 0,
                        relative_gap: f64::NAN,
                        eta_k: f64::NAN,
                        wall_ms: 0.0,
                    },
                );
                if rel <= config.tol {
                    status = TerminalStatus::Converged;
                    iterations = k;
                    break;
                }
                state.x = it.x_next;
                state.iteration = k + 1;
                match refresh_from_eig(&mut state, &it.eig, config, &mode, n, &mut rng) {
                    Ok(()) => {}
                    Err(Error::DegenerateInterval { .. }) => {
                        status = TerminalStatus::DegenerateInterval;
                        iterations = k + 1;
                        break;
                    }
                    Err(e) => return Err(e),
                }
                continue;
            }
            Err(Error::DegenerateInterval { .. }) => {
                status = TerminalStatus::DegenerateInterval;
                iterations = k;
                final_obj = problem.exact_objective(&state.x.view())?;
                break;
            }
            Err(e) => return Err(e),
        };

        let mut row = IterRecord {
            k,
            objective: diag.objective,
            rel_grad: diag.rel_grad,
            rel_grad_exact: None,
            p: diag.p,
            degree: diag.degree,
            repeats: config.repeats,
            relative_gap: diag.relative_gap,
            eta_k: diag.eta_k,
            wall_ms: 0.0,
        };

        // Exact checks: scheduled safeguard, or candidate convergence.
        if safeguard_due || diag.rel_grad <= config.tol {
            let (g_exact, eig) = exact_gradient(problem, &state.x.view())?;
            exact_evd_count += 1;
            let rel = l2(&g_exact) / g0_norm;
            row.rel_grad_exact = Some(rel);
            final_rel_exact = rel;
            final_obj = problem.objective(&state.x.view(), &eig.values);
            if rel <= config.tol {
                row.objective = final_obj;
                record(&mut records, &mut last_wall, row);
                status = TerminalStatus::Converged;
                iterations = k;
                break;
            }
            // Not converged: recycle the eigendecomposition into state.
            match refresh_from_eig(&mut state, &eig, config, &mode, n, &mut rng) {
                Ok(()) => {}
                Err(Error::DegenerateInterval { .. }) => {
                    record(&mut records, &mut last_wall, row);
                    status = TerminalStatus::DegenerateInterval;
                    iterations = k;
                    break;
                }
                Err(e) => return Err(e),
            }
            // Redo the step from the refreshed subspace (exact gradient).
            let mut v = state.x.clone();
            v.scaled_add(-tau, &g_exact);
            let x_next = problem.prox_r(v, tau);
            let op_next = problem.operator_at(&x_next.view());
            let (top, keep_min) = kept_band(&eig.values, state.interval, &mode);
            let degree = stable_degree(
                state.interval.0,
                state.interval.1,
                top,
                keep_min,
                config.repeats,
                config.degree.degree_at(k),
            );
            let spec = FilterSpec::new(state.interval.0, state.interval.1, degree, config.repeats)?;
            state.sub = filter_update(&op_next, &state.sub, &spec, &mut rng)?;
            state.x = x_next;
            state.iteration = k + 1;
            record(&mut records, &mut last_wall, row);
            if k == config.max_iter {
                iterations = k;
                break;
            }
            continue;
        }

        let current_objective = row.objective;
        record(&mut records, &mut last_wall, row);
        if k == config.max_iter {
            iterations = k;
            break;
        }

        let mut next_state = candidate;
        if let Some(window) = accel_window {
            history.push(next_state.x.clone());
            if history.len() > window + 2 {
                history.remove(0);
            }
            if history.len() == window + 2 {
                if let Acceleration::Extrapolation { lambda_scale, .. } = config.acceleration {
                    let ridge = extrapolation_ridge(&history, lambda_scale);
                    let cand = anderson_extrapolate(&history, ridge)?;
                    // Safeguard against the objective estimate at the
                    // current iterate; plain steps never increase the
                    // objective, so this keeps the sequence monotone.
                    let f_cand = estimated_objective(problem, &cand.x.view(), &next_state.sub)?;
                    if f_cand <= current_objective {
                        next_state.x = cand.x;
                        history.clear();
                    }
                }
            }
        }
        state = next_state;
    }

    if final_obj.is_nan() {
        final_obj = problem.exact_objective(&state.x.view())?;
    }
    if final_rel_exact.is_nan() {
        let (g_exact, _) = exact_gradient(problem, &state.x.view())?;
        exact_evd_count += 1;
        final_rel_exact = l2(&g_exact) / g0_norm;
    }
    Ok(PfpgOutcome {
        x: state.x,
        objective: final_obj,
        rel_grad_exact: final_rel_exact,
        iterations,
        exact_evd_count,
        trace: SolverTrace { records, status },
    })
}
