//! Polynomial-filtered Douglas-Rachford splitting for standard-form
//! semidefinite programs `min <C, X> s.t. A(X) = b, X PSD`.
//!
//! The splitting alternates the proximal map of the affine-plus-linear part
//! (a closed-form projection using the constraint Gram solve) with the PSD
//! projection. The PSD projection is the only spectral step, and it is
//! evaluated on a tracked subspace: `W = pos_part(compress(Z))` from
//! Rayleigh-Ritz pairs, refreshed by one Chebyshev filter pass per
//! iteration. Convergence is always declared on the exact fixed-point
//! residual `||Z - T(Z)||_F`, computed with a dense eigendecomposition at a
//! configurable cadence.
//!
//! Dual recovery follows the splitting identities: at the fixed point
//! `X = pos_part(Z)`, the dual slack is `S = (X - Z) / t` (automatically
//! PSD, since `X - Z` is the negated negative part of `Z`), and the
//! multiplier `v` of the last affine prox solve gives `y = -v / t`; these
//! satisfy `A*(y) + S = C` exactly at a fixed point.

use std::time::Instant;

use ndarray::{Array1, Array2, ArrayView1, ArrayView2};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::chebyshev::{stable_degree, DegreeSchedule, FilterSpec};
use crate::linalg::{small_sym_eig, SymmetricOperator};
use crate::pfpg::{SolveMode, TerminalStatus};
use crate::subspace::{
    adapt_dimension, choose_interval, filter_update, project_and_map, rayleigh_ritz,
    resize_from_ritz, IntervalMode, LowRankFactors, RitzPairs, Subspace,
};
use crate::{Error, Result};

/// A standard-form SDP with precomputed constraint Gram solve.
pub trait SdpProblem: Send + Sync {
    /// Matrix dimension n.
    fn n(&self) -> usize;

    /// Number of affine constraints m.
    fn m(&self) -> usize;

    /// Cost matrix C.
    fn cost(&self) -> &Array2<f64>;

    /// Constraint map `A(X)`.
    fn apply_a(&self, x: &ArrayView2<f64>) -> Array1<f64>;

    /// `A` applied to a factored symmetric matrix.
    fn apply_a_factors(&self, factors: &LowRankFactors) -> Array1<f64> {
        let x = factors.reconstruct(self.n());
        self.apply_a(&x.view())
    }

    /// Adjoint map `A*(y)`.
    fn apply_a_adjoint(&self, y: &ArrayView1<f64>) -> Array2<f64>;

    /// Apply `(A A*)^{-1}`.
    fn solve_gram(&self, v: &ArrayView1<f64>) -> Result<Array1<f64>>;

    /// Right-hand side b.
    fn rhs(&self) -> &Array1<f64>;

    /// Splitting parameter t > 0.
    fn t(&self) -> f64;
}

/// Proximal map of the affine-plus-cost part together with its constraint
/// multiplier: `(Y - tC) - A*((AA*)^{-1}(A(Y - tC) - b))`, the projection
/// of the cost-shifted point onto the constraint set.
fn prox_affine_full(prob: &dyn SdpProblem, y: &ArrayView2<f64>) -> Result<(Array2<f64>, Array1<f64>)> {
    let t = prob.t();
    let mut shifted = y.to_owned();
    shifted.scaled_add(-t, &prob.cost().view());
    let mut resid = prob.apply_a(&shifted.view());
    resid -= prob.rhs();
    let v = prob.solve_gram(&resid.view())?;
    let correction = prob.apply_a_adjoint(&v.view());
    Ok((shifted - correction, v))
}

/// Proximal map of the affine-plus-cost part; the output satisfies the
/// affine constraints by construction.
pub fn prox_affine(prob: &dyn SdpProblem, y: &ArrayView2<f64>) -> Result<Array2<f64>> {
    Ok(prox_affine_full(prob, y)?.0)
}

/// Positive part of the compression of `Z` onto the subspace, in factored
/// form: Rayleigh-Ritz pairs with positive values. Equals the exact PSD
/// projection when the subspace spans the full positive eigenspace.
pub fn psd_part_filtered(z: &SymmetricOperator, sub: &Subspace) -> Result<LowRankFactors> {
    let ritz = rayleigh_ritz(z, sub)?;
    Ok(project_and_map(&ritz, |l| l.max(0.0)))
}

/// Solver state across iterations.
#[derive(Debug, Clone)]
pub struct PfamState {
    pub z: Array2<f64>,
    pub sub: Subspace,
    /// Cached factors of the last filtered PSD projection.
    pub x_factors: LowRankFactors,
    /// Rayleigh-Ritz pairs computed by the last step.
    pub ritz: RitzPairs,
    /// Multiplier of the last affine prox; `y = -multiplier / t`.
    pub multiplier: Array1<f64>,
    /// `||Z' - Z||_F` of the last step.
    pub residual: f64,
    pub iteration: usize,
}

/// One filtered splitting step: filtered PSD projection, affine prox of the
/// reflection, then one filter pass on the new iterate.
pub fn pfam_step(
    prob: &dyn SdpProblem,
    state: &PfamState,
    spec: &FilterSpec,
    rng: &mut impl Rng,
) -> Result<PfamState> {
    let n = prob.n();
    let zop = SymmetricOperator::dense(state.z.clone());
    let ritz = rayleigh_ritz(&zop, &state.sub)?;
    let x_factors = project_and_map(&ritz, |l| l.max(0.0));
    let w = x_factors.reconstruct(n);

    let mut reflected = &w * 2.0;
    reflected -= &state.z;
    let (prox, multiplier) = prox_affine_full(prob, &reflected.view())?;
    let mut z_next = prox - &w;
    z_next += &state.z;

    let diff = &z_next - &state.z;
    let residual = diff.iter().map(|v| v * v).sum::<f64>().sqrt();

    let op_next = SymmetricOperator::dense(z_next.clone());
    // Filter the Ritz-rotated basis (same span): eigen-aligned columns
    // each survive their own amplification, while a raw orthonormal
    // mixture loses weakly amplified directions to rounding once the
    // filter's dynamic range passes 1/eps.
    let carried = resize_from_ritz(&ritz, state.sub.generation(), state.sub.p(), rng)?;
    let sub_next = filter_update(&op_next, &carried, spec, rng)?;

    Ok(PfamState {
        z: z_next,
        sub: sub_next,
        x_factors,
        ritz,
        multiplier,
        residual,
        iteration: state.iteration + 1,
    })
}

/// Exact splitting operator `T(Z)` via a dense eigendecomposition; returns
/// the new iterate, the exact PSD factors of `Z`, the prox multiplier, and
/// the eigenpairs of `Z`.
pub(crate) fn exact_drs_apply(
    prob: &dyn SdpProblem,
    z: &ArrayView2<f64>,
) -> Result<(Array2<f64>, LowRankFactors, Array1<f64>, RitzPairs)> {
    let eig = small_sym_eig(z)?;
    let full = RitzPairs {
        values: eig.values,
        vectors: eig.vectors,
    };
    let x_factors = project_and_map(&full, |l| l.max(0.0));
    let w = x_factors.reconstruct(prob.n());
    let mut reflected = &w * 2.0;
    reflected -= z;
    let (prox, multiplier) = prox_affine_full(prob, &reflected.view())?;
    let mut z_next = prox - &w;
    z_next += z;
    Ok((z_next, x_factors, multiplier, full))
}

#[derive(Debug, Clone)]
pub struct PfamConfig {
    pub mode: SolveMode,
    /// Stop when the exact fixed-point residual falls below this.
    pub tol: f64,
    /// Optional additional stop on max(pinf, dinf, gap).
    pub kkt_tol: Option<f64>,
    pub max_iter: usize,
    pub degree: DegreeSchedule,
    pub repeats: usize,
    pub eta: f64,
    pub guard: usize,
    pub exact_every: usize,
    pub seed: u64,
    /// Starting iterate; zero matrix when unset.
    pub z0: Option<Array2<f64>>,
}

impl Default for PfamConfig {
    fn default() -> Self {
        PfamConfig {
            mode: SolveMode::Filtered,
            tol: 1e-6,
            kkt_tol: None,
            max_iter: 2000,
            degree: DegreeSchedule::Constant(8),
            repeats: 2,
            eta: 0.1,
            guard: 5,
            exact_every: 10,
            seed: 0,
            z0: None,
        }
    }
}

impl PfamConfig {
    pub fn validate(&self, prob: &dyn SdpProblem) -> Result<()> {
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
        (IntervalMode::AllPositive { eta: self.eta }).validate()?;
        if !(prob.t() > 0.0) {
            return Err(Error::InvalidConfig(format!(
                "splitting parameter t = {} must be positive",
                prob.t()
            )));
        }
        if let Some(z0) = &self.z0 {
            if z0.nrows() != prob.n() || z0.ncols() != prob.n() {
                return Err(Error::DimensionMismatch(format!(
                    "starting iterate is {}x{}, problem dimension is {}",
                    z0.nrows(),
                    z0.ncols(),
                    prob.n()
                )));
            }
            for i in 0..z0.nrows() {
                for j in (i + 1)..z0.ncols() {
                    if (z0[[i, j]] - z0[[j, i]]).abs() > 1e-10 * (1.0 + z0[[i, j]].abs()) {
                        return Err(Error::NotSymmetric("starting iterate".into()));
                    }
                }
            }
        }
        Ok(())
    }
}

/// Feasibility and gap measures: `pinf = ||A(X)-b|| / (1+||b||)`,
/// `dinf = ||A*(y)+S-C||_F / (1+||C||_F)`, `gap = |<C,X> - b'y| / (1+|<C,X>|)`.
#[derive(Debug, Clone, Copy)]
pub struct KktMetrics {
    pub pobj: f64,
    pub pinf: f64,
    pub dinf: f64,
    pub gap: f64,
}

fn frob(a: &Array2<f64>) -> f64 {
    a.iter().map(|v| v * v).sum::<f64>().sqrt()
}

fn kkt_metrics(
    prob: &dyn SdpProblem,
    z: &Array2<f64>,
    x_factors: &LowRankFactors,
    multiplier: &Array1<f64>,
) -> KktMetrics {
    let n = prob.n();
    let t = prob.t();
    let c = prob.cost();
    let b = prob.rhs();

    let mut pobj = 0.0;
    for (k, &wk) in x_factors.weights.iter().enumerate() {
        let col = x_factors.vectors.column(k);
        let cv = c.dot(&col);
        pobj += wk * col.dot(&cv);
    }

    let ax = prob.apply_a_factors(x_factors);
    let bnorm = b.dot(b).sqrt();
    let pdiff = &ax - b;
    let pinf = pdiff.dot(&pdiff).sqrt() / (1.0 + bnorm);

    let y = multiplier.mapv(|v| -v / t);
    let x = x_factors.reconstruct(n);
    let s = (&x - z).mapv(|v| v / t);
    let mut dres = prob.apply_a_adjoint(&y.view());
    dres += &s;
    dres -= c;
    let dinf = frob(&dres) / (1.0 + frob(c));

    let by = b.dot(&y);
    let gap = (pobj - by).abs() / (1.0 + pobj.abs());

    KktMetrics { pobj, pinf, dinf, gap }
}

/// One row of the per-iteration trace (primal-dual accuracy columns).
#[derive(Debug, Clone)]
pub struct PfamIterRecord {
    pub k: usize,
    pub pobj: f64,
    pub pinf: f64,
    pub dinf: f64,
    pub gap: f64,
    /// Step displacement `||Z' - Z||_F` (the fixed-point residual when the
    /// projection was exact).
    pub residual: f64,
    /// Exact fixed-point residual when this iteration computed one.
    pub residual_exact: Option<f64>,
    pub p: usize,
    pub degree: usize,
    pub wall_ms: f64,
}

#[derive(Debug, Clone)]
pub struct PfamTrace {
    pub records: Vec<PfamIterRecord>,
    pub status: TerminalStatus,
}

#[derive(Debug, Clone)]
pub struct PfamOutcome {
    pub z: Array2<f64>,
    /// Final primal iterate (PSD-projection reconstruction).
    pub x: Array2<f64>,
    pub x_factors: LowRankFactors,
    pub y: Array1<f64>,
    pub s: Array2<f64>,
    pub metrics: KktMetrics,
    /// Exact fixed-point residual at the final iterate.
    pub residual: f64,
    pub iterations: usize,
    pub trace: PfamTrace,
}

/// Fresh state at the starting iterate with a random subspace of guard
/// width; the solve's startup exact check replaces both basis and interval.
pub fn pfam_init(
    prob: &dyn SdpProblem,
    config: &PfamConfig,
    rng: &mut impl Rng,
) -> Result<PfamState> {
    config.validate(prob)?;
    let n = prob.n();
    let z = config
        .z0
        .clone()
        .unwrap_or_else(|| Array2::zeros((n, n)));
    let p = config.guard.clamp(1, n);
    let sub = Subspace::random(n, p, rng)?;
    Ok(PfamState {
        z,
        sub,
        x_factors: LowRankFactors {
            vectors: Array2::zeros((n, 0)),
            weights: Array1::zeros(0),
        },
        ritz: RitzPairs {
            values: Array1::zeros(0),
            vectors: Array2::zeros((n, 0)),
        },
        multiplier: Array1::zeros(prob.m()),
        residual: f64::INFINITY,
        iteration: 0,
    })
}

struct ExactCheck {
    z_next: Array2<f64>,
    x_factors: LowRankFactors,
    multiplier: Array1<f64>,
    eig: RitzPairs,
    residual: f64,
}

fn exact_check(prob: &dyn SdpProblem, z: &Array2<f64>) -> Result<ExactCheck> {
    let (z_next, x_factors, multiplier, eig) = exact_drs_apply(prob, &z.view())?;
    let diff = &z_next - z;
    let residual = frob(&diff);
    Ok(ExactCheck {
        z_next,
        x_factors,
        multiplier,
        eig,
        residual,
    })
}

/// Top eigenvalue and the smallest one strictly above the suppression
/// interval.  The pair bounds the amplification spread the filter must keep
/// representable in finite precision; directions past the budget are clamped
/// away by lowering the degree instead of letting them drown in rounding
/// noise.
fn amplification_band(ritz: &RitzPairs, upper: f64) -> Option<(f64, f64)> {
    let top = *ritz.values.first()?;
    let keep = ritz
        .values
        .iter()
        .copied()
        .filter(|&v| v > upper)
        .fold(f64::INFINITY, f64::min);
    Some((top, if keep.is_finite() { keep } else { top }))
}

/// Run the splitting to convergence on the exact fixed-point residual.
pub fn pfam_solve(prob: &dyn SdpProblem, config: &PfamConfig) -> Result<PfamOutcome> {
    config.validate(prob)?;
    let started = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let n = prob.n();
    let t = prob.t();
    let mode = IntervalMode::AllPositive { eta: config.eta };

    let mut state = pfam_init(prob, config, &mut rng)?;
    let mut lambda_min_est = 0.0f64;
    let mut margin = 1e-3;
    let mut records: Vec<PfamIterRecord> = Vec::new();
    let mut last_wall = 0.0f64;
    let mut status = TerminalStatus::MaxIter;
    let mut iterations = config.max_iter;
    let mut final_exact: Option<ExactCheck> = None;

    let push_record = |records: &mut Vec<PfamIterRecord>,
                           last_wall: &mut f64,
                           mut row: PfamIterRecord| {
        let now = started.elapsed().as_secs_f64() * 1e3;
        row.wall_ms = now - *last_wall;
        *last_wall = now;
        records.push(row);
    };

    for k in 0..=config.max_iter {
        let mut do_exact = config.mode == SolveMode::Exact
            || k == 0
            || (config.exact_every > 0 && k % config.exact_every == 0)
            || state.residual <= config.tol;

        // Interval for the filtered step, from the last Rayleigh-Ritz
        // values. A degenerate interval (no believed negative part) falls
        // back to an exact iteration.
        let mut planned: Option<(f64, f64)> = None;
        if !do_exact {
            let ritz_min = *state
                .ritz
                .values
                .last()
                .expect("state carries Ritz values after the startup check");
            if ritz_min < lambda_min_est - margin {
                margin *= 10.0;
                lambda_min_est = ritz_min;
            }
            let anchor = lambda_min_est.min(ritz_min) - margin;
            match choose_interval(&state.ritz, anchor, &mode) {
                Ok(interval) => planned = Some(interval),
                Err(Error::DegenerateInterval { .. }) => do_exact = true,
                Err(e) => return Err(e),
            }
        }

        if do_exact {
            let check = exact_check(prob, &state.z)?;
            let metrics = kkt_metrics(prob, &state.z, &check.x_factors, &check.multiplier);
            push_record(
                &mut records,
                &mut last_wall,
                PfamIterRecord {
                    k,
                    pobj: metrics.pobj,
                    pinf: metrics.pinf,
                    dinf: metrics.dinf,
                    gap: metrics.gap,
                    residual: check.residual,
                    residual_exact: Some(check.residual),
                    p: check.x_factors.rank(),
                    degree: 0,
                    wall_ms: 0.0,
                },
            );
            let kkt_ok = config
                .kkt_tol
                .map(|tol| metrics.pinf.max(metrics.dinf).max(metrics.gap) <= tol)
                .unwrap_or(false);
            if check.residual <= config.tol || kkt_ok {
                status = TerminalStatus::Converged;
                iterations = k;
                final_exact = Some(check);
                break;
            }
            if k == config.max_iter {
                final_exact = Some(check);
                break;
            }
            // Refresh spectral state from the dense decomposition and take
            // the exact step we already computed.
            let lam_min = *check
                .eig
                .values
                .last()
                .expect("eigendecomposition of a nonempty matrix");
            lambda_min_est = lam_min;
            margin = 1e-3 * (1.0 + lam_min.abs());
            if config.mode == SolveMode::Filtered {
                let p = adapt_dimension(&check.eig, &mode, config.guard, 1.5, n);
                let sub = resize_from_ritz(&check.eig, state.sub.generation(), p, &mut rng)?;
                // Exact eigenvectors need no filter pass when the interval
                // degenerates (iterate with no negative part).
                state.sub = match choose_interval(&check.eig, lam_min - margin, &mode) {
                    Ok(interval) => {
                        let mut degree = config.degree.degree_at(k);
                        if let Some((top, keep)) = amplification_band(&check.eig, interval.1) {
                            degree = stable_degree(
                                interval.0,
                                interval.1,
                                top,
                                keep,
                                config.repeats,
                                degree,
                            );
                        }
                        let spec =
                            FilterSpec::new(interval.0, interval.1, degree, config.repeats)?;
                        let op_next = SymmetricOperator::dense(check.z_next.clone());
                        filter_update(&op_next, &sub, &spec, &mut rng)?
                    }
                    Err(Error::DegenerateInterval { .. }) => sub,
                    Err(e) => return Err(e),
                };
            }
            state.ritz = check.eig;
            state.x_factors = check.x_factors;
            state.multiplier = check.multiplier;
            state.residual = check.residual;
            state.z = check.z_next;
            state.iteration = k + 1;
            continue;
        }

        let interval = planned.expect("interval planned when not taking an exact iteration");
        let p_next = adapt_dimension(&state.ritz, &mode, config.guard, 1.5, n);
        if p_next != state.sub.p() {
            state.sub = resize_from_ritz(&state.ritz, state.sub.generation(), p_next, &mut rng)?;
        }
        let mut degree = config.degree.degree_at(k);
        if let Some((top, keep)) = amplification_band(&state.ritz, interval.1) {
            degree = stable_degree(interval.0, interval.1, top, keep, config.repeats, degree);
        }
        let spec = FilterSpec::new(interval.0, interval.1, degree, config.repeats)?;
        state = pfam_step(prob, &state, &spec, &mut rng)?;
        let metrics = kkt_metrics(prob, &state.z, &state.x_factors, &state.multiplier);
        push_record(
            &mut records,
            &mut last_wall,
            PfamIterRecord {
                k,
                pobj: metrics.pobj,
                pinf: metrics.pinf,
                dinf: metrics.dinf,
                gap: metrics.gap,
                residual: state.residual,
                residual_exact: None,
                p: state.sub.p(),
                degree,
                wall_ms: 0.0,
            },
        );
        if k == config.max_iter {
            break;
        }
    }

    let check = match final_exact {
        Some(check) => check,
        None => exact_check(prob, &state.z)?,
    };
    let x = check.x_factors.reconstruct(n);
    let y = check.multiplier.mapv(|v| -v / t);
    let s = (&x - &state.z).mapv(|v| v / t);
    let metrics = kkt_metrics(prob, &state.z, &check.x_factors, &check.multiplier);
    Ok(PfamOutcome {
        z: state.z,
        x,
        x_factors: check.x_factors,
        y,
        s,
        metrics,
        residual: check.residual,
        iterations,
        trace: PfamTrace { records, status },
    })
}
