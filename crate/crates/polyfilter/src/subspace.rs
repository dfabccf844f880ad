//! Filtered subspace tracking.
//!
//! A solver iteration keeps an orthonormal basis `U` of dimension p that is
//! supposed to span the active eigenspace of the current iteration matrix.
//! One update applies the Chebyshev filter to the basis and
//! re-orthonormalizes ([`filter_update`]); Rayleigh-Ritz extraction
//! ([`rayleigh_ritz`]) then yields eigenvalue/eigenvector estimates on the
//! subspace. Principal angles ([`sin_theta`]) quantify subspace quality, and
//! [`choose_interval`] / [`adapt_dimension`] adapt the filter interval and
//! the basis width between iterations.

use ndarray::{Array1, Array2};
use rand::{Rng, RngExt};
use rand_distr::StandardNormal;

use crate::chebyshev::{apply_filter, FilterSpec};
use crate::linalg::{factor, orthonormalize, small_sym_eig, SymmetricOperator};
use crate::{Error, Result};

/// Tolerance for the orthonormality check on externally supplied bases.
const ORTHONORMALITY_TOL: f64 = 1e-8;

/// An orthonormal basis tracking an active eigenspace across iterations.
#[derive(Debug, Clone)]
pub struct Subspace {
    basis: Array2<f64>,
    generation: usize,
}

impl Subspace {
    /// Wrap an externally produced basis; fails unless the columns are
    /// orthonormal to within 1e-8 componentwise.
    pub fn from_orthonormal(basis: Array2<f64>) -> Result<Self> {
        let p = basis.ncols();
        if p > basis.nrows() {
            return Err(Error::DimensionMismatch(format!(
                "{p} basis columns in dimension {}",
                basis.nrows()
            )));
        }
        let gram = basis.t().dot(&basis);
        for i in 0..p {
            for j in 0..p {
                let expect = if i == j { 1.0 } else { 0.0 };
                if (gram[[i, j]] - expect).abs() > ORTHONORMALITY_TOL {
                    return Err(Error::InvalidConfig(format!(
                        "basis is not orthonormal: gram[{i},{j}] = {}",
                        gram[[i, j]]
                    )));
                }
            }
        }
        Ok(Subspace {
            basis,
            generation: 0,
        })
    }

    /// Random Gaussian basis, orthonormalized. The usual cold start.
    pub fn random(n: usize, p: usize, rng: &mut impl Rng) -> Result<Self> {
        if p > n {
            return Err(Error::DimensionMismatch(format!(
                "cannot build a {p}-dimensional subspace in dimension {n}"
            )));
        }
        let m = Array2::from_shape_fn((n, p), |_| rng.sample::<f64, _>(StandardNormal));
        let (q, _) = orthonormalize(&m.view(), rng)?;
        Ok(Subspace {
            basis: q,
            generation: 0,
        })
    }

    pub fn basis(&self) -> &Array2<f64> {
        &self.basis
    }

    /// Ambient dimension n.
    pub fn n(&self) -> usize {
        self.basis.nrows()
    }

    /// Subspace dimension p.
    pub fn p(&self) -> usize {
        self.basis.ncols()
    }

    /// Number of filter updates applied since construction.
    pub fn generation(&self) -> usize {
        self.generation
    }
}

/// Rayleigh-Ritz pairs on a subspace: values descending, Ritz vectors as
/// columns in the ambient dimension.
#[derive(Debug, Clone)]
pub struct RitzPairs {
    pub values: Array1<f64>,
    pub vectors: Array2<f64>,
}

/// Low-rank factors `W diag(d) W^T` produced by mapping Ritz values through
/// a spectral function.
#[derive(Debug, Clone)]
pub struct LowRankFactors {
    pub vectors: Array2<f64>,
    pub weights: Array1<f64>,
}

impl LowRankFactors {
    /// Number of retained directions.
    pub fn rank(&self) -> usize {
        self.weights.len()
    }

    /// Dense reconstruction, for oracles and small instances.
    pub fn reconstruct(&self, n: usize) -> Array2<f64> {
        let mut out = Array2::zeros((n, n));
        for (k, &d) in self.weights.iter().enumerate() {
            let col = self.vectors.column(k);
            for i in 0..n {
                let ci = col[i] * d;
                for j in 0..n {
                    out[[i, j]] += ci * col[j];
                }
            }
        }
        out
    }
}

/// How the suppression interval is chosen from spectral estimates.
#[derive(Debug, Clone, Copy)]
pub enum IntervalMode {
    /// Suppress everything except the positive part of the spectrum:
    /// `[a, eta * a]` anchored at the smallest-eigenvalue estimate `a < 0`.
    AllPositive { eta: f64 },
    /// Suppress everything below the r largest eigenvalues:
    /// `[a, (1 - eta) * lambda_r + eta * a]`.
    TopR { r: usize, eta: f64 },
}

impl IntervalMode {
    pub fn eta(&self) -> f64 {
        match *self {
            IntervalMode::AllPositive { eta } => eta,
            IntervalMode::TopR { eta, .. } => eta,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let eta = self.eta();
        if !(0.05..=0.5).contains(&eta) {
            return Err(Error::InvalidConfig(format!(
                "interval safety factor eta = {eta} outside [0.05, 0.5]"
            )));
        }
        if let IntervalMode::TopR { r, .. } = *self {
            if r == 0 {
                return Err(Error::InvalidConfig("top-r mode needs r >= 1".into()));
            }
        }
        Ok(())
    }
}

/// Per-iteration subspace quality diagnostics.
#[derive(Debug, Clone, Copy)]
pub struct GapDiagnostics {
    /// Smallest relative distance of a wanted Ritz value from the interval,
    /// `min_i |lambda_i - c| / h - 1`; negative means a wanted value fell
    /// inside the suppression interval.
    pub relative_gap: f64,
    /// Estimated per-pass contraction factor: the inside-interval bound 1
    /// divided by the filter gain at the least-amplified wanted Ritz value.
    /// At or above 1 the gap assumption is broken.
    pub eta_k: f64,
    /// Largest principal-angle sine between consecutive bases; filled by the
    /// solver loop, zero when not measured.
    pub sin_theta_max: f64,
}

/// Apply the Chebyshev filter to the basis and re-orthonormalize.
pub fn filter_update(
    op: &SymmetricOperator,
    sub: &Subspace,
    spec: &FilterSpec,
    rng: &mut impl Rng,
) -> Result<Subspace> {
    let filtered = apply_filter(op, &sub.basis.view(), spec)?;
    let (q, _dropped) = orthonormalize(&filtered.view(), rng)?;
    Ok(Subspace {
        basis: q,
        generation: sub.generation + 1,
    })
}

/// Rayleigh-Ritz extraction: eigenpairs of `U^T A U` lifted back to the
/// ambient space. Values are sorted descending.
pub fn rayleigh_ritz(op: &SymmetricOperator, sub: &Subspace) -> Result<RitzPairs> {
    let au = op.apply_block(&sub.basis.view());
    let h = sub.basis.t().dot(&au);
    let eig = small_sym_eig(&h.view())?;
    let vectors = sub.basis.dot(&eig.vectors);
    Ok(RitzPairs {
        values: eig.values,
        vectors,
    })
}

/// Map Ritz values through a spectral function and keep the directions with
/// nonzero weight. The result represents `Phi(P_U(A))` in factored form for
/// maps with `phi(0) = 0`.
pub fn project_and_map(ritz: &RitzPairs, phi: impl Fn(f64) -> f64) -> LowRankFactors {
    let n = ritz.vectors.nrows();
    let kept: Vec<usize> = (0..ritz.values.len())
        .filter(|&i| phi(ritz.values[i]) != 0.0)
        .collect();
    let mut vectors = Array2::zeros((n, kept.len()));
    let mut weights = Array1::zeros(kept.len());
    for (dst, &src) in kept.iter().enumerate() {
        vectors.column_mut(dst).assign(&ritz.vectors.column(src));
        weights[dst] = phi(ritz.values[src]);
    }
    LowRankFactors { vectors, weights }
}

/// Principal-angle sines between two equal-dimension subspaces, angles
/// sorted descending, plus the largest sine.
///
/// Computed from the singular values of `V - U (U^T V)`, which are exactly
/// the sines and stay accurate for tiny angles (the arccos-of-cosines route
/// loses half the digits near zero).
pub fn sin_theta(u: &Subspace, v: &Subspace) -> Result<(Array1<f64>, f64)> {
    if u.n() != v.n() || u.p() != v.p() {
        return Err(Error::DimensionMismatch(format!(
            "principal angles need equal shapes, got {}x{} vs {}x{}",
            u.n(),
            u.p(),
            v.n(),
            v.p()
        )));
    }
    let cross = u.basis.t().dot(&v.basis);
    let resid = &v.basis - &u.basis.dot(&cross);
    let mut sines = factor::singular_values(&resid.view())?;
    sines.mapv_inplace(|s| s.clamp(0.0, 1.0));
    let max = if sines.is_empty() { 0.0 } else { sines[0] };
    Ok((sines, max))
}

/// Choose the suppression interval from the previous Ritz values and a
/// smallest-eigenvalue estimate.
///
/// The lower edge is the smallest-eigenvalue estimate, clamped below the
/// smallest previous Ritz value so a stale estimate cannot leave known
/// spectrum outside the interval.
pub fn choose_interval(
    ritz_prev: &RitzPairs,
    lambda_min_est: f64,
    mode: &IntervalMode,
) -> Result<(f64, f64)> {
    mode.validate()?;
    let p = ritz_prev.values.len();
    if p == 0 {
        return Err(Error::InvalidConfig(
            "interval choice needs at least one Ritz value".into(),
        ));
    }
    let a = lambda_min_est.min(ritz_prev.values[p - 1]);
    let b = match *mode {
        IntervalMode::AllPositive { eta } => {
            if a >= 0.0 {
                return Err(Error::DegenerateInterval { a, b: eta * a });
            }
            eta * a
        }
        IntervalMode::TopR { r, eta } => {
            if r > p {
                return Err(Error::InvalidConfig(format!(
                    "top-r interval needs r <= p, got r = {r}, p = {p}"
                )));
            }
            (1.0 - eta) * ritz_prev.values[r - 1] + eta * a
        }
    };
    if b <= a {
        return Err(Error::DegenerateInterval { a, b });
    }
    Ok((a, b))
}

/// Next subspace dimension.
///
/// In top-r mode the rule is `guard + ceil(q_dim * r)`; in all-positive mode
/// it is the count of positive Ritz values plus the guard. Both are clamped
/// to `[1, n]`.
pub fn adapt_dimension(
    ritz: &RitzPairs,
    mode: &IntervalMode,
    guard: usize,
    q_dim: f64,
    n: usize,
) -> usize {
    let p = match *mode {
        IntervalMode::TopR { r, .. } => guard + (q_dim * r as f64).ceil() as usize,
        IntervalMode::AllPositive { .. } => {
            let positives = ritz.values.iter().filter(|&&v| v > 0.0).count();
            positives + guard
        }
    };
    p.clamp(1, n.max(1))
}

/// Diagnostics for the current filter against the wanted leading Ritz
/// values. `sin_theta_max` is left at zero for the caller to fill.
pub fn gap_diagnostics(ritz: &RitzPairs, spec: &FilterSpec, wanted: usize) -> GapDiagnostics {
    let c = spec.center();
    let h = spec.half_width();
    let wanted = wanted.min(ritz.values.len());
    let mut relative_gap = f64::INFINITY;
    for i in 0..wanted {
        let gap = (ritz.values[i] - c).abs() / h - 1.0;
        relative_gap = relative_gap.min(gap);
    }
    let eta_k = if ritz.values.is_empty() {
        f64::INFINITY
    } else {
        let p = ritz.values.len();
        let edge = if wanted > 0 { wanted } else { p };
        let gain = spec.evaluate(ritz.values[edge - 1]).abs();
        if gain > 0.0 {
            1.0 / gain
        } else {
            f64::INFINITY
        }
    };
    GapDiagnostics {
        relative_gap,
        eta_k,
        sin_theta_max: 0.0,
    }
}

/// Rebuild a basis of width `p_next` from Ritz vectors: keep the leading
/// vectors when shrinking, append re-orthonormalized random directions when
/// growing. The generation counter is carried through unchanged.
pub fn resize_from_ritz(
    ritz: &RitzPairs,
    generation: usize,
    p_next: usize,
    rng: &mut impl Rng,
) -> Result<Subspace> {
    let n = ritz.vectors.nrows();
    let p = ritz.vectors.ncols();
    let p_next = p_next.clamp(1, n);
    let basis = if p_next <= p {
        ritz.vectors.slice(ndarray::s![.., ..p_next]).to_owned()
    } else {
        let mut m = Array2::zeros((n, p_next));
        m.slice_mut(ndarray::s![.., ..p]).assign(&ritz.vectors);
        for j in p..p_next {
            for i in 0..n {
                m[[i, j]] = rng.sample::<f64, _>(StandardNormal);
            }
        }
        let (q, _) = orthonormalize(&m.view(), rng)?;
        q
    };
    Ok(Subspace { basis, generation })
}
