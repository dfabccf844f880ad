//! Chebyshev polynomial filters.
//!
//! The subspace updates amplify eigenvalues outside a suppression interval
//! `[a, b]` by applying `rho(A) = T_d(L(A))` to a basis block, where `L` is
//! the affine map taking `[a, b]` to `[-1, 1]` and `T_d` the degree-d
//! Chebyshev polynomial of the first kind. Inside the interval `|rho| <= 1`;
//! outside it grows like `2^(d * min(sqrt(eps), 1) - 1)` at relative distance
//! `eps` from the edge, which is what makes low degrees sufficient.

use ndarray::{Array2, ArrayView2};

use crate::linalg::SymmetricOperator;
use crate::{Error, Result};

/// Largest accepted polynomial degree.
pub const MAX_DEGREE: usize = 10_000;

/// Largest accepted number of filter repeats per iteration.
pub const MAX_REPEATS: usize = 10;

/// Entry magnitude that triggers a block rescale during filter application.
const RESCALE_THRESHOLD: f64 = 1e100;

/// A Chebyshev filter: suppression interval, degree, and repeat count.
///
/// `repeats` (often written q) applies the same degree-d filter q times in a
/// row, so the effective polynomial is `T_d(L(t))^q`. Degree 0 is permitted
/// as the identity filter: applying it just re-orthonormalizes the basis.
#[derive(Debug, Clone, Copy)]
pub struct FilterSpec {
    /// Lower edge of the suppression interval.
    pub a: f64,
    /// Upper edge of the suppression interval.
    pub b: f64,
    /// Polynomial degree d.
    pub degree: usize,
    /// Number of repeated applications q.
    pub repeats: usize,
}

impl FilterSpec {
    pub fn new(a: f64, b: f64, degree: usize, repeats: usize) -> Result<Self> {
        let spec = FilterSpec {
            a,
            b,
            degree,
            repeats,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        if !self.a.is_finite() || !self.b.is_finite() {
            return Err(Error::NonFinite("filter interval".into()));
        }
        if self.a >= self.b {
            return Err(Error::DegenerateInterval {
                a: self.a,
                b: self.b,
            });
        }
        if self.degree > MAX_DEGREE {
            return Err(Error::InvalidConfig(format!(
                "filter degree {} exceeds {MAX_DEGREE}",
                self.degree
            )));
        }
        if self.repeats == 0 || self.repeats > MAX_REPEATS {
            return Err(Error::InvalidConfig(format!(
                "filter repeats {} outside 1..={MAX_REPEATS}",
                self.repeats
            )));
        }
        Ok(())
    }

    /// Interval midpoint.
    pub fn center(&self) -> f64 {
        0.5 * (self.a + self.b)
    }

    /// Interval half-width (positive).
    pub fn half_width(&self) -> f64 {
        0.5 * (self.b - self.a)
    }

    /// Evaluate one filter pass `T_d(L(t))` at a scalar.
    pub fn evaluate(&self, t: f64) -> f64 {
        cheb_scalar(self.degree, (t - self.center()) / self.half_width())
    }

    /// Evaluate the full filter `T_d(L(t))^q` at a scalar.
    pub fn evaluate_repeated(&self, t: f64) -> f64 {
        self.evaluate(t).powi(self.repeats as i32)
    }
}

/// Degree schedule for the filter across solver iterations.
#[derive(Debug, Clone, Copy)]
pub enum DegreeSchedule {
    /// The same degree every iteration.
    Constant(usize),
    /// `d_k = ceil(c * ln(k + 2))` at iteration k (natural logarithm),
    /// clamped to at least 1.
    LogK(f64),
}

impl DegreeSchedule {
    pub fn degree_at(&self, k: usize) -> usize {
        match *self {
            DegreeSchedule::Constant(d) => d,
            DegreeSchedule::LogK(c) => {
                let d = (c * ((k + 2) as f64).ln()).ceil();
                (d.max(1.0) as usize).min(MAX_DEGREE)
            }
        }
    }
}

/// Chebyshev polynomial of the first kind `T_d(t)` by the three-term
/// recurrence `T_{k+1} = 2 t T_k - T_{k-1}`.
///
/// For `|t| <= 1` this equals `cos(d * arccos(t))`; for `|t| > 1` it equals
/// `((t - sqrt(t^2 - 1))^d + (t + sqrt(t^2 - 1))^d) / 2` and grows
/// exponentially in d. Large degrees far outside the interval overflow to
/// infinity, which the blockwise application guards against by rescaling.
pub fn cheb_scalar(degree: usize, t: f64) -> f64 {
    match degree {
        0 => 1.0,
        1 => t,
        _ => {
            let mut prev = 1.0;
            let mut cur = t;
            for _ in 1..degree {
                let next = 2.0 * t * cur - prev;
                prev = cur;
                cur = next;
            }
            cur
        }
    }
}

/// Lower bound `2^(d * min(sqrt(eps), 1) - 1)` on `T_d(1 + eps)` for
/// `eps > 0`, which quantifies the amplification of eigenvalues at relative
/// distance `eps` outside the suppression interval.
pub fn growth_lower_bound(degree: usize, eps: f64) -> f64 {
    let exponent = degree as f64 * eps.sqrt().min(1.0) - 1.0;
    exponent.exp2()
}

/// Largest amplification spread across the kept band that one filter
/// application may produce before orthonormalization starts rounding away
/// the weakly amplified directions. Each basis column carries components of
/// every eigendirection at relative unit round-off (about 1e-16), so once
/// the most amplified direction outgrows the least amplified kept one by
/// more than this ratio, the contamination outweighs the signal and the
/// subspace silently loses those directions.
pub const STABLE_RATIO_BUDGET: f64 = 1e8;

/// Cap a requested filter degree so that `repeats` applications keep the
/// amplification ratio between `lambda_top` and `lambda_keep` (the extreme
/// eigenvalues the subspace must retain) inside [`STABLE_RATIO_BUDGET`].
///
/// The growth of `T_d` at mapped coordinate `l` is `exp(d * arccosh(|l|))`,
/// so the ratio constraint is linear in the degree. Eigenvalues inside the
/// suppression interval contribute no spread. The result is clamped to
/// `1..=requested`; requests of degree 0 or 1 pass through untouched.
pub fn stable_degree(
    a: f64,
    b: f64,
    lambda_top: f64,
    lambda_keep: f64,
    repeats: usize,
    requested: usize,
) -> usize {
    if requested <= 1 {
        return requested;
    }
    let half = 0.5 * (b - a);
    if !(half > 0.0) {
        return requested;
    }
    let center = 0.5 * (a + b);
    let mapped = |lam: f64| ((lam - center) / half).abs().max(1.0);
    let spread = mapped(lambda_top).acosh() - mapped(lambda_keep).acosh();
    if !(spread > 0.0) || !spread.is_finite() {
        return requested;
    }
    let cap = (STABLE_RATIO_BUDGET.ln() / (repeats.max(1) as f64 * spread)).floor();
    if cap < 1.0 {
        1
    } else {
        (cap as usize).min(requested)
    }
}

/// Apply the filter `T_d(L(A))^q` to a basis block by the blockwise
/// three-term recurrence.
///
/// Whenever the largest entry magnitude of an intermediate block exceeds
/// 1e100 the whole recurrence state is rescaled; the output therefore spans
/// the intended subspace but carries no meaningful absolute scale, which is
/// irrelevant because callers re-orthonormalize.
pub fn apply_filter(
    op: &SymmetricOperator,
    block: &ArrayView2<f64>,
    spec: &FilterSpec,
) -> Result<Array2<f64>> {
    spec.validate()?;
    if block.nrows() != op.dim() {
        return Err(Error::DimensionMismatch(format!(
            "block has {} rows for an operator of dimension {}",
            block.nrows(),
            op.dim()
        )));
    }
    if !block.iter().all(|v| v.is_finite()) {
        return Err(Error::NonFinite("filter input block".into()));
    }

    let c = spec.center();
    let h = spec.half_width();
    let mut cur = block.to_owned();

    // The mapped operator application L(A) V = (A V - c V) / h.
    let mapped = |v: &Array2<f64>| -> Array2<f64> {
        let mut out = op.apply_block(&v.view());
        out -= &(v * c);
        out /= h;
        out
    };

    for _ in 0..spec.repeats {
        if spec.degree == 0 {
            continue;
        }
        let mut prev = cur.clone();
        let mut t1 = mapped(&prev);
        if spec.degree == 1 {
            cur = t1;
        } else {
            for _ in 1..spec.degree {
                let mut next = mapped(&t1);
                next.mapv_inplace(|v| 2.0 * v);
                next -= &prev;
                prev = t1;
                t1 = next;
                rescale_if_needed(&mut t1, &mut prev);
            }
            cur = t1;
        }
        let mut dummy = Array2::zeros((0, 0));
        rescale_if_needed(&mut cur, &mut dummy);
    }

    if !cur.iter().all(|v| v.is_finite()) {
        return Err(Error::NonFinite("filter output block".into()));
    }
    Ok(cur)
}

/// Rescale the recurrence state when entries grow past the overflow guard.
fn rescale_if_needed(cur: &mut Array2<f64>, prev: &mut Array2<f64>) {
    let max = cur.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    if max > RESCALE_THRESHOLD {
        let inv = 1.0 / max;
        cur.mapv_inplace(|v| v * inv);
        if prev.len() > 0 {
            prev.mapv_inplace(|v| v * inv);
        }
    }
}
