//! Extreme-eigenvalue estimation by a short Lanczos iteration.
//!
//! The filter intervals only need the smallest (and occasionally largest)
//! eigenvalue of the iteration matrix to a few digits, so a plain Lanczos
//! recurrence with full reorthogonalization and a residual-based stopping
//! rule is enough. A breakdown means the Krylov space saturated; from a
//! random start that space almost surely contains every distinct eigenvalue,
//! so the estimates are then exact.

use ndarray::{Array1, Array2};
use rand::{Rng, RngExt};
use rand_distr::StandardNormal;

use super::{factor, SymmetricOperator};
use crate::{Error, Result};

/// Result of [`estimate_extreme_eigs`].
#[derive(Debug, Clone, Copy)]
pub struct ExtremeEigs {
    pub lambda_max: f64,
    pub lambda_min: f64,
    /// False when the residual bound was still above tolerance at
    /// `max_steps`; the estimates are then best-effort.
    pub converged: bool,
    /// Number of Lanczos steps taken.
    pub steps: usize,
}

/// Estimate the largest and smallest eigenvalue of a symmetric operator.
///
/// Runs at most `max_steps` Lanczos steps (capped by the dimension) from a
/// random start drawn from `rng` and stops once the Ritz residual bounds for
/// both extreme values drop below `tol` times the current spectral spread.
pub fn estimate_extreme_eigs(
    op: &SymmetricOperator,
    tol: f64,
    max_steps: usize,
    rng: &mut impl Rng,
) -> Result<ExtremeEigs> {
    let n = op.dim();
    if n == 0 {
        return Err(Error::DimensionMismatch(
            "cannot estimate eigenvalues of an empty operator".into(),
        ));
    }
    if !(tol > 0.0) || max_steps == 0 {
        return Err(Error::InvalidConfig(
            "extreme eigenvalue estimation needs tol > 0 and max_steps > 0".into(),
        ));
    }

    let steps = max_steps.min(n);
    // Lanczos basis, kept for full reorthogonalization.
    let mut basis: Vec<Array1<f64>> = Vec::with_capacity(steps);
    let mut alphas: Vec<f64> = Vec::with_capacity(steps);
    let mut betas: Vec<f64> = Vec::with_capacity(steps);

    let mut q = random_unit(n, rng);
    let mut scale = 0.0f64;

    for step in 0..steps {
        let mut w = op.apply_vec(&q.view());
        if !w.iter().all(|v| v.is_finite()) {
            return Err(Error::NonFinite("operator application in Lanczos".into()));
        }
        let alpha = q.dot(&w);
        w -= &(&q * alpha);
        basis.push(q.clone());
        // Full reorthogonalization (two passes) also removes the beta *
        // previous-vector term of the plain recurrence.
        for _ in 0..2 {
            for b in &basis {
                let c = b.dot(&w);
                w -= &(b * c);
            }
        }
        alphas.push(alpha);
        scale = scale.max(alpha.abs());

        let beta = w.dot(&w).sqrt();
        scale = scale.max(beta);
        let breakdown = beta <= 1e-13 * scale.max(1e-300);
        let full = basis.len() == n;
        let last = step + 1 == steps;
        let beta_tail = if breakdown { 0.0 } else { beta };

        if step >= 1 || breakdown || full || last {
            let (theta_max, theta_min, res_max, res_min) =
                extreme_ritz(&alphas, &betas, beta_tail)?;
            let spread = (theta_max - theta_min).abs().max(scale).max(1e-300);
            let done = res_max <= tol * spread && res_min <= tol * spread;
            if done || full || breakdown || last {
                return Ok(ExtremeEigs {
                    lambda_max: theta_max,
                    lambda_min: theta_min,
                    converged: done || full || breakdown,
                    steps: step + 1,
                });
            }
        }

        betas.push(beta);
        q = &w / beta;
    }

    unreachable!("the final Lanczos step always returns");
}

/// Eigenvalues of the Lanczos tridiagonal plus residual bounds
/// `beta_tail * |last component|` for the two extreme Ritz pairs.
fn extreme_ritz(
    alphas: &[f64],
    betas: &[f64],
    beta_tail: f64,
) -> Result<(f64, f64, f64, f64)> {
    let k = alphas.len();
    let mut t = Array2::zeros((k, k));
    for i in 0..k {
        t[[i, i]] = alphas[i];
        if i + 1 < k {
            t[[i, i + 1]] = betas[i];
            t[[i + 1, i]] = betas[i];
        }
    }
    let (values, vectors) = factor::sym_eig_desc(&t.view())?;
    let theta_max = values[0];
    let theta_min = values[k - 1];
    let res_max = (beta_tail * vectors[[k - 1, 0]]).abs();
    let res_min = (beta_tail * vectors[[k - 1, k - 1]]).abs();
    Ok((theta_max, theta_min, res_max, res_min))
}

fn random_unit(n: usize, rng: &mut impl Rng) -> Array1<f64> {
    loop {
        let v = Array1::from_shape_fn(n, |_| rng.sample::<f64, _>(StandardNormal));
        let nrm = v.dot(&v).sqrt();
        if nrm > 1e-12 {
            return v / nrm;
        }
    }
}
