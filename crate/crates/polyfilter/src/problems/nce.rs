//! Nearest-correlation estimation in dual form.
//!
//! Given a symmetric `G`, the correlation fit `min ||G - X||_F / 2` over
//! correlation matrices has the smooth unconstrained dual
//! `min_x (1/2) sum_i max(lambda_i(G + Diag(x)), 0)^2 - 1^T x`, whose
//! gradient is `diag(pos_part(G + Diag(x))) - 1`. Only the positive
//! eigenpairs of `B(x) = G + Diag(x)` enter, which is exactly the shape the
//! filtered solver exploits.

use std::sync::Arc;

use ndarray::{Array1, Array2, ArrayView1};
use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::linalg::SymmetricOperator;
use crate::pfpg::SpectralProblem;
use crate::subspace::{IntervalMode, LowRankFactors};
use crate::{Error, Result};

/// Symmetric input matrix for the correlation fit.
#[derive(Debug, Clone)]
pub struct NceInstance {
    g: Array2<f64>,
}

impl NceInstance {
    pub fn new(g: Array2<f64>) -> Result<Self> {
        if g.nrows() != g.ncols() {
            return Err(Error::DimensionMismatch(format!(
                "input must be square, got {}x{}",
                g.nrows(),
                g.ncols()
            )));
        }
        if g.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("correlation input".into()));
        }
        let n = g.nrows();
        for i in 0..n {
            for j in (i + 1)..n {
                if (g[[i, j]] - g[[j, i]]).abs() > 1e-10 * (1.0 + g[[i, j]].abs()) {
                    return Err(Error::NotSymmetric(format!(
                        "entry ({i},{j}) = {} vs ({j},{i}) = {}",
                        g[[i, j]],
                        g[[j, i]]
                    )));
                }
            }
        }
        Ok(NceInstance { g })
    }

    pub fn n(&self) -> usize {
        self.g.nrows()
    }

    pub fn matrix(&self) -> &Array2<f64> {
        &self.g
    }
}

/// The dual problem object consumed by the solvers.
#[derive(Debug, Clone)]
pub struct NceProblem {
    g: Arc<Array2<f64>>,
    n: usize,
}

/// Wrap an instance as the dual spectral problem.
pub fn nce_problem(inst: NceInstance) -> NceProblem {
    let n = inst.n();
    NceProblem {
        g: Arc::new(inst.g),
        n,
    }
}

impl SpectralProblem for NceProblem {
    fn dim_x(&self) -> usize {
        self.n
    }

    fn matrix_dim(&self) -> usize {
        self.n
    }

    fn operator_at(&self, x: &ArrayView1<f64>) -> SymmetricOperator {
        SymmetricOperator::diag_shift(self.g.clone(), x.to_owned())
    }

    fn adjoint_map(&self, factors: &LowRankFactors) -> Array1<f64> {
        // diag(sum_k w_k v_k v_k^T).
        let mut out = Array1::zeros(self.n);
        for (k, &w) in factors.weights.iter().enumerate() {
            let col = factors.vectors.column(k);
            for i in 0..self.n {
                out[i] += w * col[i] * col[i];
            }
        }
        out
    }

    fn phi_prime(&self, lambda: f64) -> f64 {
        lambda.max(0.0)
    }

    fn gradient_offset(&self) -> Array1<f64> {
        Array1::from_elem(self.n, -1.0)
    }

    fn prox_r(&self, v: Array1<f64>, _t: f64) -> Array1<f64> {
        v
    }

    fn objective(&self, x: &ArrayView1<f64>, eigs: &Array1<f64>) -> f64 {
        let spectral: f64 = eigs.iter().map(|&l| l.max(0.0).powi(2)).sum::<f64>() * 0.5;
        spectral - x.sum()
    }

    fn initial_point(&self) -> Array1<f64> {
        Array1::from_iter((0..self.n).map(|i| 1.0 - self.g[[i, i]]))
    }

    fn lipschitz(&self) -> Option<f64> {
        // grad F = diag(pos_part(B(x))) - 1: diag extraction composed with
        // the PSD-cone projection, both 1-Lipschitz.
        Some(1.0)
    }

    fn interval_mode(&self, eta: f64) -> IntervalMode {
        IntervalMode::AllPositive { eta }
    }
}

/// Synthetic instance families.
///
/// Kind 1 perturbs a random correlation matrix by a symmetric uniform
/// [-1, 1] matrix. The correlation matrix comes from a Gaussian Gram matrix
/// rescaled to unit diagonal (`B` Gaussian, `S = B B^T`,
/// `C = D S D` with `D = diag(S)^{-1/2}`). Kind 2 draws off-diagonals
/// uniformly from [-1, 1] with unit diagonal; kind 3 from [0, 2].
pub fn gen_example(kind: u8, n: usize, seed: u64) -> Result<NceInstance> {
    if n < 2 {
        return Err(Error::InvalidConfig(format!("instance size n = {n} too small")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let g = match kind {
        1 => {
            let b = Array2::from_shape_fn((n, n), |_| rng.sample::<f64, _>(StandardNormal));
            let s = b.dot(&b.t());
            let d: Array1<f64> = (0..n).map(|i| 1.0 / s[[i, i]].sqrt()).collect();
            let mut g = Array2::zeros((n, n));
            for i in 0..n {
                for j in 0..n {
                    g[[i, j]] = d[i] * s[[i, j]] * d[j];
                }
            }
            for i in 0..n {
                for j in (i + 1)..n {
                    let r = rng.random_range(-1.0..1.0);
                    g[[i, j]] += r;
                    g[[j, i]] += r;
                }
                g[[i, i]] += rng.random_range(-1.0..1.0);
            }
            g
        }
        2 | 3 => {
            let range = if kind == 2 { -1.0..1.0 } else { 0.0..2.0 };
            let mut g = Array2::zeros((n, n));
            for i in 0..n {
                g[[i, i]] = 1.0;
                for j in (i + 1)..n {
                    let r = rng.random_range(range.clone());
                    g[[i, j]] = r;
                    g[[j, i]] = r;
                }
            }
            g
        }
        other => {
            return Err(Error::InvalidConfig(format!(
                "unknown instance kind {other}, expected 1, 2, or 3"
            )))
        }
    };
    NceInstance::new(g)
}
