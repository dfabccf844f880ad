//! Dense and structured linear algebra shared by all solvers.
//!
//! The public surface is deliberately small: a symmetric operator type with
//! block application ([`SymmetricOperator`]), Householder orthonormalization
//! with rank-deficiency repair ([`orthonormalize`]), a dense symmetric
//! eigensolver for the small projected matrices ([`small_sym_eig`]), and a
//! Krylov estimator for the extreme eigenvalues ([`estimate_extreme_eigs`]).

pub(crate) mod factor;
mod lanczos;
pub mod operator;
pub mod sparse;

pub use lanczos::{estimate_extreme_eigs, ExtremeEigs};
pub use operator::{RectMap, SymmetricOperator};
pub use sparse::SparseMatrix;

use ndarray::{Array1, Array2, ArrayView2};
use rand::{Rng, RngExt};
use rand_distr::StandardNormal;

use crate::{Error, Result};

/// Columns whose post-projection norm falls below this multiple of the input
/// Frobenius norm are treated as linearly dependent and replaced by random
/// directions during orthonormalization.
pub const COLUMN_DROP_RTOL: f64 = 1e-12;

/// Eigendecomposition with eigenvalues sorted in descending order and the
/// matching eigenvectors as columns.
#[derive(Debug, Clone)]
pub struct EigenPairs {
    pub values: Array1<f64>,
    pub vectors: Array2<f64>,
}

impl EigenPairs {
    /// Reconstruction `V diag(values) V^T`.
    pub fn reconstruct(&self) -> Array2<f64> {
        let scaled = &self.vectors * &self.values;
        scaled.dot(&self.vectors.t())
    }
}

fn all_finite(m: &ArrayView2<f64>) -> bool {
    m.iter().all(|v| v.is_finite())
}

/// Orthonormalize the columns of an n x p matrix (n >= p) by Householder QR.
///
/// Columns that turn out linearly dependent (diagonal of R below
/// [`COLUMN_DROP_RTOL`] times the Frobenius norm of the input) are replaced
/// by random Gaussian directions re-orthonormalized against the rest. The
/// second return value reports how many columns were replaced. A zero input
/// therefore yields a fully random orthonormal basis with `p` replacements.
pub fn orthonormalize(
    m: &ArrayView2<f64>,
    rng: &mut impl Rng,
) -> Result<(Array2<f64>, usize)> {
    let (n, p) = (m.nrows(), m.ncols());
    if p > n {
        return Err(Error::DimensionMismatch(format!(
            "cannot orthonormalize {p} columns in dimension {n}"
        )));
    }
    if !all_finite(m) {
        return Err(Error::NonFinite("orthonormalize input".into()));
    }
    if p == 0 {
        return Ok((Array2::zeros((n, 0)), 0));
    }

    let norm = m.iter().map(|v| v * v).sum::<f64>().sqrt();
    let (mut q, rdiag) = factor::thin_qr_signed(m);
    let threshold = COLUMN_DROP_RTOL * norm;
    let dropped: Vec<usize> = (0..p).filter(|&j| rdiag[j] <= threshold).collect();

    // Replace dependent columns by random directions, projected against all
    // currently valid columns (two passes of modified Gram-Schmidt).
    let mut valid = vec![true; p];
    for &j in &dropped {
        valid[j] = false;
    }
    for &j in &dropped {
        loop {
            let mut v = Array1::from_shape_fn(n, |_| rng.sample::<f64, _>(StandardNormal));
            for _ in 0..2 {
                for k in 0..p {
                    if !valid[k] {
                        continue;
                    }
                    let proj = q.column(k).dot(&v);
                    let col = q.column(k).to_owned();
                    v -= &(col * proj);
                }
            }
            let nrm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
            if nrm > 1e-8 {
                v /= nrm;
                q.column_mut(j).assign(&v);
                valid[j] = true;
                break;
            }
        }
    }
    Ok((q, dropped.len()))
}

/// Dense eigendecomposition of a small symmetric matrix, eigenvalues
/// descending. The input is symmetrized as `(H + H^T) / 2` before the
/// factorization, so tiny asymmetries from accumulated roundoff are
/// harmless.
pub fn small_sym_eig(h: &ArrayView2<f64>) -> Result<EigenPairs> {
    if h.nrows() != h.ncols() {
        return Err(Error::DimensionMismatch(format!(
            "eigendecomposition needs a square matrix, got {} x {}",
            h.nrows(),
            h.ncols()
        )));
    }
    if !all_finite(h) {
        return Err(Error::NonFinite("eigendecomposition input".into()));
    }
    let sym = (h.to_owned() + h.t()) * 0.5;
    let (values, vectors) = factor::sym_eig_desc(&sym.view())?;
    Ok(EigenPairs { values, vectors })
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn rng() -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(42)
    }

    fn ortho_defect(q: &Array2<f64>) -> f64 {
        let p = q.ncols();
        let gram = q.t().dot(q);
        let mut worst = 0.0f64;
        for i in 0..p {
            for j in 0..p {
                let expect = if i == j { 1.0 } else { 0.0 };
                worst = worst.max((gram[[i, j]] - expect).abs());
            }
        }
        worst
    }

    #[test]
    fn identity_stays_identity() {
        let (q, dropped) = orthonormalize(&Array2::eye(3).view(), &mut rng()).unwrap();
        assert_eq!(dropped, 0);
        assert_eq!(q, Array2::eye(3));
    }

    #[test]
    fn scaled_axis_normalizes_to_axis() {
        let m = array![[2.0], [0.0], [0.0]];
        let (q, dropped) = orthonormalize(&m.view(), &mut rng()).unwrap();
        assert_eq!(dropped, 0);
        assert!((q[[0, 0]] - 1.0).abs() < 1e-15);
        assert!(q[[1, 0]].abs() < 1e-15 && q[[2, 0]].abs() < 1e-15);
    }

    #[test]
    fn duplicate_column_is_repaired() {
        let m = array![[1.0, 1.0], [0.0, 0.0], [0.0, 0.0]];
        let (q, dropped) = orthonormalize(&m.view(), &mut rng()).unwrap();
        assert_eq!(dropped, 1);
        assert!((q[[0, 0]] - 1.0).abs() < 1e-12, "first column should stay e1");
        assert!(ortho_defect(&q) < 1e-10);
    }

    #[test]
    fn zero_matrix_yields_random_orthonormal_basis() {
        let m = Array2::zeros((5, 3));
        let (q, dropped) = orthonormalize(&m.view(), &mut rng()).unwrap();
        assert_eq!(dropped, 3);
        assert!(ortho_defect(&q) < 1e-10);
    }

    #[test]
    fn too_many_columns_is_error() {
        let m = Array2::zeros((2, 3));
        assert!(orthonormalize(&m.view(), &mut rng()).is_err());
    }

    #[test]
    fn non_finite_input_is_error() {
        let m = array![[f64::NAN], [0.0]];
        assert!(orthonormalize(&m.view(), &mut rng()).is_err());
        let h = array![[f64::INFINITY]];
        assert!(small_sym_eig(&h.view()).is_err());
    }

    #[test]
    fn small_sym_eig_diagonal() {
        let h = array![[2.0, 0.0], [0.0, 5.0]];
        let eig = small_sym_eig(&h.view()).unwrap();
        assert_eq!(eig.values.as_slice().unwrap(), &[5.0, 2.0]);
        // Permutation of the identity, up to sign.
        assert!((eig.vectors[[1, 0]].abs() - 1.0).abs() < 1e-14);
        assert!((eig.vectors[[0, 1]].abs() - 1.0).abs() < 1e-14);
    }

    #[test]
    fn small_sym_eig_zero_matrix() {
        let eig = small_sym_eig(&Array2::zeros((3, 3)).view()).unwrap();
        assert!(eig.values.iter().all(|&v| v == 0.0));
        assert!(ortho_defect(&eig.vectors) < 1e-12);
    }

    #[test]
    fn reconstruction_matches_input() {
        let mut r = rng();
        let raw = Array2::from_shape_fn((6, 6), |_| r.random_range(-1.0..1.0));
        let h = (&raw + &raw.t()) * 0.5;
        let eig = small_sym_eig(&h.view()).unwrap();
        let rec = eig.reconstruct();
        let scale = h.iter().map(|v| v * v).sum::<f64>().sqrt().max(1.0);
        for (a, b) in rec.iter().zip(h.iter()) {
            assert!((a - b).abs() < 1e-9 * scale);
        }
    }

    #[test]
    fn random_orthonormalization_defect_small() {
        let mut r = rng();
        for trial in 0..20 {
            let n = 4 + (trial % 5);
            let p = 1 + (trial % n.min(4));
            let m = Array2::from_shape_fn((n, p), |_| r.random_range(-1.0..1.0));
            let (q, _) = orthonormalize(&m.view(), &mut r).unwrap();
            assert!(ortho_defect(&q) < 1e-10);
        }
    }
}
