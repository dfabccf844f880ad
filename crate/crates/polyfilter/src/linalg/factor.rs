//! Bridge between ndarray containers and the faer dense factorizations.
//!
//! Everything numerical in this crate lives in `ndarray` types; faer is used
//! only as the backend for dense eigendecompositions, SVDs, QR and small
//! linear solves. The copies across the boundary are O(n^2) against O(n^3)
//! factorization work and do not show up in profiles.

use faer::linalg::solvers::Solve;
use faer::Mat;
use ndarray::{Array1, Array2, ArrayView2};

use crate::{Error, Result};

pub(crate) fn to_faer(a: &ArrayView2<f64>) -> Mat<f64> {
    Mat::from_fn(a.nrows(), a.ncols(), |i, j| a[[i, j]])
}

pub(crate) fn from_faer(m: faer::MatRef<'_, f64>) -> Array2<f64> {
    Array2::from_shape_fn((m.nrows(), m.ncols()), |(i, j)| m[(i, j)])
}

/// Eigendecomposition of a symmetric matrix, eigenvalues sorted descending.
///
/// The caller is responsible for symmetrizing; only the lower triangle is
/// read.
pub(crate) fn sym_eig_desc(a: &ArrayView2<f64>) -> Result<(Array1<f64>, Array2<f64>)> {
    let n = a.nrows();
    if n == 0 {
        return Ok((Array1::zeros(0), Array2::zeros((0, 0))));
    }
    let evd = to_faer(a)
        .self_adjoint_eigen(faer::Side::Lower)
        .map_err(|e| Error::Factorization(format!("symmetric eigendecomposition: {e:?}")))?;
    // faer sorts ascending; flip to descending.
    let s = evd.S();
    let u = evd.U();
    let values = Array1::from_shape_fn(n, |i| s[n - 1 - i]);
    let vectors = Array2::from_shape_fn((n, n), |(i, j)| u[(i, n - 1 - j)]);
    Ok((values, vectors))
}

/// Thin QR of an n x p matrix (n >= p) with the sign convention that the
/// diagonal of R is nonnegative. Returns (Q, diag(R)).
pub(crate) fn thin_qr_signed(a: &ArrayView2<f64>) -> (Array2<f64>, Array1<f64>) {
    let (n, p) = (a.nrows(), a.ncols());
    if p == 0 {
        return (Array2::zeros((n, 0)), Array1::zeros(0));
    }
    let qr = to_faer(a).qr();
    let q = qr.compute_thin_Q();
    let r = qr.thin_R();
    let mut qa = from_faer(q.as_ref());
    let mut rdiag = Array1::from_shape_fn(p, |i| r[(i, i)]);
    for j in 0..p {
        if rdiag[j] < 0.0 {
            rdiag[j] = -rdiag[j];
            qa.column_mut(j).mapv_inplace(|v| -v);
        }
    }
    (qa, rdiag)
}

/// Thin SVD `A = U diag(S) V^T` with singular values descending. Columns of
/// `V` are the right singular vectors.
pub(crate) fn svd_thin(a: &ArrayView2<f64>) -> Result<(Array2<f64>, Array1<f64>, Array2<f64>)> {
    let k = a.nrows().min(a.ncols());
    if k == 0 {
        return Ok((
            Array2::zeros((a.nrows(), 0)),
            Array1::zeros(0),
            Array2::zeros((a.ncols(), 0)),
        ));
    }
    let svd = to_faer(a)
        .thin_svd()
        .map_err(|e| Error::Factorization(format!("singular value decomposition: {e:?}")))?;
    let s = svd.S();
    Ok((
        from_faer(svd.U()),
        Array1::from_shape_fn(k, |i| s[i]),
        from_faer(svd.V()),
    ))
}

/// Singular values only, descending.
pub(crate) fn singular_values(a: &ArrayView2<f64>) -> Result<Array1<f64>> {
    let k = a.nrows().min(a.ncols());
    if k == 0 {
        return Ok(Array1::zeros(0));
    }
    let svd = to_faer(a)
        .singular_values()
        .map_err(|e| Error::Factorization(format!("singular values: {e:?}")))?;
    Ok(Array1::from_vec(svd))
}

/// Solve `A X = B` for symmetric positive definite `A` via Cholesky.
pub(crate) fn solve_spd(a: &ArrayView2<f64>, b: &ArrayView2<f64>) -> Result<Array2<f64>> {
    let llt = to_faer(a)
        .llt(faer::Side::Lower)
        .map_err(|e| Error::Factorization(format!("Cholesky solve: {e:?}")))?;
    Ok(from_faer(llt.solve(to_faer(b)).as_ref()))
}
