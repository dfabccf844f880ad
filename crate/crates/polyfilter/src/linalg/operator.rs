//! Matrix-free symmetric operators.
//!
//! Every solver in this crate touches its matrix only through block products
//! `A * V`, so the operator type enumerates the structured forms that arise
//! (dense, diagonal shift, Gram, sparse-plus-low-rank) instead of forcing a
//! dense materialization. All variants are cheaply cloneable and shareable
//! across threads.

use std::sync::Arc;

use ndarray::{Array1, Array2, ArrayView1, ArrayView2, Axis};

use super::sparse::SparseMatrix;

/// Rectangular linear map with explicit transpose application. Used to form
/// Gram operators `A^T A` without materializing them.
pub trait RectMap: Send + Sync {
    fn nrows(&self) -> usize;
    fn ncols(&self) -> usize;
    /// `A * V` for a block `V` with `ncols()` rows.
    fn apply(&self, v: &ArrayView2<f64>) -> Array2<f64>;
    /// `A^T * W` for a block `W` with `nrows()` rows.
    fn apply_transpose(&self, w: &ArrayView2<f64>) -> Array2<f64>;
}

impl RectMap for Array2<f64> {
    fn nrows(&self) -> usize {
        self.shape()[0]
    }

    fn ncols(&self) -> usize {
        self.shape()[1]
    }

    fn apply(&self, v: &ArrayView2<f64>) -> Array2<f64> {
        self.dot(v)
    }

    fn apply_transpose(&self, w: &ArrayView2<f64>) -> Array2<f64> {
        self.t().dot(w)
    }
}

impl RectMap for SparseMatrix {
    fn nrows(&self) -> usize {
        SparseMatrix::nrows(self)
    }

    fn ncols(&self) -> usize {
        SparseMatrix::ncols(self)
    }

    fn apply(&self, v: &ArrayView2<f64>) -> Array2<f64> {
        SparseMatrix::apply(self, v)
    }

    fn apply_transpose(&self, w: &ArrayView2<f64>) -> Array2<f64> {
        SparseMatrix::apply_transpose(self, w)
    }
}

/// Symmetric operator in one of the structured forms the solvers produce.
#[derive(Clone)]
pub enum SymmetricOperator {
    /// Explicit dense symmetric matrix.
    Dense(Arc<Array2<f64>>),
    /// `G + Diag(x)` without materializing the sum.
    DiagShift {
        base: Arc<Array2<f64>>,
        shift: Array1<f64>,
    },
    /// `A^T A` for a rectangular map `A`.
    Gram(Arc<dyn RectMap>),
    /// `S + W Diag(d) W^T` with sparse symmetric `S` and low-rank factors.
    ExplicitSum {
        sparse: Arc<SparseMatrix>,
        vectors: Arc<Array2<f64>>,
        weights: Array1<f64>,
    },
}

impl SymmetricOperator {
    /// Wrap a dense symmetric matrix. Symmetry is the caller's contract and
    /// is probed by [`SymmetricOperator::symmetry_defect`] in tests.
    pub fn dense(a: Array2<f64>) -> Self {
        assert_eq!(a.nrows(), a.ncols(), "dense operator must be square");
        SymmetricOperator::Dense(Arc::new(a))
    }

    pub fn diag_shift(base: Arc<Array2<f64>>, shift: Array1<f64>) -> Self {
        assert_eq!(base.nrows(), base.ncols(), "base must be square");
        assert_eq!(base.nrows(), shift.len(), "shift length must match base");
        SymmetricOperator::DiagShift { base, shift }
    }

    pub fn gram(map: Arc<dyn RectMap>) -> Self {
        SymmetricOperator::Gram(map)
    }

    pub fn explicit_sum(
        sparse: Arc<SparseMatrix>,
        vectors: Arc<Array2<f64>>,
        weights: Array1<f64>,
    ) -> Self {
        assert_eq!(sparse.nrows(), sparse.ncols(), "sparse part must be square");
        assert_eq!(sparse.nrows(), vectors.nrows(), "factor rows must match");
        assert_eq!(vectors.ncols(), weights.len(), "factor count must match");
        SymmetricOperator::ExplicitSum {
            sparse,
            vectors,
            weights,
        }
    }

    /// Side length of the (square) operator.
    pub fn dim(&self) -> usize {
        match self {
            SymmetricOperator::Dense(a) => a.nrows(),
            SymmetricOperator::DiagShift { base, .. } => base.nrows(),
            SymmetricOperator::Gram(map) => map.ncols(),
            SymmetricOperator::ExplicitSum { sparse, .. } => sparse.nrows(),
        }
    }

    /// `A * V` for an n x p block. The Gram variant computes `A^T (A V)`
    /// without forming `A^T A`.
    pub fn apply_block(&self, v: &ArrayView2<f64>) -> Array2<f64> {
        assert_eq!(v.nrows(), self.dim(), "block row count mismatch");
        match self {
            SymmetricOperator::Dense(a) => a.dot(v),
            SymmetricOperator::DiagShift { base, shift } => {
                let mut out = base.dot(v);
                for (i, &s) in shift.iter().enumerate() {
                    let mut row = out.row_mut(i);
                    row += &(&v.row(i) * s);
                }
                out
            }
            SymmetricOperator::Gram(map) => {
                let av = map.apply(v);
                map.apply_transpose(&av.view())
            }
            SymmetricOperator::ExplicitSum {
                sparse,
                vectors,
                weights,
            } => {
                let mut out = sparse.apply(v);
                // W Diag(d) (W^T V)
                let wtv = vectors.t().dot(v);
                let mut scaled = wtv;
                for (mut row, &d) in scaled.axis_iter_mut(Axis(0)).zip(weights.iter()) {
                    row.mapv_inplace(|x| x * d);
                }
                out += &vectors.dot(&scaled);
                out
            }
        }
    }

    /// Convenience single-vector application.
    pub fn apply_vec(&self, v: &ArrayView1<f64>) -> Array1<f64> {
        let col = v.insert_axis(Axis(1));
        let out = self.apply_block(&col);
        out.index_axis(Axis(1), 0).to_owned()
    }

    /// Materialize as a dense matrix. Intended for reference oracles and
    /// small instances only (cost O(n^2) per column).
    pub fn to_dense(&self) -> Array2<f64> {
        match self {
            SymmetricOperator::Dense(a) => a.as_ref().clone(),
            SymmetricOperator::DiagShift { base, shift } => {
                let mut out = base.as_ref().clone();
                for (i, &s) in shift.iter().enumerate() {
                    out[[i, i]] += s;
                }
                out
            }
            SymmetricOperator::Gram(map) => {
                let eye = Array2::eye(map.ncols());
                let a = map.apply(&eye.view());
                map.apply_transpose(&a.view())
            }
            SymmetricOperator::ExplicitSum {
                sparse,
                vectors,
                weights,
            } => {
                let mut out = sparse.to_dense();
                let n = out.nrows();
                for i in 0..n {
                    for j in 0..n {
                        let mut acc = 0.0;
                        for (k, &d) in weights.iter().enumerate() {
                            acc += vectors[[i, k]] * d * vectors[[j, k]];
                        }
                        out[[i, j]] += acc;
                    }
                }
                out
            }
        }
    }

    /// Symmetry defect probe `|u^T (A v) - v^T (A u)|` for given vectors;
    /// zero (to roundoff) for symmetric operators.
    pub fn symmetry_defect(&self, u: &ArrayView1<f64>, v: &ArrayView1<f64>) -> f64 {
        let au = self.apply_vec(u);
        let av = self.apply_vec(v);
        (u.dot(&av) - v.dot(&au)).abs()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    #[test]
    fn dense_identity_reproduces_block() {
        let op = SymmetricOperator::dense(Array2::eye(3));
        let v = array![[1.0, 2.0], [3.0, 4.0], [5.0, 6.0]];
        let out = op.apply_block(&v.view());
        assert_eq!(out, v);
    }

    #[test]
    fn diag_shift_adds_elementwise() {
        // G = 0, x = (1, 2): operator is Diag(1, 2).
        let op = SymmetricOperator::diag_shift(Arc::new(Array2::zeros((2, 2))), array![1.0, 2.0]);
        let v = array![[1.0], [1.0]];
        let out = op.apply_block(&v.view());
        assert_eq!(out, array![[1.0], [2.0]]);
    }

    #[test]
    fn gram_matches_hand_computed_product() {
        // A = [[1,2],[3,4]]: A^T A = [[10,14],[14,20]].
        let a = array![[1.0, 2.0], [3.0, 4.0]];
        let op = SymmetricOperator::gram(Arc::new(a));
        let e1 = array![[1.0], [0.0]];
        let out = op.apply_block(&e1.view());
        assert_eq!(out, array![[10.0], [14.0]]);
        let dense = op.to_dense();
        assert_eq!(dense, array![[10.0, 14.0], [14.0, 20.0]]);
    }

    #[test]
    fn explicit_sum_combines_sparse_and_low_rank() {
        // I + 2 e1 e1^T applied to e1 gives 3 e1.
        let eye = SparseMatrix::from_triplets(2, 2, &[(0, 0, 1.0), (1, 1, 1.0)]).unwrap();
        let op = SymmetricOperator::explicit_sum(
            Arc::new(eye),
            Arc::new(array![[1.0], [0.0]]),
            array![2.0],
        );
        let e1 = array![[1.0], [0.0]];
        assert_eq!(op.apply_block(&e1.view()), array![[3.0], [0.0]]);
    }

    #[test]
    fn symmetry_probe_is_zero_for_symmetric_operators() {
        let op = SymmetricOperator::dense(array![[2.0, 1.0], [1.0, -1.0]]);
        let u = array![0.3, -0.7];
        let v = array![1.1, 0.2];
        assert!(op.symmetry_defect(&u.view(), &v.view()) < 1e-14);
    }
}
