//! Minimal CSR sparse matrix used for sampled-entry data and SDP constraint
//! matrices. Only the operations the solvers need are provided: block
//! application, transpose application, and dense materialization for the
//! reference oracles.

use ndarray::{Array2, ArrayView2};

use crate::{Error, Result};

/// Compressed sparse row matrix with `f64` entries.
#[derive(Debug, Clone)]
pub struct SparseMatrix {
    nrows: usize,
    ncols: usize,
    row_ptr: Vec<usize>,
    col_idx: Vec<usize>,
    values: Vec<f64>,
}

impl SparseMatrix {
    /// Build from (row, col, value) triplets. Out-of-bounds indices are an
    /// error; duplicate positions are summed.
    pub fn from_triplets(
        nrows: usize,
        ncols: usize,
        triplets: &[(usize, usize, f64)],
    ) -> Result<Self> {
        let mut entries: Vec<(usize, usize, f64)> = Vec::with_capacity(triplets.len());
        for &(i, j, v) in triplets {
            if i >= nrows || j >= ncols {
                return Err(Error::DimensionMismatch(format!(
                    "triplet ({i}, {j}) outside {nrows} x {ncols}"
                )));
            }
            entries.push((i, j, v));
        }
        entries.sort_unstable_by(|a, b| (a.0, a.1).cmp(&(b.0, b.1)));

        let mut col_idx = Vec::with_capacity(entries.len());
        let mut values: Vec<f64> = Vec::with_capacity(entries.len());
        let mut counts = vec![0usize; nrows];
        let mut last = None;
        for (i, j, v) in entries {
            if last == Some((i, j)) {
                *values.last_mut().unwrap() += v;
            } else {
                col_idx.push(j);
                values.push(v);
                counts[i] += 1;
                last = Some((i, j));
            }
        }
        let mut row_ptr = vec![0usize; nrows + 1];
        for i in 0..nrows {
            row_ptr[i + 1] = row_ptr[i] + counts[i];
        }
        Ok(SparseMatrix {
            nrows,
            ncols,
            row_ptr,
            col_idx,
            values,
        })
    }

    /// Build from row-major sorted, strictly unique coordinate pairs and a
    /// matching value slice. The CSR storage order then equals the input
    /// order, so [`SparseMatrix::set_values`] can overwrite entries in place.
    pub fn from_sorted_pairs(
        nrows: usize,
        ncols: usize,
        pairs: &[(u32, u32)],
        values: &[f64],
    ) -> Result<Self> {
        if pairs.len() != values.len() {
            return Err(Error::DimensionMismatch(format!(
                "{} pairs but {} values",
                pairs.len(),
                values.len()
            )));
        }
        let mut row_ptr = vec![0usize; nrows + 1];
        let mut col_idx = Vec::with_capacity(pairs.len());
        for (k, &(i, j)) in pairs.iter().enumerate() {
            let (i, j) = (i as usize, j as usize);
            if i >= nrows || j >= ncols {
                return Err(Error::DimensionMismatch(format!(
                    "pair ({i}, {j}) outside {nrows} x {ncols}"
                )));
            }
            if k > 0 && pairs[k - 1] >= pairs[k] {
                return Err(Error::InvalidConfig(
                    "coordinate pairs must be sorted row-major and unique".into(),
                ));
            }
            col_idx.push(j);
            row_ptr[i + 1] = k + 1;
        }
        for i in 1..=nrows {
            if row_ptr[i] < row_ptr[i - 1] {
                row_ptr[i] = row_ptr[i - 1];
            }
        }
        Ok(SparseMatrix {
            nrows,
            ncols,
            row_ptr,
            col_idx,
            values: values.to_vec(),
        })
    }

    /// Overwrite the stored values. The slice must follow CSR storage order,
    /// which for [`SparseMatrix::from_sorted_pairs`] is the construction
    /// order.
    pub fn set_values(&mut self, values: &[f64]) -> Result<()> {
        if values.len() != self.values.len() {
            return Err(Error::DimensionMismatch(format!(
                "{} values for {} stored entries",
                values.len(),
                self.values.len()
            )));
        }
        self.values.copy_from_slice(values);
        Ok(())
    }

    pub fn nrows(&self) -> usize {
        self.nrows
    }

    pub fn ncols(&self) -> usize {
        self.ncols
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    /// `S * V` for a block `V` with `ncols()` rows.
    pub fn apply(&self, v: &ArrayView2<f64>) -> Array2<f64> {
        assert_eq!(v.nrows(), self.ncols, "block row count mismatch");
        let p = v.ncols();
        let mut out = Array2::zeros((self.nrows, p));
        let vs = v.as_standard_layout();
        let vslice = vs.as_slice().expect("standard layout");
        let oslice = out.as_slice_mut().expect("standard layout");
        for i in 0..self.nrows {
            let row = &mut oslice[i * p..(i + 1) * p];
            for k in self.row_ptr[i]..self.row_ptr[i + 1] {
                let j = self.col_idx[k];
                let a = self.values[k];
                let src = &vslice[j * p..(j + 1) * p];
                for (o, &x) in row.iter_mut().zip(src) {
                    *o += a * x;
                }
            }
        }
        out
    }

    /// `S^T * W` for a block `W` with `nrows()` rows.
    pub fn apply_transpose(&self, w: &ArrayView2<f64>) -> Array2<f64> {
        assert_eq!(w.nrows(), self.nrows, "block row count mismatch");
        let p = w.ncols();
        let mut out = Array2::zeros((self.ncols, p));
        let ws = w.as_standard_layout();
        let wslice = ws.as_slice().expect("standard layout");
        let oslice = out.as_slice_mut().expect("standard layout");
        for i in 0..self.nrows {
            let src = &wslice[i * p..(i + 1) * p];
            for k in self.row_ptr[i]..self.row_ptr[i + 1] {
                let j = self.col_idx[k];
                let a = self.values[k];
                let dst = &mut oslice[j * p..(j + 1) * p];
                for (o, &x) in dst.iter_mut().zip(src) {
                    *o += a * x;
                }
            }
        }
        out
    }

    pub fn to_dense(&self) -> Array2<f64> {
        let mut out = Array2::zeros((self.nrows, self.ncols));
        for i in 0..self.nrows {
            for k in self.row_ptr[i]..self.row_ptr[i + 1] {
                out[[i, self.col_idx[k]]] += self.values[k];
            }
        }
        out
    }

    /// Iterate stored entries as (row, col, value) in CSR order.
    pub fn iter(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        (0..self.nrows).flat_map(move |i| {
            (self.row_ptr[i]..self.row_ptr[i + 1])
                .map(move |k| (i, self.col_idx[k], self.values[k]))
        })
    }

    /// Frobenius norm of the stored entries.
    pub fn frobenius_norm(&self) -> f64 {
        self.values.iter().map(|v| v * v).sum::<f64>().sqrt()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    #[test]
    fn triplets_sum_duplicates() {
        let s = SparseMatrix::from_triplets(2, 2, &[(0, 0, 1.0), (0, 0, 2.0), (1, 1, 4.0)]).unwrap();
        assert_eq!(s.nnz(), 2);
        let d = s.to_dense();
        assert_eq!(d, array![[3.0, 0.0], [0.0, 4.0]]);
    }

    #[test]
    fn triplets_out_of_bounds_is_error() {
        assert!(SparseMatrix::from_triplets(2, 2, &[(2, 0, 1.0)]).is_err());
    }

    #[test]
    fn sorted_pairs_require_order() {
        let err = SparseMatrix::from_sorted_pairs(2, 2, &[(1, 0), (0, 1)], &[1.0, 2.0]);
        assert!(err.is_err());
    }

    #[test]
    fn apply_matches_dense() {
        let s = SparseMatrix::from_triplets(
            3,
            2,
            &[(0, 1, 2.0), (1, 0, -1.0), (2, 0, 0.5), (2, 1, 3.0)],
        )
        .unwrap();
        let v = array![[1.0, 0.0], [2.0, -1.0]];
        let got = s.apply(&v.view());
        let want = s.to_dense().dot(&v);
        assert!((&got - &want).iter().all(|d| d.abs() < 1e-15));

        let w = array![[1.0, 2.0], [0.0, 1.0], [1.0, -1.0]];
        let got_t = s.apply_transpose(&w.view());
        let want_t = s.to_dense().t().dot(&w);
        assert!((&got_t - &want_t).iter().all(|d| d.abs() < 1e-15));
    }

    #[test]
    fn set_values_preserves_pattern_order() {
        let pairs = [(0u32, 1u32), (1, 0), (1, 1)];
        let mut s = SparseMatrix::from_sorted_pairs(2, 2, &pairs, &[1.0, 2.0, 3.0]).unwrap();
        s.set_values(&[10.0, 20.0, 30.0]).unwrap();
        assert_eq!(s.to_dense(), array![[0.0, 10.0], [20.0, 30.0]]);
        assert!(s.set_values(&[1.0]).is_err());
    }
}
