//! SDP testbed instances: the max-cut relaxation (diagonal constraints)
//! and dense random constraints with a planted optimal solution.

use std::sync::Arc;

use ndarray::{Array1, Array2, ArrayView1, ArrayView2, Axis};
use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::linalg::{factor::solve_spd, orthonormalize};
use crate::pfam::SdpProblem;
use crate::subspace::LowRankFactors;
use crate::{Error, Result};

fn check_symmetric(name: &str, w: &ArrayView2<f64>) -> Result<()> {
    if w.nrows() != w.ncols() {
        return Err(Error::DimensionMismatch(format!(
            "{name} must be square, got {} x {}",
            w.nrows(),
            w.ncols()
        )));
    }
    if w.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite(format!("{name} contains a non-finite entry")));
    }
    for i in 0..w.nrows() {
        for j in (i + 1)..w.ncols() {
            let diff = (w[[i, j]] - w[[j, i]]).abs();
            if diff > 1e-10 * (1.0 + w[[i, j]].abs()) {
                return Err(Error::NotSymmetric(name.into()));
            }
        }
    }
    Ok(())
}

/// SDP whose constraints read off the diagonal: `A(X) = diag(X)`, so
/// `A* = Diag` and `A A* = I`.
#[derive(Debug, Clone)]
pub struct DiagConstraintSdp {
    c: Array2<f64>,
    b: Array1<f64>,
    t: f64,
}

impl DiagConstraintSdp {
    pub fn new(c: Array2<f64>, b: Array1<f64>, t: f64) -> Result<Self> {
        check_symmetric("cost matrix", &c.view())?;
        if b.len() != c.nrows() {
            return Err(Error::DimensionMismatch(format!(
                "right-hand side has length {}, matrix dimension is {}",
                b.len(),
                c.nrows()
            )));
        }
        if !(t > 0.0) {
            return Err(Error::InvalidConfig(format!("t = {t} must be positive")));
        }
        Ok(DiagConstraintSdp { c, b, t })
    }
}

impl SdpProblem for DiagConstraintSdp {
    fn n(&self) -> usize {
        self.c.nrows()
    }

    fn m(&self) -> usize {
        self.c.nrows()
    }

    fn cost(&self) -> &Array2<f64> {
        &self.c
    }

    fn apply_a(&self, x: &ArrayView2<f64>) -> Array1<f64> {
        Array1::from_iter((0..self.n()).map(|i| x[[i, i]]))
    }

    fn apply_a_factors(&self, factors: &LowRankFactors) -> Array1<f64> {
        let mut out = Array1::zeros(self.n());
        for (k, &wk) in factors.weights.iter().enumerate() {
            let col = factors.vectors.column(k);
            for i in 0..self.n() {
                out[i] += wk * col[i] * col[i];
            }
        }
        out
    }

    fn apply_a_adjoint(&self, y: &ArrayView1<f64>) -> Array2<f64> {
        Array2::from_diag(y)
    }

    fn solve_gram(&self, v: &ArrayView1<f64>) -> Result<Array1<f64>> {
        Ok(v.to_owned())
    }

    fn rhs(&self) -> &Array1<f64> {
        &self.b
    }

    fn t(&self) -> f64 {
        self.t
    }
}

/// Max-cut SDP relaxation for a symmetric weight matrix:
/// `C = -(Diag(W 1) - W)/4`, unit diagonal constraints. The relaxation's
/// cut bound is `-pobj`. The splitting parameter defaults to `1/sqrt(n)`.
pub fn maxcut_sdp(w: &ArrayView2<f64>, t: Option<f64>) -> Result<DiagConstraintSdp> {
    check_symmetric("weight matrix", w)?;
    let n = w.nrows();
    if n == 0 {
        return Err(Error::DimensionMismatch("weight matrix is empty".into()));
    }
    let row_sums = w.sum_axis(Axis(1));
    let mut c = w.to_owned();
    for i in 0..n {
        c[[i, i]] -= row_sums[i];
    }
    c.mapv_inplace(|v| v / 4.0);
    let t = t.unwrap_or(1.0 / (n as f64).sqrt());
    DiagConstraintSdp::new(c, Array1::ones(n), t)
}

/// Weight matrix of the unweighted cycle on `n` nodes.
pub fn cycle_weights(n: usize) -> Array2<f64> {
    let mut w = Array2::zeros((n, n));
    for i in 0..n {
        let j = (i + 1) % n;
        if i != j {
            w[[i, j]] = 1.0;
            w[[j, i]] = 1.0;
        }
    }
    w
}

/// SDP with dense symmetric constraint matrices and a cached constraint
/// Gram matrix.
#[derive(Debug, Clone)]
pub struct DenseConstraintSdp {
    c: Array2<f64>,
    constraints: Arc<Vec<Array2<f64>>>,
    gram: Array2<f64>,
    b: Array1<f64>,
    t: f64,
}

impl DenseConstraintSdp {
    pub fn new(
        c: Array2<f64>,
        constraints: Vec<Array2<f64>>,
        b: Array1<f64>,
        t: f64,
    ) -> Result<Self> {
        check_symmetric("cost matrix", &c.view())?;
        let n = c.nrows();
        let m = constraints.len();
        if m == 0 {
            return Err(Error::InvalidConfig("no constraint matrices".into()));
        }
        if b.len() != m {
            return Err(Error::DimensionMismatch(format!(
                "right-hand side has length {}, but there are {m} constraints",
                b.len()
            )));
        }
        for (i, a) in constraints.iter().enumerate() {
            check_symmetric(&format!("constraint matrix {i}"), &a.view())?;
            if a.nrows() != n {
                return Err(Error::DimensionMismatch(format!(
                    "constraint matrix {i} is {} x {}, cost is {n} x {n}",
                    a.nrows(),
                    a.ncols()
                )));
            }
        }
        if !(t > 0.0) {
            return Err(Error::InvalidConfig(format!("t = {t} must be positive")));
        }
        let mut gram = Array2::zeros((m, m));
        for i in 0..m {
            for j in i..m {
                let inner = constraints[i]
                    .iter()
                    .zip(constraints[j].iter())
                    .map(|(x, y)| x * y)
                    .sum::<f64>();
                gram[[i, j]] = inner;
                gram[[j, i]] = inner;
            }
        }
        Ok(DenseConstraintSdp {
            c,
            constraints: Arc::new(constraints),
            gram,
            b,
            t,
        })
    }
}

impl SdpProblem for DenseConstraintSdp {
    fn n(&self) -> usize {
        self.c.nrows()
    }

    fn m(&self) -> usize {
        self.constraints.len()
    }

    fn cost(&self) -> &Array2<f64> {
        &self.c
    }

    fn apply_a(&self, x: &ArrayView2<f64>) -> Array1<f64> {
        Array1::from_iter(self.constraints.iter().map(|a| {
            a.iter().zip(x.iter()).map(|(u, v)| u * v).sum::<f64>()
        }))
    }

    fn apply_a_factors(&self, factors: &LowRankFactors) -> Array1<f64> {
        // <A_i, V diag(w) V'> = sum_k w_k v_k' A_i v_k.
        let mut out = Array1::zeros(self.m());
        for (i, a) in self.constraints.iter().enumerate() {
            let mut acc = 0.0;
            for (k, &wk) in factors.weights.iter().enumerate() {
                let col = factors.vectors.column(k);
                let av = a.dot(&col);
                acc += wk * col.dot(&av);
            }
            out[i] = acc;
        }
        out
    }

    fn apply_a_adjoint(&self, y: &ArrayView1<f64>) -> Array2<f64> {
        let n = self.n();
        let mut out = Array2::zeros((n, n));
        for (a, &yi) in self.constraints.iter().zip(y.iter()) {
            out.scaled_add(yi, &a.view());
        }
        out
    }

    fn solve_gram(&self, v: &ArrayView1<f64>) -> Result<Array1<f64>> {
        let rhs = v
            .to_owned()
            .into_shape_with_order((v.len(), 1))
            .expect("vector reshapes to a column");
        let sol = solve_spd(&self.gram.view(), &rhs.view())?;
        Ok(sol.column(0).to_owned())
    }

    fn rhs(&self) -> &Array1<f64> {
        &self.b
    }

    fn t(&self) -> f64 {
        self.t
    }
}

/// Known optimal point of a planted instance. `z` is the corresponding
/// fixed point `X - t S` of the splitting operator.
#[derive(Debug, Clone)]
pub struct PlantedSdp {
    pub x: Array2<f64>,
    pub s: Array2<f64>,
    pub y: Array1<f64>,
    pub z: Array2<f64>,
}

/// Random SDP with a planted rank-`r` optimal solution. The primal optimum
/// has eigenvalues `r, r-1, ..., 1` on a random subspace; the dual slack
/// lives on the orthogonal complement with eigenvalues in `[1, 2]`, so
/// strict complementarity holds and the cost `C = A*(y) + S` makes the
/// KKT system exact by construction.
pub fn planted_low_rank_sdp(
    n: usize,
    m: usize,
    r: usize,
    seed: u64,
) -> Result<(DenseConstraintSdp, PlantedSdp)> {
    if r == 0 || r >= n {
        return Err(Error::InvalidConfig(format!(
            "planted rank {r} must lie in 1..{n}"
        )));
    }
    if m == 0 {
        return Err(Error::InvalidConfig("need at least one constraint".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let raw = Array2::from_shape_fn((n, n), |_| rng.sample::<f64, _>(StandardNormal));
    let (q, replaced) = orthonormalize(&raw.view(), &mut rng)?;
    debug_assert_eq!(replaced, 0, "Gaussian block should be full rank");

    // Mirror the upper triangle so the accumulated sums are bitwise
    // symmetric (floating-point products are not associative across the
    // two index orders).
    let add_scaled_outer = |acc: &mut Array2<f64>, k: usize, w: f64| {
        let col = q.column(k);
        for i in 0..n {
            for j in i..n {
                let v = w * col[i] * col[j];
                acc[[i, j]] += v;
                if i != j {
                    acc[[j, i]] += v;
                }
            }
        }
    };
    let mut x = Array2::zeros((n, n));
    for k in 0..r {
        add_scaled_outer(&mut x, k, (r - k) as f64);
    }
    let mut s = Array2::zeros((n, n));
    for k in r..n {
        let w = rng.random_range(1.0..2.0);
        add_scaled_outer(&mut s, k, w);
    }

    let y = Array1::from_shape_fn(m, |_| rng.sample::<f64, _>(StandardNormal));
    let constraints: Vec<Array2<f64>> = (0..m)
        .map(|_| {
            let raw = Array2::from_shape_fn((n, n), |_| rng.sample::<f64, _>(StandardNormal));
            (&raw + &raw.t()) * 0.5
        })
        .collect();

    let mut c = s.clone();
    for (a, &yi) in constraints.iter().zip(y.iter()) {
        c.scaled_add(yi, &a.view());
    }
    let t = 1.0 / (n as f64).sqrt();
    let prob = DenseConstraintSdp::new(c, constraints, Array1::zeros(m), t)?;
    // b = A(X*) comes from the problem's own constraint map.
    let b = prob.apply_a(&x.view());
    let prob = DenseConstraintSdp { b, ..prob };

    let z = &x - &(&s * t);
    Ok((prob, PlantedSdp { x, s, y, z }))
}
