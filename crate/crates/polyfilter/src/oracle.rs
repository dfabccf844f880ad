//! Slow, trusted reference implementations used by tests and self-checks:
//! exact proximal-gradient and splitting steps through dense
//! decompositions, and brute-force principal angles. Restricted to small
//! sizes by assertion; these exist for correctness, not speed.

use ndarray::{Array1, Array2, ArrayView1, ArrayView2};

use crate::linalg::factor::singular_values;
use crate::pfam::{exact_drs_apply, SdpProblem};
use crate::pfpg::{exact_gradient, SpectralProblem};
use crate::{Error, Result};

/// Largest matrix dimension the oracles accept.
pub const MAX_ORACLE_DIM: usize = 500;

/// One compared quantity: reference route vs candidate route.
#[derive(Debug, Clone)]
pub struct OracleReport {
    pub name: String,
    pub reference: f64,
    pub candidate: f64,
    pub abs_err: f64,
    pub rel_err: f64,
}

impl OracleReport {
    pub fn new(name: impl Into<String>, reference: f64, candidate: f64) -> Self {
        let abs_err = (reference - candidate).abs();
        let rel_err = if reference != 0.0 {
            abs_err / reference.abs()
        } else {
            abs_err
        };
        OracleReport {
            name: name.into(),
            reference,
            candidate,
            abs_err,
            rel_err,
        }
    }

    /// Accept when either the absolute or the relative error is inside its
    /// tolerance.
    pub fn within(&self, abs_tol: f64, rel_tol: f64) -> bool {
        self.abs_err <= abs_tol || self.rel_err <= rel_tol
    }
}

/// One exact proximal-gradient step `prox_R(x - tau grad F(x), tau)` with
/// the gradient from a full dense eigendecomposition.
pub fn exact_pg_step(
    prob: &dyn SpectralProblem,
    x: &ArrayView1<f64>,
    tau: f64,
) -> Result<Array1<f64>> {
    assert!(
        prob.matrix_dim() <= MAX_ORACLE_DIM,
        "oracle restricted to dimension {MAX_ORACLE_DIM}"
    );
    let (g, _) = exact_gradient(prob, x)?;
    let mut v = x.to_owned();
    v.scaled_add(-tau, &g);
    Ok(prob.prox_r(v, tau))
}

/// One exact splitting step through a dense eigendecomposition.
pub fn exact_drs_step(prob: &dyn SdpProblem, z: &ArrayView2<f64>) -> Result<Array2<f64>> {
    assert!(
        prob.n() <= MAX_ORACLE_DIM,
        "oracle restricted to dimension {MAX_ORACLE_DIM}"
    );
    Ok(exact_drs_apply(prob, z)?.0)
}

/// Principal-angle sines by the direct definition: singular values of
/// `X'Y` are the cosines; sines are `sqrt(1 - cos^2)`, returned in
/// descending order.
pub fn brute_sin_theta(x: &ArrayView2<f64>, y: &ArrayView2<f64>) -> Result<Array1<f64>> {
    if x.nrows() != y.nrows() || x.ncols() != y.ncols() {
        return Err(Error::DimensionMismatch(format!(
            "angle between {}x{} and {}x{} bases",
            x.nrows(),
            x.ncols(),
            y.nrows(),
            y.ncols()
        )));
    }
    assert!(
        x.nrows() <= MAX_ORACLE_DIM,
        "oracle restricted to dimension {MAX_ORACLE_DIM}"
    );
    let cross = x.t().dot(y);
    let cosines = singular_values(&cross.view())?;
    let mut sines: Vec<f64> = cosines
        .iter()
        .map(|&c| {
            let c = c.clamp(0.0, 1.0);
            (1.0 - c * c).max(0.0).sqrt()
        })
        .collect();
    sines.reverse();
    Ok(Array1::from_vec(sines))
}

/// Central finite-difference gradient of the exact objective.
pub fn fd_gradient(
    prob: &dyn SpectralProblem,
    x: &ArrayView1<f64>,
    h: f64,
) -> Result<Array1<f64>> {
    assert!(
        prob.matrix_dim() <= MAX_ORACLE_DIM,
        "oracle restricted to dimension {MAX_ORACLE_DIM}"
    );
    let mut g = Array1::zeros(x.len());
    let mut probe = x.to_owned();
    for i in 0..x.len() {
        probe[i] = x[i] + h;
        let fp = prob.exact_objective(&probe.view())?;
        probe[i] = x[i] - h;
        let fm = prob.exact_objective(&probe.view())?;
        probe[i] = x[i];
        g[i] = (fp - fm) / (2.0 * h);
    }
    Ok(g)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::chebyshev::FilterSpec;
    use crate::linalg::small_sym_eig;
    use crate::pfam::{pfam_step, PfamState};
    use crate::problems::nce::{gen_example, nce_problem};
    use crate::problems::sdp::maxcut_sdp;
    use crate::subspace::{
        choose_interval, sin_theta, IntervalMode, LowRankFactors, RitzPairs, Subspace,
    };
    use ndarray::array;
    use rand::{RngExt, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn identity_instance_fixes_the_origin() {
        let inst = crate::problems::nce::NceInstance::new(Array2::eye(8)).unwrap();
        let prob = nce_problem(inst);
        let x = Array1::zeros(8);
        let next = exact_pg_step(&prob, &x.view(), 1.0).unwrap();
        let norm = next.dot(&next).sqrt();
        assert!(norm < 1e-12, "step away from the optimum: {norm}");
    }

    #[test]
    fn pg_step_contracts_toward_the_known_optimum() {
        // For G = I the dual optimum is x* = 0 and one unit step lands
        // there from any point with all coordinates above -1.
        let inst = crate::problems::nce::NceInstance::new(Array2::eye(6)).unwrap();
        let prob = nce_problem(inst);
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..5 {
            let x = Array1::from_shape_fn(6, |_| rng.random_range(-0.9..4.0));
            let next = exact_pg_step(&prob, &x.view(), 1.0).unwrap();
            let next_norm = next.dot(&next).sqrt();
            assert!(next_norm < 1e-10, "residual {next_norm}");
        }
    }

    #[test]
    fn gradient_matches_central_differences() {
        let inst = gen_example(2, 10, 33).unwrap();
        let prob = nce_problem(inst);
        let mut rng = ChaCha8Rng::seed_from_u64(91);
        let mut checked = 0;
        while checked < 4 {
            let x = Array1::from_shape_fn(10, |_| rng.random_range(-0.5..0.5));
            let (g, eig) = exact_gradient(&prob, &x.view()).unwrap();
            if eig.values.iter().any(|l| l.abs() <= 1e-3) {
                continue;
            }
            checked += 1;
            let fd = fd_gradient(&prob, &x.view(), 1e-5).unwrap();
            for i in 0..10 {
                let report = OracleReport::new(format!("grad[{i}]"), g[i], fd[i]);
                assert!(
                    report.within(1e-7, 1e-5),
                    "component {i}: {} vs {}",
                    g[i],
                    fd[i]
                );
            }
        }
    }

    #[test]
    fn drs_step_nonexpansive_on_random_pairs() {
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        let raw = Array2::from_shape_fn((6, 6), |_| rng.random_range(0.0..1.0));
        let mut w = (&raw + &raw.t()) * 0.5;
        for i in 0..6 {
            w[[i, i]] = 0.0;
        }
        let prob = maxcut_sdp(&w.view(), None).unwrap();
        for _ in 0..8 {
            let mk = |rng: &mut ChaCha8Rng| {
                let raw = Array2::from_shape_fn((6, 6), |_| rng.random_range(-1.0..1.0));
                (&raw + &raw.t()) * 0.5
            };
            let z1 = mk(&mut rng);
            let z2 = mk(&mut rng);
            let t1 = exact_drs_step(&prob, &z1.view()).unwrap();
            let t2 = exact_drs_step(&prob, &z2.view()).unwrap();
            let num = (&t1 - &t2).iter().map(|v| v * v).sum::<f64>().sqrt();
            let den = (&z1 - &z2).iter().map(|v| v * v).sum::<f64>().sqrt();
            assert!(num <= den + 1e-10);
        }
    }

    #[test]
    fn filtered_splitting_steps_track_the_oracle() {
        // Five filtered steps with a warm subspace stay within 1e-6 of the
        // exact operator applied at the same iterates.
        let n = 10;
        let mut rng = ChaCha8Rng::seed_from_u64(23);
        let raw = Array2::from_shape_fn((n, n), |_| rng.random_range(0.0..1.0));
        let mut w = (&raw + &raw.t()) * 0.5;
        for i in 0..n {
            w[[i, i]] = 0.0;
        }
        let prob = maxcut_sdp(&w.view(), None).unwrap();

        // Warm-up: exact steps from zero until the iterate has spectrum on
        // both sides of zero. Early iterates can be entirely positive
        // definite, where there is nothing to suppress and the solver uses
        // exact projections instead of a filter.
        let mut z = Array2::zeros((n, n));
        let eig = loop {
            z = exact_drs_step(&prob, &z.view()).unwrap();
            let eig = small_sym_eig(&z.view()).unwrap();
            if *eig.values.last().unwrap() < -1e-2 {
                break eig;
            }
        };
        let positives = eig.values.iter().filter(|&&l| l > 0.0).count();
        let p = (positives + 3).min(n);
        let mut sub = Subspace::from_orthonormal(
            eig.vectors.slice(ndarray::s![.., ..p]).to_owned(),
        )
        .unwrap();

        for step in 0..5 {
            let eig = small_sym_eig(&z.view()).unwrap();
            let ritz = RitzPairs {
                values: eig.values.clone(),
                vectors: eig.vectors.clone(),
            };
            let lam_min = *eig.values.last().unwrap();
            let margin = 1e-3 * (1.0 + lam_min.abs());
            let interval = choose_interval(
                &ritz,
                lam_min - margin,
                &IntervalMode::AllPositive { eta: 0.1 },
            )
            .unwrap();
            let spec = FilterSpec::new(interval.0, interval.1, 40, 2).unwrap();

            let state = PfamState {
                z: z.clone(),
                sub: sub.clone(),
                x_factors: LowRankFactors {
                    vectors: Array2::zeros((n, 0)),
                    weights: Array1::zeros(0),
                },
                ritz,
                multiplier: Array1::zeros(prob.m()),
                residual: f64::INFINITY,
                iteration: step,
            };
            let next = pfam_step(&prob, &state, &spec, &mut rng).unwrap();
            let reference = exact_drs_step(&prob, &z.view()).unwrap();
            let delta = (&next.z - &reference)
                .iter()
                .map(|v| v * v)
                .sum::<f64>()
                .sqrt();
            assert!(delta <= 1e-6, "step {step}: deviation {delta}");
            z = next.z;
            sub = next.sub;
        }
    }

    #[test]
    fn brute_angles_match_hand_values() {
        // Identical spans: all sines zero.
        let x = array![[1.0, 0.0], [0.0, 1.0], [0.0, 0.0]];
        let s = brute_sin_theta(&x.view(), &x.view()).unwrap();
        assert!(s.iter().all(|&v| v < 1e-12));

        // 45 degrees between lines in the plane.
        let a = array![[1.0], [0.0]];
        let inv = std::f64::consts::FRAC_1_SQRT_2;
        let b = array![[inv], [inv]];
        let s = brute_sin_theta(&a.view(), &b.view()).unwrap();
        assert!((s[0] - inv).abs() < 1e-12);

        // Orthogonal spans: sine one.
        let c = array![[0.0], [1.0]];
        let s = brute_sin_theta(&a.view(), &c.view()).unwrap();
        assert!((s[0] - 1.0).abs() < 1e-12);

        // Shape mismatch rejected.
        assert!(brute_sin_theta(&x.view(), &a.view()).is_err());
    }

    #[test]
    fn both_angle_routes_agree_on_random_pairs() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for trial in 0..10 {
            let raw_x = Array2::from_shape_fn((30, 4), |_| rng.random_range(-1.0..1.0));
            let raw_y = Array2::from_shape_fn((30, 4), |_| rng.random_range(-1.0..1.0));
            let (qx, _) = crate::linalg::orthonormalize(&raw_x.view(), &mut rng).unwrap();
            let (qy, _) = crate::linalg::orthonormalize(&raw_y.view(), &mut rng).unwrap();
            let brute = brute_sin_theta(&qx.view(), &qy.view()).unwrap();
            let su = Subspace::from_orthonormal(qx.clone()).unwrap();
            let sv = Subspace::from_orthonormal(qy.clone()).unwrap();
            let (fast, _) = sin_theta(&su, &sv).unwrap();
            for i in 0..4 {
                assert!(
                    (brute[i] - fast[i]).abs() < 5e-8,
                    "trial {trial} sine {i}: {} vs {}",
                    brute[i],
                    fast[i]
                );
            }
        }
    }

    #[test]
    fn report_errors_are_nonnegative() {
        let r = OracleReport::new("q", -2.0, -2.5);
        assert!(r.abs_err >= 0.0 && r.rel_err >= 0.0);
        assert!((r.abs_err - 0.5).abs() < 1e-15);
        assert!((r.rel_err - 0.25).abs() < 1e-15);
        assert!(r.within(0.6, 1e-9));
        assert!(!r.within(0.1, 0.01));
        let z = OracleReport::new("zero-ref", 0.0, 1e-3);
        assert!((z.rel_err - 1e-3).abs() < 1e-18);
    }
}
