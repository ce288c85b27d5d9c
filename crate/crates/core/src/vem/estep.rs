use ndarray::{s, Array2, Array3, Array4};

use super::bound::BoundPieces;
use super::state::{LatentMoments, VariationalState};
use crate::error::{invalid, Error, Result};
use crate::exec::Execution;
use crate::matrix::BinaryMatrix;
use crate::model::ModelParameters;
use crate::numeric::log_sum_exp;

/// Responsibilities `z_ig ∝ eta_g exp(L(xi_ig))`, normalized in log space.
pub fn ve_step_responsibilities(params: &ModelParameters, bound: &BoundPieces) -> Result<Array2<f64>> {
    let per = &bound.per_obs_component;
    let g_count = params.n_components();
    if per.ncols() != g_count {
        return invalid("bound pieces and parameters disagree on G");
    }
    let log_eta: Vec<f64> = params.eta.iter().map(|e| e.ln()).collect();
    let mut z = Array2::zeros(per.dim());
    let mut buf = vec![0.0; g_count];
    for (i, row) in per.rows().into_iter().enumerate() {
        for g in 0..g_count {
            buf[g] = log_eta[g] + row[g];
        }
        let norm = log_sum_exp(&buf);
        if !norm.is_finite() {
            return Err(Error::NumericalFailure(format!(
                "observation {i}: no component has a finite bound"
            )));
        }
        for g in 0..g_count {
            z[[i, g]] = (buf[g] - norm).exp();
        }
    }
    Ok(z)
}

/// Gaussian posterior moments `(mu, Sigma)` of every latent trait under the
/// current variational parameters, intercepts and slopes.
pub fn ve_step_latent_moments(
    data: &BinaryMatrix,
    params: &ModelParameters,
    state: &VariationalState,
    exec: Execution,
) -> Result<(Array3<f64>, Array4<f64>)> {
    let (n, g_count, d) = (data.n_rows(), params.n_components(), params.dimensions());
    let rows = exec.map(n, |i| {
        let x = data.dense_row(i);
        (0..g_count)
            .map(|g| {
                LatentMoments::compute(
                    &x,
                    state.xi.slice(s![i, g, ..]),
                    params.alpha.row(g),
                    params.weights.slice(s![g, .., ..]),
                )
            })
            .collect::<Result<Vec<_>>>()
    });
    let mut mu = Array3::zeros((n, g_count, d));
    let mut sigma = Array4::zeros((n, g_count, d, d));
    for (i, row) in rows.into_iter().enumerate() {
        for (g, mom) in row?.iter().enumerate() {
            mom.store(&mut mu, &mut sigma, i, g);
        }
    }
    Ok((mu, sigma))
}

/// Expected Laplace rates `(s + D) / (|w_mg|_1 + r)`.
pub fn ve_step_rates(params: &ModelParameters, shape: f64, rate: f64) -> Array2<f64> {
    let d = params.dimensions() as f64;
    Array2::from_shape_fn(params.alpha.dim(), |(g, m)| {
        let l1: f64 = params.weights.slice(s![g, m, ..]).iter().map(|v| v.abs()).sum();
        (shape + d) / (l1 + rate)
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use ndarray::{array, Array1};

    fn params(g: usize, m: usize, d: usize) -> ModelParameters {
        ModelParameters {
            eta: Array1::from_elem(g, 1.0 / g as f64),
            alpha: Array2::zeros((g, m)),
            weights: Array3::zeros((g, m, d)),
            lambda: Array2::ones((g, m)),
        }
    }

    fn pieces(per: Array2<f64>) -> BoundPieces {
        BoundPieces {
            per_obs_component: per,
            total: 0.0,
            data_term: 0.0,
        }
    }

    #[test]
    fn responsibility_examples() {
        let z = ve_step_responsibilities(&params(1, 2, 1), &pieces(array![[-3.0], [-1.0]])).unwrap();
        assert!(z.iter().all(|&v| v == 1.0));

        let z = ve_step_responsibilities(&params(3, 2, 1), &pieces(array![[-2.0, -2.0, -2.0]])).unwrap();
        for v in z.iter() {
            assert_abs_diff_eq!(*v, 1.0 / 3.0, epsilon = 1e-15);
        }

        let mut p = params(2, 2, 1);
        p.eta = array![0.9, 0.1];
        let z = ve_step_responsibilities(&p, &pieces(array![[-5.0, -5.0 + 9f64.ln()]])).unwrap();
        assert_abs_diff_eq!(z[[0, 0]], 0.5, epsilon = 1e-14);
        assert_abs_diff_eq!(z[[0, 1]], 0.5, epsilon = 1e-14);

        let bad = ve_step_responsibilities(&p, &pieces(array![[f64::NEG_INFINITY, f64::NEG_INFINITY]]));
        assert!(matches!(bad, Err(Error::NumericalFailure(_))));
    }

    fn state_for(n: usize, g: usize, m: usize, d: usize, xi: f64) -> VariationalState {
        VariationalState {
            z: Array2::from_elem((n, g), 1.0 / g as f64),
            xi: Array3::from_elem((n, g, m), xi),
            mu: Array3::zeros((n, g, d)),
            sigma: Array4::zeros((n, g, d, d)),
        }
    }

    #[test]
    fn moments_with_zero_slopes_are_prior() {
        let data = BinaryMatrix::from_dense(3, &[vec![1u8, 0, 1]]).unwrap();
        let p = params(2, 3, 2);
        let (mu, sigma) = ve_step_latent_moments(&data, &p, &state_for(1, 2, 3, 2, 0.7), Execution::Sequential).unwrap();
        assert!(mu.iter().all(|&v| v == 0.0));
        for g in 0..2 {
            assert_eq!(sigma[[0, g, 0, 0]], 1.0);
            assert_eq!(sigma[[0, g, 1, 1]], 1.0);
            assert_eq!(sigma[[0, g, 0, 1]], 0.0);
        }
    }

    #[test]
    fn scalar_moment_example() {
        let data = BinaryMatrix::from_dense(1, &[vec![1u8]]).unwrap();
        let mut p = params(1, 1, 1);
        p.weights[[0, 0, 0]] = 1.0;
        let (mu, sigma) = ve_step_latent_moments(&data, &p, &state_for(1, 1, 1, 1, 1.0), Execution::Sequential).unwrap();
        assert_abs_diff_eq!(sigma[[0, 0, 0, 0]], 0.812_309_030_097_381_2, epsilon = 1e-14);
        // mu = Sigma * (x - 1/2) * w with alpha = 0
        assert_abs_diff_eq!(mu[[0, 0, 0]], 0.5 * 0.812_309_030_097_381_2, epsilon = 1e-14);
    }

    #[test]
    fn covariance_is_symmetric_positive_definite() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
        let rows: Vec<Vec<u8>> = (0..10).map(|_| (0..6).map(|_| rng.random_range(0..2u8)).collect()).collect();
        let data = BinaryMatrix::from_dense(6, &rows).unwrap();
        let mut p = params(2, 6, 3);
        p.weights.mapv_inplace(|_| rng.random_range(-2.0..2.0));
        p.alpha.mapv_inplace(|_| rng.random_range(-2.0..2.0));
        let mut st = state_for(10, 2, 6, 3, 1.0);
        st.xi.mapv_inplace(|_| rng.random_range(0.01..20.0));
        let (_, sigma) = ve_step_latent_moments(&data, &p, &st, Execution::Sequential).unwrap();
        for i in 0..10 {
            for g in 0..2 {
                let m = nalgebra::DMatrix::from_fn(3, 3, |a, c| sigma[[i, g, a, c]]);
                assert!((&m - m.transpose()).abs().max() < 1e-12);
                assert!(m.clone().cholesky().is_some());
                // Sigma is a contraction of the prior covariance
                assert!(m.symmetric_eigenvalues().iter().all(|&e| e > 0.0 && e <= 1.0 + 1e-12));
            }
        }
    }

    #[test]
    fn rate_examples() {
        let p = params(1, 1, 1);
        assert_abs_diff_eq!(ve_step_rates(&p, 1.0, 0.5)[[0, 0]], 4.0, epsilon = 1e-15);
        let mut p2 = params(1, 1, 2);
        p2.weights[[0, 0, 0]] = 1.0;
        p2.weights[[0, 0, 1]] = -0.5;
        assert_abs_diff_eq!(ve_step_rates(&p2, 1.0, 0.5)[[0, 0]], 1.5, epsilon = 1e-15);
        let mut p3 = params(1, 1, 1);
        p3.weights[[0, 0, 0]] = 1e12;
        assert!(ve_step_rates(&p3, 1.0, 0.5)[[0, 0]] < 1e-11);
    }

    proptest::proptest! {
        #[test]
        fn rates_decrease_when_a_slope_grows(w in -3.0f64..3.0, bump in 0.01f64..1.0, s in 0.1f64..3.0, r in 0.1f64..3.0) {
            let mut p = params(1, 1, 2);
            p.weights[[0, 0, 0]] = w;
            p.weights[[0, 0, 1]] = 0.3;
            let before = ve_step_rates(&p, s, r)[[0, 0]];
            p.weights[[0, 0, 0]] = if w >= 0.0 { w + bump } else { w - bump };
            let after = ve_step_rates(&p, s, r)[[0, 0]];
            proptest::prop_assert!(after < before);
            proptest::prop_assert!(after > 0.0);
        }
    }
}
