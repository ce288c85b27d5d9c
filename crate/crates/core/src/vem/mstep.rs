use nalgebra::{DMatrix, DVector};
use ndarray::{s, Array1, Array2, Array3};

use super::state::VariationalState;
use crate::error::{invalid, Error, Result};
use crate::exec::Execution;
use crate::matrix::BinaryMatrix;
use crate::model::ModelParameters;
use crate::numeric::bound_curvature;

/// Lower clamp for the variational parameters.
pub const XI_MIN: f64 = 1e-8;
/// Floor applied to the mixing proportion of a component that has emptied.
pub const ETA_FLOOR: f64 = 1e-6;
const RIDGE_JITTER: f64 = 1e-8;
/// Components with less total responsibility than this keep their slopes
/// and intercepts.
const MIN_COMPONENT_MASS: f64 = 1e-10;

/// Optimal variational parameters at fixed latent moments:
/// `xi^2 = w'(Sigma + mu mu')w + 2 alpha w'mu + alpha^2`, clamped to
/// `[XI_MIN, xi_max]`.
pub fn m_step_xi(
    params: &ModelParameters,
    state: &VariationalState,
    xi_max: f64,
    exec: Execution,
) -> Array3<f64> {
    let (n, g_count, m_items, d) = (
        state.n_obs(),
        params.n_components(),
        params.n_items(),
        params.dimensions(),
    );
    let rows = exec.map(n, |i| {
        let mut out = Vec::with_capacity(g_count * m_items);
        for g in 0..g_count {
            let mu = state.mu.slice(s![i, g, ..]);
            let sigma = state.sigma.slice(s![i, g, .., ..]);
            for m in 0..m_items {
                let w = params.weights.slice(s![g, m, ..]);
                let a = params.alpha[[g, m]];
                let mut quad = 0.0;
                let mut lin = 0.0;
                for p in 0..d {
                    lin += w[p] * mu[p];
                    for q in 0..d {
                        quad += w[p] * (sigma[[p, q]] + mu[p] * mu[q]) * w[q];
                    }
                }
                let sq = quad + 2.0 * a * lin + a * a;
                out.push(sq.max(0.0).sqrt().clamp(XI_MIN, xi_max));
            }
        }
        out
    });
    Array3::from_shape_vec((n, g_count, m_items), rows.into_iter().flatten().collect())
        .expect("row-major layout")
}

/// Slopes and intercepts maximizing, per (item, component), the quadratic
/// surrogate
///
/// `sum_i z_ig E[(x_im - 1/2) a + B(xi_img) a^2] - lambda_mg/2 sum_d w_d^2 / |w_d^old|`
///
/// with `a = alpha + w'y` and expectations under the latent posteriors in
/// `state`. The surrogate combines the quadratic logistic bound with the
/// square-root majorization of the L1 term; it is solved in the rescaled
/// coordinates `w = diag(|w^old|^{1/2}) v`, which never divides by a small
/// slope. With `lambda_mg > 0`, coordinates with `|w^old| < zero_tol` are set
/// to exactly zero and stay there; with `lambda_mg = 0` only exact zeros are
/// held.
pub fn m_step_weights_intercepts(
    data: &BinaryMatrix,
    params: &ModelParameters,
    state: &VariationalState,
    lambda: &Array2<f64>,
    zero_tol: f64,
    exec: Execution,
) -> Result<(Array3<f64>, Array2<f64>)> {
    let (n, g_count, m_items, d) = (
        data.n_rows(),
        params.n_components(),
        params.n_items(),
        params.dimensions(),
    );
    if lambda.dim() != (g_count, m_items) {
        return invalid("lambda must be G x M");
    }
    if lambda.iter().any(|&l| !(l >= 0.0)) {
        return invalid("lambda must be non-negative");
    }
    let mut columns = vec![0u8; n * m_items];
    for i in 0..n {
        for &m in data.row(i) {
            columns[m * n + i] = 1;
        }
    }

    let solved = exec.map(g_count * m_items, |k| {
        let (g, m) = (k / m_items, k % m_items);
        let x = &columns[m * n..(m + 1) * n];
        update_item(params, state, x, g, m, lambda[[g, m]], zero_tol, d)
    });

    let mut weights = Array3::zeros((g_count, m_items, d));
    let mut alpha = Array2::zeros((g_count, m_items));
    for (k, res) in solved.into_iter().enumerate() {
        let (g, m) = (k / m_items, k % m_items);
        let (a, w) = res?;
        alpha[[g, m]] = a;
        for p in 0..d {
            weights[[g, m, p]] = w[p];
        }
    }
    Ok((weights, alpha))
}

#[allow(clippy::too_many_arguments)]
fn update_item(
    params: &ModelParameters,
    state: &VariationalState,
    x: &[u8],
    g: usize,
    m: usize,
    lambda: f64,
    zero_tol: f64,
    d: usize,
) -> Result<(f64, Vec<f64>)> {
    let old_w: Vec<f64> = params.weights.slice(s![g, m, ..]).to_vec();
    let old_alpha = params.alpha[[g, m]];

    // Sufficient statistics over the extended trait (1, y).
    let mut curv = DMatrix::<f64>::zeros(d + 1, d + 1);
    let mut lin = DVector::<f64>::zeros(d + 1);
    let mut mass = 0.0;
    for (i, &xi_m) in x.iter().enumerate() {
        let z = state.z[[i, g]];
        if z <= 0.0 {
            continue;
        }
        mass += z;
        let b = z * bound_curvature(state.xi[[i, g, m]]);
        let r = z * (xi_m as f64 - 0.5);
        curv[(0, 0)] += b;
        lin[0] += r;
        for p in 0..d {
            let mu_p = state.mu[[i, g, p]];
            curv[(0, p + 1)] += b * mu_p;
            lin[p + 1] += r * mu_p;
            for q in 0..d {
                let second = state.sigma[[i, g, p, q]] + mu_p * state.mu[[i, g, q]];
                curv[(p + 1, q + 1)] += b * second;
            }
        }
    }
    if mass < MIN_COMPONENT_MASS {
        return Ok((old_alpha, old_w));
    }
    for p in 0..d {
        curv[(p + 1, 0)] = curv[(0, p + 1)];
    }

    let threshold = if lambda > 0.0 { zero_tol } else { 0.0 };
    let active: Vec<usize> = (0..d)
        .filter(|&p| old_w[p] != 0.0 && old_w[p].abs() >= threshold)
        .collect();
    let k = active.len() + 1;
    let index = |j: usize| if j == 0 { 0 } else { active[j - 1] + 1 };
    let scale: Vec<f64> = (0..k)
        .map(|j| {
            if j == 0 || lambda == 0.0 {
                1.0
            } else {
                old_w[active[j - 1]].abs().sqrt()
            }
        })
        .collect();

    let mut hess = DMatrix::from_fn(k, k, |a, c| -2.0 * scale[a] * curv[(index(a), index(c))] * scale[c]);
    for j in 1..k {
        hess[(j, j)] += lambda;
    }
    let rhs = DVector::from_fn(k, |a, _| scale[a] * lin[index(a)]);

    let chol = match hess.clone().cholesky() {
        Some(c) => c,
        None => {
            let jittered = hess + DMatrix::identity(k, k) * RIDGE_JITTER;
            jittered.cholesky().ok_or_else(|| {
                Error::NumericalFailure(format!(
                    "surrogate Hessian singular for item {m}, component {g}"
                ))
            })?
        }
    };
    let v = chol.solve(&rhs);
    let mut w = vec![0.0; d];
    for (j, &p) in active.iter().enumerate() {
        w[p] = scale[j + 1] * v[j + 1];
    }
    let alpha = v[0];
    if !alpha.is_finite() || w.iter().any(|v| !v.is_finite()) {
        return Err(Error::NumericalFailure(format!(
            "non-finite update for item {m}, component {g}"
        )));
    }
    Ok((alpha, w))
}

/// `eta_g = (n_g - 1/2) / (n - G/2)` from the Dirichlet(1/2, ..., 1/2) prior.
/// A component whose raw value falls below `ETA_FLOOR` is floored and the
/// vector renormalized.
pub fn m_step_mixing_proportions(z: &Array2<f64>) -> Result<Array1<f64>> {
    let (n, g) = z.dim();
    let denom = n as f64 - g as f64 / 2.0;
    if denom <= 0.0 {
        return invalid(format!("need n > G/2 (n = {n}, G = {g})"));
    }
    let counts = z.sum_axis(ndarray::Axis(0));
    let mut eta = counts.mapv(|c| (c - 0.5) / denom);
    if eta.iter().any(|&e| e < ETA_FLOOR) {
        let empty: Vec<usize> = (0..g).filter(|&k| eta[k] < ETA_FLOOR).collect();
        log::warn!("components {empty:?} are (nearly) empty; flooring their mixing proportions");
        eta.mapv_inplace(|e| e.max(ETA_FLOOR));
        let total = eta.sum();
        eta /= total;
    }
    Ok(eta)
}
