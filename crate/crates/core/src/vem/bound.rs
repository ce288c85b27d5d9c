use ndarray::{s, Array2, ArrayView1, ArrayView2};

use super::state::{LatentMoments, VariationalState};
use crate::error::{invalid, Error, Result};
use crate::exec::Execution;
use crate::matrix::BinaryMatrix;
use crate::model::ModelParameters;
use crate::numeric::{bound_curvature, log_sigmoid, log_sum_exp};

/// Lower-bound evaluation of the current state.
#[derive(Debug, Clone, PartialEq)]
pub struct BoundPieces {
    /// n x G matrix of `L(xi_ig)`, the log of the bounded component density.
    pub per_obs_component: Array2<f64>,
    /// Objective tracked by the fit: the responsibility-weighted bound plus
    /// the responsibility entropy, the Dirichlet(1/2) log prior on the mixing
    /// proportions and, when penalized, minus the gamma-Laplace penalty.
    pub total: f64,
    /// `sum_i log sum_g eta_g exp(L(xi_ig))`, a lower bound on the
    /// log-likelihood.
    pub data_term: f64,
}

/// `L(xi_ig)` for one observation and component, with the latent moments
/// used to compute it.
pub fn observation_bound(
    x: &[u8],
    xi: ArrayView1<f64>,
    alpha: ArrayView1<f64>,
    weights: ArrayView2<f64>,
) -> Result<(f64, LatentMoments)> {
    let moments = LatentMoments::compute(x, xi, alpha, weights)?;
    let mut acc = 0.0;
    for m in 0..x.len() {
        let (t, a) = (xi[m], alpha[m]);
        let b = bound_curvature(t);
        acc += log_sigmoid(t) - 0.5 * t - b * t * t + (x[m] as f64 - 0.5) * a + b * a * a;
    }
    Ok((acc + 0.5 * moments.log_det_sigma + 0.5 * moments.mahalanobis, moments))
}

/// Evaluates the bound. `penalty` carries `(s, r)` when the gamma-Laplace
/// penalty is active.
pub fn evaluate_bound(
    data: &BinaryMatrix,
    params: &ModelParameters,
    state: &VariationalState,
    penalty: Option<(f64, f64)>,
    exec: Execution,
) -> Result<BoundPieces> {
    let (n, g_count) = (data.n_rows(), params.n_components());
    if state.z.dim() != (n, g_count) {
        return invalid("state and data disagree on n or G");
    }
    let rows = exec.map(n, |i| {
        let x = data.dense_row(i);
        (0..g_count)
            .map(|g| {
                observation_bound(
                    &x,
                    state.xi.slice(s![i, g, ..]),
                    params.alpha.row(g),
                    params.weights.slice(s![g, .., ..]),
                )
                .map(|(l, _)| l)
            })
            .collect::<Result<Vec<f64>>>()
    });
    let mut per = Array2::zeros((n, g_count));
    for (i, row) in rows.into_iter().enumerate() {
        for (g, v) in row?.into_iter().enumerate() {
            per[[i, g]] = v;
        }
    }

    let log_eta: Vec<f64> = params.eta.iter().map(|e| e.ln()).collect();
    let mut weighted = 0.0;
    let mut entropy = 0.0;
    let mut data_term = 0.0;
    let mut buf = vec![0.0; g_count];
    for i in 0..n {
        for g in 0..g_count {
            let z = state.z[[i, g]];
            buf[g] = log_eta[g] + per[[i, g]];
            if z > 0.0 {
                weighted += z * buf[g];
                entropy -= z * z.ln();
            }
        }
        data_term += log_sum_exp(&buf);
    }
    let dirichlet: f64 = -0.5 * log_eta.iter().sum::<f64>();
    let penalty_term = penalty.map_or(0.0, |(s, r)| params.total_penalty(s, r));
    let total = weighted + entropy + dirichlet - penalty_term;
    if !total.is_finite() {
        return Err(Error::NumericalFailure(format!(
            "bound is not finite (weighted {weighted}, entropy {entropy}, penalty {penalty_term})"
        )));
    }
    Ok(BoundPieces {
        per_obs_component: per,
        total,
        data_term,
    })
}
