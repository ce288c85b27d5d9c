use nalgebra::{DMatrix, DVector};
use ndarray::{Array2, Array3, Array4, ArrayView1, ArrayView2};

use crate::error::{Error, Result};
use crate::numeric::bound_curvature;

/// Per-observation variational quantities.
///
/// Shapes: `z` n x G, `xi` n x G x M, `mu` n x G x D, `sigma` n x G x D x D.
#[derive(Debug, Clone, PartialEq)]
pub struct VariationalState {
    pub z: Array2<f64>,
    pub xi: Array3<f64>,
    pub mu: Array3<f64>,
    pub sigma: Array4<f64>,
}

impl VariationalState {
    pub fn n_obs(&self) -> usize {
        self.z.nrows()
    }

    /// `argmax_g z[i][g]` per row, ties to the lowest index.
    pub fn labels(&self) -> Vec<usize> {
        self.z
            .rows()
            .into_iter()
            .map(|r| crate::numeric::argmax(r.as_slice().expect("standard layout")))
            .collect()
    }

    pub fn max_responsibility(&self) -> Vec<f64> {
        self.z
            .rows()
            .into_iter()
            .map(|r| r.iter().copied().fold(f64::NEG_INFINITY, f64::max))
            .collect()
    }
}

/// Gaussian posterior of the latent trait of one observation in one
/// component, with the pieces the bound needs.
#[derive(Debug, Clone)]
pub struct LatentMoments {
    pub mu: DVector<f64>,
    pub sigma: DMatrix<f64>,
    /// `log |Sigma|`
    pub log_det_sigma: f64,
    /// `mu' Sigma^{-1} mu`
    pub mahalanobis: f64,
}

impl LatentMoments {
    /// Moments from `Sigma^{-1} = I - 2 sum_m B(xi_m) w_m w_m'` and
    /// `Sigma^{-1} mu = sum_m (x_m - 1/2 + 2 B(xi_m) alpha_m) w_m`.
    pub fn compute(
        x: &[u8],
        xi: ArrayView1<f64>,
        alpha: ArrayView1<f64>,
        weights: ArrayView2<f64>,
    ) -> Result<Self> {
        let d = weights.ncols();
        let mut precision = DMatrix::<f64>::identity(d, d);
        let mut rhs = DVector::<f64>::zeros(d);
        for (m, w) in weights.rows().into_iter().enumerate() {
            if w.iter().all(|&v| v == 0.0) {
                continue;
            }
            let b = bound_curvature(xi[m]);
            let coef = x[m] as f64 - 0.5 + 2.0 * b * alpha[m];
            for a in 0..d {
                rhs[a] += coef * w[a];
                for c in 0..d {
                    precision[(a, c)] -= 2.0 * b * w[a] * w[c];
                }
            }
        }
        let chol = precision.cholesky().ok_or_else(|| {
            Error::NumericalFailure("latent precision matrix is not positive definite".into())
        })?;
        let log_det_precision: f64 = 2.0 * chol.l().diagonal().iter().map(|v| v.ln()).sum::<f64>();
        let mu = chol.solve(&rhs);
        let sigma = chol.inverse();
        let mahalanobis = mu.dot(&rhs);
        Ok(LatentMoments {
            mu,
            sigma,
            log_det_sigma: -log_det_precision,
            mahalanobis,
        })
    }

    pub(crate) fn store(&self, mu: &mut Array3<f64>, sigma: &mut Array4<f64>, i: usize, g: usize) {
        let d = self.mu.len();
        for a in 0..d {
            mu[[i, g, a]] = self.mu[a];
            for c in 0..d {
                sigma[[i, g, a, c]] = self.sigma[(a, c)];
            }
        }
    }
}
