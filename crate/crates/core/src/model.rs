//! Model quantities: hyperparameters, parameters and the pure functions of
//! the mixture of latent trait models (response curves, penalty, loadings,
//! parameter counts).

use ndarray::{Array1, Array2, Array3, ArrayView2, Axis};
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::numeric::sigmoid;

/// Fitting hyperparameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Hyperparameters {
    /// Number of mixture components G.
    pub components: usize,
    /// Latent trait dimension D.
    pub dimensions: usize,
    /// Gamma hyperprior shape s.
    pub shape: f64,
    /// Gamma hyperprior rate r.
    pub rate: f64,
    pub max_iter: usize,
    /// Threshold on successive Aitken limit estimates.
    pub aitken_tol: f64,
    /// Upper end of the support of the variational parameters.
    pub xi_max: f64,
    /// Loadings with magnitude at or below this are counted as zero.
    pub zero_tol: f64,
    pub restarts: usize,
    pub seed: u64,
}

impl Default for Hyperparameters {
    fn default() -> Self {
        Hyperparameters {
            components: 2,
            dimensions: 1,
            shape: 1.0,
            rate: 0.5,
            max_iter: 500,
            aitken_tol: 0.01,
            xi_max: 20.0,
            zero_tol: 1e-4,
            restarts: 5,
            seed: 0,
        }
    }
}

impl Hyperparameters {
    pub fn new(components: usize, dimensions: usize, shape: f64, rate: f64) -> Self {
        Hyperparameters {
            components,
            dimensions,
            shape,
            rate,
            ..Default::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.components == 0 {
            return invalid("components must be >= 1");
        }
        if self.dimensions == 0 {
            return invalid("dimensions must be >= 1");
        }
        if !(self.shape > 0.0 && self.shape.is_finite()) {
            return invalid(format!("shape must be > 0, got {}", self.shape));
        }
        if !(self.rate > 0.0 && self.rate.is_finite()) {
            return invalid(format!("rate must be > 0, got {}", self.rate));
        }
        if self.max_iter == 0 {
            return invalid("max_iter must be >= 1");
        }
        if !(self.aitken_tol > 0.0) {
            return invalid("aitken_tol must be > 0");
        }
        if !(self.xi_max > 0.0) {
            return invalid("xi_max must be > 0");
        }
        if !(self.zero_tol > 0.0) {
            return invalid("zero_tol must be > 0");
        }
        if self.restarts == 0 {
            return invalid("restarts must be >= 1");
        }
        Ok(())
    }
}

/// Parameters of a G-component model over M items with D latent traits.
///
/// `alpha` and `lambda` are G x M; `weights` is G x M x D so that
/// `weights[[g, m, ..]]` is the slope vector of item m in component g.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelParameters {
    pub eta: Array1<f64>,
    pub alpha: Array2<f64>,
    pub weights: Array3<f64>,
    pub lambda: Array2<f64>,
}

impl ModelParameters {
    pub fn n_components(&self) -> usize {
        self.eta.len()
    }

    pub fn n_items(&self) -> usize {
        self.alpha.ncols()
    }

    pub fn dimensions(&self) -> usize {
        self.weights.len_of(Axis(2))
    }

    /// Checks shapes and the simplex / positivity / finiteness invariants.
    pub fn validate(&self) -> Result<()> {
        let (g, m, d) = (self.n_components(), self.n_items(), self.dimensions());
        if g == 0 {
            return invalid("at least one component required");
        }
        if self.alpha.dim() != (g, m) || self.lambda.dim() != (g, m) {
            return invalid("alpha and lambda must be G x M");
        }
        if self.weights.dim() != (g, m, d) {
            return invalid("weights must be G x M x D");
        }
        if self.eta.iter().any(|&e| !(e > 0.0)) {
            return invalid("mixing proportions must be positive");
        }
        if (self.eta.sum() - 1.0).abs() > 1e-10 {
            return invalid("mixing proportions must sum to one");
        }
        if self.lambda.iter().any(|&l| !(l > 0.0) || !l.is_finite()) {
            return invalid("rates must be strictly positive and finite");
        }
        let finite = self.alpha.iter().chain(self.weights.iter()).all(|v| v.is_finite());
        if !finite {
            return invalid("non-finite intercept or slope");
        }
        Ok(())
    }

    /// Standardized loadings of every component, G x M x D.
    pub fn standardized_loadings(&self) -> Array3<f64> {
        let mut out = Array3::zeros(self.weights.dim());
        for (g, wg) in self.weights.outer_iter().enumerate() {
            out.index_axis_mut(Axis(0), g)
                .assign(&standardized_loadings(wg));
        }
        out
    }

    /// Median-individual response probabilities, G x M.
    pub fn median_response_probabilities(&self) -> Array2<f64> {
        self.alpha.mapv(sigmoid)
    }

    /// Sum of the gamma-Laplace penalty over every (item, component) slope.
    pub fn total_penalty(&self, shape: f64, rate: f64) -> f64 {
        let mut total = 0.0;
        for g in 0..self.n_components() {
            for m in 0..self.n_items() {
                let w = self.weights.slice(ndarray::s![g, m, ..]);
                total += penalty_of_l1(w.iter().map(|v| v.abs()).sum(), w.len(), shape, rate);
            }
        }
        total
    }

    /// Number of slope entries with magnitude above `zero_tol`.
    pub fn nonzero_loadings(&self, zero_tol: f64) -> usize {
        self.weights.iter().filter(|w| w.abs() > zero_tol).count()
    }
}

fn check_finite(values: &[f64], what: &str) -> Result<()> {
    if values.iter().all(|v| v.is_finite()) {
        Ok(())
    } else {
        invalid(format!("non-finite {what}"))
    }
}

/// Probability of a positive response, `1 / (1 + exp(-(alpha + w'y)))`.
pub fn response_probability(alpha: f64, w: &[f64], y: &[f64]) -> Result<f64> {
    if w.len() != y.len() {
        return invalid("slope and trait vectors differ in length");
    }
    check_finite(&[alpha], "intercept")?;
    check_finite(w, "slope")?;
    check_finite(y, "latent trait")?;
    let eta: f64 = alpha + w.iter().zip(y).map(|(a, b)| a * b).sum::<f64>();
    Ok(sigmoid(eta))
}

/// Probability that the median individual (y = 0) responds positively.
pub fn median_response_probability(alpha: f64) -> Result<f64> {
    check_finite(&[alpha], "intercept")?;
    Ok(sigmoid(alpha))
}

#[inline]
fn penalty_of_l1(l1: f64, dims: usize, shape: f64, rate: f64) -> f64 {
    (shape + dims as f64) * (l1 / rate).ln_1p()
}

fn check_gamma(shape: f64, rate: f64) -> Result<()> {
    if !(shape > 0.0 && shape.is_finite()) || !(rate > 0.0 && rate.is_finite()) {
        return invalid(format!("gamma hyperparameters must be positive, got s={shape}, r={rate}"));
    }
    Ok(())
}

/// Marginal gamma-Laplace penalty `(s + D) log(1 + |w|_1 / r)` of one slope
/// vector, additive constant dropped.
pub fn gamma_laplace_penalty(w: &[f64], shape: f64, rate: f64) -> Result<f64> {
    check_gamma(shape, rate)?;
    let l1: f64 = w.iter().map(|v| v.abs()).sum();
    Ok(penalty_of_l1(l1, w.len(), shape, rate))
}

/// Magnitude of the penalty's partial derivative in any nonzero coordinate,
/// `(s + D) / (r + |w|_1)`. Equal to the expected Laplace rate given `w`.
pub fn gamma_laplace_slope(w: &[f64], shape: f64, rate: f64) -> Result<f64> {
    check_gamma(shape, rate)?;
    let l1: f64 = w.iter().map(|v| v.abs()).sum();
    Ok((shape + w.len() as f64) / (rate + l1))
}

/// Loadings rescaled to correlation-like values, `w / sqrt(1 + |w|^2)` per row.
pub fn standardized_loadings(weights: ArrayView2<f64>) -> Array2<f64> {
    let mut out = weights.to_owned();
    for mut row in out.rows_mut() {
        let denom = (1.0 + row.iter().map(|v| v * v).sum::<f64>()).sqrt();
        row.mapv_inplace(|v| v / denom);
    }
    out
}

/// Free parameters of the unpenalized model:
/// `(G - 1) + G M + G [M D - D (D - 1) / 2]`.
///
/// The slope term is floored at zero for the degenerate case `M < (D - 1) / 2`.
pub fn free_parameter_count(components: usize, items: usize, dimensions: usize) -> usize {
    let (g, m, d) = (components, items, dimensions);
    let slopes = (m * d).saturating_sub(d * d.saturating_sub(1) / 2);
    g.saturating_sub(1) + g * m + g * slopes
}

/// Parameter count for BIC with zeroed loadings excluded:
/// `(G - 1) + G M + max(0, nonzero(W) - G D (D - 1) / 2)`.
pub fn effective_df(params: &ModelParameters, zero_tol: f64) -> usize {
    let (g, m, d) = (params.n_components(), params.n_items(), params.dimensions());
    let rotation = g * d * d.saturating_sub(1) / 2;
    g.saturating_sub(1) + g * m + params.nonzero_loadings(zero_tol).saturating_sub(rotation)
}
