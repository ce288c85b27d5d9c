//! Gauss-Hermite quadrature for the marginal component densities, and a
//! pattern-enumeration oracle for small item counts.

use nalgebra::{DMatrix, SymmetricEigen};
use ndarray::{s, Array2};
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::exec::Execution;
use crate::matrix::BinaryMatrix;
use crate::model::{effective_df, ModelParameters};
use crate::numeric::{log_sigmoid, log_sum_exp, sigmoid};

pub const DEFAULT_NODES_PER_DIM: usize = 21;
/// Largest latent dimension for which the tensor-product rule is built.
pub const MAX_TENSOR_DIM: usize = 4;
pub const MAX_ENUMERATION_ITEMS: usize = 12;

/// Tensor-product Gauss-Hermite rule for expectations under N(0, I_D).
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct QuadratureRule {
    pub nodes_per_dim: usize,
    pub dimensions: usize,
    /// 1-D abscissas for the standard normal weight.
    pub nodes: Vec<f64>,
    /// 1-D weights, summing to one.
    pub weights: Vec<f64>,
    /// Tensor nodes, row-major `points.len() / D` by D.
    points: Vec<f64>,
    log_weights: Vec<f64>,
}

impl QuadratureRule {
    pub fn new(nodes_per_dim: usize, dimensions: usize) -> Result<Self> {
        if nodes_per_dim == 0 {
            return invalid("quadrature needs at least one node");
        }
        if dimensions == 0 {
            return invalid("dimensions must be >= 1");
        }
        if dimensions > MAX_TENSOR_DIM {
            return Err(Error::Unsupported(format!(
                "tensor Gauss-Hermite quadrature is limited to D <= {MAX_TENSOR_DIM} (got D = {dimensions})"
            )));
        }
        let (nodes, weights) = hermite_rule(nodes_per_dim)?;
        let total = nodes_per_dim.pow(dimensions as u32);
        let mut points = Vec::with_capacity(total * dimensions);
        let mut log_weights = Vec::with_capacity(total);
        for flat in 0..total {
            let mut rem = flat;
            let mut lw = 0.0;
            for _ in 0..dimensions {
                let k = rem % nodes_per_dim;
                rem /= nodes_per_dim;
                points.push(nodes[k]);
                lw += weights[k].ln();
            }
            log_weights.push(lw);
        }
        Ok(QuadratureRule {
            nodes_per_dim,
            dimensions,
            nodes,
            weights,
            points,
            log_weights,
        })
    }

    pub fn len(&self) -> usize {
        self.log_weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.log_weights.is_empty()
    }

    pub fn point(&self, k: usize) -> &[f64] {
        &self.points[k * self.dimensions..(k + 1) * self.dimensions]
    }

    pub fn weight(&self, k: usize) -> f64 {
        self.log_weights[k].exp()
    }

    pub fn log_weight(&self, k: usize) -> f64 {
        self.log_weights[k]
    }
}

/// Orthonormal probabilists' Hermite polynomials p_0..p_{n} at `x`.
fn orthonormal_hermite(n: usize, x: f64) -> Vec<f64> {
    let mut p = Vec::with_capacity(n + 1);
    p.push(1.0);
    if n >= 1 {
        p.push(x);
    }
    for j in 1..n {
        let next = (x * p[j] - (j as f64).sqrt() * p[j - 1]) / ((j + 1) as f64).sqrt();
        p.push(next);
    }
    p
}

/// Nodes and weights of the n-point rule for the standard normal density.
///
/// Nodes start from the eigenvalues of the Jacobi matrix and are polished by
/// Newton steps; weights use the Christoffel formula, which keeps the small
/// tail weights accurate.
fn hermite_rule(n: usize) -> Result<(Vec<f64>, Vec<f64>)> {
    let jacobi = DMatrix::from_fn(n, n, |i, j| {
        if i + 1 == j || j + 1 == i {
            (i.max(j) as f64).sqrt()
        } else {
            0.0
        }
    });
    let mut nodes: Vec<f64> = SymmetricEigen::new(jacobi).eigenvalues.iter().copied().collect();
    nodes.sort_by(|a, b| a.partial_cmp(b).expect("finite eigenvalues"));
    for x in nodes.iter_mut() {
        for _ in 0..4 {
            let p = orthonormal_hermite(n, *x);
            let deriv = (n as f64).sqrt() * p[n - 1];
            if deriv == 0.0 {
                break;
            }
            let step = p[n] / deriv;
            *x -= step;
            if step.abs() < 1e-15 * x.abs().max(1.0) {
                break;
            }
        }
    }
    let weights: Vec<f64> = nodes
        .iter()
        .map(|&x| 1.0 / orthonormal_hermite(n - 1, x).iter().map(|v| v * v).sum::<f64>())
        .collect();
    if weights.iter().any(|w| !(w.is_finite() && *w > 0.0)) {
        return Err(Error::NumericalFailure("Gauss-Hermite weights not positive".into()));
    }
    Ok((nodes, weights))
}

fn check_rule(params: &ModelParameters, rule: &QuadratureRule) -> Result<()> {
    if rule.dimensions != params.dimensions() {
        return invalid(format!(
            "rule dimension {} does not match model dimension {}",
            rule.dimensions,
            params.dimensions()
        ));
    }
    Ok(())
}

/// Linear predictors `alpha_m + w_m'y_k` for every node k and item m of one
/// component, K x M.
fn predictors(params: &ModelParameters, g: usize, rule: &QuadratureRule) -> Array2<f64> {
    let m_items = params.n_items();
    let mut a = Array2::zeros((rule.len(), m_items));
    for k in 0..rule.len() {
        let y = rule.point(k);
        for m in 0..m_items {
            let w = params.weights.slice(s![g, m, ..]);
            a[[k, m]] = params.alpha[[g, m]] + w.iter().zip(y).map(|(a, b)| a * b).sum::<f64>();
        }
    }
    a
}

/// Log marginal component densities `log p(x_i | theta_g)`, n x G.
///
/// Uses `log p(x | y) = sum_m log sigmoid(-a_m) + sum_{m: x_m = 1} a_m`, so the
/// per-row cost is proportional to the row's nonzeros.
pub fn component_log_densities(
    data: &BinaryMatrix,
    params: &ModelParameters,
    rule: &QuadratureRule,
    exec: Execution,
) -> Result<Array2<f64>> {
    check_rule(params, rule)?;
    if data.n_cols() != params.n_items() {
        return invalid("data and parameters disagree on the number of items");
    }
    let g_count = params.n_components();
    let per_component: Vec<(Array2<f64>, Vec<f64>)> = (0..g_count)
        .map(|g| {
            let a = predictors(params, g, rule);
            let base: Vec<f64> = (0..rule.len())
                .map(|k| rule.log_weight(k) + a.row(k).iter().map(|&v| log_sigmoid(-v)).sum::<f64>())
                .collect();
            (a, base)
        })
        .collect();
    let rows = exec.map(data.n_rows(), |i| {
        let ones = data.row(i);
        let mut terms = vec![0.0; rule.len()];
        (0..g_count)
            .map(|g| {
                let (a, base) = &per_component[g];
                for k in 0..rule.len() {
                    terms[k] = base[k] + ones.iter().map(|&m| a[[k, m]]).sum::<f64>();
                }
                log_sum_exp(&terms)
            })
            .collect::<Vec<f64>>()
    });
    let mut out = Array2::zeros((data.n_rows(), g_count));
    for (i, row) in rows.into_iter().enumerate() {
        for (g, v) in row.into_iter().enumerate() {
            out[[i, g]] = v;
        }
    }
    Ok(out)
}

/// Quadrature log-likelihood `sum_i log sum_g eta_g p(x_i | theta_g)`.
pub fn gh_log_likelihood(
    data: &BinaryMatrix,
    params: &ModelParameters,
    rule: &QuadratureRule,
    exec: Execution,
) -> Result<f64> {
    let dens = component_log_densities(data, params, rule, exec)?;
    let log_eta: Vec<f64> = params.eta.iter().map(|e| e.ln()).collect();
    let mut total = 0.0;
    let mut buf = vec![0.0; log_eta.len()];
    for row in dens.rows() {
        for (g, v) in row.iter().enumerate() {
            buf[g] = log_eta[g] + v;
        }
        total += log_sum_exp(&buf);
    }
    if !total.is_finite() {
        return Err(Error::NumericalFailure("quadrature log-likelihood is not finite".into()));
    }
    Ok(total)
}

/// `-2 l + k log n`.
pub fn bic(log_likelihood: f64, df: usize, n: usize) -> f64 {
    bic_with_log_n(log_likelihood, df, (n as f64).ln())
}

fn bic_with_log_n(log_likelihood: f64, df: usize, log_n: f64) -> f64 {
    -2.0 * log_likelihood + df as f64 * log_n
}

/// BIC of fitted parameters with the quadrature log-likelihood and the
/// effective degrees of freedom. Returns `(bic, log_likelihood, df)`.
pub fn gh_bic(
    data: &BinaryMatrix,
    params: &ModelParameters,
    zero_tol: f64,
    rule: &QuadratureRule,
    exec: Execution,
) -> Result<(f64, f64, usize)> {
    let ll = gh_log_likelihood(data, params, rule, exec)?;
    let df = effective_df(params, zero_tol);
    Ok((bic(ll, df, data.n_rows()), ll, df))
}

/// Probabilities of all 2^M response patterns for each component.
///
/// `table[g][p]` is the probability of the pattern whose bit m (least
/// significant first) is x_m. Computed on the probability scale as
/// `sum_k w_k prod_m pi_km^x_m (1 - pi_km)^(1 - x_m)`.
#[derive(Debug, Clone)]
pub struct PatternTable {
    pub items: usize,
    pub table: Vec<Vec<f64>>,
}

impl PatternTable {
    pub fn pattern_index(row: &[u8]) -> usize {
        row.iter()
            .enumerate()
            .map(|(m, &x)| (x as usize) << m)
            .sum()
    }

    /// Mixture log-likelihood of a data set implied by the table.
    pub fn log_likelihood(&self, data: &BinaryMatrix, eta: &[f64]) -> Result<f64> {
        if data.n_cols() != self.items {
            return invalid("data and table disagree on the number of items");
        }
        let mut total = 0.0;
        for i in 0..data.n_rows() {
            let p = Self::pattern_index(&data.dense_row(i));
            let mix: f64 = eta.iter().zip(&self.table).map(|(e, t)| e * t[p]).sum();
            total += mix.ln();
        }
        Ok(total)
    }

    /// Marginal probability that item m is positive in component g.
    pub fn item_marginal(&self, g: usize, m: usize) -> f64 {
        self.table[g]
            .iter()
            .enumerate()
            .filter(|(p, _)| p >> m & 1 == 1)
            .map(|(_, v)| v)
            .sum()
    }
}

pub fn enumeration_oracle(params: &ModelParameters, rule: &QuadratureRule) -> Result<PatternTable> {
    check_rule(params, rule)?;
    let m_items = params.n_items();
    if m_items > MAX_ENUMERATION_ITEMS {
        return invalid(format!(
            "enumeration is limited to M <= {MAX_ENUMERATION_ITEMS} (got {m_items})"
        ));
    }
    let patterns = 1usize << m_items;
    let mut table = Vec::with_capacity(params.n_components());
    for g in 0..params.n_components() {
        let a = predictors(params, g, rule);
        let mut probs = vec![0.0; patterns];
        for k in 0..rule.len() {
            let pi: Vec<f64> = a.row(k).iter().map(|&v| sigmoid(v)).collect();
            let wk = rule.weight(k);
            for (p, slot) in probs.iter_mut().enumerate() {
                let mut prod = wk;
                for (m, &pm) in pi.iter().enumerate() {
                    prod *= if p >> m & 1 == 1 { pm } else { 1.0 - pm };
                }
                *slot += prod;
            }
        }
        table.push(probs);
    }
    Ok(PatternTable {
        items: m_items,
        table,
    })
}
