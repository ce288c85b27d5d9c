//! Grid search over (G, D, s, r) ranked by quadrature BIC, and the adjusted
//! Rand index for comparing partitions.

use std::collections::HashMap;
use std::hash::Hash;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::BinaryMatrix;
use crate::vem::{fit, FitConfig, FitResult};

/// Hubert-Arabie adjusted Rand index from the pair-counting contingency
/// table. Returns 1 when both partitions are trivial in the same way (one
/// block, or all singletons), where the usual ratio is 0/0.
pub fn adjusted_rand_index<A, B>(labels_a: &[A], labels_b: &[B]) -> Result<f64>
where
    A: Eq + Hash,
    B: Eq + Hash,
{
    if labels_a.len() != labels_b.len() {
        return Err(Error::InvalidArgument(format!(
            "label vectors differ in length ({} vs {})",
            labels_a.len(),
            labels_b.len()
        )));
    }
    let n = labels_a.len();
    if n < 2 {
        return Err(Error::InvalidArgument("ARI needs at least two observations".into()));
    }
    let ia = dense_codes(labels_a);
    let ib = dense_codes(labels_b);
    let mut table: HashMap<(usize, usize), u64> = HashMap::new();
    let mut rows: HashMap<usize, u64> = HashMap::new();
    let mut cols: HashMap<usize, u64> = HashMap::new();
    for (&a, &b) in ia.iter().zip(&ib) {
        *table.entry((a, b)).or_default() += 1;
        *rows.entry(a).or_default() += 1;
        *cols.entry(b).or_default() += 1;
    }
    // Everything is an integer pair count, so the ratio is formed exactly
    // and rounded once.
    let pairs = |c: u64| i128::from(c) * (i128::from(c) - 1) / 2;
    let index: i128 = table.values().map(|&c| pairs(c)).sum();
    let sum_a: i128 = rows.values().map(|&c| pairs(c)).sum();
    let sum_b: i128 = cols.values().map(|&c| pairs(c)).sum();
    let total = pairs(n as u64);
    let num = 2 * total * index - 2 * sum_a * sum_b;
    let denom = total * (sum_a + sum_b) - 2 * sum_a * sum_b;
    if denom == 0 {
        return Ok(1.0);
    }
    Ok(num as f64 / denom as f64)
}

fn dense_codes<T: Eq + Hash>(labels: &[T]) -> Vec<usize> {
    let mut codes: HashMap<&T, usize> = HashMap::new();
    labels
        .iter()
        .map(|l| {
            let next = codes.len();
            *codes.entry(l).or_insert(next)
        })
        .collect()
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GridSpec {
    pub components: Vec<usize>,
    pub dimensions: Vec<usize>,
    /// Gamma hyperparameter pairs `(s, r)`.
    pub sr_pairs: Vec<(f64, f64)>,
    /// Template for every cell; G, D, s and r are overwritten per cell.
    pub base: FitConfig,
}

impl GridSpec {
    pub fn new(components: Vec<usize>, dimensions: Vec<usize>, sr_pairs: Vec<(f64, f64)>, base: FitConfig) -> Self {
        GridSpec { components, dimensions, sr_pairs, base }
    }

    /// The hyperparameter grid used in the simulation study.
    pub fn default_sr_pairs() -> Vec<(f64, f64)> {
        vec![(0.1, 0.5), (0.5, 0.5), (1.0, 0.5), (2.0, 0.5)]
    }

    pub fn cell_configs(&self) -> Vec<FitConfig> {
        let mut out = Vec::new();
        for &g in &self.components {
            for &d in &self.dimensions {
                for &(s, r) in &self.sr_pairs {
                    let mut cfg = self.base.clone();
                    cfg.hyper.components = g;
                    cfg.hyper.dimensions = d;
                    cfg.hyper.shape = s;
                    cfg.hyper.rate = r;
                    out.push(cfg);
                }
            }
        }
        out
    }

    pub fn validate(&self) -> Result<()> {
        if self.components.is_empty() || self.dimensions.is_empty() || self.sr_pairs.is_empty() {
            return Err(Error::InvalidArgument("grid lists must be nonempty".into()));
        }
        for cfg in self.cell_configs() {
            cfg.validate()?;
        }
        Ok(())
    }
}

/// One row of the grid table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridCell {
    pub components: usize,
    pub dimensions: usize,
    pub shape: f64,
    pub rate: f64,
    pub bic: Option<f64>,
    pub quad_log_lik: Option<f64>,
    pub effective_df: Option<usize>,
    pub converged: bool,
    pub iterations: usize,
    pub final_bound: Option<f64>,
    pub error: Option<String>,
}

#[derive(Debug, Clone)]
pub struct GridResult {
    pub cells: Vec<GridCell>,
    /// Index into `cells` of the minimum-BIC cell.
    pub best: usize,
    pub best_config: FitConfig,
    pub best_fit: FitResult,
}

impl GridResult {
    pub fn best_cell(&self) -> &GridCell {
        &self.cells[self.best]
    }
}

fn summarize(cfg: &FitConfig, outcome: &Result<FitResult>) -> GridCell {
    let h = &cfg.hyper;
    let mut cell = GridCell {
        components: h.components,
        dimensions: h.dimensions,
        shape: h.shape,
        rate: h.rate,
        bic: None,
        quad_log_lik: None,
        effective_df: None,
        converged: false,
        iterations: 0,
        final_bound: None,
        error: None,
    };
    match outcome {
        Ok(f) => {
            cell.bic = f.bic;
            cell.quad_log_lik = f.quad_log_lik;
            cell.effective_df = Some(f.effective_df);
            cell.converged = f.converged;
            cell.iterations = f.iterations;
            cell.final_bound = Some(f.final_bound());
            if f.bic.is_none() {
                cell.error = Some("BIC unavailable for this dimension".into());
            }
        }
        Err(e) => cell.error = Some(e.to_string()),
    }
    cell
}

/// Orders cells by BIC, then effective degrees of freedom, then G, then D.
fn better(a: &GridCell, b: &GridCell) -> bool {
    let (Some(ba), Some(bb)) = (a.bic, b.bic) else {
        return a.bic.is_some();
    };
    if ba != bb {
        return ba < bb;
    }
    let key = |c: &GridCell| (c.effective_df.unwrap_or(usize::MAX), c.components, c.dimensions);
    key(a) < key(b)
}

/// Fits every cell of the grid with the same master seed. Cells run
/// through the template's execution mode; only the summary of each cell is
/// kept, and the winning cell is refitted (deterministically) to return
/// its full result without holding every cell's variational state.
pub fn grid_search(data: &BinaryMatrix, spec: &GridSpec) -> Result<GridResult> {
    spec.validate()?;
    let configs = spec.cell_configs();
    let cells: Vec<GridCell> = spec.base.execution.map(configs.len(), |k| {
        let outcome = fit(data, &configs[k]);
        summarize(&configs[k], &outcome)
    });
    let mut best: Option<usize> = None;
    for (k, cell) in cells.iter().enumerate() {
        if cell.bic.map_or(true, |b| !b.is_finite()) {
            continue;
        }
        if best.map_or(true, |b| better(cell, &cells[b])) {
            best = Some(k);
        }
    }
    let Some(best) = best else {
        let reasons = cells
            .iter()
            .map(|c| format!("(G={}, D={}, s={}, r={}): {}", c.components, c.dimensions, c.shape, c.rate, c.error.as_deref().unwrap_or("?")))
            .collect::<Vec<_>>()
            .join("; ");
        return Err(Error::SelectionFailure(format!("no grid cell produced a finite BIC: {reasons}")));
    };
    let best_config = configs[best].clone();
    let best_fit = fit(data, &best_config)?;
    Ok(GridResult { cells, best, best_config, best_fit })
}
