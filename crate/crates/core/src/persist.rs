//! File formats for fitted models, traces, assignments, grid tables and
//! replication reports.

use std::io::{Read, Write};

use ndarray::{Array1, Array2, Array3};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{Hyperparameters, ModelParameters};
use crate::selection::GridResult;
use crate::simulation::ReplicationReport;
use crate::vem::{FitConfig, FitResult, InitStrategy, PenaltyMode, RestartSummary};

pub const MODEL_FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceSummary {
    pub iterations: usize,
    pub converged: bool,
    pub initial_bound: f64,
    pub final_bound: f64,
    pub monotonicity_violations: usize,
    pub max_relative_decrease: f64,
}

/// Versioned JSON form of a fitted model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelDocument {
    pub format_version: u32,
    pub hyperparameters: Hyperparameters,
    pub penalty: PenaltyMode,
    pub init: InitStrategy,
    pub quad_nodes: usize,
    /// Seed of the winning restart.
    pub seed: u64,
    pub components: usize,
    pub dimensions: usize,
    pub items: usize,
    pub item_names: Option<Vec<String>>,
    pub eta: Vec<f64>,
    /// `[g][m]`
    pub alpha: Vec<Vec<f64>>,
    /// `[g][m][d]`
    pub weights: Vec<Vec<Vec<f64>>>,
    /// `[g][m]`
    pub lambda: Vec<Vec<f64>>,
    pub standardized_loadings: Vec<Vec<Vec<f64>>>,
    pub median_probabilities: Vec<Vec<f64>>,
    pub trace: TraceSummary,
    pub variational_log_lik: f64,
    pub quad_log_lik: Option<f64>,
    pub quad_log_posterior: Option<f64>,
    pub bic: Option<f64>,
    pub effective_df: usize,
    pub restarts: Vec<RestartSummary>,
}

fn rows2(a: &Array2<f64>) -> Vec<Vec<f64>> {
    a.rows().into_iter().map(|r| r.to_vec()).collect()
}

fn rows3(a: &Array3<f64>) -> Vec<Vec<Vec<f64>>> {
    a.outer_iter().map(|m| rows2(&m.to_owned())).collect()
}

fn array2(rows: &[Vec<f64>], what: &str) -> Result<Array2<f64>> {
    let r = rows.len();
    let c = rows.first().map_or(0, Vec::len);
    if rows.iter().any(|row| row.len() != c) {
        return Err(Error::Parse(format!("ragged {what}")));
    }
    Array2::from_shape_vec((r, c), rows.concat()).map_err(|e| Error::Parse(format!("{what}: {e}")))
}

fn array3(blocks: &[Vec<Vec<f64>>], what: &str) -> Result<Array3<f64>> {
    let g = blocks.len();
    let m = blocks.first().map_or(0, Vec::len);
    let d = blocks.first().and_then(|b| b.first()).map_or(0, Vec::len);
    let mut flat = Vec::with_capacity(g * m * d);
    for b in blocks {
        if b.len() != m || b.iter().any(|row| row.len() != d) {
            return Err(Error::Parse(format!("ragged {what}")));
        }
        for row in b {
            flat.extend_from_slice(row);
        }
    }
    Array3::from_shape_vec((g, m, d), flat).map_err(|e| Error::Parse(format!("{what}: {e}")))
}

impl ModelDocument {
    pub fn from_fit(result: &FitResult, config: &FitConfig, item_names: Option<&[String]>) -> Self {
        let p = &result.params;
        ModelDocument {
            format_version: MODEL_FORMAT_VERSION,
            hyperparameters: config.hyper.clone(),
            penalty: config.penalty,
            init: config.init,
            quad_nodes: config.quad_nodes,
            seed: result.seed,
            components: p.n_components(),
            dimensions: p.dimensions(),
            items: p.n_items(),
            item_names: item_names.map(<[String]>::to_vec),
            eta: p.eta.to_vec(),
            alpha: rows2(&p.alpha),
            weights: rows3(&p.weights),
            lambda: rows2(&p.lambda),
            standardized_loadings: rows3(&p.standardized_loadings()),
            median_probabilities: rows2(&p.median_response_probabilities()),
            trace: TraceSummary {
                iterations: result.iterations,
                converged: result.converged,
                initial_bound: result.trace[0],
                final_bound: result.final_bound(),
                monotonicity_violations: result.monotonicity_violations,
                max_relative_decrease: result.max_relative_decrease,
            },
            variational_log_lik: result.variational_log_lik,
            quad_log_lik: result.quad_log_lik,
            quad_log_posterior: result.quad_log_posterior,
            bic: result.bic,
            effective_df: result.effective_df,
            restarts: result.restarts.clone(),
        }
    }

    /// Rebuilds and validates the parameter arrays.
    pub fn to_params(&self) -> Result<ModelParameters> {
        if self.format_version != MODEL_FORMAT_VERSION {
            return Err(Error::Parse(format!(
                "unsupported model format version {} (expected {MODEL_FORMAT_VERSION})",
                self.format_version
            )));
        }
        let p = ModelParameters {
            eta: Array1::from(self.eta.clone()),
            alpha: array2(&self.alpha, "alpha")?,
            weights: array3(&self.weights, "weights")?,
            lambda: array2(&self.lambda, "lambda")?,
        };
        if p.alpha.dim() != (self.components, self.items)
            || p.weights.dim() != (self.components, self.items, self.dimensions)
            || p.lambda.dim() != p.alpha.dim()
        {
            return Err(Error::Parse("parameter shapes disagree with the declared sizes".into()));
        }
        p.validate()?;
        Ok(p)
    }

    pub fn write_json<W: Write>(&self, w: W) -> Result<()> {
        serde_json::to_writer_pretty(w, self)?;
        Ok(())
    }

    pub fn read_json<R: Read>(r: R) -> Result<Self> {
        Ok(serde_json::from_reader(r)?)
    }
}

/// `iteration,bound,aitken_estimate`; iteration 0 is the starting point.
pub fn write_trace_csv<W: Write>(result: &FitResult, w: W) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record(["iteration", "bound", "aitken_estimate"])?;
    for (t, (b, a)) in result.trace.iter().zip(&result.aitken).enumerate() {
        out.write_record([t.to_string(), b.to_string(), a.map(|v| v.to_string()).unwrap_or_default()])?;
    }
    out.flush()?;
    Ok(())
}

/// `id,label,max_responsibility`; row indices (from 1) stand in for
/// missing identifiers.
pub fn write_assignments_csv<W: Write>(result: &FitResult, ids: Option<&[String]>, w: W) -> Result<()> {
    let labels = &result.labels;
    if let Some(ids) = ids {
        if ids.len() != labels.len() {
            return Err(Error::InvalidArgument(format!(
                "{} identifiers for {} observations",
                ids.len(),
                labels.len()
            )));
        }
    }
    let mut out = csv::Writer::from_writer(w);
    out.write_record(["id", "label", "max_responsibility"])?;
    for (i, (l, r)) in labels.iter().zip(result.state.max_responsibility()).enumerate() {
        let id = ids.map_or_else(|| (i + 1).to_string(), |v| v[i].clone());
        out.write_record([id, l.to_string(), r.to_string()])?;
    }
    out.flush()?;
    Ok(())
}

fn opt<T: ToString>(v: Option<T>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

/// One row per grid cell, with the winning cell flagged.
pub fn write_grid_csv<W: Write>(grid: &GridResult, w: W) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record([
        "components",
        "dimensions",
        "shape",
        "rate",
        "bic",
        "quad_log_lik",
        "effective_df",
        "converged",
        "iterations",
        "best",
        "error",
    ])?;
    for (k, c) in grid.cells.iter().enumerate() {
        out.write_record([
            c.components.to_string(),
            c.dimensions.to_string(),
            c.shape.to_string(),
            c.rate.to_string(),
            opt(c.bic),
            opt(c.quad_log_lik),
            opt(c.effective_df),
            c.converged.to_string(),
            c.iterations.to_string(),
            (k == grid.best).to_string(),
            c.error.clone().unwrap_or_default(),
        ])?;
    }
    out.flush()?;
    Ok(())
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GridDocument {
    pub cells: Vec<crate::selection::GridCell>,
    pub best: usize,
    pub best_model: ModelDocument,
}

impl GridDocument {
    pub fn new(grid: &GridResult, item_names: Option<&[String]>) -> Self {
        GridDocument {
            cells: grid.cells.clone(),
            best: grid.best,
            best_model: ModelDocument::from_fit(&grid.best_fit, &grid.best_config, item_names),
        }
    }
}

/// The replication table: one row per `(s, r)` pair.
pub fn write_replication_csv<W: Write>(report: &ReplicationReport, w: W) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record(["shape", "rate", "mean_bic", "se_bic", "mean_ari", "se_ari", "replicates", "failures"])?;
    for r in &report.rows {
        out.write_record([
            r.shape.to_string(),
            r.rate.to_string(),
            opt(r.mean_bic),
            opt(r.se_bic),
            opt(r.mean_ari),
            opt(r.se_ari),
            r.replicates.to_string(),
            r.failures.to_string(),
        ])?;
    }
    out.flush()?;
    Ok(())
}

/// One label per line (blank lines ignored). A file whose first line is a
/// CSV header containing a `label` column is read as CSV and that column is
/// used, so assignment files can be compared directly.
pub fn read_labels<R: Read>(mut r: R) -> Result<Vec<String>> {
    let mut text = String::new();
    r.read_to_string(&mut text)?;
    let first = text.lines().next().unwrap_or("");
    let header: Vec<&str> = first.split(',').map(str::trim).collect();
    if let Some(col) = header.iter().position(|&h| h == "label") {
        let mut rdr = csv::Reader::from_reader(text.as_bytes());
        let mut out = Vec::new();
        for rec in rdr.records() {
            let rec = rec?;
            let v = rec
                .get(col)
                .ok_or_else(|| Error::Parse(format!("row {} lacks a label column", out.len() + 1)))?;
            out.push(v.trim().to_string());
        }
        return Ok(out);
    }
    Ok(text.lines().map(str::trim).filter(|l| !l.is_empty()).map(String::from).collect())
}
