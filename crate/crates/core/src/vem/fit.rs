use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::aitken::AitkenTracker;
use super::bound::{evaluate_bound, BoundPieces};
use super::estep::{ve_step_latent_moments, ve_step_rates, ve_step_responsibilities};
use super::init::initialize;
use super::mstep::{m_step_mixing_proportions, m_step_weights_intercepts, m_step_xi};
use super::state::VariationalState;
use crate::error::{Error, Result};
use crate::exec::Execution;
use crate::matrix::BinaryMatrix;
use crate::model::{effective_df, Hyperparameters, ModelParameters};
use crate::quadrature::{gh_bic, QuadratureRule, DEFAULT_NODES_PER_DIM, MAX_TENSOR_DIM};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum InitStrategy {
    #[default]
    RandomResponsibilities,
    KmeansSeeded,
}

/// Whether slopes carry the gamma-Laplace prior. `Disabled` fits the
/// unpenalized model (all Laplace rates forced to zero).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PenaltyMode {
    #[default]
    GammaLaplace,
    Disabled,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitConfig {
    pub hyper: Hyperparameters,
    pub init: InitStrategy,
    pub penalty: PenaltyMode,
    /// Relative decrease of the objective tolerated before a cycle is
    /// reported as non-monotone.
    pub objective_guard_tol: f64,
    /// Gauss-Hermite nodes per latent dimension for the post-fit likelihood.
    pub quad_nodes: usize,
    pub execution: Execution,
}

impl FitConfig {
    pub fn new(hyper: Hyperparameters) -> Self {
        FitConfig {
            hyper,
            init: InitStrategy::default(),
            penalty: PenaltyMode::default(),
            objective_guard_tol: 1e-8,
            quad_nodes: DEFAULT_NODES_PER_DIM,
            execution: Execution::default(),
        }
    }

    /// `(s, r)` when the penalty is active.
    pub fn penalty_hyper(&self) -> Option<(f64, f64)> {
        match self.penalty {
            PenaltyMode::GammaLaplace => Some((self.hyper.shape, self.hyper.rate)),
            PenaltyMode::Disabled => None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.hyper.validate()?;
        if self.quad_nodes == 0 {
            return Err(Error::InvalidArgument("quad_nodes must be >= 1".into()));
        }
        if !(self.objective_guard_tol >= 0.0) {
            return Err(Error::InvalidArgument("objective_guard_tol must be >= 0".into()));
        }
        Ok(())
    }
}

/// Outcome of one restart.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RestartSummary {
    pub index: usize,
    pub seed: u64,
    pub final_bound: Option<f64>,
    pub iterations: usize,
    pub converged: bool,
    pub error: Option<String>,
}

#[derive(Debug, Clone)]
pub struct FitResult {
    pub params: ModelParameters,
    pub state: VariationalState,
    /// Objective after initialization followed by one value per cycle.
    pub trace: Vec<f64>,
    /// Aitken limit estimate alongside each trace entry, when defined.
    pub aitken: Vec<Option<f64>>,
    pub converged: bool,
    pub iterations: usize,
    /// Largest relative decrease seen between successive trace values
    /// (0 for a monotone trace).
    pub max_relative_decrease: f64,
    pub monotonicity_violations: usize,
    /// Final `sum_i log sum_g eta_g exp(L(xi_ig))`.
    pub variational_log_lik: f64,
    /// Gauss-Hermite log-likelihood; `None` when D exceeds the tensor cap.
    pub quad_log_lik: Option<f64>,
    /// Quadrature log-likelihood minus the gamma-Laplace penalty.
    pub quad_log_posterior: Option<f64>,
    pub bic: Option<f64>,
    pub effective_df: usize,
    pub labels: Vec<usize>,
    pub seed: u64,
    pub restarts: Vec<RestartSummary>,
}

impl FitResult {
    pub fn final_bound(&self) -> f64 {
        *self.trace.last().expect("trace is never empty")
    }
}

/// One VEM run from a given starting point.
#[derive(Debug, Clone)]
pub struct Run {
    pub params: ModelParameters,
    pub state: VariationalState,
    pub bound: BoundPieces,
    pub trace: Vec<f64>,
    pub aitken: Vec<Option<f64>>,
    pub converged: bool,
    pub iterations: usize,
    pub max_relative_decrease: f64,
    pub monotonicity_violations: usize,
}

/// Runs VEM cycles from `params`/`state` until the Aitken rule fires or
/// `max_iter` cycles have run. The first cycle keeps the starting
/// responsibilities; later cycles recompute them from the previous bound.
pub fn fit_from(
    data: &BinaryMatrix,
    config: &FitConfig,
    mut params: ModelParameters,
    mut state: VariationalState,
) -> Result<Run> {
    let hyper = &config.hyper;
    let exec = config.execution;
    let penalty = config.penalty_hyper();

    let mut bound = evaluate_bound(data, &params, &state, penalty, exec)?;
    let mut trace = vec![bound.total];
    let mut tracker = AitkenTracker::new();
    tracker.push(bound.total);
    let mut aitken = vec![None];
    let mut converged = false;
    let mut iterations = 0;
    let mut max_relative_decrease: f64 = 0.0;
    let mut violations = 0;

    while iterations < hyper.max_iter {
        iterations += 1;
        if iterations > 1 {
            state.z = ve_step_responsibilities(&params, &bound)?;
        }
        let (mu, sigma) = ve_step_latent_moments(data, &params, &state, exec)?;
        state.mu = mu;
        state.sigma = sigma;
        let lambda = match penalty {
            Some((s, r)) => ve_step_rates(&params, s, r),
            None => ndarray::Array2::zeros(params.alpha.dim()),
        };

        state.xi = m_step_xi(&params, &state, hyper.xi_max, exec);
        let (weights, alpha) =
            m_step_weights_intercepts(data, &params, &state, &lambda, hyper.zero_tol, exec)?;
        params.weights = weights;
        params.alpha = alpha;
        params.eta = m_step_mixing_proportions(&state.z)?;
        if penalty.is_some() {
            params.lambda = lambda;
        }

        bound = evaluate_bound(data, &params, &state, penalty, exec).map_err(|e| {
            Error::NumericalFailure(format!("iteration {iterations}: {e}"))
        })?;
        let prev = *trace.last().expect("non-empty");
        let rel = (prev - bound.total) / prev.abs().max(1.0);
        if rel > 0.0 {
            max_relative_decrease = max_relative_decrease.max(rel);
            if rel > config.objective_guard_tol {
                violations += 1;
                log::warn!(
                    "objective decreased at iteration {iterations}: {prev} -> {} (relative {rel:.3e})",
                    bound.total
                );
            }
        }
        trace.push(bound.total);
        tracker.push(bound.total);
        aitken.push(tracker.estimate());
        if tracker.converged(hyper.aitken_tol) {
            converged = true;
            break;
        }
    }
    // Responsibilities consistent with the final parameters.
    state.z = ve_step_responsibilities(&params, &bound)?;
    Ok(Run {
        params,
        state,
        bound,
        trace,
        aitken,
        converged,
        iterations,
        max_relative_decrease,
        monotonicity_violations: violations,
    })
}

/// Seed of restart `index` derived from the master seed.
pub(crate) fn derived_seed(master: u64, index: u64) -> u64 {
    let mut rng = ChaCha8Rng::seed_from_u64(master);
    rng.set_stream(index);
    rng.next_u64()
}

/// Fits the model with `restarts` random starts and keeps the run with the
/// highest final bound (ties: fewer iterations, then lower restart index).
/// The quadrature log-likelihood, BIC and effective degrees of freedom are
/// filled in for the winning run.
pub fn fit(data: &BinaryMatrix, config: &FitConfig) -> Result<FitResult> {
    config.validate()?;
    let hyper = &config.hyper;
    if data.n_rows() == 0 || data.n_cols() == 0 {
        return Err(Error::InvalidArgument("empty data matrix".into()));
    }
    if hyper.components > data.n_rows() {
        return Err(Error::InvalidArgument(format!(
            "G = {} exceeds n = {}",
            hyper.components,
            data.n_rows()
        )));
    }
    let runs = config.execution.map(hyper.restarts, |k| {
        let seed = derived_seed(hyper.seed, k as u64);
        let run = initialize(data, config, seed).and_then(|(p, s)| fit_from(data, config, p, s));
        (seed, run)
    });

    let mut summaries = Vec::with_capacity(runs.len());
    let mut best: Option<(usize, u64, Run)> = None;
    for (k, (seed, run)) in runs.into_iter().enumerate() {
        match run {
            Ok(run) => {
                summaries.push(RestartSummary {
                    index: k,
                    seed,
                    final_bound: Some(run.bound.total),
                    iterations: run.iterations,
                    converged: run.converged,
                    error: None,
                });
                let better = match &best {
                    None => true,
                    Some((_, _, b)) => {
                        run.bound.total > b.bound.total
                            || (run.bound.total == b.bound.total && run.iterations < b.iterations)
                    }
                };
                if better {
                    best = Some((k, seed, run));
                }
            }
            Err(e) => {
                log::warn!("restart {k} failed: {e}");
                summaries.push(RestartSummary {
                    index: k,
                    seed,
                    final_bound: None,
                    iterations: 0,
                    converged: false,
                    error: Some(e.to_string()),
                });
            }
        }
    }
    let Some((_, seed, run)) = best else {
        let diagnostics = summaries
            .iter()
            .map(|s| format!("restart {} (seed {}): {}", s.index, s.seed, s.error.as_deref().unwrap_or("?")))
            .collect::<Vec<_>>()
            .join("; ");
        return Err(Error::FitFailure {
            restarts: hyper.restarts,
            diagnostics,
        });
    };

    let df = effective_df(&run.params, hyper.zero_tol);
    let (bic, quad_ll) = if hyper.dimensions <= MAX_TENSOR_DIM {
        let rule = QuadratureRule::new(config.quad_nodes, hyper.dimensions)?;
        let (bic, ll, _) = gh_bic(data, &run.params, hyper.zero_tol, &rule, config.execution)?;
        (Some(bic), Some(ll))
    } else {
        log::warn!(
            "D = {} exceeds the quadrature cap of {MAX_TENSOR_DIM}; BIC unavailable",
            hyper.dimensions
        );
        (None, None)
    };
    let quad_log_posterior = quad_ll.map(|ll| match config.penalty_hyper() {
        Some((s, r)) => ll - run.params.total_penalty(s, r),
        None => ll,
    });
    let labels = run.state.labels();
    Ok(FitResult {
        variational_log_lik: run.bound.data_term,
        params: run.params,
        state: run.state,
        trace: run.trace,
        aitken: run.aitken,
        converged: run.converged,
        iterations: run.iterations,
        max_relative_decrease: run.max_relative_decrease,
        monotonicity_violations: run.monotonicity_violations,
        quad_log_lik: quad_ll,
        quad_log_posterior,
        bic,
        effective_df: df,
        labels,
        seed,
        restarts: summaries,
    })
}
