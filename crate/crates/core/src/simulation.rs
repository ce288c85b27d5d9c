//! Synthetic data from a known mixture of latent trait models and the
//! replication study comparing gamma hyperparameter pairs.

use ndarray::{Array1, Array2, Array3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::BinaryMatrix;
use crate::model::response_probability;
use crate::selection::adjusted_rand_index;
use crate::vem::fit::derived_seed;
use crate::vem::{fit, FitConfig};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimulationSpec {
    pub n: usize,
    pub mixing: Array1<f64>,
    /// Slopes, `G x M x D`.
    pub slopes: Array3<f64>,
    /// Intercepts, `G x M`.
    pub intercepts: Array2<f64>,
    pub seed: u64,
}

impl SimulationSpec {
    /// Two equally weighted components over ten items with one latent trait:
    /// the first component loads on items 6-10, the second on items 1-5.
    pub fn table1(seed: u64) -> Self {
        let w1 = [0.0, 0.0, 0.0, 0.0, 0.0, 0.5, -0.4, 0.3, 0.7, 1.5];
        let w2 = [-1.0, -3.8, 0.6, -0.7, 4.5, 0.0, 0.0, 0.0, 0.0, 0.0];
        let mut slopes = Array3::zeros((2, 10, 1));
        for m in 0..10 {
            slopes[[0, m, 0]] = w1[m];
            slopes[[1, m, 0]] = w2[m];
        }
        SimulationSpec {
            n: 500,
            mixing: Array1::from(vec![0.5, 0.5]),
            slopes,
            intercepts: Array2::zeros((2, 10)),
            seed,
        }
    }

    pub fn n_components(&self) -> usize {
        self.slopes.dim().0
    }

    pub fn n_items(&self) -> usize {
        self.slopes.dim().1
    }

    pub fn dimensions(&self) -> usize {
        self.slopes.dim().2
    }

    pub fn validate(&self) -> Result<()> {
        let (g, m, d) = self.slopes.dim();
        if self.n == 0 || g == 0 || m == 0 || d == 0 {
            return Err(Error::InvalidArgument("simulation sizes must be positive".into()));
        }
        if self.mixing.len() != g || self.intercepts.dim() != (g, m) {
            return Err(Error::InvalidArgument("mixing/intercept shapes disagree with slopes".into()));
        }
        if self.mixing.iter().any(|&p| !(p >= 0.0)) || (self.mixing.sum() - 1.0).abs() > 1e-10 {
            return Err(Error::InvalidArgument("mixing weights must lie on the simplex".into()));
        }
        if self.slopes.iter().chain(self.intercepts.iter()).any(|v| !v.is_finite()) {
            return Err(Error::InvalidArgument("non-finite simulation parameter".into()));
        }
        Ok(())
    }
}

/// Draws a dataset and the true component labels. Each observation draws
/// its component, then one latent vector shared by all items, then the items.
pub fn generate_dataset(spec: &SimulationSpec) -> Result<(BinaryMatrix, Vec<usize>)> {
    spec.validate()?;
    let (g_count, m_count, d) = spec.slopes.dim();
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let mut labels = Vec::with_capacity(spec.n);
    let mut entries = Vec::new();
    let mut y = vec![0.0; d];
    for i in 0..spec.n {
        let u: f64 = rng.random();
        let mut acc = 0.0;
        let mut g = g_count - 1;
        for (k, &p) in spec.mixing.iter().enumerate() {
            acc += p;
            if u < acc {
                g = k;
                break;
            }
        }
        labels.push(g);
        for v in y.iter_mut() {
            *v = rng.sample(StandardNormal);
        }
        for m in 0..m_count {
            let w: Vec<f64> = (0..d).map(|k| spec.slopes[[g, m, k]]).collect();
            let p = response_probability(spec.intercepts[[g, m]], &w, &y)?;
            if rng.random::<f64>() < p {
                entries.push((i, m));
            }
        }
    }
    Ok((BinaryMatrix::from_entries(spec.n, m_count, entries)?, labels))
}

/// Aggregates for one `(s, r)` pair.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReplicationRow {
    pub shape: f64,
    pub rate: f64,
    pub replicates: usize,
    pub failures: usize,
    pub mean_bic: Option<f64>,
    pub se_bic: Option<f64>,
    pub mean_ari: Option<f64>,
    pub se_ari: Option<f64>,
    /// Per replicate values, `None` for failed fits.
    pub bic: Vec<Option<f64>>,
    pub ari: Vec<Option<f64>>,
    /// Fraction of truly zero loadings estimated below the zero tolerance,
    /// per replicate.
    pub zero_recovery: Vec<Option<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReplicationReport {
    pub rows: Vec<ReplicationRow>,
}

fn mean_se(values: &[f64]) -> (Option<f64>, Option<f64>) {
    let n = values.len();
    if n == 0 {
        return (None, None);
    }
    let mean = values.iter().sum::<f64>() / n as f64;
    if n < 2 {
        return (Some(mean), None);
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
    (Some(mean), Some((var / n as f64).sqrt()))
}

/// Seed of replicate `rep`'s dataset.
pub fn replicate_seed(spec: &SimulationSpec, rep: usize) -> u64 {
    derived_seed(spec.seed, rep as u64)
}

/// Fits the true (G, D) on `reps` datasets for each `(s, r)` pair. Every
/// pair sees the same datasets, and replicate `k` fits with a seed derived
/// from the template's master seed and `k`. Zero recovery counts loadings
/// whose true value is zero and that the fit holds below `zero_tol`; it
/// assumes the fitted component order matches the truth after relabeling
/// by majority vote against the true labels.
pub fn replication_study(
    spec: &SimulationSpec,
    sr_pairs: &[(f64, f64)],
    reps: usize,
    template: &FitConfig,
) -> Result<ReplicationReport> {
    spec.validate()?;
    if reps == 0 {
        return Err(Error::InvalidArgument("reps must be >= 1".into()));
    }
    if sr_pairs.is_empty() {
        return Err(Error::InvalidArgument("need at least one (s, r) pair".into()));
    }
    let datasets = template.execution.map(reps, |k| {
        let mut s = spec.clone();
        s.seed = replicate_seed(spec, k);
        generate_dataset(&s)
    });
    let datasets = datasets.into_iter().collect::<Result<Vec<_>>>()?;
    let mut rows = Vec::with_capacity(sr_pairs.len());
    for &(s, r) in sr_pairs {
        let outcomes = template.execution.map(reps, |k| {
            let mut cfg = template.clone();
            cfg.hyper.components = spec.n_components();
            cfg.hyper.dimensions = spec.dimensions();
            cfg.hyper.shape = s;
            cfg.hyper.rate = r;
            cfg.hyper.seed = derived_seed(template.hyper.seed, k as u64);
            let (data, truth) = &datasets[k];
            let fitted = fit(data, &cfg)?;
            let ari = adjusted_rand_index(&fitted.labels, truth)?;
            let zr = zero_recovery(spec, &fitted.params.weights, &fitted.labels, truth, cfg.hyper.zero_tol);
            Ok::<_, Error>((fitted.bic, ari, zr))
        });
        let mut bic = Vec::with_capacity(reps);
        let mut ari = Vec::with_capacity(reps);
        let mut zero = Vec::with_capacity(reps);
        let mut failures = 0;
        for (k, o) in outcomes.into_iter().enumerate() {
            match o {
                Ok((b, a, z)) => {
                    bic.push(b);
                    ari.push(Some(a));
                    zero.push(z);
                }
                Err(e) => {
                    log::warn!("replicate {k} at (s={s}, r={r}) failed: {e}");
                    failures += 1;
                    bic.push(None);
                    ari.push(None);
                    zero.push(None);
                }
            }
        }
        let (mean_bic, se_bic) = mean_se(&bic.iter().flatten().copied().collect::<Vec<_>>());
        let (mean_ari, se_ari) = mean_se(&ari.iter().flatten().copied().collect::<Vec<_>>());
        rows.push(ReplicationRow {
            shape: s,
            rate: r,
            replicates: reps,
            failures,
            mean_bic,
            se_bic,
            mean_ari,
            se_ari,
            bic,
            ari,
            zero_recovery: zero,
        });
    }
    Ok(ReplicationReport { rows })
}

/// Maps each fitted component to the true component it shares most
/// observations with, then reports the fraction of truly zero loadings the
/// fit holds below `zero_tol`. `None` when the truth has no zero loadings.
pub fn zero_recovery(
    spec: &SimulationSpec,
    fitted_weights: &Array3<f64>,
    fitted_labels: &[usize],
    true_labels: &[usize],
    zero_tol: f64,
) -> Option<f64> {
    let (g_true, m_count, d) = spec.slopes.dim();
    let g_fit = fitted_weights.dim().0;
    // majority true component of each true component's fitted counterpart
    let mut counts = vec![vec![0usize; g_fit]; g_true];
    for (&f, &t) in fitted_labels.iter().zip(true_labels) {
        if f < g_fit && t < g_true {
            counts[t][f] += 1;
        }
    }
    let mut hits = 0usize;
    let mut total = 0usize;
    for t in 0..g_true {
        let f = (0..g_fit).max_by_key(|&f| (counts[t][f], std::cmp::Reverse(f)))?;
        for m in 0..m_count {
            for k in 0..d {
                if spec.slopes[[t, m, k]] == 0.0 {
                    total += 1;
                    if fitted_weights[[f, m, k]].abs() < zero_tol {
                        hits += 1;
                    }
                }
            }
        }
    }
    (total > 0).then(|| hits as f64 / total as f64)
}
