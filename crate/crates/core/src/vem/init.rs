use ndarray::{Array1, Array2, Array3, Array4, Axis};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::fit::{FitConfig, InitStrategy};
use super::state::VariationalState;
use crate::error::{invalid, Result};
use crate::matrix::BinaryMatrix;
use crate::model::ModelParameters;
use crate::numeric::logit;

const ALPHA_CLAMP: f64 = 4.0;
const WEIGHT_INIT_HALF_WIDTH: f64 = 0.5;
/// Mass given to the seeded component of each initial responsibility row.
const SEED_MASS: f64 = 0.8;
const KMEANS_ITERS: usize = 25;

/// Starting parameters and variational state for one restart.
///
/// Slopes are drawn before responsibilities so that the slope draws depend
/// only on `(seed, G, M, D)`.
pub fn initialize(
    data: &BinaryMatrix,
    config: &FitConfig,
    seed: u64,
) -> Result<(ModelParameters, VariationalState)> {
    let hyper = &config.hyper;
    hyper.validate()?;
    let (n, m) = (data.n_rows(), data.n_cols());
    let (g, d) = (hyper.components, hyper.dimensions);
    if n == 0 || m == 0 {
        return invalid("data must have at least one row and one column");
    }
    if g > n {
        return invalid(format!("G = {g} exceeds the number of observations n = {n}"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);

    let weights = Array3::from_shape_fn((g, m, d), |_| {
        rng.random_range(-WEIGHT_INIT_HALF_WIDTH..=WEIGHT_INIT_HALF_WIDTH)
    });

    let z = match config.init {
        InitStrategy::RandomResponsibilities => random_responsibilities(n, g, &mut rng),
        InitStrategy::KmeansSeeded => kmeans_responsibilities(data, g, &mut rng),
    };

    let means = data.column_means();
    let alpha_row: Vec<f64> = means
        .iter()
        .map(|&p| logit(p).clamp(-ALPHA_CLAMP, ALPHA_CLAMP))
        .collect();
    let alpha = Array2::from_shape_fn((g, m), |(_, j)| alpha_row[j]);
    let lambda = Array2::from_elem((g, m), (hyper.shape + d as f64) / hyper.rate);
    let eta: Array1<f64> = z.mean_axis(Axis(0)).expect("n > 0");

    let sigma = Array4::from_shape_fn((n, g, d, d), |(_, _, a, c)| if a == c { 1.0 } else { 0.0 });
    let state = VariationalState {
        z,
        xi: Array3::from_elem((n, g, m), 1.0),
        mu: Array3::zeros((n, g, d)),
        sigma,
    };
    let params = ModelParameters {
        eta,
        alpha,
        weights,
        lambda,
    };
    Ok((params, state))
}

/// Each row favours one uniformly drawn component; the remaining mass is
/// spread by uniform random weights.
fn random_responsibilities(n: usize, g: usize, rng: &mut ChaCha8Rng) -> Array2<f64> {
    let mut z = Array2::zeros((n, g));
    for mut row in z.rows_mut() {
        let pick = rng.random_range(0..g);
        let noise: Vec<f64> = (0..g).map(|_| rng.random::<f64>() + 1e-3).collect();
        let total: f64 = noise.iter().sum();
        for (k, v) in row.iter_mut().enumerate() {
            *v = (1.0 - SEED_MASS) * noise[k] / total;
        }
        row[pick] += SEED_MASS;
    }
    z
}

/// k-means (k-means++ seeding, Lloyd iterations) on the 0/1 rows; each row
/// puts `SEED_MASS` on its cluster and spreads the rest evenly.
fn kmeans_responsibilities(data: &BinaryMatrix, g: usize, rng: &mut ChaCha8Rng) -> Array2<f64> {
    let n = data.n_rows();
    let rows: Vec<Vec<f64>> = (0..n)
        .map(|i| data.dense_row(i).into_iter().map(f64::from).collect())
        .collect();
    let dist = |a: &[f64], b: &[f64]| -> f64 { a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum() };

    let mut centers: Vec<Vec<f64>> = vec![rows[rng.random_range(0..n)].clone()];
    while centers.len() < g {
        let d2: Vec<f64> = rows
            .iter()
            .map(|r| centers.iter().map(|c| dist(r, c)).fold(f64::INFINITY, f64::min))
            .collect();
        let total: f64 = d2.iter().sum();
        let next = if total > 0.0 {
            let mut u = rng.random::<f64>() * total;
            let mut pick = n - 1;
            for (i, v) in d2.iter().enumerate() {
                if u < *v {
                    pick = i;
                    break;
                }
                u -= v;
            }
            pick
        } else {
            rng.random_range(0..n)
        };
        centers.push(rows[next].clone());
    }

    let mut labels = vec![0usize; n];
    for _ in 0..KMEANS_ITERS {
        let mut changed = false;
        for (i, r) in rows.iter().enumerate() {
            let best = (0..g)
                .min_by(|&a, &b| dist(r, &centers[a]).total_cmp(&dist(r, &centers[b])))
                .expect("g >= 1");
            if best != labels[i] {
                labels[i] = best;
                changed = true;
            }
        }
        for (k, c) in centers.iter_mut().enumerate() {
            let members: Vec<&Vec<f64>> = rows.iter().zip(&labels).filter(|(_, &l)| l == k).map(|(r, _)| r).collect();
            if members.is_empty() {
                continue;
            }
            for (j, v) in c.iter_mut().enumerate() {
                *v = members.iter().map(|r| r[j]).sum::<f64>() / members.len() as f64;
            }
        }
        if !changed {
            break;
        }
    }

    let rest = (1.0 - SEED_MASS) / g as f64;
    Array2::from_shape_fn((n, g), |(i, k)| if labels[i] == k { SEED_MASS + rest } else { rest })
}
