//! Sequential versus rayon execution for the expensive pieces of a fit.
//! Without the `parallel` feature both arms run the same sequential code.

use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use ndarray::{Array1, Array2, Array3};
use pmltm::quadrature::{gh_log_likelihood, QuadratureRule};
use pmltm::simulation::{generate_dataset, SimulationSpec};
use pmltm::vem::{initialize, m_step_weights_intercepts, m_step_xi, ve_step_latent_moments};
use pmltm::{fit, BinaryMatrix, Execution, FitConfig, Hyperparameters};

const MODES: [(&str, Execution); 2] = [("sequential", Execution::Sequential), ("parallel", Execution::Parallel)];

/// Three components on 30 items with two latent traits.
fn dataset(n: usize) -> BinaryMatrix {
    let (g, m, d) = (3, 30, 2);
    let spec = SimulationSpec {
        n,
        mixing: Array1::from_elem(g, 1.0 / g as f64),
        slopes: Array3::from_shape_fn((g, m, d), |(c, j, k)| if (j + c) % 3 == k { 1.5 } else { 0.0 }),
        intercepts: Array2::from_shape_fn((g, m), |(c, j)| if (j / 10) == c { 1.0 } else { -1.0 }),
        seed: 17,
    };
    generate_dataset(&spec).unwrap().0
}

fn config(exec: Execution) -> FitConfig {
    let mut cfg = FitConfig::new(Hyperparameters::new(3, 2, 1.0, 0.5));
    cfg.hyper.restarts = 4;
    cfg.hyper.max_iter = 30;
    cfg.execution = exec;
    cfg
}

fn steps(c: &mut Criterion) {
    let data = dataset(2000);
    let (params, state) = initialize(&data, &config(Execution::Parallel), 1).unwrap();
    let mut group = c.benchmark_group("steps");
    for (name, exec) in MODES {
        group.bench_function(BenchmarkId::new("latent_moments", name), |b| {
            b.iter(|| ve_step_latent_moments(black_box(&data), &params, &state, exec).unwrap())
        });
        group.bench_function(BenchmarkId::new("xi", name), |b| b.iter(|| m_step_xi(black_box(&params), &state, 20.0, exec)));
        group.bench_function(BenchmarkId::new("weights_intercepts", name), |b| {
            b.iter(|| m_step_weights_intercepts(black_box(&data), &params, &state, &params.lambda, 1e-4, exec).unwrap())
        });
    }
    let rule = QuadratureRule::new(21, 2).unwrap();
    for (name, exec) in MODES {
        group.bench_function(BenchmarkId::new("quadrature_log_lik", name), |b| {
            b.iter(|| gh_log_likelihood(black_box(&data), &params, &rule, exec).unwrap())
        });
    }
    group.finish();
}

fn full_fit(c: &mut Criterion) {
    let mut group = c.benchmark_group("fit");
    group.sample_size(10);
    for n in [500, 2000] {
        let data = dataset(n);
        for (name, exec) in MODES {
            group.bench_with_input(BenchmarkId::new(name, n), &data, |b, data| {
                b.iter(|| fit(black_box(data), &config(exec)).unwrap())
            });
        }
    }
    group.finish();
}

criterion_group!(benches, steps, full_fit);
criterion_main!(benches);
