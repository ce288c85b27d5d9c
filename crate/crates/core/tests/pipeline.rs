use std::fs;
use std::io::BufReader;
use std::path::Path;

use approx::assert_relative_eq;
use ndarray::{Array1, Array2, Array3};
use pmltm::persist::ModelDocument;
use pmltm::selection::{adjusted_rand_index, grid_search, GridSpec};
use pmltm::simulation::{generate_dataset, SimulationSpec};
use pmltm::text::{build_term_matrix, Corpus};
use pmltm::{fit, Execution, FitConfig, Hyperparameters, PenaltyMode};
use proptest::prelude::*;

fn fixture(name: &str) -> String {
    fs::read_to_string(Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures").join(name)).unwrap()
}

/// Two components with zero slopes and intercepts of opposite sign on
/// every item, so the clusters are far apart.
fn separated(n: usize, seed: u64) -> (pmltm::BinaryMatrix, Vec<usize>) {
    let spec = SimulationSpec {
        n,
        mixing: Array1::from(vec![0.5, 0.5]),
        slopes: Array3::zeros((2, 8, 1)),
        intercepts: Array2::from_shape_fn((2, 8), |(g, _)| if g == 0 { 2.0 } else { -2.0 }),
        seed,
    };
    generate_dataset(&spec).unwrap()
}

#[test]
fn ingestion_reproduces_golden_artifacts() {
    let corpus = Corpus::from_lines(BufReader::new(fixture("five_reviews.txt").as_bytes())).unwrap();
    for exec in [Execution::Sequential, Execution::Parallel] {
        let artifact = build_term_matrix(&corpus, 0.02, exec).unwrap();
        let mut mtx = Vec::new();
        artifact.matrix.write_matrix_market(&mut mtx).unwrap();
        let mut vocab = Vec::new();
        artifact.write_vocabulary(&mut vocab).unwrap();
        let mut freq = Vec::new();
        artifact.write_frequency_csv(&mut freq).unwrap();
        assert_eq!(String::from_utf8(mtx).unwrap(), fixture("five_reviews.mtx"));
        assert_eq!(String::from_utf8(vocab).unwrap(), fixture("five_reviews.vocab.txt"));
        assert_eq!(String::from_utf8(freq).unwrap(), fixture("five_reviews.freq.csv"));
    }
}

#[test]
fn fitted_model_survives_json_round_trip() {
    let (data, _) = separated(120, 3);
    let config = FitConfig::new(Hyperparameters::new(2, 1, 1.0, 0.5));
    let result = fit(&data, &config).unwrap();
    let doc = ModelDocument::from_fit(&result, &config, None);
    let mut bytes = Vec::new();
    doc.write_json(&mut bytes).unwrap();
    let back = ModelDocument::read_json(bytes.as_slice()).unwrap();
    assert_eq!(back, doc);
    assert_eq!(back.to_params().unwrap(), result.params);
}

#[test]
fn single_cell_grid_returns_that_fit() {
    let (data, _) = separated(100, 5);
    let mut base = FitConfig::new(Hyperparameters::new(2, 1, 1.0, 0.5));
    base.hyper.seed = 11;
    let direct = fit(&data, &base).unwrap();
    let grid = grid_search(&data, &GridSpec::new(vec![2], vec![1], vec![(1.0, 0.5)], base)).unwrap();
    assert_eq!(grid.cells.len(), 1);
    assert_eq!(grid.best, 0);
    assert_eq!(grid.best_fit.params, direct.params);
    assert_eq!(grid.best_fit.bic, direct.bic);
    assert_eq!(grid.best_fit.labels, direct.labels);
}

#[test]
fn bic_prefers_two_components_on_separated_data() {
    let (data, truth) = separated(200, 9);
    let base = FitConfig::new(Hyperparameters::new(1, 1, 1.0, 0.5));
    let grid = grid_search(&data, &GridSpec::new(vec![1, 2], vec![1], vec![(1.0, 0.5)], base)).unwrap();
    assert_eq!(grid.best_cell().components, 2);
    let ari = adjusted_rand_index(&grid.best_fit.labels, &truth).unwrap();
    assert!(ari > 0.95, "ARI {ari}");
}

#[test]
fn duplicated_rows_leave_single_component_fit_unchanged() {
    let mut spec = SimulationSpec::table1(21);
    spec.n = 150;
    let (data, _) = generate_dataset(&spec).unwrap();
    let doubled = data.vstack(&data).unwrap();
    let mut config = FitConfig::new(Hyperparameters::new(1, 1, 1.0, 0.5));
    config.penalty = PenaltyMode::Disabled;
    config.hyper.aitken_tol = 1e-11;
    config.hyper.max_iter = 20_000;
    let once = fit(&data, &config).unwrap();
    let twice = fit(&doubled, &config).unwrap();
    for (a, b) in once.params.alpha.iter().zip(twice.params.alpha.iter()) {
        assert_relative_eq!(a, b, epsilon = 1e-5);
    }
    for (a, b) in once.params.weights.iter().zip(twice.params.weights.iter()) {
        assert_relative_eq!(a.abs(), b.abs(), epsilon = 1e-5);
    }
    assert_relative_eq!(2.0 * once.quad_log_lik.unwrap(), twice.quad_log_lik.unwrap(), max_relative = 1e-6);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn ari_ignores_label_names(labels in prop::collection::vec(0u8..4, 2..60), shift in 1u8..10) {
        let renamed: Vec<u8> = labels.iter().map(|l| (l + shift) % 13).collect();
        let reference: Vec<u8> = labels.iter().enumerate().map(|(i, _)| (i % 3) as u8).collect();
        prop_assert_eq!(adjusted_rand_index(&labels, &renamed).unwrap(), 1.0);
        let a = adjusted_rand_index(&labels, &reference).unwrap();
        let b = adjusted_rand_index(&renamed, &reference).unwrap();
        prop_assert_eq!(a, b);
        prop_assert!(a <= 1.0);
    }

    #[test]
    fn fits_agree_across_execution_modes(seed in 0u64..500) {
        let (data, _) = separated(40, seed);
        let mut config = FitConfig::new(Hyperparameters::new(2, 1, 1.0, 0.5));
        config.hyper.seed = seed;
        config.hyper.restarts = 2;
        config.execution = Execution::Sequential;
        let a = fit(&data, &config).unwrap();
        config.execution = Execution::Parallel;
        let b = fit(&data, &config).unwrap();
        prop_assert_eq!(a.params, b.params);
        prop_assert_eq!(a.trace, b.trace);
    }
}
