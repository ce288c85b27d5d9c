//! Acceptance checks. Each criterion prints one PASS or FAIL line with the
//! measured quantity next to its threshold. A FAIL verdict is a finding, not
//! a crash, so the process only exits non-zero when a check cannot be
//! evaluated at all.
//!
//! Pass criterion numbers as arguments to run a subset:
//! `cargo test -p pmltm --test acceptance -- 1 7`.

use std::time::{Duration, Instant};

use ndarray::{Array1, Array2, Array3};
use pmltm::quadrature::{component_log_densities, enumeration_oracle, gh_log_likelihood, QuadratureRule};
use pmltm::selection::adjusted_rand_index;
use pmltm::simulation::{generate_dataset, replication_study, ReplicationReport, SimulationSpec};
use pmltm::text::{build_term_matrix, Corpus, TermMatrixArtifact};
use pmltm::vem::{fit_from, initialize, observation_bound, LatentMoments};
use pmltm::{BinaryMatrix, Execution, FitConfig, Hyperparameters, ModelParameters, PenaltyMode};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Check = Result<(bool, String), String>;

struct Criterion {
    id: u32,
    name: &'static str,
    budget: Duration,
    run: fn(&mut Shared) -> Check,
}

/// Replication results reused by criteria 3-5.
#[derive(Default)]
struct Shared {
    study: Option<(ReplicationReport, ReplicationReport, Duration)>,
}

const REPS: usize = 20;
const MASTER_SEED: u64 = 20_240_501;

fn random_params(rng: &mut ChaCha8Rng, g: usize, m: usize, d: usize, scale: f64) -> ModelParameters {
    let mut eta = Array1::from_shape_fn(g, |_| rng.random_range(0.2..1.0));
    eta /= eta.sum();
    ModelParameters {
        eta,
        alpha: Array2::from_shape_fn((g, m), |_| rng.random_range(-2.0..2.0)),
        weights: Array3::from_shape_fn((g, m, d), |_| rng.random_range(-scale..scale)),
        lambda: Array2::ones((g, m)),
    }
}

fn random_rows(rng: &mut ChaCha8Rng, n: usize, m: usize) -> BinaryMatrix {
    let rows: Vec<Vec<u8>> = (0..n).map(|_| (0..m).map(|_| rng.random_range(0..2u8)).collect()).collect();
    BinaryMatrix::from_dense(m, &rows).unwrap()
}

/// Expansion points refined by alternating the latent posterior and the
/// closed-form xi update, so the bound is checked where it is tightest.
fn tight_xi(x: &[u8], alpha: &[f64], w: &Array2<f64>) -> Result<Vec<f64>, String> {
    let m = x.len();
    let mut xi = vec![1.0; m];
    for _ in 0..50 {
        let lm = LatentMoments::compute(x, Array1::from(xi.clone()).view(), Array1::from(alpha.to_vec()).view(), w.view())
            .map_err(|e| e.to_string())?;
        for k in 0..m {
            let wk = w.row(k);
            let mut quad = 0.0;
            for a in 0..wk.len() {
                for c in 0..wk.len() {
                    quad += wk[a] * (lm.sigma[(a, c)] + lm.mu[a] * lm.mu[c]) * wk[c];
                }
            }
            let lin: f64 = (0..wk.len()).map(|a| wk[a] * lm.mu[a]).sum();
            xi[k] = (quad + 2.0 * alpha[k] * lin + alpha[k] * alpha[k]).max(0.0).sqrt().max(1e-8);
        }
    }
    Ok(xi)
}

fn bound_domination(_: &mut Shared) -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(MASTER_SEED);
    let mut worst = f64::NEG_INFINITY;
    let mut checks = 0usize;
    let instances = 60;
    for _ in 0..instances {
        let g = rng.random_range(1..=2);
        let d = rng.random_range(1..=2);
        let m = rng.random_range(1..=8);
        let params = random_params(&mut rng, g, m, d, 2.0);
        let data = random_rows(&mut rng, 6, m);
        let rule = QuadratureRule::new(41, d).map_err(|e| e.to_string())?;
        let logp = component_log_densities(&data, &params, &rule, Execution::Parallel).map_err(|e| e.to_string())?;
        for i in 0..data.n_rows() {
            let x = data.dense_row(i);
            for c in 0..g {
                let alpha = params.alpha.row(c).to_vec();
                let w = params.weights.index_axis(ndarray::Axis(0), c).to_owned();
                let random: Vec<f64> = (0..m).map(|_| rng.random_range(0.01..8.0)).collect();
                for xi in [random, tight_xi(&x, &alpha, &w)?] {
                    let (l, _) = observation_bound(&x, Array1::from(xi).view(), params.alpha.row(c), w.view())
                        .map_err(|e| e.to_string())?;
                    worst = worst.max(l - logp[[i, c]]);
                    checks += 1;
                }
            }
        }
    }
    Ok((
        worst <= 1e-8,
        format!("{instances} instances, {checks} (i, g, xi) checks, max log L - log p = {worst:.3e} (limit 1e-8)"),
    ))
}

fn monotone_objective(_: &mut Shared) -> Check {
    let mut worst: f64 = 0.0;
    let mut cycles = 0usize;
    for k in 0..20u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(MASTER_SEED + k);
        let g = 1 + (k as usize % 3);
        let d = 1 + (k as usize / 3 % 2);
        let mut spec = SimulationSpec::table1(rng.random());
        spec.n = 200;
        spec.mixing = Array1::from_elem(g, 1.0 / g as f64);
        spec.slopes = Array3::from_shape_fn((g, 10, d), |_| rng.random_range(-2.0..2.0));
        spec.intercepts = Array2::from_shape_fn((g, 10), |_| rng.random_range(-1.5..1.5));
        let (data, _) = generate_dataset(&spec).map_err(|e| e.to_string())?;
        for penalty in [PenaltyMode::GammaLaplace, PenaltyMode::Disabled] {
            let mut cfg = FitConfig::new(Hyperparameters::new(g, d, 1.0, 0.5));
            cfg.penalty = penalty;
            cfg.hyper.aitken_tol = 1e-6;
            let (p, s) = initialize(&data, &cfg, rng.random()).map_err(|e| e.to_string())?;
            let run = fit_from(&data, &cfg, p, s).map_err(|e| e.to_string())?;
            for w in run.trace.windows(2) {
                worst = worst.max((w[0] - w[1]) / w[0].abs().max(1.0));
            }
            cycles += run.iterations;
        }
    }
    Ok((
        worst <= 1e-8,
        format!("20 datasets x 2 penalty modes, {cycles} cycles, largest relative decrease {worst:.3e} (limit 1e-8)"),
    ))
}

fn study(shared: &mut Shared) -> Result<&(ReplicationReport, ReplicationReport, Duration), String> {
    if shared.study.is_none() {
        let start = Instant::now();
        let spec = SimulationSpec::table1(MASTER_SEED);
        let mut cfg = FitConfig::new(Hyperparameters::new(2, 1, 1.0, 0.5));
        cfg.hyper.seed = MASTER_SEED;
        let pairs = [(0.1, 0.5), (0.5, 0.5), (1.0, 0.5), (2.0, 0.5)];
        let penalized = replication_study(&spec, &pairs, REPS, &cfg).map_err(|e| e.to_string())?;
        cfg.penalty = PenaltyMode::Disabled;
        let free = replication_study(&spec, &[(1.0, 0.5)], REPS, &cfg).map_err(|e| e.to_string())?;
        shared.study = Some((penalized, free, start.elapsed()));
    }
    Ok(shared.study.as_ref().unwrap())
}

fn row(report: &ReplicationReport, s: f64) -> &pmltm::simulation::ReplicationRow {
    report.rows.iter().find(|r| r.shape == s).expect("pair present")
}

fn simulation_ari(shared: &mut Shared) -> Check {
    let (report, _, _) = study(shared)?;
    let r = row(report, 1.0);
    let mean = r.mean_ari.ok_or("no successful replicate")?;
    Ok((
        mean >= 0.60,
        format!(
            "mean ARI at (1, 0.5) = {mean:.4} (se {:.4}, {} of {} replicates fitted; threshold 0.60)",
            r.se_ari.unwrap_or(f64::NAN),
            r.replicates - r.failures,
            r.replicates
        ),
    ))
}

fn hyperparameter_ordering(shared: &mut Shared) -> Check {
    let (report, _, elapsed) = study(shared)?;
    let low = row(report, 0.1).mean_bic.ok_or("no BIC at (0.1, 0.5)")?;
    let one = row(report, 1.0).mean_bic.ok_or("no BIC at (1, 0.5)")?;
    let table = report
        .rows
        .iter()
        .map(|r| format!("({}, {}): {:.1}", r.shape, r.rate, r.mean_bic.unwrap_or(f64::NAN)))
        .collect::<Vec<_>>()
        .join(", ");
    Ok((
        low > one,
        format!("mean BIC {table}; need (0.1, 0.5) > (1, 0.5); study took {:.1}s", elapsed.as_secs_f64()),
    ))
}

fn sparsity_recovery(shared: &mut Shared) -> Check {
    let (report, free, _) = study(shared)?;
    let rate = |r: &pmltm::simulation::ReplicationRow| {
        let v: Vec<f64> = r.zero_recovery.iter().flatten().copied().collect();
        v.iter().sum::<f64>() / v.len().max(1) as f64
    };
    let penalized = rate(row(report, 1.0));
    let unpenalized = rate(&free.rows[0]);
    Ok((
        penalized >= 0.60 && penalized > unpenalized,
        format!("zero recovery at (1, 0.5) = {penalized:.3} (threshold 0.60), penalty disabled = {unpenalized:.3}"),
    ))
}

fn oracle_equivalence(_: &mut Shared) -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(MASTER_SEED);
    let rule = QuadratureRule::new(21, 1).map_err(|e| e.to_string())?;
    let mut worst: f64 = 0.0;
    for _ in 0..30 {
        let m = rng.random_range(1..=3);
        let params = random_params(&mut rng, 1, m, 1, 3.0);
        let data = random_rows(&mut rng, 12, m);
        let gh = gh_log_likelihood(&data, &params, &rule, Execution::Sequential).map_err(|e| e.to_string())?;
        let table = enumeration_oracle(&params, &rule).map_err(|e| e.to_string())?;
        let en = table.log_likelihood(&data, params.eta.as_slice().unwrap()).map_err(|e| e.to_string())?;
        worst = worst.max((gh - en).abs());
    }
    let same = adjusted_rand_index(&[1, 1, 2, 2], &[1, 1, 2, 2]).map_err(|e| e.to_string())?;
    let cross = adjusted_rand_index(&[1, 1, 2, 2], &[1, 2, 1, 2]).map_err(|e| e.to_string())?;
    Ok((
        worst <= 1e-8 && same == 1.0 && cross == -0.5,
        format!("30 instances, max |gh - enumeration| = {worst:.3e} (limit 1e-8); ARI identical = {same}, 4-point case = {cross}"),
    ))
}

/// Largest log-likelihood change over `rotations` random orthogonal maps
/// (rotation or reflection) of each component's slope rows.
fn max_rotation_change(rule: &QuadratureRule, rotations: usize) -> Result<f64, String> {
    let mut rng = ChaCha8Rng::seed_from_u64(MASTER_SEED);
    let params = random_params(&mut rng, 2, 6, 2, 1.0);
    let data = random_rows(&mut rng, 40, 6);
    let base = gh_log_likelihood(&data, &params, rule, Execution::Parallel).map_err(|e| e.to_string())?;
    let mut worst: f64 = 0.0;
    for _ in 0..rotations {
        let mut rotated = params.clone();
        for g in 0..2 {
            let t: f64 = rng.random_range(0.0..std::f64::consts::TAU);
            let flip = if rng.random::<bool>() { -1.0 } else { 1.0 };
            let r = [[t.cos(), -t.sin()], [flip * t.sin(), flip * t.cos()]];
            for m in 0..6 {
                let w = [params.weights[[g, m, 0]], params.weights[[g, m, 1]]];
                rotated.weights[[g, m, 0]] = r[0][0] * w[0] + r[0][1] * w[1];
                rotated.weights[[g, m, 1]] = r[1][0] * w[0] + r[1][1] * w[1];
            }
        }
        let ll = gh_log_likelihood(&data, &rotated, rule, Execution::Parallel).map_err(|e| e.to_string())?;
        worst = worst.max((ll - base).abs());
    }
    Ok(worst)
}

/// The likelihood itself is rotation invariant; a tensor Gauss-Hermite grid
/// is not, so the check uses a rule fine enough that its own error sits
/// below the tolerance. The default 21-node figure is reported alongside.
fn rotation_invariance(_: &mut Shared) -> Check {
    let fine = max_rotation_change(&QuadratureRule::new(41, 2).map_err(|e| e.to_string())?, 20)?;
    let default = max_rotation_change(&QuadratureRule::new(21, 2).map_err(|e| e.to_string())?, 20)?;
    Ok((
        fine <= 1e-9,
        format!("20 rotations, max |delta log-likelihood| = {fine:.3e} with 41 nodes per dimension (limit 1e-9); {default:.3e} with the default 21"),
    ))
}

fn artifact_bytes(a: &TermMatrixArtifact) -> Result<[Vec<u8>; 3], String> {
    let mut mtx = Vec::new();
    a.matrix.write_matrix_market(&mut mtx).map_err(|e| e.to_string())?;
    let mut vocab = Vec::new();
    a.write_vocabulary(&mut vocab).map_err(|e| e.to_string())?;
    let mut freq = Vec::new();
    a.write_frequency_csv(&mut freq).map_err(|e| e.to_string())?;
    Ok([mtx, vocab, freq])
}

fn ingestion_determinism(_: &mut Shared) -> Check {
    let dir = concat!(env!("CARGO_MANIFEST_DIR"), "/tests/fixtures");
    let read = |name: &str| std::fs::read(format!("{dir}/{name}")).map_err(|e| format!("{name}: {e}"));
    let corpus = Corpus::from_lines(read("five_reviews.txt")?.as_slice()).map_err(|e| e.to_string())?;
    let golden = [read("five_reviews.mtx")?, read("five_reviews.vocab.txt")?, read("five_reviews.freq.csv")?];
    let mut runs = 0;
    let mut identical = true;
    let mut check = |exec: Execution| -> Result<(), String> {
        let a = build_term_matrix(&corpus, 0.02, exec).map_err(|e| e.to_string())?;
        identical &= artifact_bytes(&a)? == golden;
        runs += 1;
        Ok(())
    };
    for _ in 0..3 {
        check(Execution::Sequential)?;
        check(Execution::Parallel)?;
    }
    for threads in [1, 2, 8] {
        let pool = rayon::ThreadPoolBuilder::new().num_threads(threads).build().map_err(|e| e.to_string())?;
        pool.install(|| check(Execution::Parallel))?;
    }
    Ok((identical, format!("{runs} runs (sequential and 1/2/8/default threads) against the golden matrix, vocabulary and frequency files")))
}

fn main() {
    let criteria = [
        Criterion { id: 1, name: "bound domination", budget: Duration::from_secs(60), run: bound_domination },
        Criterion { id: 2, name: "monotone objective", budget: Duration::from_secs(120), run: monotone_objective },
        Criterion { id: 3, name: "simulation ARI", budget: Duration::from_secs(600), run: simulation_ari },
        Criterion { id: 4, name: "hyperparameter ordering", budget: Duration::from_secs(1800), run: hyperparameter_ordering },
        Criterion { id: 5, name: "sparsity recovery", budget: Duration::from_secs(600), run: sparsity_recovery },
        Criterion { id: 6, name: "oracle equivalence", budget: Duration::from_secs(60), run: oracle_equivalence },
        Criterion { id: 7, name: "rotation invariance", budget: Duration::from_secs(60), run: rotation_invariance },
        Criterion { id: 8, name: "ingestion determinism", budget: Duration::from_secs(60), run: ingestion_determinism },
    ];
    let selected: Vec<u32> = std::env::args().skip(1).filter_map(|a| a.parse().ok()).collect();
    let mut shared = Shared::default();
    let (mut passed, mut failed, mut errors) = (0, 0, 0);
    println!("acceptance: {} criteria", criteria.len());
    for c in criteria.iter().filter(|c| selected.is_empty() || selected.contains(&c.id)) {
        let start = Instant::now();
        let outcome = (c.run)(&mut shared);
        let secs = start.elapsed().as_secs_f64();
        let over = if start.elapsed() > c.budget { " [over time budget]" } else { "" };
        match outcome {
            Ok((true, detail)) => {
                passed += 1;
                println!("criterion {} {}: PASS ({detail}; {secs:.1}s){over}", c.id, c.name);
            }
            Ok((false, detail)) => {
                failed += 1;
                println!("criterion {} {}: FAIL ({detail}; {secs:.1}s){over}", c.id, c.name);
            }
            Err(e) => {
                errors += 1;
                println!("criterion {} {}: ERROR ({e})", c.id, c.name);
            }
        }
    }
    println!("acceptance summary: {passed} passed, {failed} failed, {errors} errors");
    if errors > 0 {
        std::process::exit(1);
    }
}
