use std::fs::{self, File};
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use pmltm::persist::{
    read_labels, write_assignments_csv, write_grid_csv, write_replication_csv, write_trace_csv, GridDocument,
    ModelDocument,
};
use pmltm::selection::{adjusted_rand_index, grid_search, GridSpec};
use pmltm::simulation::{generate_dataset, replication_study, SimulationSpec};
use pmltm::text::{build_term_matrix, Corpus};
use pmltm::{BinaryMatrix, Error, Execution, FitConfig, Hyperparameters, InitStrategy, PenaltyMode, Result};

use crate::manifest::RunManifest;
use crate::{
    CorpusFormat, EstimationArgs, EvaluateArgs, FitArgs, IngestArgs, InitArg, InspectArgs, MatrixFormat, MatrixInput,
    PenaltyArg, SelectArgs, SimulateArgs,
};

/// Sizes the worker pool and picks the execution mode.
pub fn configure_threads(threads: Option<usize>) -> Result<Execution> {
    match threads {
        Some(0) => Err(Error::InvalidArgument("--threads must be >= 1".into())),
        Some(1) => Ok(Execution::Sequential),
        #[cfg(feature = "parallel")]
        Some(k) => {
            rayon::ThreadPoolBuilder::new()
                .num_threads(k)
                .build_global()
                .map_err(|e| Error::InvalidArgument(format!("cannot start {k} threads: {e}")))?;
            Ok(Execution::Parallel)
        }
        #[cfg(feature = "parallel")]
        None => Ok(Execution::Parallel),
        #[cfg(not(feature = "parallel"))]
        _ => Ok(Execution::Sequential),
    }
}

fn create_out_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir)?;
    Ok(())
}

fn writer(path: &Path) -> Result<BufWriter<File>> {
    Ok(BufWriter::new(File::create(path)?))
}

/// Runs `write` into `path`, flushes, and records the file in the manifest.
fn emit(manifest: &mut RunManifest, path: PathBuf, write: impl FnOnce(&mut BufWriter<File>) -> Result<()>) -> Result<()> {
    let mut w = writer(&path)?;
    write(&mut w)?;
    w.flush()?;
    drop(w);
    manifest.output(&path)
}

fn fit_config(est: &EstimationArgs, components: usize, dimensions: usize, exec: Execution) -> Result<FitConfig> {
    let mut hyper = Hyperparameters::new(components, dimensions, est.shape, est.rate);
    hyper.seed = est.seed;
    hyper.max_iter = est.max_iter;
    hyper.aitken_tol = est.tol;
    hyper.restarts = est.restarts;
    hyper.zero_tol = est.zero_tol;
    hyper.xi_max = est.xi_max;
    let mut cfg = FitConfig::new(hyper);
    cfg.quad_nodes = est.quad_nodes;
    cfg.execution = exec;
    cfg.penalty = match est.penalty {
        PenaltyArg::GammaLaplace => PenaltyMode::GammaLaplace,
        PenaltyArg::None => PenaltyMode::Disabled,
    };
    cfg.init = match est.init {
        InitArg::Random => InitStrategy::RandomResponsibilities,
        InitArg::Kmeans => InitStrategy::KmeansSeeded,
    };
    cfg.validate()?;
    Ok(cfg)
}

fn read_lines(path: &Path) -> Result<Vec<String>> {
    let mut out = Vec::new();
    for line in BufReader::new(File::open(path)?).lines() {
        let line = line?;
        let line = line.trim();
        if !line.is_empty() {
            out.push(line.to_string());
        }
    }
    Ok(out)
}

struct LoadedMatrix {
    data: BinaryMatrix,
    item_names: Option<Vec<String>>,
    ids: Option<Vec<String>>,
}

fn load_matrix(input: &MatrixInput, manifest: &mut RunManifest) -> Result<LoadedMatrix> {
    manifest.input(&input.input)?;
    let reader = BufReader::new(File::open(&input.input)?);
    let (data, mut item_names) = match input.format {
        MatrixFormat::Mm => (BinaryMatrix::read_matrix_market(reader)?, None),
        MatrixFormat::Csv => BinaryMatrix::read_csv(reader)?,
    };
    if let Some(path) = &input.vocab {
        manifest.input(path)?;
        item_names = Some(read_lines(path)?);
    }
    if let Some(names) = &item_names {
        if names.len() != data.n_cols() {
            return Err(Error::InvalidArgument(format!(
                "{} item names for {} columns",
                names.len(),
                data.n_cols()
            )));
        }
    }
    let ids = match &input.ids {
        Some(path) => {
            manifest.input(path)?;
            let ids = read_lines(path)?;
            if ids.len() != data.n_rows() {
                return Err(Error::InvalidArgument(format!("{} ids for {} rows", ids.len(), data.n_rows())));
            }
            Some(ids)
        }
        None => None,
    };
    Ok(LoadedMatrix { data, item_names, ids })
}

fn parse_sr_pairs(items: &[String], fallback: (f64, f64)) -> Result<Vec<(f64, f64)>> {
    if items.is_empty() {
        return Ok(vec![fallback]);
    }
    if items.len() == 1 && items[0] == "default" {
        return Ok(GridSpec::default_sr_pairs());
    }
    items
        .iter()
        .map(|item| {
            let (s, r) = item
                .split_once(':')
                .ok_or_else(|| Error::InvalidArgument(format!("expected s:r, got {item:?}")))?;
            let parse = |v: &str| {
                v.trim()
                    .parse::<f64>()
                    .map_err(|_| Error::InvalidArgument(format!("bad number {v:?} in {item:?}")))
            };
            Ok((parse(s)?, parse(r)?))
        })
        .collect()
}

pub fn ingest(args: &IngestArgs, exec: Execution) -> Result<()> {
    if !(0.0..1.0).contains(&args.threshold) {
        return Err(Error::InvalidArgument(format!("--threshold {} not in [0, 1)", args.threshold)));
    }
    let mut manifest = RunManifest::start("ingest", None);
    manifest.config(&serde_json::json!({
        "corpus_format": format!("{:?}", args.corpus_format).to_lowercase(),
        "header": !args.no_header,
        "threshold": args.threshold,
    }))?;
    manifest.input(&args.input)?;
    let file = File::open(&args.input)?;
    let corpus = match args.corpus_format {
        CorpusFormat::Lines => Corpus::from_lines(BufReader::new(file))?,
        CorpusFormat::Csv => Corpus::from_csv(file, !args.no_header)?,
    };
    let artifact = build_term_matrix(&corpus, args.threshold, exec)?;
    create_out_dir(&args.out_dir)?;
    let dir = &args.out_dir;
    emit(&mut manifest, dir.join("terms.mtx"), |w| artifact.matrix.write_matrix_market(w))?;
    emit(&mut manifest, dir.join("vocabulary.txt"), |w| artifact.write_vocabulary(w))?;
    emit(&mut manifest, dir.join("frequencies.csv"), |w| artifact.write_frequency_csv(w))?;
    emit(&mut manifest, dir.join("doc_ids.txt"), |w| {
        for id in &artifact.doc_ids {
            writeln!(w, "{id}")?;
        }
        Ok(())
    })?;
    println!(
        "{} documents x {} terms (min document frequency {})",
        artifact.matrix.n_rows(),
        artifact.matrix.n_cols(),
        artifact.min_document_frequency
    );
    manifest.finish(dir)
}

/// Writes a diagnostics file for a failed fit and returns the error with
/// the file's location appended.
fn with_diagnostics(err: Error, dir: &Path) -> Error {
    let Error::FitFailure { restarts, diagnostics } = &err else {
        return err;
    };
    let path = dir.join("diagnostics.txt");
    let written = fs::create_dir_all(dir)
        .and_then(|_| fs::write(&path, format!("{diagnostics}\n")))
        .is_ok();
    if written {
        Error::FitFailure {
            restarts: *restarts,
            diagnostics: format!("{diagnostics} (details in {})", path.display()),
        }
    } else {
        err
    }
}

pub fn fit(args: &FitArgs, exec: Execution) -> Result<()> {
    let cfg = fit_config(&args.est, args.components, args.dimensions, exec)?;
    let mut manifest = RunManifest::start("fit", None);
    manifest.config(&cfg)?;
    let loaded = load_matrix(&args.data, &mut manifest)?;
    let result = pmltm::fit(&loaded.data, &cfg).map_err(|e| with_diagnostics(e, &args.out_dir))?;
    manifest.seeds = vec![cfg.hyper.seed, result.seed];
    create_out_dir(&args.out_dir)?;
    let dir = &args.out_dir;
    let doc = ModelDocument::from_fit(&result, &cfg, loaded.item_names.as_deref());
    emit(&mut manifest, dir.join("model.json"), |w| doc.write_json(w))?;
    emit(&mut manifest, dir.join("assignments.csv"), |w| {
        write_assignments_csv(&result, loaded.ids.as_deref(), w)
    })?;
    emit(&mut manifest, dir.join("trace.csv"), |w| write_trace_csv(&result, w))?;
    println!(
        "converged={} iterations={} bound={:.6} bic={} effective_df={}",
        result.converged,
        result.iterations,
        result.final_bound(),
        result.bic.map_or("unavailable".to_string(), |b| format!("{b:.6}")),
        result.effective_df
    );
    manifest.finish(dir)
}

pub fn select(args: &SelectArgs, exec: Execution) -> Result<()> {
    let base = fit_config(&args.est, 1, 1, exec)?;
    let pairs = parse_sr_pairs(&args.sr_grid, (args.est.shape, args.est.rate))?;
    let spec = GridSpec::new(args.components.clone(), args.dimensions.clone(), pairs, base);
    spec.validate()?;
    let mut manifest = RunManifest::start("select", None);
    manifest.config(&spec)?;
    manifest.seeds = vec![args.est.seed];
    let loaded = load_matrix(&args.data, &mut manifest)?;
    let grid = grid_search(&loaded.data, &spec)?;
    create_out_dir(&args.out_dir)?;
    let dir = &args.out_dir;
    let doc = GridDocument::new(&grid, loaded.item_names.as_deref());
    emit(&mut manifest, dir.join("grid.csv"), |w| write_grid_csv(&grid, w))?;
    emit(&mut manifest, dir.join("grid.json"), |w| Ok(serde_json::to_writer_pretty(w, &doc)?))?;
    emit(&mut manifest, dir.join("best_model.json"), |w| doc.best_model.write_json(w))?;
    emit(&mut manifest, dir.join("best_assignments.csv"), |w| {
        write_assignments_csv(&grid.best_fit, loaded.ids.as_deref(), w)
    })?;
    let best = grid.best_cell();
    println!(
        "best: G={} D={} s={} r={} bic={:.6}",
        best.components,
        best.dimensions,
        best.shape,
        best.rate,
        best.bic.unwrap_or(f64::NAN)
    );
    manifest.finish(dir)
}

pub fn simulate(args: &SimulateArgs, exec: Execution) -> Result<()> {
    if !args.table1 {
        return Err(Error::InvalidArgument("pass --table1 to select the built-in design".into()));
    }
    let mut spec = SimulationSpec::table1(args.est.seed);
    spec.n = args.n;
    spec.validate()?;
    let cfg = fit_config(&args.est, spec.n_components(), spec.dimensions(), exec)?;
    let pairs = parse_sr_pairs(&args.sr_grid, (args.est.shape, args.est.rate))?;
    if args.replicate == Some(0) {
        return Err(Error::InvalidArgument("--replicate must be >= 1".into()));
    }
    let mut manifest = RunManifest::start("simulate", None);
    manifest.config(&serde_json::json!({ "spec": &spec, "fit": &cfg, "sr_pairs": &pairs, "replicate": args.replicate }))?;
    manifest.seeds = vec![args.est.seed];
    let (data, labels) = generate_dataset(&spec)?;
    create_out_dir(&args.out_dir)?;
    let dir = &args.out_dir;
    match args.format {
        MatrixFormat::Mm => emit(&mut manifest, dir.join("data.mtx"), |w| data.write_matrix_market(w))?,
        MatrixFormat::Csv => emit(&mut manifest, dir.join("data.csv"), |w| data.write_csv(w, None))?,
    }
    emit(&mut manifest, dir.join("labels.txt"), |w| {
        for l in &labels {
            writeln!(w, "{l}")?;
        }
        Ok(())
    })?;
    emit(&mut manifest, dir.join("spec.json"), |w| Ok(serde_json::to_writer_pretty(w, &spec)?))?;
    if let Some(reps) = args.replicate {
        let report = replication_study(&spec, &pairs, reps, &cfg)?;
        emit(&mut manifest, dir.join("replication.csv"), |w| write_replication_csv(&report, w))?;
        emit(&mut manifest, dir.join("replication.json"), |w| Ok(serde_json::to_writer_pretty(w, &report)?))?;
        for r in &report.rows {
            println!(
                "s={} r={} mean_bic={} mean_ari={} failures={}",
                r.shape,
                r.rate,
                r.mean_bic.map_or("-".into(), |v| format!("{v:.3}")),
                r.mean_ari.map_or("-".into(), |v| format!("{v:.4}")),
                r.failures
            );
        }
    }
    manifest.finish(dir)
}

pub fn evaluate(args: &EvaluateArgs) -> Result<()> {
    let a = read_labels(File::open(&args.labels_a)?)?;
    let b = read_labels(File::open(&args.labels_b)?)?;
    println!("{}", adjusted_rand_index(&a, &b)?);
    Ok(())
}

pub fn inspect(args: &InspectArgs) -> Result<()> {
    let doc = ModelDocument::read_json(BufReader::new(File::open(&args.model)?))?;
    let params = doc.to_params()?;
    let mut out = std::io::stdout().lock();
    writeln!(out, "components {}  dimensions {}  items {}", doc.components, doc.dimensions, doc.items)?;
    writeln!(
        out,
        "converged {}  iterations {}  bound {:.6}",
        doc.trace.converged, doc.trace.iterations, doc.trace.final_bound
    )?;
    writeln!(
        out,
        "bic {}  quadrature log-likelihood {}  effective df {}",
        doc.bic.map_or("unavailable".into(), |v| format!("{v:.6}")),
        doc.quad_log_lik.map_or("unavailable".into(), |v| format!("{v:.6}")),
        doc.effective_df
    )?;
    let name = |m: usize| doc.item_names.as_ref().map_or_else(|| format!("item{}", m + 1), |v| v[m].clone());
    for g in 0..doc.components {
        let nonzero = (0..doc.items)
            .filter(|&m| (0..doc.dimensions).any(|d| params.weights[[g, m, d]].abs() >= doc.hyperparameters.zero_tol))
            .count();
        writeln!(out, "\ncomponent {}  eta {:.4}  items with nonzero slopes {nonzero}", g + 1, params.eta[g])?;
        let mut order: Vec<usize> = (0..doc.items).collect();
        let strength = |m: usize| doc.standardized_loadings[g][m].iter().map(|v| v * v).sum::<f64>();
        order.sort_by(|&a, &b| strength(b).total_cmp(&strength(a)).then(a.cmp(&b)));
        for &m in order.iter().take(args.top) {
            if strength(m) == 0.0 {
                break;
            }
            let loadings: Vec<String> = doc.standardized_loadings[g][m].iter().map(|v| format!("{v:+.3}")).collect();
            writeln!(
                out,
                "  {:<20} median p {:.3}  loadings {}",
                name(m),
                doc.median_probabilities[g][m],
                loadings.join(" ")
            )?;
        }
    }
    Ok(())
}
