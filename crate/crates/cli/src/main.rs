mod commands;
mod manifest;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use pmltm::Error;

#[derive(Parser, Debug)]
#[command(name = "pmltm", version, about = "Penalized mixtures of latent trait models for binary data")]
struct Cli {
    /// Print progress and warnings to stderr.
    #[arg(short, long, global = true)]
    verbose: bool,

    /// Worker threads (1 runs everything sequentially). Results do not
    /// depend on this value.
    #[arg(long, global = true)]
    threads: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Turn a review corpus into a binary document-term matrix.
    Ingest(IngestArgs),
    /// Fit one model.
    Fit(FitArgs),
    /// Fit a grid of (G, D, s, r) and pick the minimum-BIC model.
    Select(SelectArgs),
    /// Generate synthetic data and optionally run a replication study.
    Simulate(SimulateArgs),
    /// Adjusted Rand index between two label files.
    Evaluate(EvaluateArgs),
    /// Summarize a fitted model file.
    Inspect(InspectArgs),
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq)]
pub enum MatrixFormat {
    /// MatrixMarket coordinate file.
    Mm,
    /// Dense 0/1 CSV, optional header row of item names.
    Csv,
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq)]
pub enum CorpusFormat {
    /// One document per line.
    Lines,
    /// Two columns: id, text.
    Csv,
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq)]
pub enum PenaltyArg {
    GammaLaplace,
    None,
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq)]
pub enum InitArg {
    Random,
    Kmeans,
}

#[derive(Args, Debug)]
pub struct IngestArgs {
    /// Corpus file.
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long, value_enum, default_value = "lines")]
    pub corpus_format: CorpusFormat,
    /// The CSV corpus has no header row.
    #[arg(long)]
    pub no_header: bool,
    /// Minimum fraction of documents a term must appear in.
    #[arg(long, default_value_t = 0.02)]
    pub threshold: f64,
    #[arg(long)]
    pub out_dir: PathBuf,
}

/// Estimation settings shared by `fit`, `select` and `simulate`.
#[derive(Args, Debug, Clone)]
pub struct EstimationArgs {
    #[arg(long, default_value_t = 1.0)]
    pub shape: f64,
    #[arg(long, default_value_t = 0.5)]
    pub rate: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 500)]
    pub max_iter: usize,
    /// Aitken stopping tolerance.
    #[arg(long, default_value_t = 0.01)]
    pub tol: f64,
    #[arg(long, default_value_t = 5)]
    pub restarts: usize,
    /// Gauss-Hermite nodes per latent dimension.
    #[arg(long, default_value_t = 21)]
    pub quad_nodes: usize,
    /// Slopes below this magnitude count as zero.
    #[arg(long, default_value_t = 1e-4)]
    pub zero_tol: f64,
    #[arg(long, default_value_t = 20.0)]
    pub xi_max: f64,
    #[arg(long, value_enum, default_value = "gamma-laplace")]
    pub penalty: PenaltyArg,
    #[arg(long, value_enum, default_value = "random")]
    pub init: InitArg,
}

/// Where a data matrix comes from.
#[derive(Args, Debug, Clone)]
pub struct MatrixInput {
    /// Data matrix file.
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long, value_enum, default_value = "mm")]
    pub format: MatrixFormat,
    /// Item names, one per line (for example an ingest vocabulary).
    #[arg(long)]
    pub vocab: Option<PathBuf>,
    /// Row identifiers, one per line (for example ingest document ids).
    #[arg(long)]
    pub ids: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct FitArgs {
    #[command(flatten)]
    pub data: MatrixInput,
    #[arg(long, default_value_t = 2)]
    pub components: usize,
    #[arg(long, default_value_t = 1)]
    pub dimensions: usize,
    #[command(flatten)]
    pub est: EstimationArgs,
    #[arg(long)]
    pub out_dir: PathBuf,
}

#[derive(Args, Debug)]
pub struct SelectArgs {
    #[command(flatten)]
    pub data: MatrixInput,
    /// Component counts to try.
    #[arg(long, value_delimiter = ',', default_value = "1,2,3,4,5")]
    pub components: Vec<usize>,
    /// Latent dimensions to try.
    #[arg(long, value_delimiter = ',', default_value = "1,2,3,4,5")]
    pub dimensions: Vec<usize>,
    /// (s, r) pairs as `s:r`, comma separated. Defaults to the single pair
    /// given by --shape and --rate.
    #[arg(long, value_delimiter = ',')]
    pub sr_grid: Vec<String>,
    #[command(flatten)]
    pub est: EstimationArgs,
    #[arg(long)]
    pub out_dir: PathBuf,
}

#[derive(Args, Debug)]
pub struct SimulateArgs {
    /// Use the built-in design: two equally weighted components, ten items,
    /// one latent trait, each component loading on a different half of the
    /// items. This is currently the only design and the flag is required.
    #[arg(long)]
    pub table1: bool,
    #[arg(long, default_value_t = 500)]
    pub n: usize,
    /// Run a replication study with this many replicates.
    #[arg(long)]
    pub replicate: Option<usize>,
    /// (s, r) pairs as `s:r`, comma separated, or `default` for
    /// 0.1:0.5,0.5:0.5,1:0.5,2:0.5.
    #[arg(long, value_delimiter = ',', default_value = "default")]
    pub sr_grid: Vec<String>,
    #[arg(long, value_enum, default_value = "mm")]
    pub format: MatrixFormat,
    #[command(flatten)]
    pub est: EstimationArgs,
    #[arg(long)]
    pub out_dir: PathBuf,
}

#[derive(Args, Debug)]
pub struct EvaluateArgs {
    /// First label file (one label per line, or a CSV with a `label` column).
    pub labels_a: PathBuf,
    /// Second label file.
    pub labels_b: PathBuf,
}

#[derive(Args, Debug)]
pub struct InspectArgs {
    /// Model JSON written by `fit` or `select`.
    pub model: PathBuf,
    /// Largest standardized loadings to list per component.
    #[arg(long, default_value_t = 10)]
    pub top: usize,
}

/// Exit status for an error, by category.
fn exit_code(e: &Error) -> u8 {
    match e {
        Error::InvalidArgument(_) | Error::IngestFailure(_) | Error::Unsupported(_) => 2,
        Error::NumericalFailure(_) | Error::FitFailure { .. } | Error::SelectionFailure(_) => 3,
        Error::Io(_) | Error::Parse(_) | Error::Json(_) | Error::Csv(_) => 4,
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = if cli.verbose { log::LevelFilter::Info } else { log::LevelFilter::Error };
    env_logger::Builder::new().filter_level(level).format_timestamp(None).init();

    let result = commands::configure_threads(cli.threads).and_then(|exec| match &cli.command {
        Command::Ingest(a) => commands::ingest(a, exec),
        Command::Fit(a) => commands::fit(a, exec),
        Command::Select(a) => commands::select(a, exec),
        Command::Simulate(a) => commands::simulate(a, exec),
        Command::Evaluate(a) => commands::evaluate(a),
        Command::Inspect(a) => commands::inspect(a),
    });
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
