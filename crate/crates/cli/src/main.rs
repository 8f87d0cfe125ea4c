//! `pmd`: ingest rating data, build item metrics, inspect user pairs and
//! run MAE sweeps.
//!
//! Exit codes: 0 ok, 1 a `--check` assertion failed, 2 bad configuration,
//! 3 bad or unreadable data.

mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, CommandFactory, FromArgMatches, Parser, Subcommand};

use config::Layer;

#[derive(Debug)]
pub enum CliError {
    Check(String),
    Config(String),
    Data(String),
}

impl CliError {
    fn code(&self) -> u8 {
        match self {
            CliError::Check(_) => 1,
            CliError::Config(_) => 2,
            CliError::Data(_) => 3,
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Check(m) => write!(f, "check failed: {m}"),
            CliError::Config(m) => write!(f, "configuration error: {m}"),
            CliError::Data(m) => write!(f, "data error: {m}"),
        }
    }
}

impl From<pmd::Error> for CliError {
    fn from(e: pmd::Error) -> Self {
        use pmd::Error::*;
        match e {
            Config(_) | UnknownMeasure(_) | MissingInput { .. } => CliError::Config(e.to_string()),
            _ => CliError::Data(e.to_string()),
        }
    }
}

#[derive(Debug, Parser)]
#[command(name = "pmd", about = "Preference distances between users and the recommenders built on them")]
struct Cli {
    /// Directory that receives every output file.
    #[arg(long, global = true)]
    out: Option<PathBuf>,

    /// Worker threads (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,

    /// Flat key=value settings file; flags override it.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// More log output (-v info details, -vv debug).
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    verbose: u8,

    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Read a rating file, print its statistics and write the id maps.
    Ingest(DataArgs),
    /// Build (or load) the item distance matrix from tag-genome vectors.
    Metric(DataArgs),
    /// Score the toy users with every measure.
    CaseStudy(CaseStudyArgs),
    /// Score one pair of users.
    Pair(PairArgs),
    /// Run the MAE sweep over measures, train fractions and K.
    Evaluate(EvaluateArgs),
}

#[derive(Debug, Default, Args)]
struct DataArgs {
    /// ml-100k, ml-1m or csv.
    #[arg(long)]
    dataset: Option<String>,
    /// Rating file.
    #[arg(long)]
    ratings: Option<PathBuf>,
    /// Release directory; the ratings and titles files are found inside.
    #[arg(long)]
    data_dir: Option<PathBuf>,
    /// `u.item` or `movies.dat`.
    #[arg(long)]
    item_titles: Option<PathBuf>,
    /// `item,genome_movie_id` table.
    #[arg(long)]
    links: Option<PathBuf>,
    /// `genome-scores.csv`.
    #[arg(long)]
    genome_scores: Option<PathBuf>,
    /// `movies.csv` of the genome release.
    #[arg(long)]
    genome_movies: Option<PathBuf>,
    /// Directory holding genome-scores.csv and movies.csv.
    #[arg(long)]
    genome_dir: Option<PathBuf>,
    /// arccos or one-minus.
    #[arg(long)]
    mode: Option<String>,
    /// Seed for sampled checks and splits.
    #[arg(long)]
    seed: Option<u64>,
    /// Always recompute the item metric.
    #[arg(long)]
    no_metric_cache: bool,
}

#[derive(Debug, Args)]
struct CaseStudyArgs {
    /// `user,item,rating` CSV (default: the built-in toy ratings).
    #[arg(long)]
    ratings: Option<PathBuf>,
    /// Square item-similarity CSV (default: the built-in table).
    #[arg(long)]
    similarity: Option<PathBuf>,
    /// arccos or one-minus (default one-minus).
    #[arg(long)]
    mode: Option<String>,
    /// Verify the expected values and orderings; exit 1 if any fails.
    #[arg(long)]
    check: bool,
}

#[derive(Debug, Args)]
struct PairArgs {
    #[arg(long)]
    user_a: String,
    #[arg(long)]
    user_b: String,
    #[arg(long, default_value = "pmd")]
    measure: String,
    /// Print the optimal coupling of a PMD score.
    #[arg(long)]
    coupling: bool,
    /// Item-similarity CSV for toy-style ratings.
    #[arg(long)]
    similarity: Option<PathBuf>,
    #[command(flatten)]
    data: DataArgs,
}

#[derive(Debug, Args)]
struct EvaluateArgs {
    /// fig3a .. fig3f.
    #[arg(long)]
    preset: Option<String>,
    /// Comma-separated measure keys; `user-mean` adds the baseline.
    #[arg(long)]
    measures: Option<String>,
    /// Comma-separated train fractions.
    #[arg(long)]
    fractions: Option<String>,
    /// Comma-separated neighborhood sizes.
    #[arg(long)]
    k: Option<String>,
    #[arg(long)]
    reps: Option<usize>,
    /// exact or entropic.
    #[arg(long)]
    solver: Option<String>,
    #[arg(long)]
    epsilon: Option<f64>,
    #[arg(long)]
    max_iter: Option<usize>,
    /// Keep only each user's top-T items before transport.
    #[arg(long)]
    truncate: Option<usize>,
    /// Recompute pair scores instead of reading the score cache.
    #[arg(long)]
    no_score_cache: bool,
    #[command(flatten)]
    data: DataArgs,
}

fn put(layer: &mut Layer, key: &str, value: Option<impl ToString>) {
    if let Some(v) = value {
        layer.insert(key.to_string(), v.to_string());
    }
}

fn put_path(layer: &mut Layer, key: &str, value: &Option<PathBuf>) {
    put(layer, key, value.as_ref().map(|p| p.display().to_string()));
}

impl DataArgs {
    fn layer(&self, layer: &mut Layer) {
        put(layer, "dataset", self.dataset.as_ref());
        put_path(layer, "ratings", &self.ratings);
        put_path(layer, "data-dir", &self.data_dir);
        put_path(layer, "item-titles", &self.item_titles);
        put_path(layer, "links", &self.links);
        put_path(layer, "genome-scores", &self.genome_scores);
        put_path(layer, "genome-movies", &self.genome_movies);
        put_path(layer, "genome-dir", &self.genome_dir);
        put(layer, "mode", self.mode.as_ref());
        put(layer, "seed", self.seed);
        if self.no_metric_cache {
            layer.insert("metric-cache".into(), "false".into());
        }
    }
}

impl Cli {
    fn flag_layer(&self) -> Layer {
        let mut layer = Layer::new();
        put_path(&mut layer, "out", &self.out);
        put(&mut layer, "threads", self.threads);
        match &self.command {
            Command::Ingest(d) | Command::Metric(d) => d.layer(&mut layer),
            Command::CaseStudy(c) => {
                put_path(&mut layer, "ratings", &c.ratings);
                put_path(&mut layer, "similarity", &c.similarity);
                put(&mut layer, "mode", c.mode.as_ref());
            }
            Command::Pair(p) => {
                p.data.layer(&mut layer);
                put_path(&mut layer, "similarity", &p.similarity);
            }
            Command::Evaluate(e) => {
                e.data.layer(&mut layer);
                put(&mut layer, "preset", e.preset.as_ref());
                put(&mut layer, "measures", e.measures.as_ref());
                put(&mut layer, "fractions", e.fractions.as_ref());
                put(&mut layer, "k", e.k.as_ref());
                put(&mut layer, "reps", e.reps);
                put(&mut layer, "solver", e.solver.as_ref());
                put(&mut layer, "epsilon", e.epsilon);
                put(&mut layer, "max-iter", e.max_iter);
                put(&mut layer, "truncate", e.truncate);
                if e.no_score_cache {
                    layer.insert("score-cache".into(), "false".into());
                }
            }
        }
        layer
    }
}

fn version() -> String {
    format!(
        "{} (metric cache {} v{}, score cache {} v{})",
        env!("CARGO_PKG_VERSION"),
        String::from_utf8_lossy(&pmd::datasets::METRIC_CACHE_MAGIC),
        pmd::datasets::METRIC_CACHE_VERSION,
        String::from_utf8_lossy(&pmd::datasets::SCORE_CACHE_MAGIC),
        pmd::datasets::SCORE_CACHE_VERSION,
    )
}

fn run(cli: Cli) -> Result<(), CliError> {
    let file = match &cli.config {
        Some(path) => config::read_config_file(path)?,
        None => Layer::new(),
    };
    let settings = config::merge(file, cli.flag_layer())?;
    let cfg = config::RunConfig::from_layer(&settings)?;
    if let Some(n) = cfg.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| CliError::Config(format!("cannot size thread pool: {e}")))?;
    }
    match cli.command {
        Command::Ingest(_) => commands::ingest(&cfg),
        Command::Metric(_) => commands::metric(&cfg),
        Command::CaseStudy(args) => commands::case_study(&cfg, args.check),
        Command::Pair(args) => commands::pair(&cfg, &args.user_a, &args.user_b, &args.measure, args.coupling),
        Command::Evaluate(_) => commands::evaluate(&cfg),
    }
}

fn main() -> ExitCode {
    let matches = Cli::command().version(version()).get_matches();
    let cli = match Cli::from_arg_matches(&matches) {
        Ok(cli) => cli,
        Err(e) => e.exit(),
    };
    let level = match cli.verbose {
        0 => "warn,pmd=info,pmd_cli=info",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level))
        .format_timestamp(None)
        .init();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.code())
        }
    }
}
