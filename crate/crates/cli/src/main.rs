use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use fakesci_core::baselines::Hyperparameters;
use fakesci_core::classifier::predictions_to_jsonl;
use fakesci_core::corpus::{corpus_from_records, fetch_remote, load_corpus, save_records, CorpusError, ENDPOINT_ENV};
use fakesci_core::eval::{read_json_reports, write_report, ReportFormat};
use fakesci_core::genclient::{
    articles_to_json, generate_corpus, EndpointConfig, GenError, GenerateOptions, Secret, API_KEY_ENV, BASE_URL_ENV,
    DEFAULT_BASE_URL,
};
use fakesci_core::pipeline::{
    calibrate_models, classify_from_artifacts, load_stopwords, premise_report, run_pipeline, train_model, FailureKind,
    PipelineConfig, PipelineError, PremiseOptions, SplitSizes,
};
use fakesci_core::textnet::{graph_stats, TrainingModel};
use fakesci_core::transport::{FixtureTransport, HttpTransport, RecordingTransport, Transport};
use fakesci_core::{Disease, Period, Source};
use tracing::{info, warn};

#[derive(Parser)]
#[command(name = "fakesci", version, about = "Bigram-network detector for generated biomedical abstracts")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate abstracts through a chat-completion endpoint.
    Generate(GenerateArgs),
    /// Fetch publication records from the abstract search service.
    Ingest(IngestArgs),
    /// Build and prune the network model of one corpus.
    Train(TrainArgs),
    /// Compute calibration ranges from saved models.
    Calibrate(CalibrateArgs),
    /// Label a corpus with saved models and calibration.
    Classify(ClassifyArgs),
    /// Full run: models, calibration, network classifier and baselines.
    Benchmark(BenchmarkArgs),
    /// Topology and fold-mean tables across publication periods.
    Premise(PremiseArgs),
    /// Re-render a JSON report in another format.
    Report(ReportArgs),
}

#[derive(Args, Clone)]
struct SplitArgs {
    #[arg(long, default_value_t = 100)]
    train_size: usize,
    #[arg(long, default_value_t = 100)]
    fold_size: usize,
    /// Publication documents held out for testing.
    #[arg(long, default_value_t = 50)]
    test_pubmed: usize,
    /// Generated documents held out for testing.
    #[arg(long, default_value_t = 50)]
    test_gpt: usize,
    #[arg(long)]
    include_titles: bool,
    /// One stopword per line; defaults to the embedded list.
    #[arg(long)]
    stopwords: Option<PathBuf>,
}

impl SplitArgs {
    fn sizes(&self, source: Source) -> SplitSizes {
        SplitSizes {
            train: self.train_size,
            fold: self.fold_size,
            test: match source {
                Source::Gpt => self.test_gpt,
                Source::Pubmed => self.test_pubmed,
            },
        }
    }
}

#[derive(Args)]
struct GenerateArgs {
    #[arg(long)]
    disease: Disease,
    #[arg(long, default_value_t = 20)]
    total: usize,
    #[arg(long)]
    batch_size: Option<usize>,
    /// Output corpus file.
    #[arg(long)]
    out: PathBuf,
    /// Raw batches are kept here; existing batches are reused.
    #[arg(long)]
    raw_dir: Option<PathBuf>,
    /// Replay recorded exchanges instead of calling the endpoint.
    #[arg(long)]
    fixtures: Option<PathBuf>,
    /// Record live exchanges into this directory.
    #[arg(long)]
    record: Option<PathBuf>,
    #[arg(long)]
    base_url: Option<String>,
    #[arg(long)]
    model: Option<String>,
    #[arg(long)]
    temperature: Option<f64>,
}

#[derive(Args)]
struct IngestArgs {
    #[arg(long)]
    query: String,
    #[arg(long)]
    disease: Disease,
    #[arg(long)]
    period: Option<Period>,
    #[arg(long)]
    out: PathBuf,
    /// Search endpoint; falls back to the environment.
    #[arg(long)]
    endpoint: Option<String>,
    #[arg(long)]
    fixtures: Option<PathBuf>,
}

#[derive(Args)]
struct TrainArgs {
    #[arg(long)]
    corpus: PathBuf,
    #[arg(long)]
    source: Source,
    #[arg(long)]
    disease: Disease,
    #[arg(long)]
    period: Option<Period>,
    #[command(flatten)]
    split: SplitArgs,
    /// Output model file.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct CalibrateArgs {
    #[arg(long)]
    gpt_corpus: PathBuf,
    #[arg(long)]
    pubmed_corpus: PathBuf,
    #[arg(long)]
    model_gpt: PathBuf,
    #[arg(long)]
    model_pubmed: PathBuf,
    #[arg(long)]
    disease: Disease,
    #[arg(long)]
    period: Option<Period>,
    #[command(flatten)]
    split: SplitArgs,
    /// Output calibration file.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct ClassifyArgs {
    #[arg(long)]
    corpus: PathBuf,
    /// Source the records are loaded as; predictions do not depend on it.
    #[arg(long)]
    source: Source,
    #[arg(long)]
    disease: Disease,
    #[arg(long)]
    period: Option<Period>,
    #[arg(long)]
    model_gpt: PathBuf,
    #[arg(long)]
    model_pubmed: PathBuf,
    #[arg(long)]
    calibration: PathBuf,
    #[arg(long)]
    include_titles: bool,
    #[arg(long)]
    stopwords: Option<PathBuf>,
    /// Output JSON-lines predictions.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct BenchmarkArgs {
    #[arg(long)]
    gpt_corpus: PathBuf,
    #[arg(long)]
    pubmed_corpus: PathBuf,
    #[arg(long)]
    disease: Disease,
    #[arg(long, default_value = "2020-2024")]
    period: Period,
    #[command(flatten)]
    split: SplitArgs,
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = 42)]
    seed: u64,
    #[arg(long, default_value = "csv")]
    format: ReportFormat,
    #[arg(long, default_value_t = 0.1)]
    learning_rate: f64,
    #[arg(long, default_value_t = 200)]
    epochs: usize,
    #[arg(long, default_value_t = 1e-4)]
    l2: f64,
}

#[derive(Args)]
struct PremiseArgs {
    #[arg(long)]
    gpt_corpus: PathBuf,
    /// `PERIOD=PATH`, repeatable, e.g. `2010-2014=pub10.json`.
    #[arg(long = "pubmed-corpus", value_parser = parse_period_path, required = true)]
    pubmed_corpora: Vec<(Period, PathBuf)>,
    #[arg(long)]
    disease: Disease,
    #[arg(long, default_value_t = 100)]
    train_size: usize,
    #[arg(long, default_value_t = 100)]
    fold_size: usize,
    #[arg(long)]
    include_titles: bool,
    /// Adds node and edge counts before pruning.
    #[arg(long)]
    unpruned: bool,
    #[arg(long)]
    stopwords: Option<PathBuf>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct ReportArgs {
    /// Report written with `--format json`.
    #[arg(long)]
    input: PathBuf,
    #[arg(long, default_value = "md")]
    format: ReportFormat,
    /// Writes to stdout when absent.
    #[arg(long)]
    out: Option<PathBuf>,
}

fn parse_period_path(s: &str) -> Result<(Period, PathBuf), String> {
    let (p, path) = s.split_once('=').ok_or("expected PERIOD=PATH")?;
    Ok((p.parse::<Period>()?, PathBuf::from(path)))
}

/// Message plus exit code.
struct Failure {
    code: u8,
    message: String,
}

impl Failure {
    fn new(kind: FailureKind, message: impl Into<String>) -> Self {
        Failure {
            code: kind.exit_code() as u8,
            message: message.into(),
        }
    }
}

impl From<PipelineError> for Failure {
    fn from(e: PipelineError) -> Self {
        Failure::new(e.kind(), e.to_string())
    }
}

fn corpus_failure(e: CorpusError) -> Failure {
    let kind = match e {
        CorpusError::Transport(_) | CorpusError::HttpStatus(_) | CorpusError::NonJsonResponse(_) => FailureKind::External,
        CorpusError::Io { .. } => FailureKind::Config,
        _ => FailureKind::Data,
    };
    Failure::new(kind, e.to_string())
}

fn io_failure(path: &Path, e: impl std::fmt::Display) -> Failure {
    Failure::new(FailureKind::Data, format!("{}: {e}", path.display()))
}

fn write(path: &Path, bytes: &[u8]) -> Result<(), Failure> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| io_failure(dir, e))?;
    }
    fs::write(path, bytes).map_err(|e| io_failure(path, e))
}

fn source_period(source: Source, period: Option<Period>) -> Option<Period> {
    match source {
        Source::Gpt => None,
        Source::Pubmed => period,
    }
}

fn generate(args: GenerateArgs) -> Result<(), Failure> {
    let base = args
        .base_url
        .or_else(|| std::env::var(BASE_URL_ENV).ok())
        .unwrap_or_else(|| DEFAULT_BASE_URL.to_string());
    let key = match std::env::var(API_KEY_ENV) {
        Ok(k) => Secret::new(k),
        Err(_) if args.fixtures.is_some() => Secret::new(""),
        Err(_) => return Err(Failure::new(FailureKind::Config, format!("{API_KEY_ENV} is not set"))),
    };
    let mut endpoint = EndpointConfig::new(base, key);
    if let Some(m) = args.model {
        endpoint.model_name = m;
    }
    endpoint.temperature = args.temperature;
    let transport: Box<dyn Transport> = match (&args.fixtures, &args.record) {
        (Some(dir), _) => Box::new(FixtureTransport::from_dir(dir).map_err(|e| Failure::new(FailureKind::Config, e.to_string()))?),
        (None, Some(dir)) => Box::new(RecordingTransport::new(HttpTransport::new(), dir).map_err(|e| io_failure(dir, e))?),
        (None, None) => Box::new(HttpTransport::new()),
    };
    let options = GenerateOptions {
        batch_size: args.batch_size,
        word_range: None,
        raw_dir: args.raw_dir,
    };
    match generate_corpus(args.disease, args.total, &endpoint, transport.as_ref(), &options) {
        Ok(generated) => {
            write(&args.out, articles_to_json(&generated.articles).as_bytes())?;
            info!(articles = generated.articles.len(), "corpus written");
            Ok(())
        }
        Err(GenError::PartialCorpus { articles, failures, batches, .. }) => {
            write(&args.out, articles_to_json(&articles).as_bytes())?;
            let mut manifest = String::new();
            for f in &failures {
                manifest.push_str(&format!("batch {} ({} requested): {}\n", f.batch_index, f.requested, f.error));
            }
            let manifest_path = args.out.with_extension("failures.txt");
            write(&manifest_path, manifest.as_bytes())?;
            Err(Failure::new(
                FailureKind::External,
                format!(
                    "{} of {batches} batches failed; {} articles kept, see {}",
                    failures.len(),
                    articles.len(),
                    manifest_path.display()
                ),
            ))
        }
        Err(GenError::Config(m)) => Err(Failure::new(FailureKind::Config, m)),
        Err(e @ GenError::Io { .. }) => Err(Failure::new(FailureKind::Data, e.to_string())),
        Err(e) => Err(Failure::new(FailureKind::External, e.to_string())),
    }
}

fn ingest(args: IngestArgs) -> Result<(), Failure> {
    let endpoint = args
        .endpoint
        .or_else(|| std::env::var(ENDPOINT_ENV).ok())
        .ok_or_else(|| Failure::new(FailureKind::Config, format!("no endpoint: pass --endpoint or set {ENDPOINT_ENV}")))?;
    let transport: Box<dyn Transport> = match &args.fixtures {
        Some(dir) => Box::new(FixtureTransport::from_dir(dir).map_err(|e| Failure::new(FailureKind::Config, e.to_string()))?),
        None => Box::new(HttpTransport::new()),
    };
    let records = fetch_remote(&args.query, args.period, &endpoint, transport.as_ref()).map_err(corpus_failure)?;
    // validate before persisting
    let corpus = corpus_from_records(&records, Source::Pubmed, args.disease, args.period).map_err(corpus_failure)?;
    save_records(&args.out, &records).map_err(corpus_failure)?;
    info!(records = corpus.len(), "publication corpus written");
    Ok(())
}

fn train(args: TrainArgs) -> Result<(), Failure> {
    let stopwords = load_stopwords(args.split.stopwords.as_deref())?;
    let corpus = load_corpus(&args.corpus, args.source, args.disease, source_period(args.source, args.period))
        .map_err(corpus_failure)?;
    let model = train_model(&corpus, args.split.sizes(args.source), &stopwords, args.split.include_titles)?;
    let stats = graph_stats(&model);
    info!(nodes = stats.node_count, edges = stats.edge_count, "model trained");
    write(&args.out, (model.to_json() + "\n").as_bytes())
}

fn load_model(path: &Path) -> Result<TrainingModel, Failure> {
    TrainingModel::load(path).map_err(|e| Failure::new(FailureKind::Data, e.to_string()))
}

fn calibrate(args: CalibrateArgs) -> Result<(), Failure> {
    let stopwords = load_stopwords(args.split.stopwords.as_deref())?;
    let gpt = load_corpus(&args.gpt_corpus, Source::Gpt, args.disease, None).map_err(corpus_failure)?;
    let pubmed = load_corpus(&args.pubmed_corpus, Source::Pubmed, args.disease, args.period).map_err(corpus_failure)?;
    let mg = load_model(&args.model_gpt)?;
    let mp = load_model(&args.model_pubmed)?;
    let cal = calibrate_models(
        (&gpt, &mg, args.split.sizes(Source::Gpt)),
        (&pubmed, &mp, args.split.sizes(Source::Pubmed)),
        &stopwords,
        args.split.include_titles,
    )?;
    if cal.range(Source::Gpt).overlaps(&cal.range(Source::Pubmed)) {
        warn!("calibration ranges overlap; in-range checks favour the generated label");
    }
    cal.save(&args.out).map_err(|e| Failure::new(FailureKind::Data, e.to_string()))
}

fn classify(args: ClassifyArgs) -> Result<(), Failure> {
    let stopwords = load_stopwords(args.stopwords.as_deref())?;
    let corpus = load_corpus(&args.corpus, args.source, args.disease, source_period(args.source, args.period))
        .map_err(corpus_failure)?;
    let predictions = classify_from_artifacts(
        &args.model_gpt,
        &args.model_pubmed,
        &args.calibration,
        &corpus.documents,
        &stopwords,
        args.include_titles,
    )?;
    write(&args.out, predictions_to_jsonl(&predictions).as_bytes())
}

fn benchmark(args: BenchmarkArgs) -> Result<(), Failure> {
    let mut config = PipelineConfig::new(args.gpt_corpus, args.pubmed_corpus, args.disease, args.out);
    config.period = Some(args.period);
    config.train_size = args.split.train_size;
    config.fold_size = args.split.fold_size;
    config.test_pubmed = args.split.test_pubmed;
    config.test_gpt = args.split.test_gpt;
    config.include_titles = args.split.include_titles;
    config.stopwords = args.split.stopwords;
    config.format = args.format;
    config.hyper = Hyperparameters {
        learning_rate: args.learning_rate,
        epochs: args.epochs,
        regularization: args.l2,
        seed: args.seed,
    };
    let output = run_pipeline(&config)?;
    for r in &output.reports {
        match r.f1 {
            Some(f) => info!(classifier = %r.classifier, f1 = f, "scored"),
            None => info!(classifier = %r.classifier, "not implemented"),
        }
    }
    Ok(())
}

fn premise(args: PremiseArgs) -> Result<(), Failure> {
    let gpt = load_corpus(&args.gpt_corpus, Source::Gpt, args.disease, None).map_err(corpus_failure)?;
    let mut pubs = Vec::new();
    for (period, path) in &args.pubmed_corpora {
        pubs.push(load_corpus(path, Source::Pubmed, args.disease, Some(*period)).map_err(corpus_failure)?);
    }
    let options = PremiseOptions {
        train_size: args.train_size,
        fold_size: args.fold_size,
        include_titles: args.include_titles,
        include_unpruned: args.unpruned,
        stopwords: args.stopwords,
    };
    let out = premise_report(&gpt, &pubs, &args.out, &options)?;
    for f in out.files {
        info!(file = %f.display(), "written");
    }
    Ok(())
}

fn report(args: ReportArgs) -> Result<(), Failure> {
    let bytes = fs::read(&args.input).map_err(|e| Failure::new(FailureKind::Config, format!("{}: {e}", args.input.display())))?;
    let reports = read_json_reports(&bytes).map_err(|e| io_failure(&args.input, e))?;
    let rendered = write_report(&reports, args.format).map_err(|e| io_failure(&args.input, e))?;
    match args.out {
        Some(path) => write(&path, &rendered),
        None => {
            print!("{}", String::from_utf8_lossy(&rendered));
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    tracing_subscriber::fmt()
        .with_env_filter(tracing_subscriber::EnvFilter::try_from_default_env().unwrap_or_else(|_| "info".into()))
        .with_writer(std::io::stderr)
        .init();
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Generate(a) => generate(a),
        Command::Ingest(a) => ingest(a),
        Command::Train(a) => train(a),
        Command::Calibrate(a) => calibrate(a),
        Command::Classify(a) => classify(a),
        Command::Benchmark(a) => benchmark(a),
        Command::Premise(a) => premise(a),
        Command::Report(a) => report(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}
