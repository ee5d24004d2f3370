//! End-to-end orchestration: benchmark runs and premise analyses.
//!
//! Every stage writes its artifact to the output directory so later stages
//! can be replayed from disk (classification needs only the two models and
//! the calibration file).

use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;
use tracing::{info, warn};

use crate::baselines::{predict_baseline, train_baseline, vectorize, BaselineError, BaselineKind, Hyperparameters};
use crate::calibration::{fold_means, CalibrationError, CalibrationFile};
use crate::classifier::{classify_batch, predictions_to_jsonl, ClassifierConfig, ClassifyError, Prediction};
use crate::corpus::{load_corpus, preprocess_all, split_corpus, Corpus, CorpusError, Document, SplitPlan, Stopwords, TokenizedDoc};
use crate::eval::{confusion, write_report, EvalError, EvalReport, ReportFormat};
use crate::textnet::{build_network, build_unpruned, graph_stats, TextNetError, TrainingModel};
use crate::{Disease, Period, Source};

/// Report name of the network classifier.
pub const NETWORK_CLASSIFIER: &str = "BigramNet";
/// Listed in benchmark tables but intentionally not implemented.
pub const KERNEL_SVM: &str = "ClassicalSVM";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Stage {
    Config,
    Load,
    Preprocess,
    Split,
    Train,
    Calibrate,
    Classify,
    Baselines,
    Evaluate,
    Write,
}

impl fmt::Display for Stage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Stage::Config => "config",
            Stage::Load => "load",
            Stage::Preprocess => "preprocess",
            Stage::Split => "split",
            Stage::Train => "train",
            Stage::Calibrate => "calibrate",
            Stage::Classify => "classify",
            Stage::Baselines => "baselines",
            Stage::Evaluate => "evaluate",
            Stage::Write => "write",
        };
        f.write_str(s)
    }
}

/// Broad failure class, mapped to process exit codes by the CLI.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FailureKind {
    Config,
    Data,
    External,
}

impl FailureKind {
    pub fn exit_code(self) -> i32 {
        match self {
            FailureKind::Config => 2,
            FailureKind::Data => 3,
            FailureKind::External => 4,
        }
    }
}

#[derive(Debug, Error)]
pub enum StageError {
    #[error(transparent)]
    Corpus(#[from] CorpusError),
    #[error(transparent)]
    TextNet(#[from] TextNetError),
    #[error(transparent)]
    Calibration(#[from] CalibrationError),
    #[error(transparent)]
    Classify(#[from] ClassifyError),
    #[error(transparent)]
    Baseline(#[from] BaselineError),
    #[error(transparent)]
    Eval(#[from] EvalError),
    #[error("{0}")]
    Invalid(String),
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

#[derive(Debug, Error)]
#[error("stage `{stage}` failed: {source}")]
pub struct PipelineError {
    pub stage: Stage,
    #[source]
    pub source: StageError,
}

impl PipelineError {
    pub fn new(stage: Stage, source: impl Into<StageError>) -> Self {
        PipelineError {
            stage,
            source: source.into(),
        }
    }

    pub fn kind(&self) -> FailureKind {
        match &self.source {
            StageError::Invalid(_) => FailureKind::Config,
            StageError::Corpus(CorpusError::Transport(_) | CorpusError::HttpStatus(_) | CorpusError::NonJsonResponse(_)) => {
                FailureKind::External
            }
            StageError::Corpus(CorpusError::Io { .. }) if self.stage == Stage::Load => FailureKind::Config,
            _ => FailureKind::Data,
        }
    }
}

trait StageExt<T> {
    fn stage(self, stage: Stage) -> Result<T, PipelineError>;
}

impl<T, E: Into<StageError>> StageExt<T> for Result<T, E> {
    fn stage(self, stage: Stage) -> Result<T, PipelineError> {
        self.map_err(|e| PipelineError::new(stage, e))
    }
}

fn write_file(path: &Path, bytes: &[u8]) -> Result<(), PipelineError> {
    fs::write(path, bytes)
        .map_err(|source| StageError::Io {
            path: path.display().to_string(),
            source,
        })
        .stage(Stage::Write)
}

fn ensure_dir(path: &Path) -> Result<(), PipelineError> {
    fs::create_dir_all(path)
        .map_err(|source| StageError::Io {
            path: path.display().to_string(),
            source,
        })
        .stage(Stage::Write)
}

#[derive(Debug, Clone)]
pub struct PipelineConfig {
    pub gpt_corpus: PathBuf,
    pub pubmed_corpus: PathBuf,
    pub disease: Disease,
    pub period: Option<Period>,
    pub train_size: usize,
    pub fold_size: usize,
    pub test_pubmed: usize,
    pub test_gpt: usize,
    pub out_dir: PathBuf,
    pub hyper: Hyperparameters,
    pub include_titles: bool,
    pub stopwords: Option<PathBuf>,
    pub format: ReportFormat,
}

impl PipelineConfig {
    pub fn new(gpt_corpus: impl Into<PathBuf>, pubmed_corpus: impl Into<PathBuf>, disease: Disease, out_dir: impl Into<PathBuf>) -> Self {
        PipelineConfig {
            gpt_corpus: gpt_corpus.into(),
            pubmed_corpus: pubmed_corpus.into(),
            disease,
            period: Some(Period::P2020_2024),
            train_size: 100,
            fold_size: 100,
            test_pubmed: 50,
            test_gpt: 50,
            out_dir: out_dir.into(),
            hyper: Hyperparameters::default(),
            include_titles: false,
            stopwords: None,
            format: ReportFormat::Csv,
        }
    }

    fn validate(&self) -> Result<(), PipelineError> {
        let invalid = |m: &str| Err(PipelineError::new(Stage::Config, StageError::Invalid(m.to_string())));
        if self.gpt_corpus == self.pubmed_corpus {
            return invalid("generated and publication corpora must be different files");
        }
        if self.train_size == 0 || self.fold_size == 0 {
            return invalid("train and fold sizes must be positive");
        }
        if self.test_pubmed + self.test_gpt == 0 {
            return invalid("test set is empty");
        }
        Ok(())
    }
}

pub fn load_stopwords(path: Option<&Path>) -> Result<Stopwords, PipelineError> {
    match path {
        Some(p) => Stopwords::from_file(p).stage(Stage::Config),
        None => Ok(Stopwords::embedded()),
    }
}

/// Split with enough trailing documents reserved for testing.
pub fn plan_with_test(corpus: &Corpus, train_size: usize, fold_size: usize, test_n: usize) -> Result<SplitPlan, PipelineError> {
    let mut plan = split_corpus(corpus, train_size, fold_size).stage(Stage::Split)?;
    if !plan.reserve_test(test_n) {
        return Err(PipelineError::new(
            Stage::Split,
            StageError::Invalid(format!(
                "{} corpus cannot spare {test_n} test documents and keep one calibration fold",
                corpus.source
            )),
        ));
    }
    plan.test.truncate(test_n);
    Ok(plan)
}

/// Model and fold means of one source.
#[derive(Debug, Clone)]
pub struct SourceCalibration {
    pub model: TrainingModel,
    pub fold_means: Vec<f64>,
}

pub fn train_and_probe(
    plan: &SplitPlan,
    source: Source,
    stopwords: &Stopwords,
    include_titles: bool,
) -> Result<SourceCalibration, PipelineError> {
    let train = preprocess_all(&plan.train, stopwords, include_titles);
    let model = build_network(&train, source).stage(Stage::Train)?;
    let folds: Vec<Vec<TokenizedDoc>> = plan
        .folds
        .iter()
        .map(|f| preprocess_all(f, stopwords, include_titles))
        .collect();
    let means = fold_means(&folds, &model).stage(Stage::Calibrate)?;
    Ok(SourceCalibration {
        model,
        fold_means: means.into_iter().map(|m| m.mean).collect(),
    })
}

#[derive(Debug, Clone)]
pub struct PipelineOutput {
    pub reports: Vec<EvalReport>,
    pub calibration: CalibrationFile,
    pub predictions: Vec<Prediction>,
    pub artifacts: Vec<PathBuf>,
    pub ranges_overlap: bool,
}

/// Benchmark run: both models, calibration, network classification of the
/// mixed test set (publications first), and the three baselines.
pub fn run_pipeline(config: &PipelineConfig) -> Result<PipelineOutput, PipelineError> {
    config.validate()?;
    let stopwords = load_stopwords(config.stopwords.as_deref())?;
    let gpt = load_corpus(&config.gpt_corpus, Source::Gpt, config.disease, None).stage(Stage::Load)?;
    let pubmed = load_corpus(&config.pubmed_corpus, Source::Pubmed, config.disease, config.period).stage(Stage::Load)?;
    info!(gpt = gpt.len(), pubmed = pubmed.len(), "corpora loaded");

    let gpt_plan = plan_with_test(&gpt, config.train_size, config.fold_size, config.test_gpt)?;
    let pub_plan = plan_with_test(&pubmed, config.train_size, config.fold_size, config.test_pubmed)?;

    let gpt_cal = train_and_probe(&gpt_plan, Source::Gpt, &stopwords, config.include_titles)?;
    let pub_cal = train_and_probe(&pub_plan, Source::Pubmed, &stopwords, config.include_titles)?;
    let calibration = CalibrationFile::from_means(gpt_cal.fold_means.clone(), pub_cal.fold_means.clone()).stage(Stage::Calibrate)?;
    let classifier = ClassifierConfig::from_calibration(gpt_cal.model, pub_cal.model, &calibration).stage(Stage::Classify)?;
    info!(gpt = ?calibration.gpt, pubmed = ?calibration.pubmed, "calibrated ranges");

    let test_docs: Vec<Document> = pub_plan.test.iter().chain(&gpt_plan.test).cloned().collect();
    let test = preprocess_all(&test_docs, &stopwords, config.include_titles);
    let predictions: Vec<Prediction> = classify_batch(&test, &classifier)
        .into_iter()
        .collect::<Result<_, _>>()
        .stage(Stage::Classify)?;

    let mut reports = Vec::new();
    let pairs: Vec<(Source, Source)> = test.iter().zip(&predictions).map(|(d, p)| (d.source, p.label)).collect();
    let matrix = confusion(&pairs).stage(Stage::Evaluate)?;
    reports.push(EvalReport::scored(NETWORK_CLASSIFIER, config.disease, config.period, matrix).stage(Stage::Evaluate)?);

    let train_docs: Vec<Document> = pub_plan.train.iter().chain(&gpt_plan.train).cloned().collect();
    let train = preprocess_all(&train_docs, &stopwords, config.include_titles);
    let train_labels: Vec<Source> = train.iter().map(|d| d.source).collect();
    let (train_vecs, vocab) = vectorize(&train, None).stage(Stage::Baselines)?;
    let (test_vecs, _) = vectorize(&test, Some(&vocab)).stage(Stage::Baselines)?;

    ensure_dir(&config.out_dir)?;
    let out = &config.out_dir;
    let mut artifacts = Vec::new();
    let mut emit = |name: &str, bytes: &[u8]| -> Result<(), PipelineError> {
        let path = out.join(name);
        write_file(&path, bytes)?;
        artifacts.push(path);
        Ok(())
    };

    for kind in BaselineKind::ALL {
        let model = train_baseline(kind, &train_vecs, &train_labels, vocab.clone(), &config.hyper).stage(Stage::Baselines)?;
        let labels = predict_baseline(&model, &test_vecs).stage(Stage::Baselines)?;
        let pairs: Vec<(Source, Source)> = test.iter().map(|d| d.source).zip(labels).collect();
        let matrix = confusion(&pairs).stage(Stage::Evaluate)?;
        reports.push(EvalReport::scored(kind.report_name(), config.disease, config.period, matrix).stage(Stage::Evaluate)?);
        emit(&format!("baseline_{}.json", baseline_file_stem(kind)), (model.to_json() + "\n").as_bytes())?;
    }
    reports.push(EvalReport::not_implemented(KERNEL_SVM, config.disease, config.period));

    emit("model_gpt.json", (classifier.model_gpt().to_json() + "\n").as_bytes())?;
    emit("model_pubmed.json", (classifier.model_pub().to_json() + "\n").as_bytes())?;
    emit("calibration.json", (serde_json::to_string_pretty(&calibration).expect("calibration serializes") + "\n").as_bytes())?;
    emit("predictions.jsonl", predictions_to_jsonl(&predictions).as_bytes())?;
    let ranges_overlap = classifier.ranges_overlap();
    if ranges_overlap {
        // in-range checks test the generated range first, so overlap biases
        // toward GPT; the run is kept but flagged next to the report
        let (g, p) = (calibration.gpt, calibration.pubmed);
        warn!(?g, ?p, "calibration ranges overlap");
        let note = format!(
            "calibration ranges overlap: GPT [{}, {}], PUBMED [{}, {}]; ratios inside both are labelled GPT\n",
            g.lower, g.upper, p.lower, p.upper
        );
        emit("warnings.txt", note.as_bytes())?;
    }
    let report = write_report(&reports, config.format).stage(Stage::Write)?;
    emit(&format!("report.{}", config.format.extension()), &report)?;

    Ok(PipelineOutput {
        reports,
        calibration,
        ranges_overlap,
        predictions,
        artifacts,
    })
}

fn baseline_file_stem(kind: BaselineKind) -> &'static str {
    match kind {
        BaselineKind::NaiveBayes => "naive_bayes",
        BaselineKind::Logreg => "logreg",
        BaselineKind::LinearSvm => "linear_svm",
    }
}

/// Node and edge counts of one source model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TopologyRow {
    pub source: Source,
    pub period: Option<Period>,
    pub nodes: usize,
    pub edges: usize,
    pub ratio: Option<f64>,
    pub nodes_unpruned: usize,
    pub edges_unpruned: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FoldRow {
    pub source: Source,
    pub period: Option<Period>,
    pub fold: usize,
    pub mean: f64,
}

#[derive(Debug, Clone, Default)]
pub struct PremiseOptions {
    pub train_size: usize,
    pub fold_size: usize,
    pub include_titles: bool,
    /// Adds pre-pruning counts to the topology file.
    pub include_unpruned: bool,
    pub stopwords: Option<PathBuf>,
}

impl PremiseOptions {
    pub fn standard() -> Self {
        PremiseOptions {
            train_size: 100,
            fold_size: 100,
            ..Default::default()
        }
    }
}

#[derive(Debug, Clone)]
pub struct PremiseOutput {
    pub topology: Vec<TopologyRow>,
    pub folds: Vec<FoldRow>,
    pub files: Vec<PathBuf>,
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map_or_else(String::new, |r| format!("{r:.4}"))
}

/// Topology of every model and fold means of every corpus, written as
/// `premise_topology.csv` and `premise_folds.csv`.
pub fn premise_report(
    gpt: &Corpus,
    pubmed: &[Corpus],
    out_dir: &Path,
    options: &PremiseOptions,
) -> Result<PremiseOutput, PipelineError> {
    let stopwords = load_stopwords(options.stopwords.as_deref())?;
    let min_docs = options.train_size + options.fold_size;
    let mut topology = Vec::new();
    let mut folds = Vec::new();
    for corpus in std::iter::once(gpt).chain(pubmed) {
        if corpus.len() < min_docs {
            return Err(PipelineError::new(
                Stage::Split,
                CorpusError::InsufficientDocuments {
                    needed: min_docs,
                    available: corpus.len(),
                    train: options.train_size,
                    fold: options.fold_size,
                },
            ));
        }
        let plan = split_corpus(corpus, options.train_size, options.fold_size).stage(Stage::Split)?;
        let train = preprocess_all(&plan.train, &stopwords, options.include_titles);
        let unpruned = build_unpruned(&train, corpus.source).stage(Stage::Train)?;
        let cal = train_and_probe(&plan, corpus.source, &stopwords, options.include_titles)?;
        let stats = graph_stats(&cal.model);
        topology.push(TopologyRow {
            source: corpus.source,
            period: corpus.period,
            nodes: stats.node_count,
            edges: stats.edge_count,
            ratio: stats.node_edge_ratio,
            nodes_unpruned: unpruned.node_count(),
            edges_unpruned: unpruned.edge_count(),
        });
        folds.extend(cal.fold_means.iter().enumerate().map(|(i, &mean)| FoldRow {
            source: corpus.source,
            period: corpus.period,
            fold: i + 1,
            mean,
        }));
    }

    let mut topo_csv = String::from("source,period,nodes,edges,ratio");
    if options.include_unpruned {
        topo_csv.push_str(",nodes_unpruned,edges_unpruned");
    }
    topo_csv.push('\n');
    for r in &topology {
        topo_csv.push_str(&format!(
            "{},{},{},{},{}",
            r.source,
            r.period.map_or("", Period::as_str),
            r.nodes,
            r.edges,
            fmt_opt(r.ratio)
        ));
        if options.include_unpruned {
            topo_csv.push_str(&format!(",{},{}", r.nodes_unpruned, r.edges_unpruned));
        }
        topo_csv.push('\n');
    }
    let mut fold_csv = String::from("source,period,fold,mean\n");
    for r in &folds {
        fold_csv.push_str(&format!(
            "{},{},{},{:.2}\n",
            r.source,
            r.period.map_or("", Period::as_str),
            r.fold,
            r.mean
        ));
    }
    ensure_dir(out_dir)?;
    let topo_path = out_dir.join("premise_topology.csv");
    let fold_path = out_dir.join("premise_folds.csv");
    write_file(&topo_path, topo_csv.as_bytes())?;
    write_file(&fold_path, fold_csv.as_bytes())?;
    Ok(PremiseOutput {
        topology,
        folds,
        files: vec![topo_path, fold_path],
    })
}

/// Split sizes shared by the stage commands; test reservation must match
/// the benchmark so replayed stages see the same folds.
#[derive(Debug, Clone, Copy)]
pub struct SplitSizes {
    pub train: usize,
    pub fold: usize,
    pub test: usize,
}

/// Train stage alone: the pruned model of one corpus.
pub fn train_model(corpus: &Corpus, sizes: SplitSizes, stopwords: &Stopwords, include_titles: bool) -> Result<TrainingModel, PipelineError> {
    let plan = plan_with_test(corpus, sizes.train, sizes.fold, sizes.test)?;
    let train = preprocess_all(&plan.train, stopwords, include_titles);
    build_network(&train, corpus.source).stage(Stage::Train)
}

/// Calibrate stage alone: fold means of each corpus against its saved model.
pub fn calibrate_models(
    gpt: (&Corpus, &TrainingModel, SplitSizes),
    pubmed: (&Corpus, &TrainingModel, SplitSizes),
    stopwords: &Stopwords,
    include_titles: bool,
) -> Result<CalibrationFile, PipelineError> {
    let mut means = Vec::new();
    for (corpus, model, sizes) in [gpt, pubmed] {
        if model.label != corpus.source {
            return Err(PipelineError::new(
                Stage::Calibrate,
                StageError::Invalid(format!("{} model paired with a {} corpus", model.label, corpus.source)),
            ));
        }
        let plan = plan_with_test(corpus, sizes.train, sizes.fold, sizes.test)?;
        let folds: Vec<Vec<TokenizedDoc>> = plan.folds.iter().map(|f| preprocess_all(f, stopwords, include_titles)).collect();
        let m = fold_means(&folds, model).stage(Stage::Calibrate)?;
        means.push(m.into_iter().map(|f| f.mean).collect::<Vec<f64>>());
    }
    let pub_means = means.pop().expect("two sources");
    let gpt_means = means.pop().expect("two sources");
    CalibrationFile::from_means(gpt_means, pub_means).stage(Stage::Calibrate)
}

/// Classifies a corpus from saved artifacts, without retraining.
pub fn classify_from_artifacts(
    model_gpt: &Path,
    model_pub: &Path,
    calibration: &Path,
    docs: &[Document],
    stopwords: &Stopwords,
    include_titles: bool,
) -> Result<Vec<Prediction>, PipelineError> {
    let g = TrainingModel::load(model_gpt).stage(Stage::Load)?;
    let p = TrainingModel::load(model_pub).stage(Stage::Load)?;
    let cal = CalibrationFile::load(calibration).stage(Stage::Load)?;
    let config = ClassifierConfig::from_calibration(g, p, &cal).stage(Stage::Classify)?;
    let tokens = preprocess_all(docs, stopwords, include_titles);
    classify_batch(&tokens, &config)
        .into_iter()
        .collect::<Result<_, _>>()
        .stage(Stage::Classify)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exit_codes_follow_failure_kind() {
        let e = PipelineError::new(Stage::Config, StageError::Invalid("x".into()));
        assert_eq!(e.kind().exit_code(), 2);
        let e = PipelineError::new(
            Stage::Split,
            CorpusError::InsufficientDocuments { needed: 200, available: 150, train: 100, fold: 100 },
        );
        assert_eq!(e.kind().exit_code(), 3);
        assert!(e.to_string().contains("stage `split`"));
        let e = PipelineError::new(Stage::Load, CorpusError::NonJsonResponse("html".into()));
        assert_eq!(e.kind().exit_code(), 4);
    }

    #[test]
    fn identical_corpus_paths_are_rejected() {
        let cfg = PipelineConfig::new("a.json", "a.json", Disease::Cancer, "out");
        let err = run_pipeline(&cfg).unwrap_err();
        assert_eq!(err.stage, Stage::Config);
    }
}
