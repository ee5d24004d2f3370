use std::path::{Path, PathBuf};

use fakesci_core::corpus::{load_corpus, CorpusError};
use fakesci_core::pipeline::{run_pipeline, PipelineConfig, Stage, StageError};
use fakesci_core::synth::{fixture_corpus_path, table_fold_means, write_fixture_tree};
use fakesci_core::{Disease, Period, Source};

fn root() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures")
}

fn walk(dir: &Path, out: &mut Vec<PathBuf>) {
    for entry in std::fs::read_dir(dir).unwrap() {
        let p = entry.unwrap().path();
        if p.is_dir() {
            walk(&p, out);
        } else {
            out.push(p);
        }
    }
}

#[test]
fn shipped_fixtures_match_generator() {
    let tmp = tempfile::tempdir().unwrap();
    let written = write_fixture_tree(tmp.path()).unwrap();
    let mut shipped = Vec::new();
    walk(&root(), &mut shipped);
    assert_eq!(shipped.len(), written.len(), "stray or missing fixture files");
    for path in written {
        let rel = path.strip_prefix(tmp.path()).unwrap();
        let want = std::fs::read(&path).unwrap();
        let got = std::fs::read(root().join(rel)).unwrap_or_default();
        assert!(got == want, "{} is stale; rerun `cargo run -p fakesci-core --example gen_fixtures`", rel.display());
    }
}

#[test]
fn fold_means_reproduce_the_bound_table() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = PipelineConfig::new(
        root().join(fixture_corpus_path(Disease::Alzheimers, Source::Gpt, None)),
        root().join(fixture_corpus_path(Disease::Alzheimers, Source::Pubmed, Some(Period::P2010_2014))),
        Disease::Alzheimers,
        dir.path(),
    );
    cfg.period = Some(Period::P2010_2014);
    let out = run_pipeline(&cfg).unwrap();
    let (gpt, pubs) = table_fold_means(Disease::Alzheimers);
    let round = |v: &[f64]| v.iter().map(|m| (m * 100.0).round() / 100.0).collect::<Vec<_>>();
    assert_eq!(round(&out.calibration.fold_means.gpt), gpt);
    assert_eq!(round(&out.calibration.fold_means.pubmed), pubs[0]);
    for (got, want) in out.calibration.fold_means.gpt.iter().zip(&gpt) {
        assert!((got - want).abs() < 1e-12);
    }
    assert_eq!((out.calibration.pubmed.lower * 100.0).round(), 15.0);
    assert_eq!((out.calibration.pubmed.upper * 100.0).round(), 16.0);
}

#[test]
fn large_publication_fixture_loads() {
    let path = root().join(fixture_corpus_path(Disease::Depression, Source::Pubmed, Some(Period::P2020_2024)));
    let c = load_corpus(path, Source::Pubmed, Disease::Depression, Some(Period::P2020_2024)).unwrap();
    assert_eq!(c.len(), 1513);
    assert!(c.documents.iter().all(|d| d.raw_word_count == 100));
}

#[test]
fn small_corpus_fails_in_split_stage() {
    let dir = tempfile::tempdir().unwrap();
    let gpt = root().join(fixture_corpus_path(Disease::Alzheimers, Source::Gpt, None));
    let all: Vec<serde_json::Value> = serde_json::from_str(&std::fs::read_to_string(&gpt).unwrap()).unwrap();
    let small = dir.path().join("small.json");
    std::fs::write(&small, serde_json::to_string(&all[..150]).unwrap()).unwrap();
    let pubmed = root().join(fixture_corpus_path(Disease::Alzheimers, Source::Pubmed, Some(Period::P2020_2024)));
    let cfg = PipelineConfig::new(&small, pubmed, Disease::Alzheimers, dir.path().join("out"));
    let err = run_pipeline(&cfg).unwrap_err();
    assert_eq!(err.stage, Stage::Split);
    assert!(err.to_string().contains("split"));
    assert!(matches!(err.source, StageError::Corpus(CorpusError::InsufficientDocuments { available: 150, .. })));
    assert_eq!(err.kind().exit_code(), 3);
}

#[test]
fn depression_pair_separates() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = PipelineConfig::new(
        root().join(fixture_corpus_path(Disease::Depression, Source::Gpt, None)),
        root().join(fixture_corpus_path(Disease::Depression, Source::Pubmed, Some(Period::P2020_2024))),
        Disease::Depression,
        dir.path(),
    );
    let out = run_pipeline(&cfg).unwrap();
    assert_eq!(out.reports[0].f1, Some(1.0));
    assert_eq!((out.calibration.pubmed.lower * 100.0).round(), 10.0);
    assert_eq!((out.calibration.pubmed.upper * 100.0).round(), 11.0);
    // 1513 records: 14 folds and 13 leftovers; one fold joins the test pool
    assert_eq!(out.calibration.fold_means.pubmed.len(), 13);
}

#[test]
fn overlapping_ranges_are_flagged() {
    use fakesci_core::corpus::save_records;
    use fakesci_core::synth::{pubmed_recipe, CorpusRecipe};
    let dir = tempfile::tempdir().unwrap();
    let gpt = CorpusRecipe::dense(Disease::Cancer, 450, vec![0.12, 0.15, 0.18], 3);
    let publ = pubmed_recipe(Disease::Cancer, Period::P2020_2024, 450);
    save_records(dir.path().join("g.json"), &gpt.records()).unwrap();
    save_records(dir.path().join("p.json"), &publ.records()).unwrap();
    let cfg = PipelineConfig::new(dir.path().join("g.json"), dir.path().join("p.json"), Disease::Cancer, dir.path().join("out"));
    let out = run_pipeline(&cfg).unwrap();
    assert!(out.ranges_overlap);
    let note = std::fs::read_to_string(dir.path().join("out/warnings.txt")).unwrap();
    assert!(note.starts_with("calibration ranges overlap"));
}
