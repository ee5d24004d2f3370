//! Range-membership labelling with a nearest-range fallback.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::calibration::{contribution_ratio, CalibrationError, CalibrationFile, CalibrationRange};
use crate::corpus::TokenizedDoc;
use crate::textnet::TrainingModel;
use crate::Source;

#[derive(Debug, Error, PartialEq)]
pub enum ClassifyError {
    #[error("document `{doc_id}` has a zero word count")]
    ZeroWordCount { doc_id: String },
    #[error("model labelled {model} paired with a {range} range")]
    LabelMismatch { model: Source, range: Source },
    #[error("model for {0} is not pruned")]
    UnprunedModel(Source),
}

impl From<CalibrationError> for ClassifyError {
    fn from(err: CalibrationError) -> Self {
        match err {
            CalibrationError::ZeroWordCount { doc_id }
            | CalibrationError::ZeroWordCountInFold { doc_id, .. } => ClassifyError::ZeroWordCount { doc_id },
            other => unreachable!("contribution ratio only fails on word count: {other}"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum DecisionPath {
    InRangeGpt,
    InRangePub,
    ProximityGpt,
    ProximityPub,
    TieDefault,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Prediction {
    pub doc_id: String,
    pub label: Source,
    pub ratio_gpt: f64,
    pub ratio_pub: f64,
    pub dist_gpt: f64,
    pub dist_pub: f64,
    pub decision_path: DecisionPath,
}

/// Two source models with their calibrated ranges.
#[derive(Debug, Clone)]
pub struct ClassifierConfig {
    model_gpt: TrainingModel,
    model_pub: TrainingModel,
    range_gpt: CalibrationRange,
    range_pub: CalibrationRange,
}

impl ClassifierConfig {
    pub fn new(
        model_gpt: TrainingModel,
        model_pub: TrainingModel,
        range_gpt: CalibrationRange,
        range_pub: CalibrationRange,
    ) -> Result<Self, ClassifyError> {
        for (model, range, want) in [
            (&model_gpt, &range_gpt, Source::Gpt),
            (&model_pub, &range_pub, Source::Pubmed),
        ] {
            if model.label != want || range.label != want {
                return Err(ClassifyError::LabelMismatch {
                    model: model.label,
                    range: range.label,
                });
            }
            if !model.pruned {
                return Err(ClassifyError::UnprunedModel(model.label));
            }
        }
        Ok(ClassifierConfig {
            model_gpt,
            model_pub,
            range_gpt,
            range_pub,
        })
    }

    pub fn from_calibration(
        model_gpt: TrainingModel,
        model_pub: TrainingModel,
        calibration: &CalibrationFile,
    ) -> Result<Self, ClassifyError> {
        Self::new(
            model_gpt,
            model_pub,
            calibration.range(Source::Gpt),
            calibration.range(Source::Pubmed),
        )
    }

    pub fn range_gpt(&self) -> CalibrationRange {
        self.range_gpt
    }

    pub fn range_pub(&self) -> CalibrationRange {
        self.range_pub
    }

    pub fn model_gpt(&self) -> &TrainingModel {
        &self.model_gpt
    }

    pub fn model_pub(&self) -> &TrainingModel {
        &self.model_pub
    }

    /// Overlapping ranges make the GPT-first check decisive for points in
    /// both; reports surface this.
    pub fn ranges_overlap(&self) -> bool {
        self.range_gpt.overlaps(&self.range_pub)
    }
}

/// Zero inside the closed range, otherwise the gap to the nearer endpoint.
pub fn distance_to_range(point: f64, range: &CalibrationRange) -> f64 {
    if range.contains(point) {
        0.0
    } else {
        (point - range.lower).abs().min((point - range.upper).abs())
    }
}

/// Labels a document from both ratios. The GPT range is tested first, then
/// the PubMed range; outside both, the nearer range wins and an exact tie
/// falls back to PUBMED.
pub fn decide(ratio_gpt: f64, ratio_pub: f64, range_gpt: &CalibrationRange, range_pub: &CalibrationRange) -> (Source, DecisionPath, f64, f64) {
    let dist_gpt = distance_to_range(ratio_gpt, range_gpt);
    let dist_pub = distance_to_range(ratio_pub, range_pub);
    let (label, path) = if range_gpt.contains(ratio_gpt) {
        (Source::Gpt, DecisionPath::InRangeGpt)
    } else if range_pub.contains(ratio_pub) {
        (Source::Pubmed, DecisionPath::InRangePub)
    } else if dist_gpt < dist_pub {
        (Source::Gpt, DecisionPath::ProximityGpt)
    } else if dist_pub < dist_gpt {
        (Source::Pubmed, DecisionPath::ProximityPub)
    } else {
        (Source::Pubmed, DecisionPath::TieDefault)
    };
    (label, path, dist_gpt, dist_pub)
}

pub fn classify_multi(doc: &TokenizedDoc, config: &ClassifierConfig) -> Result<Prediction, ClassifyError> {
    let ratio_gpt = contribution_ratio(doc, &config.model_gpt)?.ratio;
    let ratio_pub = contribution_ratio(doc, &config.model_pub)?.ratio;
    let (label, decision_path, dist_gpt, dist_pub) =
        decide(ratio_gpt, ratio_pub, &config.range_gpt, &config.range_pub);
    Ok(Prediction {
        doc_id: doc.doc_id.clone(),
        label,
        ratio_gpt,
        ratio_pub,
        dist_gpt,
        dist_pub,
        decision_path,
    })
}

/// Single-source mode: in range means the model's label, anything else the
/// complement. Ratio and distance fields of the absent side are zero.
pub fn classify_single(
    doc: &TokenizedDoc,
    model: &TrainingModel,
    range: &CalibrationRange,
) -> Result<Prediction, ClassifyError> {
    if model.label != range.label {
        return Err(ClassifyError::LabelMismatch {
            model: model.label,
            range: range.label,
        });
    }
    let ratio = contribution_ratio(doc, model)?.ratio;
    let dist = distance_to_range(ratio, range);
    let (label, decision_path) = match (range.contains(ratio), model.label) {
        (true, Source::Gpt) => (Source::Gpt, DecisionPath::InRangeGpt),
        (true, Source::Pubmed) => (Source::Pubmed, DecisionPath::InRangePub),
        (false, Source::Gpt) => (Source::Pubmed, DecisionPath::ProximityPub),
        (false, Source::Pubmed) => (Source::Gpt, DecisionPath::ProximityGpt),
    };
    let (ratio_gpt, ratio_pub, dist_gpt, dist_pub) = match model.label {
        Source::Gpt => (ratio, 0.0, dist, 0.0),
        Source::Pubmed => (0.0, ratio, 0.0, dist),
    };
    Ok(Prediction {
        doc_id: doc.doc_id.clone(),
        label,
        ratio_gpt,
        ratio_pub,
        dist_gpt,
        dist_pub,
        decision_path,
    })
}

/// One result per document in input order; failures do not stop the batch.
pub fn classify_batch(docs: &[TokenizedDoc], config: &ClassifierConfig) -> Vec<Result<Prediction, ClassifyError>> {
    docs.iter().map(|d| classify_multi(d, config)).collect()
}

/// JSON-lines rendering, one prediction per line.
pub fn predictions_to_jsonl(predictions: &[Prediction]) -> String {
    let mut out = String::new();
    for p in predictions {
        out.push_str(&serde_json::to_string(p).expect("prediction serializes"));
        out.push('\n');
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::textnet::build_network;

    fn range(label: Source, lower: f64, upper: f64) -> CalibrationRange {
        CalibrationRange::new(label, lower, upper)
    }

    #[test]
    fn distance_examples() {
        let r = range(Source::Gpt, 0.27, 0.30);
        assert_eq!(distance_to_range(0.28, &r), 0.0);
        assert!((distance_to_range(0.20, &r) - 0.07).abs() < 1e-12);
        assert!((distance_to_range(0.31, &r) - 0.01).abs() < 1e-12);
        assert_eq!(distance_to_range(0.27, &r), 0.0);
        assert_eq!(distance_to_range(0.30, &r), 0.0);
    }

    #[test]
    fn decide_follows_range_then_proximity() {
        let g = range(Source::Gpt, 0.27, 0.30);
        let p = range(Source::Pubmed, 0.14, 0.15);
        assert_eq!(decide(0.28, 0.0, &g, &p).1, DecisionPath::InRangeGpt);
        let (label, path, dg, dp) = decide(0.20, 0.16, &g, &p);
        assert_eq!((label, path), (Source::Pubmed, DecisionPath::ProximityPub));
        assert!((dg - 0.07).abs() < 1e-12 && (dp - 0.01).abs() < 1e-12);
    }

    #[test]
    fn exact_tie_defaults_to_pubmed() {
        // 0.25 and 0.125 are exact in binary, so both gaps are exactly 0.125.
        let g = range(Source::Gpt, 0.375, 0.5);
        let p = range(Source::Pubmed, 0.5, 0.625);
        let (label, path, dg, dp) = decide(0.25, 0.75, &g, &p);
        assert_eq!(dg, dp);
        assert_eq!((label, path), (Source::Pubmed, DecisionPath::TieDefault));
    }

    #[test]
    fn gpt_range_wins_when_ranges_overlap() {
        let g = range(Source::Gpt, 0.1, 0.3);
        let p = range(Source::Pubmed, 0.2, 0.4);
        assert_eq!(decide(0.25, 0.25, &g, &p).1, DecisionPath::InRangeGpt);
        assert!(g.overlaps(&p));
    }

    fn tdoc(id: &str, wc: usize, words: &[&str]) -> TokenizedDoc {
        TokenizedDoc {
            doc_id: id.into(),
            source: Source::Gpt,
            raw_word_count: wc,
            sentences: vec![words.iter().map(|w| w.to_string()).collect()],
        }
    }

    fn config() -> ClassifierConfig {
        let g = build_network(&[tdoc("g", 4, &["a", "b", "c", "d"])], Source::Gpt).unwrap();
        let p = build_network(&[tdoc("p", 4, &["w", "x", "y", "z"])], Source::Pubmed).unwrap();
        ClassifierConfig::new(g, p, range(Source::Gpt, 0.25, 0.35), range(Source::Pubmed, 0.1, 0.15)).unwrap()
    }

    #[test]
    fn classify_multi_uses_both_models() {
        let cfg = config();
        let p = classify_multi(&tdoc("1", 10, &["a", "b", "c", "d"]), &cfg).unwrap();
        assert_eq!((p.label, p.decision_path), (Source::Gpt, DecisionPath::InRangeGpt));
        assert!((p.ratio_gpt - 0.3).abs() < 1e-15);
        assert_eq!(p.ratio_pub, 0.0);

        let p = classify_multi(&tdoc("2", 10, &["w", "x"]), &cfg).unwrap();
        assert_eq!((p.label, p.decision_path), (Source::Pubmed, DecisionPath::InRangePub));

        assert_eq!(
            classify_multi(&tdoc("3", 0, &[]), &cfg),
            Err(ClassifyError::ZeroWordCount { doc_id: "3".into() })
        );
    }

    #[test]
    fn config_rejects_swapped_labels() {
        let cfg = config();
        let err = ClassifierConfig::new(
            cfg.model_pub().clone(),
            cfg.model_gpt().clone(),
            cfg.range_gpt(),
            cfg.range_pub(),
        );
        assert!(matches!(err, Err(ClassifyError::LabelMismatch { .. })));
    }

    #[test]
    fn single_mode_membership_and_complement() {
        let cfg = config();
        let g = cfg.model_gpt();
        let r = range(Source::Gpt, 0.27, 0.30);
        // 3 matching bigrams over 10 words = 0.3, on the closed upper bound
        let p = classify_single(&tdoc("1", 10, &["a", "b", "c", "d"]), g, &r).unwrap();
        assert_eq!(p.label, Source::Gpt);
        let p = classify_single(&tdoc("2", 10, &["a", "b"]), g, &r).unwrap();
        assert_eq!((p.label, p.decision_path), (Source::Pubmed, DecisionPath::ProximityPub));
        assert!((p.dist_gpt - 0.17).abs() < 1e-12);

        let degenerate = range(Source::Gpt, 0.15, 0.15);
        let p = classify_single(&tdoc("3", 20, &["a", "b", "c", "d"]), g, &degenerate).unwrap();
        assert_eq!(p.label, Source::Gpt);
        assert!(classify_single(&tdoc("4", 20, &["a"]), g, &range(Source::Pubmed, 0.1, 0.2)).is_err());
    }

    #[test]
    fn batch_keeps_order_and_collects_errors() {
        let cfg = config();
        let docs = vec![
            tdoc("1", 10, &["a", "b", "c", "d"]),
            tdoc("2", 0, &[]),
            tdoc("3", 10, &["w", "x"]),
        ];
        let out = classify_batch(&docs, &cfg);
        assert_eq!(out.len(), 3);
        assert_eq!(out[0].as_ref().unwrap().doc_id, "1");
        assert!(out[1].is_err());
        assert_eq!(out[2].as_ref().unwrap().doc_id, "3");
    }

    #[test]
    fn jsonl_carries_decision_path() {
        let p = Prediction {
            doc_id: "x".into(),
            label: Source::Pubmed,
            ratio_gpt: 0.0,
            ratio_pub: 0.1,
            dist_gpt: 0.27,
            dist_pub: 0.0,
            decision_path: DecisionPath::InRangePub,
        };
        let line = predictions_to_jsonl(&[p]);
        assert!(line.contains("\"decision_path\":\"IN_RANGE_PUB\""));
        assert!(line.contains("\"label\":\"PUBMED\""));
        assert!(line.ends_with('\n'));
    }
}
