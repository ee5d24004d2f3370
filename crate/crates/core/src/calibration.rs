//! Contribution ratios, per-fold means, and the calibrated ratio ranges.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::TokenizedDoc;
use crate::textnet::{distinct_bigrams, TrainingModel};
use crate::Source;

#[derive(Debug, Error, PartialEq)]
pub enum CalibrationError {
    #[error("document `{doc_id}` has a zero word count")]
    ZeroWordCount { doc_id: String },
    #[error("fold {fold}: document `{doc_id}` has a zero word count")]
    ZeroWordCountInFold { fold: usize, doc_id: String },
    #[error("fold {0} is empty")]
    EmptyFold(usize),
    #[error("no fold means for {0}")]
    EmptyMeans(Source),
    #[error("calibration file {path}: {message}")]
    File { path: String, message: String },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ContributionRatio {
    pub doc_id: String,
    /// Distinct document bigrams whose edge is in the model.
    pub bigram_count: usize,
    pub doc_wc: usize,
    pub ratio: f64,
}

pub fn contribution_ratio(
    doc: &TokenizedDoc,
    model: &TrainingModel,
) -> Result<ContributionRatio, CalibrationError> {
    if doc.raw_word_count == 0 {
        return Err(CalibrationError::ZeroWordCount {
            doc_id: doc.doc_id.clone(),
        });
    }
    let bigram_count = distinct_bigrams(doc)
        .iter()
        .filter(|b| model.contains_edge(&b.left, &b.right))
        .count();
    Ok(ContributionRatio {
        doc_id: doc.doc_id.clone(),
        bigram_count,
        doc_wc: doc.raw_word_count,
        ratio: bigram_count as f64 / doc.raw_word_count as f64,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FoldMean {
    pub fold_index: usize,
    pub mean: f64,
    pub n_docs: usize,
}

pub fn fold_mean(
    fold_index: usize,
    fold: &[TokenizedDoc],
    model: &TrainingModel,
) -> Result<FoldMean, CalibrationError> {
    if fold.is_empty() {
        return Err(CalibrationError::EmptyFold(fold_index));
    }
    let mut sum = 0.0;
    for doc in fold {
        let r = contribution_ratio(doc, model).map_err(|_| CalibrationError::ZeroWordCountInFold {
            fold: fold_index,
            doc_id: doc.doc_id.clone(),
        })?;
        sum += r.ratio;
    }
    Ok(FoldMean {
        fold_index,
        mean: sum / fold.len() as f64,
        n_docs: fold.len(),
    })
}

/// One mean per fold, in fold order.
pub fn fold_means(
    folds: &[Vec<TokenizedDoc>],
    model: &TrainingModel,
) -> Result<Vec<FoldMean>, CalibrationError> {
    folds
        .iter()
        .enumerate()
        .map(|(i, fold)| fold_mean(i, fold, model))
        .collect()
}

/// Closed interval of fold-mean ratios for one source.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CalibrationRange {
    pub label: Source,
    pub lower: f64,
    pub upper: f64,
}

impl CalibrationRange {
    pub fn new(label: Source, lower: f64, upper: f64) -> Self {
        assert!(lower <= upper, "range lower bound exceeds upper bound");
        CalibrationRange { label, lower, upper }
    }

    pub fn contains(&self, point: f64) -> bool {
        self.lower <= point && point <= self.upper
    }

    pub fn overlaps(&self, other: &CalibrationRange) -> bool {
        self.lower <= other.upper && other.lower <= self.upper
    }
}

fn range_of(label: Source, means: &[f64]) -> Result<CalibrationRange, CalibrationError> {
    if means.is_empty() {
        return Err(CalibrationError::EmptyMeans(label));
    }
    let lower = means.iter().copied().fold(f64::INFINITY, f64::min);
    let upper = means.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    Ok(CalibrationRange { label, lower, upper })
}

/// `[min, max]` of each source's fold means. Returns `(gpt, pubmed)`.
pub fn compute_ranges(
    gpt_means: &[f64],
    pub_means: &[f64],
) -> Result<(CalibrationRange, CalibrationRange), CalibrationError> {
    Ok((range_of(Source::Gpt, gpt_means)?, range_of(Source::Pubmed, pub_means)?))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Bounds {
    pub lower: f64,
    pub upper: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FoldMeansBySource {
    pub gpt: Vec<f64>,
    pub pubmed: Vec<f64>,
}

/// On-disk calibration consumed by the classifier.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CalibrationFile {
    pub gpt: Bounds,
    pub pubmed: Bounds,
    pub fold_means: FoldMeansBySource,
}

impl CalibrationFile {
    pub fn from_means(gpt_means: Vec<f64>, pub_means: Vec<f64>) -> Result<Self, CalibrationError> {
        let (g, p) = compute_ranges(&gpt_means, &pub_means)?;
        Ok(CalibrationFile {
            gpt: Bounds {
                lower: g.lower,
                upper: g.upper,
            },
            pubmed: Bounds {
                lower: p.lower,
                upper: p.upper,
            },
            fold_means: FoldMeansBySource {
                gpt: gpt_means,
                pubmed: pub_means,
            },
        })
    }

    pub fn range(&self, label: Source) -> CalibrationRange {
        let b = match label {
            Source::Gpt => self.gpt,
            Source::Pubmed => self.pubmed,
        };
        CalibrationRange::new(label, b.lower, b.upper)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<(), CalibrationError> {
        let path = path.as_ref();
        let text = serde_json::to_string_pretty(self).expect("calibration serializes");
        fs::write(path, text + "\n").map_err(|e| CalibrationError::File {
            path: path.display().to_string(),
            message: e.to_string(),
        })
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, CalibrationError> {
        let path = path.as_ref();
        let err = |message: String| CalibrationError::File {
            path: path.display().to_string(),
            message,
        };
        let text = fs::read_to_string(path).map_err(|e| err(e.to_string()))?;
        let file: CalibrationFile = serde_json::from_str(&text).map_err(|e| err(e.to_string()))?;
        if file.gpt.lower > file.gpt.upper || file.pubmed.lower > file.pubmed.upper {
            return Err(err("lower bound exceeds upper bound".into()));
        }
        Ok(file)
    }
}
