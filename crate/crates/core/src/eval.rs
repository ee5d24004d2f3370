//! Confusion matrices, F1, and benchmark report rendering.
//!
//! PUBMED is the positive class: a generated abstract labelled as a real
//! publication is a false positive.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::{Disease, Period, Source};

#[derive(Debug, Error, PartialEq)]
pub enum EvalError {
    #[error("no predictions to score")]
    EmptyPredictions,
    #[error("F1 is undefined when tp, fp and fn are all zero")]
    UndefinedF1,
    #[error("no reports to write")]
    EmptyReports,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct ConfusionMatrix {
    pub tp: u64,
    pub tn: u64,
    pub fp: u64,
    #[serde(rename = "fn")]
    pub fn_: u64,
}

impl ConfusionMatrix {
    pub fn new(tp: u64, fp: u64, fn_: u64, tn: u64) -> Self {
        ConfusionMatrix { tp, tn, fp, fn_ }
    }

    pub fn total(&self) -> u64 {
        self.tp + self.tn + self.fp + self.fn_
    }

    pub fn record(&mut self, gold: Source, predicted: Source) {
        match (gold, predicted) {
            (Source::Pubmed, Source::Pubmed) => self.tp += 1,
            (Source::Gpt, Source::Gpt) => self.tn += 1,
            (Source::Gpt, Source::Pubmed) => self.fp += 1,
            (Source::Pubmed, Source::Gpt) => self.fn_ += 1,
        }
    }

    pub fn accuracy(&self) -> f64 {
        (self.tp + self.tn) as f64 / self.total() as f64
    }
}

/// Tallies `(gold, predicted)` pairs.
pub fn confusion(pairs: &[(Source, Source)]) -> Result<ConfusionMatrix, EvalError> {
    if pairs.is_empty() {
        return Err(EvalError::EmptyPredictions);
    }
    let mut m = ConfusionMatrix::default();
    for &(gold, predicted) in pairs {
        m.record(gold, predicted);
    }
    Ok(m)
}

/// `2tp / (2tp + fp + fn)`.
pub fn f1(m: &ConfusionMatrix) -> Result<f64, EvalError> {
    let denom = 2 * m.tp + m.fp + m.fn_;
    if denom == 0 {
        return Err(EvalError::UndefinedF1);
    }
    Ok((2 * m.tp) as f64 / denom as f64)
}

/// Percentage with two decimals, e.g. `91.74`.
pub fn percent(value: f64) -> String {
    format!("{:.2}", value * 100.0)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub classifier: String,
    pub disease: Disease,
    pub period: Option<Period>,
    /// `None` marks a classifier that is listed but not implemented.
    pub matrix: Option<ConfusionMatrix>,
    pub f1: Option<f64>,
}

impl EvalReport {
    pub fn scored(
        classifier: impl Into<String>,
        disease: Disease,
        period: Option<Period>,
        matrix: ConfusionMatrix,
    ) -> Result<Self, EvalError> {
        Ok(EvalReport {
            classifier: classifier.into(),
            disease,
            period,
            f1: Some(f1(&matrix)?),
            matrix: Some(matrix),
        })
    }

    pub fn not_implemented(classifier: impl Into<String>, disease: Disease, period: Option<Period>) -> Self {
        EvalReport {
            classifier: classifier.into(),
            disease,
            period,
            matrix: None,
            f1: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReportFormat {
    Json,
    Csv,
    Markdown,
}

impl std::str::FromStr for ReportFormat {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "json" => Ok(ReportFormat::Json),
            "csv" => Ok(ReportFormat::Csv),
            "md" | "markdown" => Ok(ReportFormat::Markdown),
            other => Err(format!("unknown report format `{other}`")),
        }
    }
}

impl ReportFormat {
    pub fn extension(self) -> &'static str {
        match self {
            ReportFormat::Json => "json",
            ReportFormat::Csv => "csv",
            ReportFormat::Markdown => "md",
        }
    }
}

const NOT_IMPLEMENTED: &str = "not implemented";

fn period_cell(p: Option<Period>) -> &'static str {
    p.map_or("", Period::as_str)
}

/// Renders reports sorted by (disease, period, classifier).
pub fn write_report(reports: &[EvalReport], format: ReportFormat) -> Result<Vec<u8>, EvalError> {
    if reports.is_empty() {
        return Err(EvalError::EmptyReports);
    }
    let mut rows: Vec<&EvalReport> = reports.iter().collect();
    rows.sort_by(|a, b| {
        (a.disease, a.period, &a.classifier).cmp(&(b.disease, b.period, &b.classifier))
    });
    let mut out = String::new();
    match format {
        ReportFormat::Json => {
            out = serde_json::to_string_pretty(&rows).expect("reports serialize");
            out.push('\n');
        }
        ReportFormat::Csv => {
            out.push_str("classifier,disease,period,tp,fp,fn,tn,f1_pct\n");
            for r in rows {
                let _ = write!(out, "{},{},{},", r.classifier, r.disease, period_cell(r.period));
                match (r.matrix, r.f1) {
                    (Some(m), Some(f)) => {
                        let _ = writeln!(out, "{},{},{},{},{}", m.tp, m.fp, m.fn_, m.tn, percent(f));
                    }
                    _ => {
                        let _ = writeln!(out, ",,,,{NOT_IMPLEMENTED}");
                    }
                }
            }
        }
        ReportFormat::Markdown => {
            out.push_str("| Classifier | Disease | Period | TP | FP | FN | TN | F1 |\n");
            out.push_str("|---|---|---|---:|---:|---:|---:|---:|\n");
            for r in rows {
                let _ = write!(out, "| {} | {} | {} |", r.classifier, r.disease, period_cell(r.period));
                match (r.matrix, r.f1) {
                    (Some(m), Some(f)) => {
                        let _ = writeln!(out, " {} | {} | {} | {} | {}% |", m.tp, m.fp, m.fn_, m.tn, percent(f));
                    }
                    _ => {
                        let _ = writeln!(out, " | | | | {NOT_IMPLEMENTED} |");
                    }
                }
            }
        }
    }
    Ok(out.into_bytes())
}

/// Reads reports previously written with [`ReportFormat::Json`].
pub fn read_json_reports(bytes: &[u8]) -> Result<Vec<EvalReport>, serde_json::Error> {
    serde_json::from_slice(bytes)
}
