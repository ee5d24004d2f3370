//! Detection of machine-generated biomedical abstracts with bigram
//! co-occurrence networks.
//!
//! The pipeline builds one LCC-pruned bigram network per source (real
//! PubMed abstracts and LLM-generated abstracts), calibrates per-source
//! ranges of contribution ratios on 100-document folds, and labels unseen
//! documents by range membership with a distance fallback. Classical
//! bag-of-words classifiers are provided as a benchmark.

pub mod baselines;
pub mod calibration;
pub mod classifier;
pub mod corpus;
pub mod eval;
pub mod genclient;
pub mod pipeline;
pub mod synth;
pub mod textnet;
pub mod transport;

mod labels;

pub use labels::{Disease, Period, Source};
