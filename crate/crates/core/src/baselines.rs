//! Classical bag-of-words baselines: multinomial naive Bayes, logistic
//! regression, and a linear SVM.
//!
//! Linear models score GPT as the positive side (`w·x + b > 0`); a score of
//! exactly zero, like a naive Bayes tie, predicts PUBMED.

use std::collections::HashMap;
use std::fs;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::TokenizedDoc;
use crate::Source;

#[derive(Debug, Error, PartialEq)]
pub enum BaselineError {
    #[error("training documents produced an empty vocabulary")]
    EmptyVocabulary,
    #[error("training data holds a single class ({0})")]
    SingleClassTraining(Source),
    #[error("{vectors} vectors but {labels} labels")]
    LengthMismatch { vectors: usize, labels: usize },
    #[error("loss became non-finite at epoch {epoch}")]
    NonFiniteLoss { epoch: usize },
    #[error("vector has {got} features, model expects {expected}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("baseline model file {path}: {message}")]
    File { path: String, message: String },
}

/// Sparse non-negative feature vector.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BowVector {
    pub indices: Vec<usize>,
    pub values: Vec<f64>,
    pub n_features: usize,
}

impl BowVector {
    /// Builds a vector from `(index, value)` pairs; repeated indices add up.
    pub fn from_pairs(n_features: usize, pairs: impl IntoIterator<Item = (usize, f64)>) -> Self {
        let mut sorted: Vec<(usize, f64)> = pairs.into_iter().collect();
        sorted.sort_by_key(|p| p.0);
        let mut indices: Vec<usize> = Vec::with_capacity(sorted.len());
        let mut values: Vec<f64> = Vec::with_capacity(sorted.len());
        for (i, v) in sorted {
            if indices.last() == Some(&i) {
                *values.last_mut().unwrap() += v;
            } else {
                indices.push(i);
                values.push(v);
            }
        }
        BowVector {
            indices,
            values,
            n_features,
        }
    }

    pub fn dense(values: &[f64]) -> Self {
        Self::from_pairs(values.len(), values.iter().copied().enumerate().filter(|p| p.1 != 0.0))
    }

    pub fn dot(&self, weights: &[f64]) -> f64 {
        self.indices
            .iter()
            .zip(&self.values)
            .map(|(&i, &v)| weights[i] * v)
            .sum()
    }

    pub fn iter(&self) -> impl Iterator<Item = (usize, f64)> + '_ {
        self.indices.iter().copied().zip(self.values.iter().copied())
    }
}

/// Token to id map with ids assigned by first occurrence.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Vocabulary {
    tokens: Vec<String>,
    ids: HashMap<String, usize>,
}

impl Vocabulary {
    pub fn from_tokens(tokens: Vec<String>) -> Self {
        let ids = tokens.iter().enumerate().map(|(i, t)| (t.clone(), i)).collect();
        Vocabulary { tokens, ids }
    }

    pub fn id(&self, token: &str) -> Option<usize> {
        self.ids.get(token).copied()
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn tokens(&self) -> &[String] {
        &self.tokens
    }

    fn insert(&mut self, token: &str) -> usize {
        if let Some(&id) = self.ids.get(token) {
            return id;
        }
        let id = self.tokens.len();
        self.tokens.push(token.to_string());
        self.ids.insert(token.to_string(), id);
        id
    }
}

impl Serialize for Vocabulary {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        self.tokens.serialize(s)
    }
}

impl<'de> Deserialize<'de> for Vocabulary {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        Ok(Vocabulary::from_tokens(Vec::<String>::deserialize(d)?))
    }
}

/// Unigram count vectors. Without a vocabulary one is built from `docs`;
/// with one, unknown tokens are dropped.
pub fn vectorize(
    docs: &[TokenizedDoc],
    vocabulary: Option<&Vocabulary>,
) -> Result<(Vec<BowVector>, Vocabulary), BaselineError> {
    let vocab = match vocabulary {
        Some(v) => v.clone(),
        None => {
            let mut v = Vocabulary::default();
            for token in docs.iter().flat_map(TokenizedDoc::tokens) {
                v.insert(token);
            }
            if v.is_empty() {
                return Err(BaselineError::EmptyVocabulary);
            }
            v
        }
    };
    let vectors = docs
        .iter()
        .map(|doc| {
            BowVector::from_pairs(
                vocab.len(),
                doc.tokens().filter_map(|t| vocab.id(t)).map(|i| (i, 1.0)),
            )
        })
        .collect();
    Ok((vectors, vocab))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum BaselineKind {
    NaiveBayes,
    Logreg,
    LinearSvm,
}

impl BaselineKind {
    pub const ALL: [BaselineKind; 3] = [BaselineKind::NaiveBayes, BaselineKind::LinearSvm, BaselineKind::Logreg];

    pub fn report_name(self) -> &'static str {
        match self {
            BaselineKind::NaiveBayes => "NaiveBayes",
            BaselineKind::Logreg => "LogisticRegression",
            BaselineKind::LinearSvm => "LinearSVM",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Hyperparameters {
    pub learning_rate: f64,
    pub epochs: usize,
    pub regularization: f64,
    pub seed: u64,
}

impl Default for Hyperparameters {
    fn default() -> Self {
        Hyperparameters {
            learning_rate: 0.1,
            epochs: 200,
            regularization: 1e-4,
            seed: 42,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Parameters {
    /// Index 0 is PUBMED, index 1 is GPT.
    NaiveBayes {
        class_log_prior: [f64; 2],
        feature_log_prob: [Vec<f64>; 2],
    },
    Linear { weights: Vec<f64>, bias: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BaselineModel {
    pub kind: BaselineKind,
    pub vocabulary: Vocabulary,
    pub parameters: Parameters,
}

impl BaselineModel {
    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("baseline model serializes")
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<(), BaselineError> {
        let path = path.as_ref();
        fs::write(path, self.to_json() + "\n").map_err(|e| BaselineError::File {
            path: path.display().to_string(),
            message: e.to_string(),
        })
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, BaselineError> {
        let path = path.as_ref();
        let err = |message: String| BaselineError::File {
            path: path.display().to_string(),
            message,
        };
        let text = fs::read_to_string(path).map_err(|e| err(e.to_string()))?;
        serde_json::from_str(&text).map_err(|e| err(e.to_string()))
    }

    /// Per-class log scores for naive Bayes, `[pubmed, gpt]`.
    pub fn class_log_scores(&self, x: &BowVector) -> Option<[f64; 2]> {
        match &self.parameters {
            Parameters::NaiveBayes {
                class_log_prior,
                feature_log_prob,
            } => Some([0, 1].map(|c| class_log_prior[c] + x.dot(&feature_log_prob[c]))),
            Parameters::Linear { .. } => None,
        }
    }

    /// Linear decision value; positive leans GPT.
    pub fn decision_value(&self, x: &BowVector) -> f64 {
        match &self.parameters {
            Parameters::NaiveBayes { .. } => {
                let [p, g] = self.class_log_scores(x).expect("naive bayes");
                g - p
            }
            Parameters::Linear { weights, bias } => x.dot(weights) + bias,
        }
    }
}

fn class_index(label: Source) -> usize {
    match label {
        Source::Pubmed => 0,
        Source::Gpt => 1,
    }
}

fn check_training_set(vectors: &[BowVector], labels: &[Source]) -> Result<usize, BaselineError> {
    if vectors.len() != labels.len() {
        return Err(BaselineError::LengthMismatch {
            vectors: vectors.len(),
            labels: labels.len(),
        });
    }
    let Some(&first) = labels.first() else {
        return Err(BaselineError::EmptyVocabulary);
    };
    if labels.iter().all(|&l| l == first) {
        return Err(BaselineError::SingleClassTraining(first));
    }
    let n = vectors[0].n_features;
    if let Some(bad) = vectors.iter().find(|v| v.n_features != n) {
        return Err(BaselineError::DimensionMismatch {
            expected: n,
            got: bad.n_features,
        });
    }
    if n == 0 {
        return Err(BaselineError::EmptyVocabulary);
    }
    Ok(n)
}

pub fn train_baseline(
    kind: BaselineKind,
    vectors: &[BowVector],
    labels: &[Source],
    vocabulary: Vocabulary,
    hyper: &Hyperparameters,
) -> Result<BaselineModel, BaselineError> {
    let n_features = check_training_set(vectors, labels)?;
    let parameters = match kind {
        BaselineKind::NaiveBayes => train_naive_bayes(vectors, labels, n_features),
        BaselineKind::Logreg => train_logreg(vectors, labels, n_features, hyper)?,
        BaselineKind::LinearSvm => train_linear_svm(vectors, labels, n_features, hyper)?,
    };
    Ok(BaselineModel {
        kind,
        vocabulary,
        parameters,
    })
}

/// Laplace-smoothed (alpha = 1) multinomial estimates.
fn train_naive_bayes(vectors: &[BowVector], labels: &[Source], n_features: usize) -> Parameters {
    let mut doc_counts = [0usize; 2];
    let mut feature_counts = [vec![0.0; n_features], vec![0.0; n_features]];
    for (x, &label) in vectors.iter().zip(labels) {
        let c = class_index(label);
        doc_counts[c] += 1;
        for (i, v) in x.iter() {
            feature_counts[c][i] += v;
        }
    }
    let n_docs = vectors.len() as f64;
    let class_log_prior = doc_counts.map(|n| (n as f64 / n_docs).ln());
    let feature_log_prob = feature_counts.map(|counts| {
        let denom = counts.iter().sum::<f64>() + n_features as f64;
        counts.iter().map(|&c| ((c + 1.0) / denom).ln()).collect()
    });
    Parameters::NaiveBayes {
        class_log_prior,
        feature_log_prob,
    }
}

fn softplus(z: f64) -> f64 {
    if z > 0.0 {
        z + (-z).exp().ln_1p()
    } else {
        z.exp().ln_1p()
    }
}

fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

fn target(label: Source) -> f64 {
    match label {
        Source::Gpt => 1.0,
        Source::Pubmed => 0.0,
    }
}

/// Mean log-loss plus `l2 / 2 * |w|^2`; the bias is not penalized.
pub fn logreg_objective(weights: &[f64], bias: f64, vectors: &[BowVector], labels: &[Source], l2: f64) -> f64 {
    let data: f64 = vectors
        .iter()
        .zip(labels)
        .map(|(x, &y)| {
            let z = x.dot(weights) + bias;
            softplus(z) - target(y) * z
        })
        .sum::<f64>()
        / vectors.len() as f64;
    data + 0.5 * l2 * weights.iter().map(|w| w * w).sum::<f64>()
}

/// Gradient of [`logreg_objective`] with respect to `(weights, bias)`.
pub fn logreg_gradient(
    weights: &[f64],
    bias: f64,
    vectors: &[BowVector],
    labels: &[Source],
    l2: f64,
) -> (Vec<f64>, f64) {
    let n = vectors.len() as f64;
    let mut grad: Vec<f64> = weights.iter().map(|w| l2 * w).collect();
    let mut grad_b = 0.0;
    for (x, &y) in vectors.iter().zip(labels) {
        let residual = (sigmoid(x.dot(weights) + bias) - target(y)) / n;
        for (i, v) in x.iter() {
            grad[i] += residual * v;
        }
        grad_b += residual;
    }
    (grad, grad_b)
}

fn train_logreg(
    vectors: &[BowVector],
    labels: &[Source],
    n_features: usize,
    hyper: &Hyperparameters,
) -> Result<Parameters, BaselineError> {
    let mut weights = vec![0.0; n_features];
    let mut bias = 0.0;
    for epoch in 0..hyper.epochs {
        let (grad, grad_b) = logreg_gradient(&weights, bias, vectors, labels, hyper.regularization);
        for (w, g) in weights.iter_mut().zip(&grad) {
            *w -= hyper.learning_rate * g;
        }
        bias -= hyper.learning_rate * grad_b;
        let loss = logreg_objective(&weights, bias, vectors, labels, hyper.regularization);
        if !loss.is_finite() {
            return Err(BaselineError::NonFiniteLoss { epoch });
        }
    }
    Ok(Parameters::Linear { weights, bias })
}

fn hinge_objective(weights: &[f64], bias: f64, vectors: &[BowVector], labels: &[Source], l2: f64) -> f64 {
    let data: f64 = vectors
        .iter()
        .zip(labels)
        .map(|(x, &y)| {
            let sign = 2.0 * target(y) - 1.0;
            (1.0 - sign * (x.dot(weights) + bias)).max(0.0)
        })
        .sum::<f64>()
        / vectors.len() as f64;
    data + 0.5 * l2 * weights.iter().map(|w| w * w).sum::<f64>()
}

/// Stochastic subgradient descent on the L2-regularized hinge loss with a
/// seeded shuffle per epoch.
fn train_linear_svm(
    vectors: &[BowVector],
    labels: &[Source],
    n_features: usize,
    hyper: &Hyperparameters,
) -> Result<Parameters, BaselineError> {
    let mut rng = ChaCha8Rng::seed_from_u64(hyper.seed);
    let mut order: Vec<usize> = (0..vectors.len()).collect();
    // weights are kept as `scale * v` so the per-step decay stays O(1)
    let mut v = vec![0.0; n_features];
    let mut scale = 1.0;
    let mut bias = 0.0;
    let lr = hyper.learning_rate;
    let l2 = hyper.regularization;
    let shrink = 1.0 - lr * l2;
    if shrink <= 0.0 {
        return Err(BaselineError::NonFiniteLoss { epoch: 0 });
    }
    let mut weights = vec![0.0; n_features];
    for epoch in 0..hyper.epochs {
        order.shuffle(&mut rng);
        for &k in &order {
            let x = &vectors[k];
            let sign = 2.0 * target(labels[k]) - 1.0;
            let margin = sign * (scale * x.dot(&v) + bias);
            scale *= shrink;
            if margin < 1.0 {
                for (i, val) in x.iter() {
                    v[i] += lr * sign * val / scale;
                }
                bias += lr * sign;
            }
            if scale < 1e-9 {
                v.iter_mut().for_each(|w| *w *= scale);
                scale = 1.0;
            }
        }
        for (w, &u) in weights.iter_mut().zip(&v) {
            *w = scale * u;
        }
        if !hinge_objective(&weights, bias, vectors, labels, l2).is_finite() {
            return Err(BaselineError::NonFiniteLoss { epoch });
        }
    }
    Ok(Parameters::Linear { weights, bias })
}

pub fn predict_baseline(model: &BaselineModel, vectors: &[BowVector]) -> Result<Vec<Source>, BaselineError> {
    let expected = model.vocabulary.len();
    vectors
        .iter()
        .map(|x| {
            if x.n_features != expected {
                return Err(BaselineError::DimensionMismatch {
                    expected,
                    got: x.n_features,
                });
            }
            Ok(if model.decision_value(x) > 0.0 {
                Source::Gpt
            } else {
                Source::Pubmed
            })
        })
        .collect()
}
