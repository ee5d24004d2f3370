//! Abstract corpora: loading, preprocessing, and positional splitting.

use std::collections::HashSet;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::Value;
use thiserror::Error;

use crate::transport::{HttpRequest, Transport, TransportError};
use crate::{Disease, Period, Source};

/// Environment variable holding the base URL of the abstract search service.
pub const ENDPOINT_ENV: &str = "FAKESCI_PUBMED_ENDPOINT";

const EMBEDDED_STOPWORDS: &str = include_str!("../data/stopwords-en-v1.txt");

#[derive(Debug, Error)]
pub enum CorpusError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("malformed JSON: {0}")]
    MalformedJson(String),
    #[error("record {index} is missing field `{field}`")]
    MissingField { index: usize, field: &'static str },
    #[error("record {index} has an empty `{field}`")]
    EmptyField { index: usize, field: &'static str },
    #[error("duplicate document id `{0}`")]
    DuplicateId(String),
    #[error("corpus contains no records")]
    EmptyCorpus,
    #[error("generated corpora carry no publication period")]
    PeriodOnGenerated,
    #[error("need at least {needed} documents (train {train} + one fold of {fold}), corpus has {available}")]
    InsufficientDocuments {
        needed: usize,
        available: usize,
        train: usize,
        fold: usize,
    },
    #[error("stopword list is empty")]
    EmptyStopwords,
    #[error(transparent)]
    Transport(#[from] TransportError),
    #[error("remote returned HTTP {0}")]
    HttpStatus(u16),
    #[error("remote response is not a JSON array of records: {0}")]
    NonJsonResponse(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Document {
    pub id: String,
    pub title: String,
    #[serde(rename = "abstract")]
    pub abstract_text: String,
    pub source: Source,
    pub disease: Disease,
    pub period: Option<Period>,
    pub raw_word_count: usize,
}

impl Document {
    pub fn new(
        id: impl Into<String>,
        title: impl Into<String>,
        abstract_text: impl Into<String>,
        source: Source,
        disease: Disease,
        period: Option<Period>,
    ) -> Self {
        let abstract_text = abstract_text.into();
        let raw_word_count = word_count(&abstract_text);
        Document {
            id: id.into(),
            title: title.into(),
            abstract_text,
            source,
            disease,
            period: if source == Source::Gpt { None } else { period },
            raw_word_count,
        }
    }
}

/// Whitespace token count of raw text, stopwords included.
pub fn word_count(text: &str) -> usize {
    text.split_whitespace().count()
}

#[derive(Debug, Clone, PartialEq)]
pub struct Corpus {
    pub documents: Vec<Document>,
    pub source: Source,
    pub disease: Disease,
    pub period: Option<Period>,
}

impl Corpus {
    pub fn len(&self) -> usize {
        self.documents.len()
    }

    pub fn is_empty(&self) -> bool {
        self.documents.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SplitPlan {
    pub train: Vec<Document>,
    pub folds: Vec<Vec<Document>>,
    pub test: Vec<Document>,
}

impl SplitPlan {
    /// Moves whole folds from the end of the plan into the front of the test
    /// pool until it holds at least `needed` documents, keeping one fold.
    /// Corpus order is preserved.
    pub fn reserve_test(&mut self, needed: usize) -> bool {
        while self.test.len() < needed && self.folds.len() > 1 {
            let mut fold = self.folds.pop().expect("at least two folds");
            fold.append(&mut self.test);
            self.test = fold;
        }
        self.test.len() >= needed
    }
}

/// A preprocessed document: sentences of lowercased content tokens.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TokenizedDoc {
    pub doc_id: String,
    pub source: Source,
    /// Whitespace word count of the originating abstract.
    pub raw_word_count: usize,
    pub sentences: Vec<Vec<String>>,
}

impl TokenizedDoc {
    pub fn token_count(&self) -> usize {
        self.sentences.iter().map(Vec::len).sum()
    }

    pub fn tokens(&self) -> impl Iterator<Item = &str> {
        self.sentences.iter().flatten().map(String::as_str)
    }

    /// Sentences re-joined as plain text; preprocessing it again yields the
    /// same sentences.
    pub fn joined_text(&self) -> String {
        self.sentences
            .iter()
            .map(|s| s.join(" "))
            .collect::<Vec<_>>()
            .join(". ")
    }
}

/// Lowercased stopword set.
#[derive(Debug, Clone, PartialEq)]
pub struct Stopwords(HashSet<String>);

impl Stopwords {
    /// The versioned English list compiled into the crate.
    pub fn embedded() -> Self {
        Self::parse(EMBEDDED_STOPWORDS).expect("embedded stopword list is non-empty")
    }

    pub fn parse(text: &str) -> Result<Self, CorpusError> {
        let set: HashSet<String> = text
            .lines()
            .map(|l| l.trim().to_lowercase())
            .filter(|l| !l.is_empty() && !l.starts_with('#'))
            .collect();
        if set.is_empty() {
            return Err(CorpusError::EmptyStopwords);
        }
        Ok(Stopwords(set))
    }

    pub fn from_file(path: impl AsRef<Path>) -> Result<Self, CorpusError> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|source| CorpusError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::parse(&text)
    }

    pub fn from_words<I, S>(words: I) -> Result<Self, CorpusError>
    where
        I: IntoIterator<Item = S>,
        S: AsRef<str>,
    {
        let set: HashSet<String> = words
            .into_iter()
            .map(|w| w.as_ref().to_lowercase())
            .collect();
        if set.is_empty() {
            return Err(CorpusError::EmptyStopwords);
        }
        Ok(Stopwords(set))
    }

    pub fn contains(&self, word: &str) -> bool {
        self.0.contains(word)
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

const ID_KEYS: [&str; 2] = ["PMID", "GPT-ID"];

fn text_field(value: &Value) -> Option<String> {
    match value {
        Value::String(s) => Some(s.clone()),
        Value::Number(n) => Some(n.to_string()),
        _ => None,
    }
}

/// Builds a corpus from already-parsed JSON records.
pub fn corpus_from_records(
    records: &[Value],
    source: Source,
    disease: Disease,
    period: Option<Period>,
) -> Result<Corpus, CorpusError> {
    if source == Source::Gpt && period.is_some() {
        return Err(CorpusError::PeriodOnGenerated);
    }
    if records.is_empty() {
        return Err(CorpusError::EmptyCorpus);
    }
    let mut seen = HashSet::new();
    let mut documents = Vec::with_capacity(records.len());
    for (index, record) in records.iter().enumerate() {
        let id = ID_KEYS
            .iter()
            .find_map(|k| record.get(*k).and_then(text_field))
            .ok_or(CorpusError::MissingField { index, field: "id" })?;
        let title = record
            .get("Title")
            .and_then(text_field)
            .ok_or(CorpusError::MissingField { index, field: "Title" })?;
        let abstract_text = record
            .get("Abstract")
            .and_then(text_field)
            .ok_or(CorpusError::MissingField {
                index,
                field: "Abstract",
            })?;
        if abstract_text.trim().is_empty() {
            return Err(CorpusError::EmptyField {
                index,
                field: "Abstract",
            });
        }
        if !seen.insert(id.clone()) {
            return Err(CorpusError::DuplicateId(id));
        }
        documents.push(Document::new(id, title, abstract_text, source, disease, period));
    }
    Ok(Corpus {
        documents,
        source,
        disease,
        period,
    })
}

/// Loads a JSON array of `{PMID|GPT-ID, Title, Abstract}` records.
pub fn load_corpus(
    path: impl AsRef<Path>,
    source: Source,
    disease: Disease,
    period: Option<Period>,
) -> Result<Corpus, CorpusError> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|source| CorpusError::Io {
        path: path.display().to_string(),
        source,
    })?;
    let value: Value =
        serde_json::from_str(&text).map_err(|e| CorpusError::MalformedJson(e.to_string()))?;
    let Value::Array(records) = value else {
        return Err(CorpusError::MalformedJson(
            "top-level value is not an array".into(),
        ));
    };
    corpus_from_records(&records, source, disease, period)
}

/// Writes records in the same format `load_corpus` reads.
pub fn save_records(path: impl AsRef<Path>, records: &[Value]) -> Result<(), CorpusError> {
    let path = path.as_ref();
    let text = serde_json::to_string_pretty(records)
        .map_err(|e| CorpusError::MalformedJson(e.to_string()))?;
    fs::write(path, text + "\n").map_err(|source| CorpusError::Io {
        path: path.display().to_string(),
        source,
    })
}

fn is_sentence_end(c: char) -> bool {
    matches!(c, '.' | '!' | '?')
}

fn tokenize_text(text: &str, stopwords: &Stopwords) -> Vec<Vec<String>> {
    text.split(is_sentence_end)
        .map(|sentence| {
            sentence
                .split_whitespace()
                .map(|raw| {
                    raw.trim_matches(|c: char| !c.is_alphanumeric())
                        .to_lowercase()
                })
                .filter(|tok| !tok.is_empty() && !stopwords.contains(tok))
                .collect::<Vec<_>>()
        })
        .filter(|s| !s.is_empty())
        .collect()
}

/// Sentence-splits on `.`, `!`, `?`, lowercases, strips edge punctuation,
/// and drops stopwords and empty tokens.
pub fn preprocess(doc: &Document, stopwords: &Stopwords) -> TokenizedDoc {
    TokenizedDoc {
        doc_id: doc.id.clone(),
        source: doc.source,
        raw_word_count: doc.raw_word_count,
        sentences: tokenize_text(&doc.abstract_text, stopwords),
    }
}

/// Like [`preprocess`] but with the title prepended as its own sentence.
/// The word count still refers to the abstract alone.
pub fn preprocess_with_title(doc: &Document, stopwords: &Stopwords) -> TokenizedDoc {
    let mut sentences = tokenize_text(&doc.title, stopwords);
    sentences.extend(tokenize_text(&doc.abstract_text, stopwords));
    TokenizedDoc {
        doc_id: doc.id.clone(),
        source: doc.source,
        raw_word_count: doc.raw_word_count,
        sentences,
    }
}

pub fn preprocess_all(docs: &[Document], stopwords: &Stopwords, include_titles: bool) -> Vec<TokenizedDoc> {
    docs.iter()
        .map(|d| {
            if include_titles {
                preprocess_with_title(d, stopwords)
            } else {
                preprocess(d, stopwords)
            }
        })
        .collect()
}

/// Positional split: the first `train_size` documents train, following full
/// chunks of `fold_size` become folds, and any trailing partial chunk goes to
/// the test pool.
pub fn split_corpus(
    corpus: &Corpus,
    train_size: usize,
    fold_size: usize,
) -> Result<SplitPlan, CorpusError> {
    let needed = train_size + fold_size;
    if fold_size == 0 || corpus.len() < needed {
        return Err(CorpusError::InsufficientDocuments {
            needed,
            available: corpus.len(),
            train: train_size,
            fold: fold_size,
        });
    }
    let (train, rest) = corpus.documents.split_at(train_size);
    let mut chunks = rest.chunks_exact(fold_size);
    let folds: Vec<Vec<Document>> = chunks.by_ref().map(<[Document]>::to_vec).collect();
    let test = chunks.remainder().to_vec();
    Ok(SplitPlan {
        train: train.to_vec(),
        folds,
        test,
    })
}

/// Queries the abstract search service and returns its records untouched.
pub fn fetch_remote(
    query: &str,
    period: Option<Period>,
    endpoint: &str,
    transport: &dyn Transport,
) -> Result<Vec<Value>, CorpusError> {
    let mut url = url::Url::parse(endpoint)
        .map_err(|e| CorpusError::Transport(TransportError::Connection(e.to_string())))?;
    {
        let mut q = url.query_pairs_mut();
        q.append_pair("term", query);
        if let Some(p) = period {
            let (from, to) = p.as_str().split_once('-').expect("period has two years");
            q.append_pair("mindate", from);
            q.append_pair("maxdate", to);
        }
    }
    let response = transport.send(&HttpRequest::get(url.as_str()))?;
    if !response.is_success() {
        return Err(CorpusError::HttpStatus(response.status));
    }
    match serde_json::from_str::<Value>(&response.body) {
        Ok(Value::Array(records)) => Ok(records),
        Ok(_) => Err(CorpusError::NonJsonResponse("top-level value is not an array".into())),
        Err(e) => Err(CorpusError::NonJsonResponse(e.to_string())),
    }
}
