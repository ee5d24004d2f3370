//! Batch generation of simulated abstracts through a chat-completion
//! endpoint.
//!
//! Each request asks for a fixed number of JSON records with `GPT-ID`,
//! `Title`, and `Abstract` fields. Large corpora are assembled from many
//! small batches; raw batches are written to disk first so an interrupted
//! run resumes where it stopped.

use std::collections::HashSet;
use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Duration;

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use thiserror::Error;
use tracing::{debug, warn};

use crate::corpus::{corpus_from_records, word_count, Corpus};
use crate::transport::{HttpRequest, Transport, TransportError};
use crate::{Disease, Source};

pub const API_KEY_ENV: &str = "OPENAI_API_KEY";
pub const BASE_URL_ENV: &str = "FAKESCI_LLM_BASE_URL";
pub const DEFAULT_BASE_URL: &str = "https://api.openai.com/v1";
pub const DEFAULT_MODEL: &str = "gpt-3.5-turbo-16k";
pub const DEFAULT_ARTICLE_NUMBER: usize = 20;
pub const DEFAULT_WORD_RANGE: (usize, usize) = (200, 250);

#[derive(Debug, Error)]
pub enum GenError {
    #[error(transparent)]
    Transport(TransportError),
    #[error("endpoint returned HTTP {0}")]
    HttpStatus(u16),
    #[error("request timed out after {attempts} attempts")]
    Timeout { attempts: usize },
    #[error("malformed batch: {0}")]
    MalformedBatch(String),
    #[error("batch file {path}: {message}")]
    Io { path: String, message: String },
    #[error("{} of {} batches failed; {} articles generated", failures.len(), batches, articles.len())]
    PartialCorpus {
        articles: Vec<GeneratedArticle>,
        corpus: Option<Corpus>,
        failures: Vec<BatchFailure>,
        batches: usize,
    },
    #[error("invalid endpoint configuration: {0}")]
    Config(String),
}

/// Rendered generation prompt.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PromptSpec {
    pub disease: Disease,
    pub article_number: usize,
    pub abstract_word_range: (usize, usize),
    pub system_role: String,
    pub request_text: String,
    pub response_format_instruction: String,
}

#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct PromptOverrides {
    pub article_number: Option<usize>,
    pub abstract_word_range: Option<(usize, usize)>,
}

pub fn build_prompt(disease: Disease, overrides: PromptOverrides) -> PromptSpec {
    let n = overrides.article_number.unwrap_or(DEFAULT_ARTICLE_NUMBER);
    let (lo, hi) = overrides.abstract_word_range.unwrap_or(DEFAULT_WORD_RANGE);
    let name = disease.display_name();
    PromptSpec {
        disease,
        article_number: n,
        abstract_word_range: (lo, hi),
        system_role: format!("You are a biomedical researcher specialized in studying {name} disease."),
        request_text: format!(
            "Topic: {name} disease.\n\
             Generate a list of {n} simulated PubMed-style abstracts.\n\
             Documents must contain: \"GPT-ID, Title, and Abstract\"; and abstract must be between {lo}-{hi} words.\n\
             Provide {name} disease and co-morbidities detailed information."
        ),
        response_format_instruction: "A valid JSON format returned as an array of valid JSON records.".into(),
    }
}

impl PromptSpec {
    pub fn user_message(&self) -> String {
        format!("{}\nResponse format: {}", self.request_text, self.response_format_instruction)
    }

    /// System and user messages as one block of text.
    pub fn rendered(&self) -> String {
        format!("{}\n{}", self.system_role, self.user_message())
    }
}

/// API key wrapper that never prints its contents.
#[derive(Clone, Default, PartialEq)]
pub struct Secret(String);

impl Secret {
    pub fn new(value: impl Into<String>) -> Self {
        Secret(value.into())
    }

    pub fn expose(&self) -> &str {
        &self.0
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

impl fmt::Debug for Secret {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("Secret(<redacted>)")
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EndpointConfig {
    pub base_url: String,
    pub model_name: String,
    pub api_key: Secret,
    pub timeout: Duration,
    pub max_retries: usize,
    /// Left to the endpoint default when `None`.
    pub temperature: Option<f64>,
}

impl EndpointConfig {
    pub fn new(base_url: impl Into<String>, api_key: Secret) -> Self {
        EndpointConfig {
            base_url: base_url.into(),
            model_name: DEFAULT_MODEL.into(),
            api_key,
            timeout: Duration::from_secs(120),
            max_retries: 3,
            temperature: None,
        }
    }

    /// Base URL from `FAKESCI_LLM_BASE_URL` (default OpenAI) and key from
    /// `OPENAI_API_KEY`.
    pub fn from_env() -> Result<Self, GenError> {
        let base = std::env::var(BASE_URL_ENV).unwrap_or_else(|_| DEFAULT_BASE_URL.to_string());
        let key = std::env::var(API_KEY_ENV)
            .map_err(|_| GenError::Config(format!("{API_KEY_ENV} is not set")))?;
        Ok(Self::new(base, Secret::new(key)))
    }

    fn validate(&self) -> Result<(), GenError> {
        if self.timeout.is_zero() {
            return Err(GenError::Config("timeout must be positive".into()));
        }
        Ok(())
    }

    pub fn completions_url(&self) -> String {
        format!("{}/chat/completions", self.base_url.trim_end_matches('/'))
    }
}

/// JSON body of a chat-completion request for `spec`.
pub fn chat_request_body(spec: &PromptSpec, endpoint: &EndpointConfig) -> Value {
    let mut body = json!({
        "model": endpoint.model_name,
        "messages": [
            {"role": "system", "content": spec.system_role},
            {"role": "user", "content": spec.user_message()},
        ],
    });
    if let Some(t) = endpoint.temperature {
        body["temperature"] = json!(t);
    }
    body
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LengthFlag {
    BelowRange,
    AboveRange,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GeneratedArticle {
    pub gpt_id: String,
    pub title: String,
    pub abstract_text: String,
    pub word_count: usize,
    pub length_flag: Option<LengthFlag>,
}

/// Record shape shared with the corpus loader.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArticleRecord {
    #[serde(rename = "GPT-ID")]
    pub gpt_id: String,
    #[serde(rename = "Title")]
    pub title: String,
    #[serde(rename = "Abstract")]
    pub abstract_text: String,
}

impl From<&GeneratedArticle> for ArticleRecord {
    fn from(a: &GeneratedArticle) -> Self {
        ArticleRecord {
            gpt_id: a.gpt_id.clone(),
            title: a.title.clone(),
            abstract_text: a.abstract_text.clone(),
        }
    }
}

/// A record dropped from an otherwise valid batch.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RecordIssue {
    pub index: usize,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BatchOutcome {
    pub articles: Vec<GeneratedArticle>,
    pub rejected: Vec<RecordIssue>,
}

fn text_of(v: &Value) -> Option<String> {
    match v {
        Value::String(s) if !s.trim().is_empty() => Some(s.clone()),
        Value::Number(n) => Some(n.to_string()),
        _ => None,
    }
}

fn strip_code_fence(content: &str) -> &str {
    let t = content.trim();
    let Some(rest) = t.strip_prefix("```") else {
        return t;
    };
    let rest = rest.trim_start_matches(|c: char| c.is_ascii_alphabetic());
    rest.strip_suffix("```").unwrap_or(rest).trim()
}

/// Extracts the record array from a chat-completion body, or accepts a bare
/// array.
fn records_from_body(body: &str) -> Result<Vec<Value>, GenError> {
    let parsed: Value = serde_json::from_str(body).map_err(|e| GenError::MalformedBatch(e.to_string()))?;
    let payload = match parsed.pointer("/choices/0/message/content") {
        Some(Value::String(content)) => serde_json::from_str(strip_code_fence(content))
            .map_err(|e| GenError::MalformedBatch(format!("message content: {e}")))?,
        Some(_) => return Err(GenError::MalformedBatch("message content is not text".into())),
        None => parsed,
    };
    match payload {
        Value::Array(records) => Ok(records),
        Value::Object(map) => {
            let mut arrays = map.into_iter().filter_map(|(_, v)| match v {
                Value::Array(a) => Some(a),
                _ => None,
            });
            match (arrays.next(), arrays.next()) {
                (Some(a), None) => Ok(a),
                _ => Err(GenError::MalformedBatch("expected a JSON array of records".into())),
            }
        }
        _ => Err(GenError::MalformedBatch("expected a JSON array of records".into())),
    }
}

fn parse_article(index: usize, record: &Value, range: (usize, usize)) -> Result<GeneratedArticle, RecordIssue> {
    let issue = |reason: &str| RecordIssue {
        index,
        reason: reason.to_string(),
    };
    let gpt_id = ["GPT-ID", "GPT_ID", "ID", "id"]
        .iter()
        .find_map(|k| record.get(*k).and_then(text_of))
        .ok_or_else(|| issue("missing GPT-ID"))?;
    let title = record.get("Title").and_then(text_of).ok_or_else(|| issue("missing Title"))?;
    let abstract_text = record
        .get("Abstract")
        .and_then(text_of)
        .ok_or_else(|| issue("missing Abstract"))?;
    let wc = word_count(&abstract_text);
    let length_flag = if wc < range.0 {
        Some(LengthFlag::BelowRange)
    } else if wc > range.1 {
        Some(LengthFlag::AboveRange)
    } else {
        None
    };
    Ok(GeneratedArticle {
        gpt_id,
        title,
        abstract_text,
        word_count: wc,
        length_flag,
    })
}

/// Validates records one by one. Only an unparseable payload, a non-array,
/// or a batch with no valid record fails as a whole.
pub fn parse_batch(body: &str, spec: &PromptSpec) -> Result<BatchOutcome, GenError> {
    let records = records_from_body(body)?;
    let mut articles = Vec::new();
    let mut rejected = Vec::new();
    let mut seen = HashSet::new();
    for (i, record) in records.iter().enumerate() {
        match parse_article(i, record, spec.abstract_word_range) {
            Ok(a) if !seen.insert(a.gpt_id.clone()) => rejected.push(RecordIssue {
                index: i,
                reason: format!("duplicate GPT-ID `{}`", a.gpt_id),
            }),
            Ok(a) => {
                if let Some(flag) = a.length_flag {
                    warn!(gpt_id = %a.gpt_id, words = a.word_count, ?flag, "abstract length outside requested range");
                }
                articles.push(a);
            }
            Err(issue) => {
                warn!(index = issue.index, reason = %issue.reason, "dropping generated record");
                rejected.push(issue);
            }
        }
    }
    if articles.is_empty() {
        return Err(GenError::MalformedBatch(format!(
            "none of {} records is valid",
            records.len()
        )));
    }
    Ok(BatchOutcome { articles, rejected })
}

/// Sends one prompt, retrying timeouts up to `max_retries` times.
pub fn generate_batch(
    spec: &PromptSpec,
    endpoint: &EndpointConfig,
    transport: &dyn Transport,
) -> Result<BatchOutcome, GenError> {
    endpoint.validate()?;
    let body = chat_request_body(spec, endpoint).to_string();
    let request = HttpRequest::post_json(endpoint.completions_url(), body)
        .header("Authorization", format!("Bearer {}", endpoint.api_key.expose()))
        .with_timeout(endpoint.timeout);
    let attempts = endpoint.max_retries + 1;
    for attempt in 1..=attempts {
        match transport.send(&request) {
            Ok(resp) if resp.is_success() => return parse_batch(&resp.body, spec),
            Ok(resp) => return Err(GenError::HttpStatus(resp.status)),
            Err(TransportError::Timeout) => {
                debug!(attempt, attempts, "generation request timed out");
            }
            Err(e) => return Err(GenError::Transport(e)),
        }
    }
    Err(GenError::Timeout { attempts })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BatchFailure {
    pub batch_index: usize,
    pub requested: usize,
    pub error: String,
}

#[derive(Debug, Clone, Default)]
pub struct GenerateOptions {
    pub batch_size: Option<usize>,
    pub word_range: Option<(usize, usize)>,
    /// Raw batches are written here before assembly and reused on rerun.
    pub raw_dir: Option<PathBuf>,
}

#[derive(Debug, Clone)]
pub struct GeneratedCorpus {
    pub corpus: Corpus,
    pub articles: Vec<GeneratedArticle>,
}

fn batch_path(dir: &Path, index: usize) -> PathBuf {
    dir.join(format!("batch_{index:04}.json"))
}

fn io_err(path: &Path, e: impl fmt::Display) -> GenError {
    GenError::Io {
        path: path.display().to_string(),
        message: e.to_string(),
    }
}

fn write_batch(path: &Path, articles: &[GeneratedArticle]) -> Result<(), GenError> {
    let records: Vec<ArticleRecord> = articles.iter().map(ArticleRecord::from).collect();
    let text = serde_json::to_string_pretty(&records).expect("records serialize");
    fs::write(path, text + "\n").map_err(|e| io_err(path, e))
}

fn read_batch(path: &Path, range: (usize, usize)) -> Result<Vec<GeneratedArticle>, GenError> {
    let text = fs::read_to_string(path).map_err(|e| io_err(path, e))?;
    let records: Vec<Value> = serde_json::from_str(&text).map_err(|e| io_err(path, e))?;
    records
        .iter()
        .enumerate()
        .map(|(i, r)| parse_article(i, r, range).map_err(|issue| io_err(path, issue.reason)))
        .collect()
}

/// Serializes articles in the corpus loader's record format.
pub fn articles_to_json(articles: &[GeneratedArticle]) -> String {
    let records: Vec<ArticleRecord> = articles.iter().map(ArticleRecord::from).collect();
    serde_json::to_string_pretty(&records).expect("records serialize") + "\n"
}

/// Requests `ceil(total / batch)` batches, the last one sized to the
/// remainder, drops repeated `GPT-ID`s, and assembles a GPT corpus.
pub fn generate_corpus(
    disease: Disease,
    total: usize,
    endpoint: &EndpointConfig,
    transport: &dyn Transport,
    options: &GenerateOptions,
) -> Result<GeneratedCorpus, GenError> {
    if total == 0 {
        return Err(GenError::Config("total must be at least 1".into()));
    }
    let batch = options.batch_size.unwrap_or(DEFAULT_ARTICLE_NUMBER).max(1);
    let n_batches = total.div_ceil(batch);
    if let Some(dir) = &options.raw_dir {
        fs::create_dir_all(dir).map_err(|e| io_err(dir, e))?;
    }
    let mut seen = HashSet::new();
    let mut articles = Vec::new();
    let mut failures = Vec::new();
    for index in 0..n_batches {
        let requested = batch.min(total - index * batch);
        let spec = build_prompt(
            disease,
            PromptOverrides {
                article_number: Some(requested),
                abstract_word_range: options.word_range,
            },
        );
        let cached = options
            .raw_dir
            .as_deref()
            .map(|d| batch_path(d, index))
            .filter(|p| p.exists());
        let outcome = match cached {
            Some(path) => read_batch(&path, spec.abstract_word_range),
            None => generate_batch(&spec, endpoint, transport).and_then(|o| {
                if let Some(dir) = &options.raw_dir {
                    write_batch(&batch_path(dir, index), &o.articles)?;
                }
                Ok(o.articles)
            }),
        };
        match outcome {
            Ok(batch_articles) => {
                for a in batch_articles {
                    if seen.insert(a.gpt_id.clone()) {
                        articles.push(a);
                    } else {
                        debug!(gpt_id = %a.gpt_id, "dropping duplicate id across batches");
                    }
                }
            }
            Err(e) => {
                warn!(batch = index, error = %e, "batch failed");
                failures.push(BatchFailure {
                    batch_index: index,
                    requested,
                    error: e.to_string(),
                });
            }
        }
    }
    let corpus = assemble(disease, &articles);
    if !failures.is_empty() {
        return Err(GenError::PartialCorpus {
            corpus: corpus.ok(),
            articles,
            failures,
            batches: n_batches,
        });
    }
    let corpus = corpus?;
    Ok(GeneratedCorpus { corpus, articles })
}

fn assemble(disease: Disease, articles: &[GeneratedArticle]) -> Result<Corpus, GenError> {
    let records: Vec<Value> = articles
        .iter()
        .map(|a| serde_json::to_value(ArticleRecord::from(a)).expect("record serializes"))
        .collect();
    corpus_from_records(&records, Source::Gpt, disease, None).map_err(|e| GenError::MalformedBatch(e.to_string()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::transport::HttpResponse;
    use std::sync::atomic::{AtomicUsize, Ordering};

    fn endpoint() -> EndpointConfig {
        EndpointConfig::new("http://llm.local/v1", Secret::new("sk-test-123"))
    }

    fn words(n: usize) -> String {
        vec!["lorem"; n].join(" ")
    }

    fn completion(records: &Value) -> String {
        json!({"choices": [{"message": {"role": "assistant", "content": records.to_string()}}]}).to_string()
    }

    fn batch_records(start: usize, n: usize, wc: usize) -> Value {
        Value::Array(
            (start..start + n)
                .map(|i| json!({"GPT-ID": format!("GPT-{i:05}"), "Title": format!("T{i}"), "Abstract": words(wc)}))
                .collect(),
        )
    }

    fn requested_count(req: &HttpRequest) -> usize {
        let body = req.body.as_deref().unwrap();
        let tail = body.split("Generate a list of ").nth(1).unwrap();
        tail.split(' ').next().unwrap().parse().unwrap()
    }

    #[test]
    fn default_prompt_contains_count_and_range() {
        let p = build_prompt(Disease::Alzheimers, PromptOverrides::default());
        let text = p.rendered();
        assert!(text.contains("You are a biomedical researcher specialized in studying Alzheimer's disease."));
        assert!(text.contains("Generate a list of 20 simulated"));
        assert!(text.contains("200-250"));
        assert!(text.contains("GPT-ID, Title, and Abstract"));
        assert!(text.contains("A valid JSON format"));
        assert_eq!(p.article_number, 20);
    }

    #[test]
    fn override_article_number() {
        let p = build_prompt(
            Disease::Cancer,
            PromptOverrides {
                article_number: Some(5),
                ..Default::default()
            },
        );
        assert!(p.rendered().contains("Generate a list of 5 simulated"));
    }

    #[test]
    fn prompts_differ_only_in_disease_text() {
        let prompts: Vec<String> = Disease::ALL
            .iter()
            .map(|&d| build_prompt(d, PromptOverrides::default()).rendered().replace(d.display_name(), "<D>"))
            .collect();
        assert_eq!(prompts[0], prompts[1]);
        assert_eq!(prompts[1], prompts[2]);
        let raw: HashSet<String> = Disease::ALL
            .iter()
            .map(|&d| build_prompt(d, PromptOverrides::default()).rendered())
            .collect();
        assert_eq!(raw.len(), 3);
    }

    #[test]
    fn batch_of_twenty() {
        let t = |req: &HttpRequest| {
            assert_eq!(req.url, "http://llm.local/v1/chat/completions");
            Ok(HttpResponse::ok(completion(&batch_records(0, requested_count(req), 210))))
        };
        let spec = build_prompt(Disease::Depression, PromptOverrides::default());
        let out = generate_batch(&spec, &endpoint(), &t).unwrap();
        assert_eq!(out.articles.len(), 20);
        assert!(out.rejected.is_empty());
        assert!(out.articles.iter().all(|a| a.length_flag.is_none()));
    }

    #[test]
    fn truncated_json_is_malformed() {
        let t = |_: &HttpRequest| Ok(HttpResponse::ok(r#"{"choices":[{"message":{"content":"[{\"GPT-ID\": 1, "}}]}"#));
        let spec = build_prompt(Disease::Depression, PromptOverrides::default());
        assert!(matches!(generate_batch(&spec, &endpoint(), &t), Err(GenError::MalformedBatch(_))));
        let not_array = |_: &HttpRequest| Ok(HttpResponse::ok(completion(&json!("just text"))));
        assert!(matches!(generate_batch(&spec, &endpoint(), &not_array), Err(GenError::MalformedBatch(_))));
    }

    #[test]
    fn short_abstract_is_kept_and_flagged() {
        let t = |_: &HttpRequest| Ok(HttpResponse::ok(completion(&batch_records(0, 1, 180))));
        let spec = build_prompt(Disease::Cancer, PromptOverrides::default());
        let out = generate_batch(&spec, &endpoint(), &t).unwrap();
        assert_eq!(out.articles[0].word_count, 180);
        assert_eq!(out.articles[0].length_flag, Some(LengthFlag::BelowRange));
    }

    #[test]
    fn one_bad_record_fails_only_itself() {
        let records = json!([
            {"GPT-ID": "a", "Title": "t", "Abstract": words(220)},
            {"GPT-ID": "b", "Title": "t"},
            {"GPT-ID": "c", "Title": "t", "Abstract": words(260)},
        ]);
        let fenced = format!("```json\n{records}\n```");
        let body = json!({"choices": [{"message": {"content": fenced}}]}).to_string();
        let spec = build_prompt(Disease::Cancer, PromptOverrides::default());
        let out = parse_batch(&body, &spec).unwrap();
        assert_eq!(out.articles.len(), 2);
        assert_eq!(out.rejected, vec![RecordIssue { index: 1, reason: "missing Abstract".into() }]);
        assert_eq!(out.articles[1].length_flag, Some(LengthFlag::AboveRange));
    }

    #[test]
    fn timeouts_are_retried() {
        let calls = AtomicUsize::new(0);
        let t = |_: &HttpRequest| {
            if calls.fetch_add(1, Ordering::SeqCst) < 2 {
                Err(TransportError::Timeout)
            } else {
                Ok(HttpResponse::ok(completion(&batch_records(0, 2, 200))))
            }
        };
        let spec = build_prompt(Disease::Cancer, PromptOverrides::default());
        assert_eq!(generate_batch(&spec, &endpoint(), &t).unwrap().articles.len(), 2);
        assert_eq!(calls.load(Ordering::SeqCst), 3);

        let always = |_: &HttpRequest| Err(TransportError::Timeout);
        let mut ep = endpoint();
        ep.max_retries = 1;
        assert!(matches!(generate_batch(&spec, &ep, &always), Err(GenError::Timeout { attempts: 2 })));
    }

    #[test]
    fn api_key_is_sent_but_never_debug_printed() {
        let t = |req: &HttpRequest| {
            assert!(req.headers.iter().any(|(k, v)| k == "Authorization" && v == "Bearer sk-test-123"));
            assert!(!req.body.as_deref().unwrap().contains("sk-test-123"));
            Ok(HttpResponse::ok(completion(&batch_records(0, 1, 200))))
        };
        let spec = build_prompt(Disease::Cancer, PromptOverrides::default());
        generate_batch(&spec, &endpoint(), &t).unwrap();
        assert!(!format!("{:?}", endpoint()).contains("sk-test-123"));
    }

    #[test]
    fn corpus_of_sixty_in_three_batches() {
        let calls = AtomicUsize::new(0);
        let t = |req: &HttpRequest| {
            let i = calls.fetch_add(1, Ordering::SeqCst);
            Ok(HttpResponse::ok(completion(&batch_records(i * 20, requested_count(req), 210))))
        };
        let out = generate_corpus(Disease::Alzheimers, 60, &endpoint(), &t, &GenerateOptions::default()).unwrap();
        assert_eq!(calls.load(Ordering::SeqCst), 3);
        assert_eq!(out.corpus.len(), 60);
        assert_eq!(out.corpus.source, Source::Gpt);
    }

    #[test]
    fn failed_middle_batch_yields_partial_corpus() {
        let calls = AtomicUsize::new(0);
        let t = |req: &HttpRequest| {
            let i = calls.fetch_add(1, Ordering::SeqCst);
            if i == 1 {
                return Err(TransportError::Connection("reset".into()));
            }
            Ok(HttpResponse::ok(completion(&batch_records(i * 20, requested_count(req), 210))))
        };
        let err = generate_corpus(Disease::Cancer, 60, &endpoint(), &t, &GenerateOptions::default()).unwrap_err();
        let GenError::PartialCorpus { articles, corpus, failures, batches } = err else { panic!("{err}") };
        assert_eq!((articles.len(), corpus.unwrap().len(), failures.len(), batches), (40, 40, 1, 3));
        assert_eq!(failures[0].batch_index, 1);
    }

    #[test]
    fn large_total_ends_with_partial_request() {
        let sizes = std::sync::Mutex::new(Vec::new());
        let t = |req: &HttpRequest| {
            let n = requested_count(req);
            let mut s = sizes.lock().unwrap();
            let start = s.iter().sum::<usize>();
            s.push(n);
            Ok(HttpResponse::ok(completion(&batch_records(start, n, 200))))
        };
        let out = generate_corpus(Disease::Alzheimers, 1196, &endpoint(), &t, &GenerateOptions::default()).unwrap();
        let sizes = sizes.into_inner().unwrap();
        assert_eq!(sizes.len(), 60);
        assert_eq!(*sizes.last().unwrap(), 16);
        assert!(sizes[..59].iter().all(|&n| n == 20));
        assert_eq!(out.corpus.len(), 1196);
    }

    #[test]
    fn duplicate_ids_across_batches_are_dropped() {
        let t = |req: &HttpRequest| Ok(HttpResponse::ok(completion(&batch_records(0, requested_count(req), 200))));
        let out = generate_corpus(Disease::Cancer, 40, &endpoint(), &t, &GenerateOptions::default()).unwrap();
        assert_eq!(out.corpus.len(), 20);
    }

    #[test]
    fn raw_batches_are_persisted_and_resumed() {
        let dir = tempfile::tempdir().unwrap();
        let opts = GenerateOptions {
            raw_dir: Some(dir.path().to_path_buf()),
            ..Default::default()
        };
        let calls = AtomicUsize::new(0);
        let t = |req: &HttpRequest| {
            let i = calls.fetch_add(1, Ordering::SeqCst);
            if i == 1 {
                return Err(TransportError::Connection("crash".into()));
            }
            Ok(HttpResponse::ok(completion(&batch_records(i * 20, requested_count(req), 200))))
        };
        assert!(generate_corpus(Disease::Cancer, 60, &endpoint(), &t, &opts).is_err());
        assert!(dir.path().join("batch_0000.json").exists());
        assert!(!dir.path().join("batch_0001.json").exists());

        // rerun only requests the missing batch
        let resumed = AtomicUsize::new(0);
        let t2 = |req: &HttpRequest| {
            resumed.fetch_add(1, Ordering::SeqCst);
            Ok(HttpResponse::ok(completion(&batch_records(20, requested_count(req), 200))))
        };
        let out = generate_corpus(Disease::Cancer, 60, &endpoint(), &t2, &opts).unwrap();
        assert_eq!(resumed.load(Ordering::SeqCst), 1);
        assert_eq!(out.corpus.len(), 60);
        for entry in fs::read_dir(dir.path()).unwrap() {
            let text = fs::read_to_string(entry.unwrap().path()).unwrap();
            assert!(!text.contains("sk-test-123"));
        }
    }
}
