//! Deterministic synthetic corpora with controlled network geometry.
//!
//! Every corpus draws its content words from a private pseudo-word
//! vocabulary, so corpora never share a word. The first 100 documents
//! (the training block) walk a ring of "core" words with one or more
//! strides, which fixes the model's node and edge counts. Every later
//! document contains a single stride-1 walk over exactly `k` ring edges and
//! is padded to a fixed raw word count with document-unique filler words,
//! so its contribution ratio against its own model is `k / words_per_doc`.
//! Choosing `k` per document pins each fold mean exactly.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use serde_json::Value;
use std::fs;
use std::path::{Path, PathBuf};

use crate::corpus::Stopwords;
use crate::genclient::{build_prompt, chat_request_body, EndpointConfig, PromptOverrides, Secret};
use crate::transport::{Cassette, Method, RecordedRequest, RecordedResponse};
use crate::{Disease, Period, Source};

const CONSONANTS: &[u8] = b"bdfgklmnprstvz";
const VOWELS: &[u8] = b"aeiou";
const SYLLABLES_PER_WORD: u32 = 4;
const FILLER_STOPWORDS: [&str; 6] = ["the", "of", "and", "in", "with", "to"];

/// Pronounceable word for `(namespace, index)`; distinct pairs give
/// distinct words.
pub fn pseudo_word(namespace: u32, index: u64) -> String {
    let base = (CONSONANTS.len() * VOWELS.len()) as u64;
    let mut n = u64::from(namespace) * 1_000_000_000 + index;
    let mut syllables = Vec::new();
    loop {
        syllables.push(n % base);
        n /= base;
        if n == 0 && syllables.len() >= SYLLABLES_PER_WORD as usize {
            break;
        }
    }
    let mut word = String::with_capacity(syllables.len() * 2);
    for s in syllables.into_iter().rev() {
        word.push(CONSONANTS[(s / VOWELS.len() as u64) as usize] as char);
        word.push(VOWELS[(s % VOWELS.len() as u64) as usize] as char);
    }
    word
}

/// Shape of one synthetic corpus.
#[derive(Debug, Clone, PartialEq)]
pub struct CorpusRecipe {
    pub source: Source,
    pub disease: Disease,
    pub period: Option<Period>,
    pub n_docs: usize,
    pub words_per_doc: usize,
    /// Ring size; the model's node count.
    pub core_size: usize,
    /// Every stride-`s` ring edge appears in the training block.
    pub strides: Vec<usize>,
    /// Ring edges walked by each training document.
    pub train_walk_edges: usize,
    /// Extra stride-`chord_stride` edges added by the first training documents.
    pub chords: usize,
    pub chord_stride: usize,
    /// Target fold means, cycled when the corpus has more folds.
    pub fold_means: Vec<f64>,
    /// Ratio of every document after the last full fold.
    pub test_ratio: f64,
    pub train_size: usize,
    pub fold_size: usize,
    pub seed: u64,
}

#[derive(Serialize)]
struct PubmedRecord<'a> {
    #[serde(rename = "PMID")]
    pmid: String,
    #[serde(rename = "Title")]
    title: String,
    #[serde(rename = "Abstract")]
    abstract_text: &'a str,
}

#[derive(Serialize)]
struct GptRecord<'a> {
    #[serde(rename = "GPT-ID")]
    gpt_id: String,
    #[serde(rename = "Title")]
    title: String,
    #[serde(rename = "Abstract")]
    abstract_text: &'a str,
}

fn namespace_of(source: Source, disease: Disease, period: Option<Period>) -> u32 {
    let s = match source {
        Source::Pubmed => 0,
        Source::Gpt => 1,
    };
    let d = disease as u32;
    let p = period.map_or(0, |p| p as u32 + 1);
    // two namespaces per corpus: core words and filler words
    2 * ((s * 3 + d) * 4 + p) + 1
}

fn disease_tag(d: Disease) -> &'static str {
    match d {
        Disease::Alzheimers => "ALZ",
        Disease::Cancer => "CAN",
        Disease::Depression => "DEP",
    }
}

impl CorpusRecipe {
    /// Dense profile: a small ring linked at strides 1, 2 and 3.
    pub fn dense(disease: Disease, n_docs: usize, fold_means: Vec<f64>, seed: u64) -> Self {
        let test_ratio = midpoint(&fold_means);
        CorpusRecipe {
            source: Source::Gpt,
            disease,
            period: None,
            n_docs,
            words_per_doc: 100,
            core_size: 79,
            strides: vec![1, 2, 3],
            train_walk_edges: 27,
            chords: 0,
            chord_stride: 0,
            fold_means,
            test_ratio,
            train_size: 100,
            fold_size: 100,
            seed,
        }
    }

    /// Sparse profile: a large ring with a few chords.
    pub fn sparse(
        disease: Disease,
        period: Period,
        n_docs: usize,
        core_size: usize,
        chords: usize,
        fold_means: Vec<f64>,
        seed: u64,
    ) -> Self {
        let test_ratio = midpoint(&fold_means);
        CorpusRecipe {
            source: Source::Pubmed,
            disease,
            period: Some(period),
            n_docs,
            words_per_doc: 100,
            core_size,
            strides: vec![1],
            train_walk_edges: 8,
            chords,
            chord_stride: 7,
            fold_means,
            test_ratio,
            train_size: 100,
            fold_size: 100,
            seed,
        }
    }

    fn core_ns(&self) -> u32 {
        namespace_of(self.source, self.disease, self.period)
    }

    fn core_word(&self, i: usize) -> String {
        pseudo_word(self.core_ns(), (i % self.core_size) as u64)
    }

    fn n_folds(&self) -> usize {
        self.n_docs.saturating_sub(self.train_size) / self.fold_size
    }

    /// Number of matching ring edges planted in document `index`.
    pub fn planted_edges(&self, index: usize) -> Option<usize> {
        if index < self.train_size {
            return None;
        }
        let offset = index - self.train_size;
        let fold = offset / self.fold_size;
        let scale = self.words_per_doc as f64;
        if fold < self.n_folds() {
            let mean = self.fold_means[fold % self.fold_means.len()];
            let target = (mean * scale).round() as i64;
            // deviations sum to zero over every block of five documents
            const SPREAD: [i64; 5] = [0, 1, -1, 2, -2];
            let k = target + SPREAD[(offset % self.fold_size) % SPREAD.len()];
            Some(k.max(0) as usize)
        } else {
            Some((self.test_ratio * scale).round() as usize)
        }
    }

    fn walk(&self, start: usize, stride: usize, edges: usize) -> Vec<String> {
        (0..=edges).map(|j| self.core_word(start + j * stride)).collect()
    }

    fn doc_sentences(&self, index: usize, rng: &mut ChaCha8Rng) -> Vec<Vec<String>> {
        let mut sentences = Vec::new();
        match self.planted_edges(index) {
            None => {
                let s = self.strides.len();
                let stride = self.strides[index % s];
                let start = (index / s) * self.train_walk_edges;
                sentences.push(with_stopwords(self.walk(start, stride, self.train_walk_edges)));
                if index < self.chords {
                    let step = self.core_size / self.chords;
                    sentences.push(self.walk(index * step, self.chord_stride, 1));
                }
            }
            Some(0) => {}
            Some(k) => {
                let start = rng.gen_range(0..self.core_size);
                sentences.push(with_stopwords(self.walk(start, 1, k)));
            }
        }
        let used: usize = sentences.iter().map(Vec::len).sum();
        assert!(used <= self.words_per_doc, "document {index} overflows its word budget");
        let filler_ns = self.core_ns() + 1;
        let mut remaining = self.words_per_doc - used;
        let mut serial = 0u64;
        while remaining > 0 {
            let len = remaining.min(6);
            let mut sentence = Vec::with_capacity(len);
            for j in 0..len {
                if j == 0 && len > 1 {
                    sentence.push(FILLER_STOPWORDS[(index + sentences.len()) % FILLER_STOPWORDS.len()].to_string());
                } else {
                    sentence.push(pseudo_word(filler_ns, index as u64 * 1000 + serial));
                    serial += 1;
                }
            }
            remaining -= len;
            sentences.push(sentence);
        }
        sentences
    }

    pub fn abstract_text(&self, index: usize, rng: &mut ChaCha8Rng) -> String {
        self.doc_sentences(index, rng)
            .into_iter()
            .map(|s| {
                let mut text = s.join(" ");
                if let Some(first) = text.get_mut(0..1) {
                    first.make_ascii_uppercase();
                }
                text.push('.');
                text
            })
            .collect::<Vec<_>>()
            .join(" ")
    }

    /// Records in corpus-file order.
    pub fn records(&self) -> Vec<Value> {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        let tag = disease_tag(self.disease);
        (0..self.n_docs)
            .map(|i| {
                let text = self.abstract_text(i, &mut rng);
                let title = format!("Synthetic {} abstract {}", self.disease.display_name(), i + 1);
                match self.source {
                    Source::Pubmed => serde_json::to_value(PubmedRecord {
                        pmid: format!("{}", 30_000_000 + self.core_ns() as usize * 10_000 + i),
                        title,
                        abstract_text: &text,
                    }),
                    Source::Gpt => serde_json::to_value(GptRecord {
                        gpt_id: format!("GPT-{tag}-{:05}", i + 1),
                        title,
                        abstract_text: &text,
                    }),
                }
                .expect("record serializes")
            })
            .collect()
    }
}

fn with_stopwords(words: Vec<String>) -> Vec<String> {
    let mut out = Vec::with_capacity(words.len() + words.len() / 4);
    let last = words.len().saturating_sub(1);
    for (i, w) in words.into_iter().enumerate() {
        out.push(w);
        if i % 4 == 3 && i != last {
            out.push("of".to_string());
        }
    }
    out
}

fn midpoint(means: &[f64]) -> f64 {
    let lo = means.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = means.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    ((lo + hi) / 2.0 * 100.0).round() / 100.0
}

/// Fold means of the bound table, per disease: the generated-text column
/// and the three publication periods.
pub fn table_fold_means(disease: Disease) -> (Vec<f64>, [Vec<f64>; 3]) {
    match disease {
        Disease::Alzheimers => (
            vec![0.27, 0.30, 0.30, 0.28, 0.28, 0.29],
            [
                vec![0.15, 0.16, 0.16, 0.16, 0.16, 0.16],
                vec![0.14, 0.15, 0.15, 0.15, 0.14, 0.15],
                vec![0.15, 0.15, 0.14, 0.15, 0.14, 0.14],
            ],
        ),
        Disease::Cancer => (
            vec![0.27, 0.29, 0.26, 0.25, 0.25, 0.28],
            [
                vec![0.14, 0.14, 0.15, 0.14, 0.13, 0.14],
                vec![0.15, 0.15, 0.16, 0.15, 0.16, 0.16],
                vec![0.17, 0.17, 0.15, 0.15, 0.15, 0.17],
            ],
        ),
        Disease::Depression => (
            vec![0.28, 0.30, 0.32, 0.27, 0.30, 0.30],
            [
                vec![0.10, 0.11, 0.11, 0.11, 0.11, 0.11],
                vec![0.13, 0.11, 0.11, 0.11, 0.11, 0.09],
                vec![0.11, 0.10, 0.11, 0.11, 0.11, 0.11],
            ],
        ),
    }
}

fn period_index(p: Period) -> usize {
    match p {
        Period::P2010_2014 => 0,
        Period::P2015_2019 => 1,
        Period::P2020_2024 => 2,
    }
}

/// Generated-text corpus of the dense profile tuned to the disease's table.
pub fn gpt_recipe(disease: Disease, n_docs: usize) -> CorpusRecipe {
    let (gpt, _) = table_fold_means(disease);
    CorpusRecipe::dense(disease, n_docs, gpt, 7 + disease as u64)
}

/// Publication corpus of the sparse profile tuned to the disease/period.
/// Ring size and chord count vary by period so each model differs.
pub fn pubmed_recipe(disease: Disease, period: Period, n_docs: usize) -> CorpusRecipe {
    let (_, pubs) = table_fold_means(disease);
    let pi = period_index(period);
    let core = [600, 640, 680][pi];
    let chords = [100, 110, 120][pi];
    CorpusRecipe::sparse(disease, period, n_docs, core, chords, pubs[pi].clone(), 101 + (disease as u64) * 10 + pi as u64)
}

/// True when no content word of the recipe collides with a stopword.
pub fn vocabulary_avoids_stopwords(recipe: &CorpusRecipe, stopwords: &Stopwords) -> bool {
    (0..recipe.core_size).all(|i| !stopwords.contains(&recipe.core_word(i)))
}

/// Endpoint recorded in the shipped abstract-search cassette.
pub const FIXTURE_PUBMED_ENDPOINT: &str = "http://pubmed.fixture/esearch";
/// Base URL recorded in the shipped chat-completion cassettes.
pub const FIXTURE_LLM_BASE_URL: &str = "http://llm.fixture/v1";
pub const FIXTURE_PUBMED_QUERY: &str = "cancer and co-morbidities";
/// Articles in the shipped generation cassettes (three batches of 20).
pub const FIXTURE_GPT_ARTICLES: usize = 60;
/// Size of the shipped six-fold corpora: 100 train, 6 x 100 folds, 50 test.
pub const FIXTURE_CORPUS_SIZE: usize = 750;

fn write_pretty(path: &Path, value: &impl Serialize) -> std::io::Result<()> {
    let text = serde_json::to_string_pretty(value).map_err(std::io::Error::other)?;
    fs::write(path, text + "\n")
}

fn corpus_file(disease: Disease, source: Source, period: Option<Period>) -> String {
    let d = disease.as_str().to_ascii_lowercase();
    match (source, period) {
        (Source::Gpt, _) => format!("{d}_gpt.json"),
        (Source::Pubmed, Some(p)) => format!("{d}_pubmed_{}.json", p.as_str().replace('-', "_")),
        (Source::Pubmed, None) => format!("{d}_pubmed.json"),
    }
}

/// Relative path of a shipped corpus under the fixture root.
pub fn fixture_corpus_path(disease: Disease, source: Source, period: Option<Period>) -> PathBuf {
    Path::new("corpora").join(corpus_file(disease, source, period))
}

/// 210-word articles served by the generation cassettes.
fn fixture_articles() -> Vec<Value> {
    let mut recipe = gpt_recipe(Disease::Alzheimers, FIXTURE_GPT_ARTICLES);
    recipe.words_per_doc = 210;
    recipe.seed = 1_000;
    recipe.records()
}

/// Writes every shipped fixture under `root`: the Alzheimer's generated
/// corpus with all three publication periods, a depression pair (the
/// 2020-2024 side has 1513 records), an abstract-search cassette with 1243
/// cancer records, and three chat-completion cassettes.
pub fn write_fixture_tree(root: &Path) -> std::io::Result<Vec<PathBuf>> {
    let mut written = Vec::new();
    let corpora = root.join("corpora");
    fs::create_dir_all(&corpora)?;
    let mut recipes = vec![gpt_recipe(Disease::Alzheimers, FIXTURE_CORPUS_SIZE)];
    recipes.extend(Period::ALL.map(|p| pubmed_recipe(Disease::Alzheimers, p, FIXTURE_CORPUS_SIZE)));
    recipes.push(gpt_recipe(Disease::Depression, FIXTURE_CORPUS_SIZE));
    recipes.push(pubmed_recipe(Disease::Depression, Period::P2020_2024, 1513));
    for r in &recipes {
        let path = root.join(fixture_corpus_path(r.disease, r.source, r.period));
        write_pretty(&path, &r.records())?;
        written.push(path);
    }

    let pub_dir = root.join("transport").join("pubmed_cancer");
    fs::create_dir_all(&pub_dir)?;
    let mut url = url::Url::parse(FIXTURE_PUBMED_ENDPOINT).expect("fixture endpoint parses");
    url.query_pairs_mut()
        .append_pair("term", FIXTURE_PUBMED_QUERY)
        .append_pair("mindate", "2020")
        .append_pair("maxdate", "2024");
    let records = pubmed_recipe(Disease::Cancer, Period::P2020_2024, 1243).records();
    let cassette = Cassette {
        request: RecordedRequest {
            method: Method::Get,
            url: url.to_string(),
            body: None,
        },
        response: RecordedResponse {
            status: 200,
            body: Value::Array(records),
            error: None,
        },
    };
    let path = pub_dir.join("0001.json");
    write_pretty(&path, &cassette)?;
    written.push(path);

    let gen_dir = root.join("transport").join("gpt_alzheimers");
    fs::create_dir_all(&gen_dir)?;
    let endpoint = EndpointConfig::new(FIXTURE_LLM_BASE_URL, Secret::new("unused"));
    let articles = fixture_articles();
    let per_batch = crate::genclient::DEFAULT_ARTICLE_NUMBER;
    for (i, chunk) in articles.chunks(per_batch).enumerate() {
        let spec = build_prompt(
            Disease::Alzheimers,
            PromptOverrides {
                article_number: Some(chunk.len()),
                abstract_word_range: None,
            },
        );
        let content = serde_json::to_string_pretty(chunk).expect("articles serialize");
        let completion = serde_json::json!({
            "id": format!("chatcmpl-fixture-{:04}", i + 1),
            "object": "chat.completion",
            "model": endpoint.model_name,
            "choices": [{
                "index": 0,
                "message": {"role": "assistant", "content": content},
                "finish_reason": "stop"
            }]
        });
        let cassette = Cassette {
            request: RecordedRequest {
                method: Method::Post,
                url: endpoint.completions_url(),
                body: Some(chat_request_body(&spec, &endpoint)),
            },
            response: RecordedResponse {
                status: 200,
                body: Value::String(completion.to_string()),
                error: None,
            },
        };
        let path = gen_dir.join(format!("{:04}.json", i + 1));
        write_pretty(&path, &cassette)?;
        written.push(path);
    }
    Ok(written)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::HashSet;

    #[test]
    fn pseudo_words_are_distinct_across_namespaces() {
        let mut seen = HashSet::new();
        for ns in 0..4 {
            for i in 0..2000 {
                assert!(seen.insert(pseudo_word(ns, i)));
            }
        }
        assert!(pseudo_word(3, 17).chars().all(|c| c.is_ascii_lowercase()));
    }

    #[test]
    fn documents_hit_their_word_budget() {
        let r = gpt_recipe(Disease::Alzheimers, 750);
        let recs = r.records();
        assert_eq!(recs.len(), 750);
        for rec in &recs {
            let text = rec["Abstract"].as_str().unwrap();
            assert_eq!(text.split_whitespace().count(), 100);
        }
        assert_eq!(recs[0]["GPT-ID"], "GPT-ALZ-00001");
    }

    #[test]
    fn planted_counts_average_to_fold_means() {
        let r = pubmed_recipe(Disease::Depression, Period::P2020_2024, 1513);
        let folds = (1513 - 100) / 100;
        for f in 0..folds {
            let sum: usize = (0..100).map(|i| r.planted_edges(100 + f * 100 + i).unwrap()).sum();
            let want = r.fold_means[f % r.fold_means.len()];
            assert_eq!(sum, (want * 10_000.0).round() as usize);
        }
        assert_eq!(r.planted_edges(1500), Some(11));
        assert_eq!(r.planted_edges(5), None);
    }

    #[test]
    fn recipes_avoid_stopwords() {
        let sw = Stopwords::embedded();
        for d in Disease::ALL {
            assert!(vocabulary_avoids_stopwords(&gpt_recipe(d, 200), &sw));
            for p in Period::ALL {
                assert!(vocabulary_avoids_stopwords(&pubmed_recipe(d, p, 200), &sw));
            }
        }
    }

    #[test]
    fn generation_is_deterministic() {
        let r = gpt_recipe(Disease::Cancer, 250);
        assert_eq!(r.records(), r.records());
    }
}
