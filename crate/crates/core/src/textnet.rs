//! TF-IDF bigram extraction and the co-occurrence network training model.
//!
//! Nodes are unigram tokens and every bigram observed inside a sentence of a
//! training document adds an undirected edge between its two words. The
//! finished model keeps only its largest connected component.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::TokenizedDoc;
use crate::Source;

#[derive(Debug, Error)]
pub enum TextNetError {
    #[error("no documents to fit")]
    NoDocuments,
    #[error("model is empty: no bigrams were extracted")]
    EmptyModel,
    #[error("cannot read or write model {path}: {message}")]
    Io { path: String, message: String },
    #[error("invalid model file: {0}")]
    InvalidModel(String),
}

/// Ordered pair of adjacent tokens.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Bigram {
    pub left: String,
    pub right: String,
}

impl Bigram {
    pub fn new(left: impl Into<String>, right: impl Into<String>) -> Self {
        Bigram {
            left: left.into(),
            right: right.into(),
        }
    }

    /// The undirected edge this bigram forms, or `None` for a repeated word.
    pub fn edge(&self) -> Option<Edge> {
        Edge::new(&self.left, &self.right)
    }
}

/// Undirected edge stored with its endpoints in lexicographic order.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Edge {
    a: String,
    b: String,
}

impl Edge {
    pub fn new(s: &str, t: &str) -> Option<Edge> {
        match s.cmp(t) {
            std::cmp::Ordering::Less => Some(Edge {
                a: s.to_string(),
                b: t.to_string(),
            }),
            std::cmp::Ordering::Greater => Some(Edge {
                a: t.to_string(),
                b: s.to_string(),
            }),
            std::cmp::Ordering::Equal => None,
        }
    }

    pub fn endpoints(&self) -> (&str, &str) {
        (&self.a, &self.b)
    }
}

/// Within-sentence adjacent token pairs, in order, with repeats.
pub fn doc_bigrams(doc: &TokenizedDoc) -> Vec<Bigram> {
    doc.sentences
        .iter()
        .flat_map(|s| s.windows(2).map(|w| Bigram::new(&w[0], &w[1])))
        .collect()
}

/// Distinct bigrams of a document.
pub fn distinct_bigrams(doc: &TokenizedDoc) -> BTreeSet<Bigram> {
    doc_bigrams(doc).into_iter().collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct IdfTable {
    df: BTreeMap<Bigram, usize>,
    n_docs: usize,
}

impl IdfTable {
    pub fn n_docs(&self) -> usize {
        self.n_docs
    }

    pub fn df(&self, bigram: &Bigram) -> usize {
        self.df.get(bigram).copied().unwrap_or(0)
    }

    /// `ln(N / (1 + df))`; unseen bigrams have df 0.
    pub fn idf(&self, bigram: &Bigram) -> f64 {
        idf_value(self.n_docs, self.df(bigram))
    }

    pub fn iter(&self) -> impl Iterator<Item = (&Bigram, f64)> {
        self.df.iter().map(|(b, &df)| (b, idf_value(self.n_docs, df)))
    }

    pub fn len(&self) -> usize {
        self.df.len()
    }

    pub fn is_empty(&self) -> bool {
        self.df.is_empty()
    }
}

fn idf_value(n_docs: usize, df: usize) -> f64 {
    (n_docs as f64 / (1.0 + df as f64)).ln()
}

pub fn compute_idf(docs: &[TokenizedDoc]) -> Result<IdfTable, TextNetError> {
    if docs.is_empty() {
        return Err(TextNetError::NoDocuments);
    }
    let mut df: BTreeMap<Bigram, usize> = BTreeMap::new();
    for doc in docs {
        for bigram in distinct_bigrams(doc) {
            *df.entry(bigram).or_default() += 1;
        }
    }
    Ok(IdfTable {
        df,
        n_docs: docs.len(),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BigramFeature {
    pub left: String,
    pub right: String,
    pub tf: f64,
    pub tfidf: f64,
}

/// One feature per distinct bigram, sorted. `tf` divides occurrences by
/// the document's token count.
pub fn extract_bigrams(doc: &TokenizedDoc, idf: &IdfTable) -> Vec<BigramFeature> {
    let total = doc.token_count();
    let mut counts: BTreeMap<Bigram, usize> = BTreeMap::new();
    for bigram in doc_bigrams(doc) {
        *counts.entry(bigram).or_default() += 1;
    }
    counts
        .into_iter()
        .map(|(bigram, n)| {
            let tf = n as f64 / total as f64;
            let tfidf = tf * idf.idf(&bigram);
            BigramFeature {
                left: bigram.left,
                right: bigram.right,
                tf,
                tfidf,
            }
        })
        .collect()
}

/// Undirected bigram network of one source.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainingModel {
    pub label: Source,
    pub nodes: BTreeSet<String>,
    /// Mean tf-idf of the contributing bigram features.
    pub edges: BTreeMap<Edge, f64>,
    pub pruned: bool,
}

impl TrainingModel {
    pub fn contains_edge(&self, s: &str, t: &str) -> bool {
        Edge::new(s, t).is_some_and(|e| self.edges.contains_key(&e))
    }

    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    pub fn to_json(&self) -> String {
        let file = ModelFile {
            label: self.label,
            nodes: self.nodes.iter().cloned().collect(),
            edges: self
                .edges
                .iter()
                .map(|(e, w)| (e.a.clone(), e.b.clone(), *w))
                .collect(),
            pruned: self.pruned,
        };
        serde_json::to_string(&file).expect("model serializes")
    }

    pub fn from_json(text: &str) -> Result<Self, TextNetError> {
        let file: ModelFile =
            serde_json::from_str(text).map_err(|e| TextNetError::InvalidModel(e.to_string()))?;
        let nodes: BTreeSet<String> = file.nodes.into_iter().collect();
        let mut edges = BTreeMap::new();
        for (l, r, w) in file.edges {
            let edge = Edge::new(&l, &r)
                .ok_or_else(|| TextNetError::InvalidModel(format!("self-loop on `{l}`")))?;
            if !nodes.contains(&l) || !nodes.contains(&r) {
                return Err(TextNetError::InvalidModel(format!(
                    "edge ({l}, {r}) has an endpoint outside the node set"
                )));
            }
            edges.insert(edge, w);
        }
        Ok(TrainingModel {
            label: file.label,
            nodes,
            edges,
            pruned: file.pruned,
        })
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<(), TextNetError> {
        let path = path.as_ref();
        fs::write(path, self.to_json() + "\n").map_err(|e| TextNetError::Io {
            path: path.display().to_string(),
            message: e.to_string(),
        })
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, TextNetError> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| TextNetError::Io {
            path: path.display().to_string(),
            message: e.to_string(),
        })?;
        Self::from_json(&text)
    }
}

#[derive(Serialize, Deserialize)]
struct ModelFile {
    label: Source,
    nodes: Vec<String>,
    edges: Vec<(String, String, f64)>,
    pruned: bool,
}

/// Network before LCC pruning. IDF is fitted on `train_docs` themselves.
pub fn build_unpruned(train_docs: &[TokenizedDoc], label: Source) -> Result<TrainingModel, TextNetError> {
    let idf = compute_idf(train_docs)?;
    let mut sums: BTreeMap<Edge, (f64, usize)> = BTreeMap::new();
    for doc in train_docs {
        for feature in extract_bigrams(doc, &idf) {
            let Some(edge) = Edge::new(&feature.left, &feature.right) else {
                continue;
            };
            let slot = sums.entry(edge).or_insert((0.0, 0));
            slot.0 += feature.tfidf;
            slot.1 += 1;
        }
    }
    if sums.is_empty() {
        return Err(TextNetError::EmptyModel);
    }
    let mut nodes = BTreeSet::new();
    let edges = sums
        .into_iter()
        .map(|(edge, (sum, n))| {
            nodes.insert(edge.a.clone());
            nodes.insert(edge.b.clone());
            (edge, sum / n as f64)
        })
        .collect();
    Ok(TrainingModel {
        label,
        nodes,
        edges,
        pruned: false,
    })
}

pub fn build_network(train_docs: &[TokenizedDoc], label: Source) -> Result<TrainingModel, TextNetError> {
    prune_lcc(build_unpruned(train_docs, label)?)
}

struct DisjointSet {
    parent: Vec<usize>,
    size: Vec<usize>,
}

impl DisjointSet {
    fn new(n: usize) -> Self {
        DisjointSet {
            parent: (0..n).collect(),
            size: vec![1; n],
        }
    }

    fn find(&mut self, mut x: usize) -> usize {
        while self.parent[x] != x {
            self.parent[x] = self.parent[self.parent[x]];
            x = self.parent[x];
        }
        x
    }

    fn union(&mut self, a: usize, b: usize) {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra == rb {
            return;
        }
        let (big, small) = if self.size[ra] >= self.size[rb] { (ra, rb) } else { (rb, ra) };
        self.parent[small] = big;
        self.size[big] += self.size[small];
    }
}

/// Keeps the connected component with the most nodes. Ties go to the
/// component holding the lexicographically smallest node.
pub fn prune_lcc(model: TrainingModel) -> Result<TrainingModel, TextNetError> {
    if model.nodes.is_empty() {
        return Err(TextNetError::EmptyModel);
    }
    let names: Vec<&String> = model.nodes.iter().collect();
    let index: HashMap<&str, usize> = names
        .iter()
        .enumerate()
        .map(|(i, n)| (n.as_str(), i))
        .collect();
    let mut dsu = DisjointSet::new(names.len());
    for edge in model.edges.keys() {
        dsu.union(index[edge.a.as_str()], index[edge.b.as_str()]);
    }
    // Nodes are visited in sorted order, so the first root reaching the
    // maximal size also owns the smallest label among tied components.
    let mut best_root = dsu.find(0);
    for i in 0..names.len() {
        let root = dsu.find(i);
        if dsu.size[root] > dsu.size[best_root] {
            best_root = root;
        }
    }
    let keep: BTreeSet<String> = (0..names.len())
        .filter(|&i| dsu.find(i) == best_root)
        .map(|i| names[i].clone())
        .collect();
    let edges = model
        .edges
        .into_iter()
        .filter(|(e, _)| keep.contains(&e.a))
        .collect();
    Ok(TrainingModel {
        label: model.label,
        nodes: keep,
        edges,
        pruned: true,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GraphStats {
    pub node_count: usize,
    pub edge_count: usize,
    /// `None` for an edgeless graph.
    pub node_edge_ratio: Option<f64>,
}

pub fn graph_stats(model: &TrainingModel) -> GraphStats {
    stats_from_counts(model.node_count(), model.edge_count())
}

pub fn stats_from_counts(node_count: usize, edge_count: usize) -> GraphStats {
    GraphStats {
        node_count,
        edge_count,
        node_edge_ratio: (edge_count > 0).then(|| node_count as f64 / edge_count as f64),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tdoc(sentences: &[&[&str]]) -> TokenizedDoc {
        TokenizedDoc {
            doc_id: "d".into(),
            source: Source::Gpt,
            raw_word_count: sentences.iter().map(|s| s.len()).sum::<usize>().max(1),
            sentences: sentences
                .iter()
                .map(|s| s.iter().map(|t| t.to_string()).collect())
                .collect(),
        }
    }

    fn edge_list(model: &TrainingModel) -> Vec<(String, String)> {
        model
            .edges
            .keys()
            .map(|e| (e.a.clone(), e.b.clone()))
            .collect()
    }

    #[test]
    fn idf_substitutes_directly() {
        let docs = vec![
            tdoc(&[&["a", "b"]]),
            tdoc(&[&["c", "d"]]),
            tdoc(&[&["e", "f"]]),
            tdoc(&[&["g", "h"]]),
        ];
        let idf = compute_idf(&docs).unwrap();
        assert!((idf.idf(&Bigram::new("a", "b")) - 2f64.ln()).abs() < 1e-15);

        let one = compute_idf(&[tdoc(&[&["a", "b"]])]).unwrap();
        let v = one.idf(&Bigram::new("a", "b"));
        assert_eq!(v, 0.5f64.ln());
        assert!(v < 0.0);
        assert!(matches!(compute_idf(&[]), Err(TextNetError::NoDocuments)));
    }

    #[test]
    fn tf_uses_total_token_count() {
        let doc = tdoc(&[&["a", "b", "a"]]);
        let idf = compute_idf(std::slice::from_ref(&doc)).unwrap();
        let feats = extract_bigrams(&doc, &idf);
        let ab = feats.iter().find(|f| f.left == "a" && f.right == "b").unwrap();
        assert!((ab.tf - 1.0 / 3.0).abs() < 1e-15);
        assert_eq!(feats.len(), 2);
    }

    #[test]
    fn running_example_bigrams() {
        let doc = tdoc(&[&["mental", "health", "condition", "worsen"]]);
        let got: Vec<(String, String)> = distinct_bigrams(&doc)
            .into_iter()
            .map(|b| (b.left, b.right))
            .collect();
        let mut want = vec![
            ("mental".to_string(), "health".to_string()),
            ("health".into(), "condition".into()),
            ("condition".into(), "worsen".into()),
        ];
        want.sort();
        assert_eq!(got, want);
    }

    #[test]
    fn bigrams_never_cross_sentences() {
        let doc = tdoc(&[&["a", "b"], &["c", "d"]]);
        let got = distinct_bigrams(&doc);
        assert_eq!(got.len(), 2);
        assert!(!got.contains(&Bigram::new("b", "c")));
    }

    #[test]
    fn unseen_bigram_gets_max_idf() {
        let docs = vec![tdoc(&[&["a", "b"]]), tdoc(&[&["a", "b"]])];
        let idf = compute_idf(&docs).unwrap();
        assert_eq!(idf.idf(&Bigram::new("x", "y")), 2f64.ln());
        let feats = extract_bigrams(&tdoc(&[&["x", "y"]]), &idf);
        // tf = 1 occurrence / 2 tokens
        assert_eq!(feats[0].tfidf, 0.5 * 2f64.ln());
        assert!(extract_bigrams(&tdoc(&[]), &idf).is_empty());
    }

    #[test]
    fn single_doc_path_network() {
        let m = build_network(&[tdoc(&[&["a", "b", "c"]])], Source::Gpt).unwrap();
        assert_eq!(m.nodes.iter().cloned().collect::<Vec<_>>(), vec!["a", "b", "c"]);
        assert_eq!(
            edge_list(&m),
            vec![("a".into(), "b".into()), ("b".into(), "c".into())]
        );
        assert!(m.pruned);
    }

    #[test]
    fn pruning_keeps_largest_component() {
        let docs = vec![tdoc(&[&["a", "b", "c"], &["x", "y"]])];
        let m = build_network(&docs, Source::Pubmed).unwrap();
        assert_eq!(m.node_count(), 3);
        assert!(!m.nodes.contains("x"));
    }

    #[test]
    fn pruning_tie_goes_to_smallest_label() {
        let docs = vec![tdoc(&[&["y", "x"], &["b", "a"]])];
        let m = build_network(&docs, Source::Pubmed).unwrap();
        assert_eq!(m.nodes.iter().cloned().collect::<Vec<_>>(), vec!["a", "b"]);
    }

    #[test]
    fn empty_inputs_are_errors() {
        assert!(matches!(
            build_network(&[tdoc(&[&["solo"]])], Source::Gpt),
            Err(TextNetError::EmptyModel)
        ));
        let empty = TrainingModel {
            label: Source::Gpt,
            nodes: BTreeSet::new(),
            edges: BTreeMap::new(),
            pruned: false,
        };
        assert!(matches!(prune_lcc(empty), Err(TextNetError::EmptyModel)));
    }

    #[test]
    fn self_loops_are_skipped() {
        let m = build_network(&[tdoc(&[&["a", "a", "b"]])], Source::Gpt).unwrap();
        assert_eq!(m.edge_count(), 1);
        assert!(m.contains_edge("b", "a"));
    }

    #[test]
    fn edge_weight_is_mean_tfidf() {
        // (a,b) appears in both docs; df 2 of N 2.
        let docs = vec![tdoc(&[&["a", "b"]]), tdoc(&[&["a", "b", "c"]])];
        let m = build_network(&docs, Source::Gpt).unwrap();
        let idf_ab = (2.0f64 / 3.0).ln();
        let want = (0.5 * idf_ab + (1.0 / 3.0) * idf_ab) / 2.0;
        let got = m.edges[&Edge::new("a", "b").unwrap()];
        assert!((got - want).abs() < 1e-15);
    }

    #[test]
    fn stats_examples() {
        let s = stats_from_counts(519, 1194);
        assert!((s.node_edge_ratio.unwrap() - 0.4347).abs() < 5e-5);
        let s = stats_from_counts(742, 861);
        assert!((s.node_edge_ratio.unwrap() - 0.8618).abs() < 5e-5);
        let m = build_network(&[tdoc(&[&["a", "b", "c"]])], Source::Gpt).unwrap();
        assert_eq!(
            graph_stats(&m),
            GraphStats {
                node_count: 3,
                edge_count: 2,
                node_edge_ratio: Some(1.5)
            }
        );
        assert_eq!(stats_from_counts(1, 0).node_edge_ratio, None);
    }

    #[test]
    fn model_json_round_trip_is_sorted() {
        let docs = vec![tdoc(&[&["zeta", "alpha", "mid"]])];
        let m = build_network(&docs, Source::Gpt).unwrap();
        let json = m.to_json();
        assert!(json.starts_with(r#"{"label":"GPT","nodes":["alpha","mid","zeta"],"edges":[["alpha","mid","#));
        let back = TrainingModel::from_json(&json).unwrap();
        assert_eq!(back, m);
        assert!(TrainingModel::from_json(r#"{"label":"GPT","nodes":["a"],"edges":[["a","b",0.1]],"pruned":true}"#).is_err());
    }
}
