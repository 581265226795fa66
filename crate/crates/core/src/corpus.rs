//! Text preprocessing, vocabulary management and bag-of-words documents.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::fnv1a;
use crate::text::{english_stopwords, porter, tokenize};

pub type WordId = u32;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Stemmer {
    None,
    Porter,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PreprocessConfig {
    pub lowercase: bool,
    pub stopwords: BTreeSet<String>,
    pub stemmer: Stemmer,
    pub min_token_length: usize,
    pub min_document_frequency: usize,
}

impl Default for PreprocessConfig {
    fn default() -> Self {
        Self {
            lowercase: true,
            stopwords: english_stopwords(),
            stemmer: Stemmer::Porter,
            min_token_length: 2,
            min_document_frequency: 2,
        }
    }
}

impl PreprocessConfig {
    pub fn validate(&self) -> Result<()> {
        if self.min_token_length == 0 || self.min_document_frequency == 0 {
            return Err(Error::InvalidConfig(
                "min_token_length and min_document_frequency must be at least 1".to_string(),
            ));
        }
        Ok(())
    }
}

/// Lowercases, drops stopwords, stems and length-filters `raw`.
///
/// Stopwords are matched before stemming and the length filter applies to the
/// stemmed form.
pub fn preprocess(raw: &str, cfg: &PreprocessConfig) -> Vec<String> {
    tokenize(raw)
        .into_iter()
        .filter_map(|tok| {
            let tok = if cfg.lowercase { tok.to_lowercase() } else { tok.to_string() };
            if cfg.stopwords.contains(&tok) {
                return None;
            }
            let tok = match cfg.stemmer {
                Stemmer::None => tok,
                Stemmer::Porter => porter::stem(&tok),
            };
            (tok.chars().count() >= cfg.min_token_length).then_some(tok)
        })
        .collect()
}

/// Ordered set of terms; ids are positions in insertion order.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Vocabulary {
    terms: Vec<String>,
    index: BTreeMap<String, WordId>,
}

impl Vocabulary {
    /// Builds a vocabulary from terms in the given order, skipping repeats.
    pub fn from_terms<I, S>(terms: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        let mut v = Vocabulary::default();
        for t in terms {
            v.insert(t.into());
        }
        v
    }

    fn insert(&mut self, term: String) -> WordId {
        if let Some(&id) = self.index.get(&term) {
            return id;
        }
        let id = self.terms.len() as WordId;
        self.index.insert(term.clone(), id);
        self.terms.push(term);
        id
    }

    pub fn get(&self, term: &str) -> Option<WordId> {
        self.index.get(term).copied()
    }

    pub fn term(&self, id: WordId) -> &str {
        &self.terms[id as usize]
    }

    pub fn terms(&self) -> &[String] {
        &self.terms
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    /// Content hash used to tie serialized models to their vocabulary.
    pub fn content_hash(&self) -> u64 {
        fnv1a(self.terms.iter().flat_map(|t| t.bytes().chain(core::iter::once(0u8))))
    }

    pub fn encode(&self, tokens: &[String]) -> Vec<WordId> {
        tokens.iter().filter_map(|t| self.get(t)).collect()
    }
}

impl Serialize for Vocabulary {
    fn serialize<S: serde::Serializer>(&self, s: S) -> core::result::Result<S::Ok, S::Error> {
        self.terms.serialize(s)
    }
}

impl<'de> Deserialize<'de> for Vocabulary {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> core::result::Result<Self, D::Error> {
        let terms = Vec::<String>::deserialize(d)?;
        let v = Vocabulary::from_terms(terms.iter().cloned());
        if v.len() != terms.len() {
            return Err(serde::de::Error::custom("duplicate vocabulary term"));
        }
        Ok(v)
    }
}

/// Keeps the terms whose document frequency reaches `min_document_frequency`,
/// in order of first appearance.
pub fn build_vocabulary(docs: &[Vec<String>], cfg: &PreprocessConfig) -> Result<Vocabulary> {
    if docs.is_empty() {
        return Err(Error::EmptyCorpus);
    }
    let mut df: BTreeMap<&str, usize> = BTreeMap::new();
    let mut order: Vec<&str> = Vec::new();
    for doc in docs {
        let distinct: BTreeSet<&str> = doc.iter().map(String::as_str).collect();
        for t in doc {
            if !df.contains_key(t.as_str()) {
                order.push(t.as_str());
                df.insert(t.as_str(), 0);
            }
        }
        for t in distinct {
            *df.get_mut(t).expect("seen") += 1;
        }
    }
    let vocab = Vocabulary::from_terms(
        order.into_iter().filter(|t| df[t] >= cfg.min_document_frequency),
    );
    if vocab.is_empty() {
        return Err(Error::EmptyVocabulary);
    }
    Ok(vocab)
}

/// One document: identifier, original text, and its in-vocabulary token ids.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Document {
    pub id: String,
    pub raw: String,
    pub tokens: Vec<WordId>,
}

impl Document {
    pub fn new(id: impl Into<String>, raw: impl Into<String>, tokens: Vec<WordId>) -> Self {
        Self { id: id.into(), raw: raw.into(), tokens }
    }

    /// A document built from token ids only; `raw` is the space-joined terms.
    pub fn from_tokens(id: impl Into<String>, tokens: Vec<WordId>, vocab: &Vocabulary) -> Self {
        let mut raw = String::new();
        for (i, &t) in tokens.iter().enumerate() {
            if i > 0 {
                raw.push(' ');
            }
            raw.push_str(vocab.term(t));
        }
        Self { id: id.into(), raw, tokens }
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    /// Sorted (word, count) pairs.
    pub fn bow(&self) -> Vec<(WordId, u32)> {
        bow_of(&self.tokens)
    }

    /// Distinct words in ascending id order.
    pub fn distinct_words(&self) -> Vec<WordId> {
        let set: BTreeSet<WordId> = self.tokens.iter().copied().collect();
        set.into_iter().collect()
    }
}

pub fn bow_of(tokens: &[WordId]) -> Vec<(WordId, u32)> {
    let mut counts: BTreeMap<WordId, u32> = BTreeMap::new();
    for &t in tokens {
        *counts.entry(t).or_default() += 1;
    }
    counts.into_iter().collect()
}

/// Input record for corpus construction; `label` indexes the class list.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RawRecord {
    pub id: String,
    pub text: String,
    pub label: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabeledCorpus {
    pub vocabulary: Vocabulary,
    pub documents: Vec<Document>,
    pub labels: Vec<usize>,
    pub classes: Vec<String>,
}

impl LabeledCorpus {
    /// Preprocesses every record, builds the vocabulary over all of them and
    /// encodes each document against it.
    pub fn build(records: &[RawRecord], classes: Vec<String>, cfg: &PreprocessConfig) -> Result<Self> {
        cfg.validate()?;
        if records.is_empty() {
            return Err(Error::EmptyCorpus);
        }
        if classes.is_empty() {
            return Err(Error::InvalidConfig("class list is empty".to_string()));
        }
        if let Some(r) = records.iter().find(|r| r.label >= classes.len()) {
            return Err(Error::InvalidConfig(alloc::format!(
                "record {} has label {} outside {} classes",
                r.id,
                r.label,
                classes.len()
            )));
        }
        let token_lists: Vec<Vec<String>> = records.iter().map(|r| preprocess(&r.text, cfg)).collect();
        let vocabulary = build_vocabulary(&token_lists, cfg)?;
        let documents = records
            .iter()
            .zip(&token_lists)
            .map(|(r, toks)| Document::new(r.id.clone(), r.text.clone(), vocabulary.encode(toks)))
            .collect();
        Ok(Self { vocabulary, documents, labels: records.iter().map(|r| r.label).collect(), classes })
    }

    pub fn len(&self) -> usize {
        self.documents.len()
    }

    pub fn is_empty(&self) -> bool {
        self.documents.is_empty()
    }

    pub fn num_classes(&self) -> usize {
        self.classes.len()
    }

    /// Mean document length in tokens, rounded to the nearest integer (≥ 1).
    pub fn mean_length(&self) -> usize {
        if self.documents.is_empty() {
            return 1;
        }
        let total: usize = self.documents.iter().map(Document::len).sum();
        let mean = total as f64 / self.documents.len() as f64;
        (libm::round(mean) as usize).max(1)
    }

    /// A corpus over the given document indices, sharing vocabulary and classes.
    pub fn subset(&self, indices: &[usize]) -> Self {
        Self {
            vocabulary: self.vocabulary.clone(),
            documents: indices.iter().map(|&i| self.documents[i].clone()).collect(),
            labels: indices.iter().map(|&i| self.labels[i]).collect(),
            classes: self.classes.clone(),
        }
    }

    /// Checks the structural invariants.
    pub fn validate(&self) -> Result<()> {
        if self.documents.len() != self.labels.len() {
            return Err(Error::LengthMismatch { left: self.documents.len(), right: self.labels.len() });
        }
        if self.classes.is_empty() {
            return Err(Error::InvalidConfig("class list is empty".to_string()));
        }
        let v = self.vocabulary.len() as WordId;
        if self.labels.iter().any(|&l| l >= self.classes.len())
            || self.documents.iter().any(|d| d.tokens.iter().any(|&t| t >= v))
        {
            return Err(Error::InvalidConfig("label or token out of range".to_string()));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;
    use proptest::prelude::*;

    fn strings(v: &[&str]) -> Vec<String> {
        v.iter().map(|s| s.to_string()).collect()
    }

    #[test]
    fn preprocess_stems_and_drops_stopwords() {
        let cfg = PreprocessConfig {
            stopwords: ["the".to_string()].into_iter().collect(),
            min_token_length: 1,
            ..PreprocessConfig::default()
        };
        assert_eq!(preprocess("The markets rallied", &cfg), ["market", "ralli"]);
        assert!(preprocess("", &cfg).is_empty());
        let cfg_a = PreprocessConfig { stopwords: ["a".to_string()].into_iter().collect(), ..cfg };
        assert!(preprocess("a a a", &cfg_a).is_empty());
    }

    #[test]
    fn vocabulary_document_frequency_filter() {
        let min2 = PreprocessConfig { min_document_frequency: 2, ..PreprocessConfig::default() };
        let v = build_vocabulary(&[strings(&["a", "b"]), strings(&["b", "c"])], &min2).unwrap();
        assert_eq!(v.terms(), ["b"]);
        let min1 = PreprocessConfig { min_document_frequency: 1, ..PreprocessConfig::default() };
        let v = build_vocabulary(&[strings(&["a"])], &min1).unwrap();
        assert_eq!(v.terms(), ["a"]);
        let docs = [strings(&["e", "d", "c"]), strings(&["a", "b", "e"]), strings(&["c", "a"])];
        let v = build_vocabulary(&docs, &min1).unwrap();
        assert_eq!(v.terms(), ["e", "d", "c", "a", "b"]);
        assert_eq!(
            build_vocabulary(&[strings(&["x"])], &min2),
            Err(Error::EmptyVocabulary)
        );
    }

    #[test]
    fn oov_tokens_are_dropped() {
        let v = Vocabulary::from_terms(["oil", "price"]);
        assert_eq!(v.encode(&strings(&["oil", "gold", "price", "oil"])), vec![0, 1, 0]);
    }

    #[test]
    fn vocabulary_serde_keeps_order() {
        let v = Vocabulary::from_terms(["z", "a", "m"]);
        let doc = Document::from_tokens("d", vec![2, 0], &v);
        assert_eq!(doc.raw, "m z");
        assert_eq!(v.get("m"), Some(2));
    }

    proptest! {
        #[test]
        fn preprocess_idempotent_without_stemming(s in "[a-zA-Z ,.]{0,60}") {
            let cfg = PreprocessConfig { stemmer: Stemmer::None, ..PreprocessConfig::default() };
            let once = preprocess(&s, &cfg);
            let twice = preprocess(&once.join(" "), &cfg);
            prop_assert_eq!(once, twice);
        }

        #[test]
        fn bow_counts_sum_to_length(tokens in proptest::collection::vec(0u32..20, 0..50)) {
            let doc = Document::new("x", "", tokens.clone());
            let total: u32 = doc.bow().iter().map(|&(_, c)| c).sum();
            prop_assert_eq!(total as usize, tokens.len());
        }
    }
}
