//! Latent Dirichlet Allocation fitted by collapsed Gibbs sampling.
//!
//! Besides fitting, the model infers per-document topic mixtures (with the
//! final per-token assignment, which topicLIME masks on) and runs the
//! generative process forward to sample synthetic documents from an
//! arbitrary mixture.

mod coherence;
mod selection;

pub use coherence::{cv_coherence, word_set_coherence, CoherenceParams, CoherenceReport};
pub use selection::{select_k, KSelection};

use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::corpus::{Document, Vocabulary, WordId};
use crate::error::{Error, Result};
use crate::rng::{categorical, categorical_cdf, rng_from, SeededRng};
use rand::Rng;

/// Multinomial distribution over the K topics of one document.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TopicMixture(pub Vec<f64>);

impl TopicMixture {
    pub fn uniform(k: usize) -> Self {
        Self(vec![1.0 / k as f64; k])
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn on_simplex(&self, tol: f64) -> bool {
        self.0.iter().all(|&p| p >= -tol) && (self.0.iter().sum::<f64>() - 1.0).abs() <= tol
    }
}

/// Per-token topic indices for one document, parallel to its tokens.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TopicAssignment(pub Vec<usize>);

impl TopicAssignment {
    /// Topics with at least one assigned token, ascending.
    pub fn active_topics(&self) -> Vec<usize> {
        let mut t = self.0.clone();
        t.sort_unstable();
        t.dedup();
        t
    }

    pub fn count(&self, topic: usize) -> usize {
        self.0.iter().filter(|&&z| z == topic).count()
    }
}

/// Fitting hyperparameters. `alpha = None` means `1 / K`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LdaParams {
    pub alpha: Option<f64>,
    pub beta: f64,
    pub iterations: usize,
    pub seed: u64,
}

impl Default for LdaParams {
    fn default() -> Self {
        Self { alpha: None, beta: 0.01, iterations: 500, seed: 0 }
    }
}

/// Burn-in and averaging sweeps for mixture inference.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct InferParams {
    pub burn_in: usize,
    pub samples: usize,
}

impl Default for InferParams {
    fn default() -> Self {
        Self { burn_in: 100, samples: 50 }
    }
}

/// A fitted topic model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LdaModel {
    pub k: usize,
    pub alpha: f64,
    pub beta: f64,
    pub vocab_size: usize,
    pub vocab_hash: u64,
    pub seed: u64,
    /// K × |V| topic-word probabilities, row-major.
    pub phi: Vec<f64>,
    /// Final topic-word counts of the training chain, row-major.
    pub topic_word_counts: Vec<u32>,
}

/// Collapsed Gibbs chain over a fixed set of documents.
pub struct GibbsSampler<'a> {
    docs: &'a [Vec<WordId>],
    k: usize,
    v: usize,
    alpha: f64,
    beta: f64,
    assignments: Vec<Vec<usize>>,
    doc_topic: Vec<u32>,
    topic_word: Vec<u32>,
    topic_total: Vec<u32>,
    rng: SeededRng,
    probs: Vec<f64>,
}

impl<'a> GibbsSampler<'a> {
    pub fn new(docs: &'a [Vec<WordId>], k: usize, v: usize, alpha: f64, beta: f64, seed: u64) -> Self {
        let mut rng = rng_from(seed);
        let mut doc_topic = vec![0u32; docs.len() * k];
        let mut topic_word = vec![0u32; k * v];
        let mut topic_total = vec![0u32; k];
        let assignments = docs
            .iter()
            .enumerate()
            .map(|(d, doc)| {
                doc.iter()
                    .map(|&w| {
                        let z = rng.random_range(0..k);
                        doc_topic[d * k + z] += 1;
                        topic_word[z * v + w as usize] += 1;
                        topic_total[z] += 1;
                        z
                    })
                    .collect()
            })
            .collect();
        Self { docs, k, v, alpha, beta, assignments, doc_topic, topic_word, topic_total, rng, probs: vec![0.0; k] }
    }

    /// One full pass resampling every token's topic.
    pub fn sweep(&mut self) {
        let (k, v) = (self.k, self.v);
        let vbeta = v as f64 * self.beta;
        for (d, doc) in self.docs.iter().enumerate() {
            for (n, &w) in doc.iter().enumerate() {
                let w = w as usize;
                let old = self.assignments[d][n];
                self.doc_topic[d * k + old] -= 1;
                self.topic_word[old * v + w] -= 1;
                self.topic_total[old] -= 1;
                for t in 0..k {
                    self.probs[t] = (self.doc_topic[d * k + t] as f64 + self.alpha)
                        * (self.topic_word[t * v + w] as f64 + self.beta)
                        / (self.topic_total[t] as f64 + vbeta);
                }
                let new = categorical(&mut self.rng, &self.probs);
                self.assignments[d][n] = new;
                self.doc_topic[d * k + new] += 1;
                self.topic_word[new * v + w] += 1;
                self.topic_total[new] += 1;
            }
        }
    }

    /// Σ over topics of the topic-word count, per word.
    pub fn word_totals(&self) -> Vec<u64> {
        let mut totals = vec![0u64; self.v];
        for t in 0..self.k {
            for (w, tot) in totals.iter_mut().enumerate() {
                *tot += self.topic_word[t * self.v + w] as u64;
            }
        }
        totals
    }

    pub fn assignments(&self) -> &[Vec<usize>] {
        &self.assignments
    }

    fn into_model(self, vocab_hash: u64, seed: u64) -> LdaModel {
        let (k, v) = (self.k, self.v);
        let vbeta = v as f64 * self.beta;
        let mut phi = vec![0.0; k * v];
        for t in 0..k {
            let denom = self.topic_total[t] as f64 + vbeta;
            for w in 0..v {
                phi[t * v + w] = (self.topic_word[t * v + w] as f64 + self.beta) / denom;
            }
        }
        LdaModel {
            k,
            alpha: self.alpha,
            beta: self.beta,
            vocab_size: v,
            vocab_hash,
            seed,
            phi,
            topic_word_counts: self.topic_word,
        }
    }
}

/// Fits LDA on the documents' token ids.
pub fn fit_lda(docs: &[Document], vocab: &Vocabulary, k: usize, params: &LdaParams) -> Result<LdaModel> {
    if docs.is_empty() || docs.iter().all(Document::is_empty) {
        return Err(Error::EmptyCorpus);
    }
    if k < 2 || vocab.len() < k {
        return Err(Error::DegenerateVocabulary { topics: k, vocab: vocab.len() });
    }
    if params.iterations == 0 || !(params.beta > 0.0) {
        return Err(Error::InvalidConfig("iterations must be >= 1 and beta > 0".into()));
    }
    let alpha = params.alpha.unwrap_or(1.0 / k as f64);
    let token_lists: Vec<Vec<WordId>> = docs.iter().map(|d| d.tokens.clone()).collect();
    let mut sampler = GibbsSampler::new(&token_lists, k, vocab.len(), alpha, params.beta, params.seed);
    for _ in 0..params.iterations {
        sampler.sweep();
    }
    Ok(sampler.into_model(vocab.content_hash(), params.seed))
}

impl LdaModel {
    pub fn phi_row(&self, topic: usize) -> &[f64] {
        &self.phi[topic * self.vocab_size..(topic + 1) * self.vocab_size]
    }

    /// The `n` most probable words of a topic, ties broken by lower id.
    pub fn top_words(&self, topic: usize, n: usize) -> Vec<WordId> {
        let row = self.phi_row(topic);
        let mut ids: Vec<WordId> = (0..self.vocab_size as WordId).collect();
        ids.sort_by(|&a, &b| row[b as usize].total_cmp(&row[a as usize]).then(a.cmp(&b)));
        ids.truncate(n);
        ids
    }

    /// Posterior topic mixture of `tokens` with phi held fixed, plus the
    /// assignment of the final sweep. Sampling runs over the tokens sorted by
    /// id, so the result does not depend on token order.
    pub fn infer(&self, tokens: &[WordId], params: &InferParams, seed: u64) -> (TopicMixture, TopicAssignment) {
        let k = self.k;
        if tokens.is_empty() {
            return (TopicMixture::uniform(k), TopicAssignment(Vec::new()));
        }
        let mut order: Vec<usize> = (0..tokens.len()).collect();
        order.sort_by_key(|&i| (tokens[i], i));
        let sorted: Vec<usize> = order.iter().map(|&i| tokens[i] as usize).collect();

        let mut rng = rng_from(seed);
        let mut counts = vec![0u32; k];
        let mut z: Vec<usize> = sorted
            .iter()
            .map(|_| {
                let t = rng.random_range(0..k);
                counts[t] += 1;
                t
            })
            .collect();
        let mut probs = vec![0.0; k];
        let mut theta = vec![0.0; k];
        let n = sorted.len() as f64;
        let samples = params.samples.max(1);
        for sweep in 0..params.burn_in + samples {
            for (i, &w) in sorted.iter().enumerate() {
                counts[z[i]] -= 1;
                for t in 0..k {
                    probs[t] = (counts[t] as f64 + self.alpha) * self.phi[t * self.vocab_size + w];
                }
                z[i] = categorical(&mut rng, &probs);
                counts[z[i]] += 1;
            }
            if sweep >= params.burn_in {
                let denom = n + k as f64 * self.alpha;
                for t in 0..k {
                    theta[t] += (counts[t] as f64 + self.alpha) / denom;
                }
            }
        }
        let total: f64 = theta.iter().sum();
        theta.iter_mut().for_each(|p| *p /= total);
        let mut assignment = vec![0usize; tokens.len()];
        for (pos, &orig) in order.iter().enumerate() {
            assignment[orig] = z[pos];
        }
        (TopicMixture(theta), TopicAssignment(assignment))
    }

    pub fn infer_mixture(&self, doc: &Document, params: &InferParams, seed: u64) -> TopicMixture {
        self.infer(&doc.tokens, params, seed).0
    }

    /// Runs the generative process: for each of `length` tokens draw a topic
    /// from `theta`, then a word from that topic.
    pub fn sample_document(&self, theta: &TopicMixture, length: usize, seed: u64) -> Result<Vec<WordId>> {
        Ok(self.sample_with_topics(theta, length, seed)?.0)
    }

    /// Like [`sample_document`](Self::sample_document) but also returns the
    /// topic each token was drawn from.
    pub fn sample_with_topics(
        &self,
        theta: &TopicMixture,
        length: usize,
        seed: u64,
    ) -> Result<(Vec<WordId>, Vec<usize>)> {
        let sum: f64 = theta.0.iter().sum();
        if theta.len() != self.k || !theta.on_simplex(1e-6) {
            return Err(Error::InvalidMixture { sum });
        }
        let mut rng = rng_from(seed);
        let mut cdfs: Vec<Option<Vec<f64>>> = vec![None; self.k];
        let weights: Vec<f64> = theta.0.iter().map(|&p| p.max(0.0)).collect();
        let mut words = Vec::with_capacity(length);
        let mut topics = Vec::with_capacity(length);
        for _ in 0..length {
            let t = categorical(&mut rng, &weights);
            let cdf = cdfs[t].get_or_insert_with(|| {
                let mut acc = 0.0;
                self.phi_row(t)
                    .iter()
                    .map(|&p| {
                        acc += p;
                        acc
                    })
                    .collect()
            });
            words.push(categorical_cdf(&mut rng, cdf) as WordId);
            topics.push(t);
        }
        Ok((words, topics))
    }
}
