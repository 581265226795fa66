//! Simplified C_v topic coherence: boolean sliding-window co-occurrence,
//! NPMI context vectors and cosine agreement with the topic's summed vector.

use alloc::collections::BTreeMap;
use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use super::LdaModel;
use crate::corpus::{Document, WordId};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct CoherenceParams {
    pub top_n: usize,
    pub window: usize,
}

impl Default for CoherenceParams {
    fn default() -> Self {
        Self { top_n: 10, window: 110 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoherenceReport {
    pub per_topic: Vec<f64>,
    pub mean: f64,
}

/// Co-occurrence statistics over boolean sliding windows, restricted to a
/// fixed word list.
struct WindowCounts {
    windows: f64,
    single: Vec<f64>,
    pair: Vec<f64>,
    n: usize,
}

impl WindowCounts {
    fn collect(docs: &[Document], words: &[WordId], window: usize) -> Self {
        let index: BTreeMap<WordId, usize> = words.iter().enumerate().map(|(i, &w)| (w, i)).collect();
        let n = words.len();
        let mut single = vec![0.0; n];
        let mut pair = vec![0.0; n * n];
        let mut windows = 0.0;
        let mut present = vec![false; n];
        let mut hits = Vec::new();
        let window = window.max(1);
        for doc in docs {
            let toks = &doc.tokens;
            if toks.is_empty() {
                continue;
            }
            let starts = if toks.len() <= window { 1 } else { toks.len() - window + 1 };
            for s in 0..starts {
                let end = (s + window).min(toks.len());
                hits.clear();
                for w in &toks[s..end] {
                    if let Some(&i) = index.get(w) {
                        if !present[i] {
                            present[i] = true;
                            hits.push(i);
                        }
                    }
                }
                windows += 1.0;
                for &a in &hits {
                    single[a] += 1.0;
                    for &b in &hits {
                        pair[a * n + b] += 1.0;
                    }
                }
                for &i in &hits {
                    present[i] = false;
                }
            }
        }
        Self { windows, single, pair, n }
    }

    /// NPMI with the conventions: absent word → 0, never co-occurring → −1,
    /// a word with itself or a pair with joint probability 1 → 1.
    fn npmi(&self, a: usize, b: usize) -> f64 {
        if self.windows == 0.0 || self.single[a] == 0.0 || self.single[b] == 0.0 {
            return 0.0;
        }
        let pa = self.single[a] / self.windows;
        let pb = self.single[b] / self.windows;
        let pab = self.pair[a * self.n + b] / self.windows;
        if pab == 0.0 {
            return -1.0;
        }
        if a == b || pab >= 1.0 {
            return 1.0;
        }
        libm::log(pab / (pa * pb)) / -libm::log(pab)
    }
}

fn cosine(a: &[f64], b: &[f64]) -> f64 {
    let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
    let na = libm::sqrt(a.iter().map(|x| x * x).sum::<f64>());
    let nb = libm::sqrt(b.iter().map(|x| x * x).sum::<f64>());
    if na == 0.0 || nb == 0.0 {
        0.0
    } else {
        (dot / (na * nb)).clamp(-1.0, 1.0)
    }
}

/// Coherence of one list of words against a reference corpus.
pub fn word_set_coherence(docs: &[Document], words: &[WordId], window: usize) -> f64 {
    let counts = WindowCounts::collect(docs, words, window);
    score_words(&counts, &(0..words.len()).collect::<Vec<_>>())
}

fn score_words(counts: &WindowCounts, idx: &[usize]) -> f64 {
    if idx.is_empty() {
        return 0.0;
    }
    let vectors: Vec<Vec<f64>> =
        idx.iter().map(|&a| idx.iter().map(|&b| counts.npmi(a, b)).collect()).collect();
    let mut sum = vec![0.0; idx.len()];
    for v in &vectors {
        for (s, x) in sum.iter_mut().zip(v) {
            *s += x;
        }
    }
    vectors.iter().map(|v| cosine(v, &sum)).sum::<f64>() / idx.len() as f64
}

/// Per-topic coherence of each topic's `top_n` words and their mean.
pub fn cv_coherence(model: &LdaModel, docs: &[Document], params: &CoherenceParams) -> CoherenceReport {
    let tops: Vec<Vec<WordId>> = (0..model.k).map(|t| model.top_words(t, params.top_n)).collect();
    let mut union: Vec<WordId> = tops.iter().flatten().copied().collect();
    union.sort_unstable();
    union.dedup();
    let counts = WindowCounts::collect(docs, &union, params.window);
    let per_topic: Vec<f64> = tops
        .iter()
        .map(|words| {
            let idx: Vec<usize> = words.iter().map(|w| union.binary_search(w).expect("in union")).collect();
            score_words(&counts, &idx)
        })
        .collect();
    let mean = per_topic.iter().sum::<f64>() / per_topic.len().max(1) as f64;
    CoherenceReport { per_topic, mean }
}
