//! Seeded synthetic corpora with known generating structure. Used by tests,
//! benchmarks and the acceptance suite when no real dataset is supplied.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use rand::Rng;
use rand_distr::{Distribution, Gamma};
use serde::{Deserialize, Serialize};

use crate::corpus::{LabeledCorpus, PreprocessConfig, RawRecord, Stemmer};
use crate::rng::{categorical, rng_from};

fn raw_config(min_df: usize) -> PreprocessConfig {
    PreprocessConfig {
        lowercase: true,
        stopwords: Default::default(),
        stemmer: Stemmer::None,
        min_token_length: 1,
        min_document_frequency: min_df,
    }
}

/// Documents over `topics` disjoint vocabularies; word `i` of topic `t` is
/// spelled `tTTwII`. Each document belongs to one topic (its label) and each
/// token comes from a different, uniformly chosen topic with probability
/// `mixing`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DisjointTopicSpec {
    pub topics: usize,
    pub words_per_topic: usize,
    pub docs: usize,
    pub doc_length: usize,
    pub mixing: f64,
    pub seed: u64,
}

pub fn disjoint_topic_word(topic: usize, i: usize) -> String {
    format!("t{topic:02}w{i:02}")
}

pub fn disjoint_topic_corpus(spec: &DisjointTopicSpec) -> LabeledCorpus {
    let mut rng = rng_from(spec.seed);
    let records: Vec<RawRecord> = (0..spec.docs)
        .map(|d| {
            let label = d % spec.topics;
            let words: Vec<String> = (0..spec.doc_length)
                .map(|_| {
                    let t = if spec.topics > 1 && rng.random::<f64>() < spec.mixing {
                        rng.random_range(0..spec.topics)
                    } else {
                        label
                    };
                    disjoint_topic_word(t, rng.random_range(0..spec.words_per_topic))
                })
                .collect();
            RawRecord { id: format!("d{d}"), text: words.join(" "), label }
        })
        .collect();
    let classes = (0..spec.topics).map(|t| format!("topic{t}")).collect();
    LabeledCorpus::build(&records, classes, &raw_config(1)).expect("synthetic corpus is well formed")
}

/// Multi-class corpus where class `c` is signalled by marker words `mCxJ`
/// and every document also carries shared filler words `fJ`.
pub fn keyword_corpus(classes: usize, markers_per_class: usize, docs: usize, seed: u64) -> LabeledCorpus {
    let mut rng = rng_from(seed);
    let records: Vec<RawRecord> = (0..docs)
        .map(|d| {
            let label = d % classes;
            let mut words = Vec::new();
            for _ in 0..3 {
                words.push(format!("m{label}x{}", rng.random_range(0..markers_per_class)));
            }
            for _ in 0..6 {
                words.push(format!("f{}", rng.random_range(0..12)));
            }
            RawRecord { id: format!("k{d}"), text: words.join(" "), label }
        })
        .collect();
    let names = (0..classes).map(|c| format!("class{c}")).collect();
    LabeledCorpus::build(&records, names, &raw_config(1)).expect("keyword corpus is well formed")
}

/// Generator for a news-like corpus: each class owns a few topics, a handful
/// of background topics are shared, and each document mixes its class topics
/// with background and off-class topics. Topic vocabularies are disjoint with
/// Zipf-shaped word frequencies.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct NewsLikeSpec {
    pub classes: usize,
    pub topics_per_class: usize,
    pub background_topics: usize,
    pub words_per_topic: usize,
    pub zipf_exponent: f64,
    pub docs: usize,
    pub min_length: usize,
    pub max_length: usize,
    /// Range of the share of tokens drawn from the document's own class topics.
    pub class_share: (f64, f64),
    /// Share of the remaining mass spent on other classes' topics.
    pub off_class_share: f64,
    pub dirichlet_alpha: f64,
    pub seed: u64,
}

impl Default for NewsLikeSpec {
    fn default() -> Self {
        Self {
            classes: 4,
            topics_per_class: 3,
            background_topics: 2,
            words_per_topic: 250,
            zipf_exponent: 1.0,
            docs: 2000,
            min_length: 15,
            max_length: 35,
            class_share: (0.25, 0.65),
            off_class_share: 0.5,
            dirichlet_alpha: 0.5,
            seed: 0,
        }
    }
}

const SYLLABLES: [&str; 16] =
    ["ka", "lo", "mi", "ru", "ten", "vas", "qui", "dor", "pel", "zan", "bro", "fu", "gim", "hax", "jo", "nym"];

/// A pronounceable, stem-stable token for (topic, word index).
fn news_word(topic: usize, i: usize) -> String {
    let mut s = String::new();
    s.push_str(SYLLABLES[topic % 16]);
    s.push_str(SYLLABLES[(topic / 16 + i) % 16]);
    s.push_str(SYLLABLES[(i / 16) % 16]);
    s.push('x');
    s.push_str(&format!("{topic}q{i}"));
    s
}

pub fn news_like_corpus(spec: &NewsLikeSpec) -> LabeledCorpus {
    let mut rng = rng_from(spec.seed);
    let n_topics = spec.classes * spec.topics_per_class + spec.background_topics;
    let zipf: Vec<f64> =
        (0..spec.words_per_topic).map(|r| 1.0 / libm::pow((r + 1) as f64, spec.zipf_exponent)).collect();
    let gamma = Gamma::new(spec.dirichlet_alpha, 1.0).expect("positive Dirichlet concentration");
    let records: Vec<RawRecord> = (0..spec.docs)
        .map(|d| {
            let label = rng.random_range(0..spec.classes);
            let share = spec.class_share.0 + (spec.class_share.1 - spec.class_share.0) * rng.random::<f64>();
            let raw: Vec<f64> = (0..n_topics).map(|_| gamma.sample(&mut rng)).collect();
            let mut weights = alloc::vec![0.0; n_topics];
            let own: Vec<usize> = (0..spec.topics_per_class).map(|j| label * spec.topics_per_class + j).collect();
            let off: Vec<usize> = (0..spec.classes * spec.topics_per_class)
                .filter(|t| t / spec.topics_per_class != label)
                .collect();
            let bg: Vec<usize> = (spec.classes * spec.topics_per_class..n_topics).collect();
            distribute(&mut weights, &raw, &own, share);
            let rest = 1.0 - share;
            if bg.is_empty() {
                distribute(&mut weights, &raw, &off, rest);
            } else {
                distribute(&mut weights, &raw, &off, rest * spec.off_class_share);
                distribute(&mut weights, &raw, &bg, rest * (1.0 - spec.off_class_share));
            }
            let len = rng.random_range(spec.min_length..=spec.max_length);
            let words: Vec<String> = (0..len)
                .map(|_| {
                    let t = categorical(&mut rng, &weights);
                    news_word(t, categorical(&mut rng, &zipf))
                })
                .collect();
            RawRecord { id: format!("n{d}"), text: words.join(" "), label }
        })
        .collect();
    let classes = (0..spec.classes).map(|c| format!("class{c}")).collect();
    LabeledCorpus::build(&records, classes, &raw_config(2)).expect("news-like corpus is well formed")
}

fn distribute(weights: &mut [f64], raw: &[f64], group: &[usize], mass: f64) {
    let total: f64 = group.iter().map(|&t| raw[t]).sum();
    for &t in group {
        weights[t] = if total > 0.0 { mass * raw[t] / total } else { mass / group.len() as f64 };
    }
}
