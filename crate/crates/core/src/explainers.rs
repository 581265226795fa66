//! Local surrogate explanations.
//!
//! Both explainers share one pipeline: sample a neighborhood by switching off
//! random subsets of interpretable features, weight each sample by an
//! exponential kernel on cosine distance, pick the strongest features with a
//! near-unpenalized weighted least-squares pass, then refit a weighted ridge
//! surrogate on those. LIME's interpretable features are the distinct words of
//! the document; topicLIME's are the topics with at least one assigned token,
//! and switching a topic off removes every token assigned to it.

use alloc::vec;
use alloc::vec::Vec;

use rand::seq::index::sample;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::corpus::WordId;
use crate::error::{Error, Result};
use crate::learner::{row_from_tokens, Classifier};
use crate::linalg::weighted_ridge;
use crate::rng::rng_from;
use crate::topic_model::TopicAssignment;

const SURROGATE_PENALTY: f64 = 1.0;
const SELECTION_PENALTY: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FeatureKind {
    Word,
    Topic,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Explanation {
    pub target_class: usize,
    pub kind: FeatureKind,
    /// (feature id, weight), sorted by |weight| descending then id.
    pub features: Vec<(u32, f64)>,
    pub intercept: f64,
    pub surrogate_r2: f64,
    /// Surrogate output at the unperturbed instance.
    pub local_prediction: f64,
    /// Classifier probability of `target_class` at the unperturbed instance.
    pub model_prediction: f64,
}

impl Explanation {
    pub fn positive_part(&self) -> impl Iterator<Item = (u32, f64)> + '_ {
        self.features.iter().copied().filter(|&(_, w)| w > 0.0)
    }

    pub fn negative_part(&self) -> impl Iterator<Item = (u32, f64)> + '_ {
        self.features.iter().copied().filter(|&(_, w)| w < 0.0)
    }

    pub fn contains(&self, feature: u32) -> bool {
        self.features.iter().any(|&(f, _)| f == feature)
    }

    pub fn weight(&self, feature: u32) -> Option<f64> {
        self.features.iter().find(|&&(f, _)| f == feature).map(|&(_, w)| w)
    }

    pub fn feature_ids(&self) -> impl Iterator<Item = u32> + '_ {
        self.features.iter().map(|&(f, _)| f)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PerturbationConfig {
    pub num_samples: usize,
    /// `None` means `0.75 · √(#interpretable features)`.
    pub kernel_width: Option<f64>,
    pub seed: u64,
    pub complexity: usize,
}

impl PerturbationConfig {
    pub fn words(complexity: usize, seed: u64) -> Self {
        Self { num_samples: 1000, kernel_width: None, seed, complexity }
    }

    pub fn topics(complexity: usize, seed: u64) -> Self {
        Self { num_samples: 500, kernel_width: None, seed, complexity }
    }

    fn validate(&self) -> Result<()> {
        if self.complexity == 0 || self.num_samples < self.complexity + 1 {
            return Err(Error::InvalidConfig("num_samples must exceed complexity >= 1".into()));
        }
        if matches!(self.kernel_width, Some(w) if !(w > 0.0)) {
            return Err(Error::InvalidConfig("kernel width must be positive".into()));
        }
        Ok(())
    }
}

/// How tokens map to interpretable features.
#[derive(Debug, Clone, Copy)]
pub enum InterpretableSpace<'a> {
    Words,
    Topics(&'a TopicAssignment),
}

impl InterpretableSpace<'_> {
    fn kind(&self) -> FeatureKind {
        match self {
            InterpretableSpace::Words => FeatureKind::Word,
            InterpretableSpace::Topics(_) => FeatureKind::Topic,
        }
    }

    /// Interpretable feature of each token.
    fn token_features(&self, tokens: &[WordId]) -> Vec<u32> {
        match self {
            InterpretableSpace::Words => tokens.to_vec(),
            InterpretableSpace::Topics(a) => a.0.iter().map(|&t| t as u32).collect(),
        }
    }
}

/// Perturbed copies of one document with their feature indicators.
#[derive(Debug, Clone, PartialEq)]
pub struct Neighborhood {
    /// Interpretable features, ascending.
    pub features: Vec<u32>,
    pub indicators: Vec<Vec<bool>>,
    pub documents: Vec<Vec<WordId>>,
}

/// Keeps the tokens whose interpretable feature is switched on.
pub fn apply_mask(tokens: &[WordId], token_features: &[u32], features: &[u32], on: &[bool]) -> Vec<WordId> {
    tokens
        .iter()
        .zip(token_features)
        .filter(|(_, f)| features.binary_search(f).map(|i| on[i]).unwrap_or(true))
        .map(|(&t, _)| t)
        .collect()
}

/// Removes every token whose interpretable feature is in `removed`.
pub fn remove_features(tokens: &[WordId], space: InterpretableSpace<'_>, removed: &[u32]) -> Vec<WordId> {
    let tf = space.token_features(tokens);
    tokens.iter().zip(&tf).filter(|(_, f)| !removed.contains(f)).map(|(&t, _)| t).collect()
}

/// The first sample is the unperturbed document; each further sample switches
/// off between one and all features, chosen uniformly.
pub fn perturbation_neighborhood(
    tokens: &[WordId],
    space: InterpretableSpace<'_>,
    num_samples: usize,
    seed: u64,
) -> Result<Neighborhood> {
    let token_features = space.token_features(tokens);
    if token_features.len() != tokens.len() {
        return Err(Error::DimensionMismatch { expected: tokens.len(), got: token_features.len() });
    }
    let mut features = token_features.clone();
    features.sort_unstable();
    features.dedup();
    let d = features.len();
    let mut rng = rng_from(seed);
    let mut indicators = Vec::with_capacity(num_samples);
    let mut documents = Vec::with_capacity(num_samples);
    for s in 0..num_samples.max(1) {
        let mut on = vec![true; d];
        if s > 0 && d > 0 {
            let n_off = rng.random_range(1..=d);
            for i in sample(&mut rng, d, n_off) {
                on[i] = false;
            }
        }
        documents.push(apply_mask(tokens, &token_features, &features, &on));
        indicators.push(on);
    }
    Ok(Neighborhood { features, indicators, documents })
}

/// Explains `target` with word features.
pub fn lime_explain(
    f: &dyn Classifier,
    tokens: &[WordId],
    target: usize,
    cfg: &PerturbationConfig,
) -> Result<Explanation> {
    explain(f, tokens, InterpretableSpace::Words, &[target], cfg).map(|mut v| v.remove(0))
}

/// Explains `target` with topic features, masking by `assignment`.
pub fn topiclime_explain(
    f: &dyn Classifier,
    tokens: &[WordId],
    target: usize,
    assignment: &TopicAssignment,
    cfg: &PerturbationConfig,
) -> Result<Explanation> {
    explain(f, tokens, InterpretableSpace::Topics(assignment), &[target], cfg).map(|mut v| v.remove(0))
}

/// Fits one surrogate per target class over a single shared neighborhood.
/// The result for each class equals a separate single-class call with the
/// same configuration.
pub fn explain(
    f: &dyn Classifier,
    tokens: &[WordId],
    space: InterpretableSpace<'_>,
    targets: &[usize],
    cfg: &PerturbationConfig,
) -> Result<Vec<Explanation>> {
    cfg.validate()?;
    if tokens.is_empty() {
        return Err(Error::EmptyDocument);
    }
    if let InterpretableSpace::Topics(a) = space {
        if a.0.is_empty() {
            return Err(Error::NoActiveTopics);
        }
    }
    let nb = perturbation_neighborhood(tokens, space, cfg.num_samples, cfg.seed)?;
    let d = nb.features.len();
    let width = cfg.kernel_width.unwrap_or(0.75 * libm::sqrt(d as f64));
    let rows: Vec<Vec<f64>> =
        nb.indicators.iter().map(|on| on.iter().map(|&b| if b { 1.0 } else { 0.0 }).collect()).collect();
    let weights: Vec<f64> = nb
        .indicators
        .iter()
        .map(|on| {
            let active = on.iter().filter(|&&b| b).count();
            let dist = if active == 0 { 1.0 } else { 1.0 - libm::sqrt(active as f64 / d as f64) };
            libm::exp(-(dist * dist) / (width * width))
        })
        .collect();
    let probs = nb
        .documents
        .iter()
        .map(|doc| f.predict_proba(&row_from_tokens(doc)))
        .collect::<Result<Vec<_>>>()?;

    targets
        .iter()
        .map(|&target| {
            let y: Vec<f64> = probs.iter().map(|p| p.prob(target)).collect();
            let selected: Vec<usize> = if d <= cfg.complexity {
                (0..d).collect()
            } else {
                let first = weighted_ridge(&rows, &y, &weights, SELECTION_PENALTY);
                let mut order: Vec<usize> = (0..d).collect();
                order.sort_by(|&a, &b| first.coef[b].abs().total_cmp(&first.coef[a].abs()).then(a.cmp(&b)));
                order.truncate(cfg.complexity);
                order.sort_unstable();
                order
            };
            let sub: Vec<Vec<f64>> = rows.iter().map(|r| selected.iter().map(|&j| r[j]).collect()).collect();
            let fit = weighted_ridge(&sub, &y, &weights, SURROGATE_PENALTY);
            let mut features: Vec<(u32, f64)> =
                selected.iter().zip(&fit.coef).map(|(&j, &c)| (nb.features[j], c)).collect();
            features.sort_by(|a, b| b.1.abs().total_cmp(&a.1.abs()).then(a.0.cmp(&b.0)));
            Ok(Explanation {
                target_class: target,
                kind: space.kind(),
                local_prediction: fit.intercept + fit.coef.iter().sum::<f64>(),
                intercept: fit.intercept,
                surrogate_r2: fit.r2,
                model_prediction: y[0],
                features,
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::learner::ClassDistribution;
    use alloc::collections::BTreeSet;

    struct Constant;
    impl Classifier for Constant {
        fn num_classes(&self) -> usize {
            2
        }
        fn num_features(&self) -> usize {
            100
        }
        fn predict_proba(&self, _: &[(WordId, f64)]) -> Result<ClassDistribution> {
            Ok(ClassDistribution(vec![0.3, 0.7]))
        }
    }

    /// P(class 1) = 0.2 + 0.6 · [any token of `words` present].
    struct Indicator(Vec<WordId>);
    impl Classifier for Indicator {
        fn num_classes(&self) -> usize {
            2
        }
        fn num_features(&self) -> usize {
            100
        }
        fn predict_proba(&self, row: &[(WordId, f64)]) -> Result<ClassDistribution> {
            let hit = row.iter().any(|(w, _)| self.0.contains(w));
            let p = if hit { 0.8 } else { 0.2 };
            Ok(ClassDistribution(vec![1.0 - p, p]))
        }
    }

    #[test]
    fn constant_classifier_yields_zero_weights() {
        let e = lime_explain(&Constant, &[1, 2, 3, 2], 1, &PerturbationConfig::words(5, 1)).unwrap();
        assert!(e.features.iter().all(|&(_, w)| w.abs() < 1e-9));
        assert_eq!(e.surrogate_r2, 0.0);
        assert_eq!(e.kind, FeatureKind::Word);
    }

    #[test]
    fn explanation_is_deterministic_and_bounded() {
        let f = Indicator(vec![4]);
        let tokens = [1, 4, 5, 6, 7, 8, 9, 4];
        let cfg = PerturbationConfig::words(3, 7);
        let a = lime_explain(&f, &tokens, 1, &cfg).unwrap();
        assert_eq!(a, lime_explain(&f, &tokens, 1, &cfg).unwrap());
        assert_eq!(a.features.len(), 3);
        assert_eq!(a.features[0].0, 4);
        assert!(a.features[0].1 > 0.0);
        let ids: BTreeSet<u32> = a.feature_ids().collect();
        assert_eq!(ids.len(), a.features.len());
    }

    #[test]
    fn topic_relevant_to_decision_dominates() {
        // tokens 10, 11 carry topic 2; the classifier only reacts to word 11.
        let tokens = [1, 10, 2, 11, 3, 4];
        let assignment = TopicAssignment(vec![0, 2, 1, 2, 0, 1]);
        let e = topiclime_explain(&Indicator(vec![11]), &tokens, 1, &assignment, &PerturbationConfig::topics(3, 2))
            .unwrap();
        assert_eq!(e.kind, FeatureKind::Topic);
        assert_eq!(e.features[0].0, 2);
        assert!(e.features.len() <= 3);
    }

    #[test]
    fn single_topic_document_has_one_feature() {
        let tokens = [1, 2, 3];
        let a = TopicAssignment(vec![4, 4, 4]);
        let e = topiclime_explain(&Indicator(vec![2]), &tokens, 1, &a, &PerturbationConfig::topics(3, 2)).unwrap();
        assert_eq!(e.features.len(), 1);
        assert_eq!(e.features[0].0, 4);
    }

    #[test]
    fn error_paths() {
        let cfg = PerturbationConfig::words(3, 1);
        assert_eq!(lime_explain(&Constant, &[], 0, &cfg), Err(Error::EmptyDocument));
        let empty = TopicAssignment(Vec::new());
        assert_eq!(topiclime_explain(&Constant, &[1], 0, &empty, &cfg), Err(Error::NoActiveTopics));
    }

    #[test]
    fn neighborhood_masks_are_consistent() {
        let tokens = [3, 1, 3, 2, 5, 1];
        let nb = perturbation_neighborhood(&tokens, InterpretableSpace::Words, 200, 4).unwrap();
        assert_eq!(nb.features, [1, 2, 3, 5]);
        assert_eq!(nb.documents[0], tokens);
        for (on, doc) in nb.indicators.iter().zip(&nb.documents) {
            for (i, &f) in nb.features.iter().enumerate() {
                let occurrences = tokens.iter().filter(|&&t| t == f).count();
                let kept = doc.iter().filter(|&&t| t == f).count();
                assert_eq!(kept, if on[i] { occurrences } else { 0 });
            }
            if on.iter().all(|b| !b) {
                assert!(doc.is_empty());
            }
        }
        let a = TopicAssignment(vec![0, 1, 0, 2, 2, 1]);
        let nb = perturbation_neighborhood(&tokens, InterpretableSpace::Topics(&a), 200, 4).unwrap();
        for (on, doc) in nb.indicators.iter().zip(&nb.documents) {
            let removed: usize = (0..3).filter(|&t| !on[t]).map(|t| a.count(t)).sum();
            assert_eq!(doc.len(), tokens.len() - removed);
        }
    }
}
