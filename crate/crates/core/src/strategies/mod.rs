//! Interaction strategies and the loop that drives them.
//!
//! * Active learning only adds the queried instance.
//! * CAIPI_d masks the words an oracle rejects from a correct prediction's
//!   LIME explanation.
//! * CAIPI_d/c additionally samples documents from the local Gold Standard
//!   words on a false prediction.
//! * SemanticPush manipulates the LDA topic mixture of the instance and
//!   samples counterexamples from it.

mod semantic;
mod session;
mod verdicts;

use alloc::vec::Vec;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::corpus::WordId;
use crate::error::{Error, Result};
use crate::learner::Classifier;
use crate::oracle::{local_from_knowledge, ClassKnowledge};
use crate::rng::rng_from;

pub use semantic::{
    completion_mixture, correction_mixture, psi, semantic_completion, semantic_correction, semantic_push, topic_case,
    CorrectedMixture, PushInput, PushOutcome, TopicCase,
};
pub use session::{
    run_loop, InteractiveLoop, IterationRecord, LoopConfig, LoopOutcome, LoopResources, MetricCadence, MetricSnapshot,
    Oracle, Query,
    SimulatedOracle,
};
pub use verdicts::{feedback_from_verdicts, simulated_verdicts, FeatureVerdict, Verdict};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Strategy {
    #[serde(rename = "al")]
    ActiveLearning,
    CaipiD,
    CaipiDc,
    SemanticPush,
}

impl Strategy {
    pub const ALL: [Strategy; 4] = [Strategy::ActiveLearning, Strategy::CaipiD, Strategy::CaipiDc, Strategy::SemanticPush];

    pub fn name(self) -> &'static str {
        match self {
            Strategy::ActiveLearning => "al",
            Strategy::CaipiD => "caipi_d",
            Strategy::CaipiDc => "caipi_dc",
            Strategy::SemanticPush => "semantic_push",
        }
    }

    pub fn from_name(name: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|s| s.name() == name)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Provenance {
    CaipiMasked,
    CaipiConstructive,
    SemanticCompletion,
    SemanticCorrectionTrue,
    SemanticCorrectionPred,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Counterexample {
    pub tokens: Vec<WordId>,
    pub label: usize,
    pub provenance: Provenance,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StrategyConfig {
    /// Counterexamples per iteration.
    pub m: usize,
    pub lambda: f64,
    pub counterexample_length: usize,
    pub lime_features: usize,
    pub topiclime_features: usize,
    /// Share of the global Gold Standard ranking used for CAIPI's local
    /// Gold Standard.
    pub local_gs_fraction: f64,
    pub seed: u64,
}

impl Default for StrategyConfig {
    fn default() -> Self {
        Self {
            m: 10,
            lambda: 0.95,
            counterexample_length: 25,
            lime_features: 7,
            topiclime_features: 3,
            local_gs_fraction: 0.3,
            seed: 0,
        }
    }
}

impl StrategyConfig {
    pub fn validate(&self) -> Result<()> {
        if self.m == 0 || self.counterexample_length == 0 || self.lime_features == 0 || self.topiclime_features == 0 {
            return Err(Error::InvalidConfig("M, lengths and explanation sizes must be positive".into()));
        }
        if !(0.0..=1.0).contains(&self.lambda) {
            return Err(Error::InvalidLambda(self.lambda));
        }
        if !(self.local_gs_fraction > 0.0 && self.local_gs_fraction <= 1.0) {
            return Err(Error::InvalidConfig("local_gs_fraction must lie in (0, 1]".into()));
        }
        Ok(())
    }
}

/// The pool instance with the highest uncertainty `1 − P(ŷ | x)`; ties go to
/// the smallest id. Returns the id.
pub fn select_query<'a>(f: &dyn Classifier, pool: impl IntoIterator<Item = (usize, &'a [WordId])>) -> Result<usize> {
    let mut best: Option<(usize, f64)> = None;
    for (id, tokens) in pool {
        let u = 1.0 - f.predict_proba_tokens(tokens)?.max();
        best = match best {
            Some((bid, bu)) if bu > u || (bu == u && bid < id) => Some((bid, bu)),
            _ => Some((id, u)),
        };
    }
    best.map(|(id, _)| id).ok_or(Error::EmptyPool)
}

/// Removes every occurrence of the destructive words from a correctly
/// predicted instance and replicates the result `m` times.
pub fn caipi_destructive(tokens: &[WordId], y: usize, y_hat: usize, destructive: &[u32], m: usize) -> Vec<Counterexample> {
    if y != y_hat || destructive.is_empty() {
        return Vec::new();
    }
    let masked: Vec<WordId> = tokens.iter().copied().filter(|w| !destructive.contains(w)).collect();
    if masked.is_empty() {
        return Vec::new();
    }
    (0..m).map(|_| Counterexample { tokens: masked.clone(), label: y, provenance: Provenance::CaipiMasked }).collect()
}

/// On a false prediction, samples `m` documents of `length` tokens uniformly
/// from the instance's local Gold Standard words, labelled with the true class.
#[allow(clippy::too_many_arguments)]
pub fn caipi_constructive(
    tokens: &[WordId],
    y: usize,
    y_hat: usize,
    gs_y: &ClassKnowledge,
    k_fraction: f64,
    m: usize,
    length: usize,
    seed: u64,
) -> Vec<Counterexample> {
    if y == y_hat {
        return Vec::new();
    }
    let support = local_from_knowledge(gs_y, tokens, k_fraction);
    if support.is_empty() || length == 0 {
        return Vec::new();
    }
    let mut rng = rng_from(seed);
    (0..m)
        .map(|_| Counterexample {
            tokens: (0..length).map(|_| support[rng.random_range(0..support.len())]).collect(),
            label: y,
            provenance: Provenance::CaipiConstructive,
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::learner::ClassDistribution;
    use alloc::vec;

    /// P(argmax) taken from a table keyed by the first token.
    struct Table(Vec<f64>);
    impl Classifier for Table {
        fn num_classes(&self) -> usize {
            2
        }
        fn num_features(&self) -> usize {
            10
        }
        fn predict_proba(&self, row: &[(WordId, f64)]) -> Result<ClassDistribution> {
            let p = self.0[row[0].0 as usize];
            Ok(ClassDistribution(vec![p, 1.0 - p]))
        }
    }

    #[test]
    fn most_uncertain_instance_is_selected() {
        let f = Table(vec![0.9, 0.6, 0.8, 0.6]);
        let docs: Vec<Vec<WordId>> = (0..4).map(|i| vec![i]).collect();
        let pool = |ids: &[usize]| ids.iter().map(|&i| (i, docs[i].as_slice())).collect::<Vec<_>>();
        assert_eq!(select_query(&f, pool(&[0, 1, 2])).unwrap(), 1);
        assert_eq!(select_query(&f, pool(&[2])).unwrap(), 2);
        assert_eq!(select_query(&f, pool(&[3, 1])).unwrap(), 1);
        assert_eq!(select_query(&f, pool(&[])), Err(Error::EmptyPool));
    }

    #[test]
    fn masking_removes_all_occurrences() {
        // "oil oil price rise"
        let x = [0, 0, 1, 2];
        let out = caipi_destructive(&x, 1, 1, &[0], 10);
        assert_eq!(out.len(), 10);
        assert!(out.iter().all(|c| c.tokens == [1, 2] && c.label == 1));
        assert!(caipi_destructive(&x, 1, 1, &[], 10).is_empty());
        assert!(caipi_destructive(&x, 1, 0, &[0], 10).is_empty());
    }

    #[test]
    fn constructive_sampling_support() {
        let gs = ClassKnowledge::new((0..10).map(|w| (w, 1.0 - w as f64 * 0.05)));
        // top 10% of ten positive words is word 0 alone
        let out = caipi_constructive(&[0, 5, 7], 1, 0, &gs, 0.1, 3, 12, 4);
        assert_eq!(out.len(), 3);
        assert!(out.iter().all(|c| c.tokens.len() == 12 && c.tokens.iter().all(|&w| w == 0)));
        assert!(caipi_constructive(&[5, 7], 1, 0, &gs, 0.1, 3, 12, 4).is_empty());
        assert!(caipi_constructive(&[0], 1, 1, &gs, 0.1, 3, 12, 4).is_empty());
    }

    #[test]
    fn constructive_frequencies_are_uniform() {
        let gs = ClassKnowledge::new((0..4).map(|w| (w, 1.0)));
        let out = caipi_constructive(&[0, 1, 2, 3], 0, 1, &gs, 1.0, 10, 60, 9);
        assert_eq!(out.len(), 10);
        let mut counts = [0usize; 4];
        for c in &out {
            assert_eq!(c.tokens.len(), 60);
            for &w in &c.tokens {
                counts[w as usize] += 1;
            }
        }
        // 600 draws, expected 150 each, sd ≈ 10.6
        assert!(counts.iter().all(|&c| (110..=190).contains(&c)), "{counts:?}");
    }

    #[test]
    fn strategy_names_round_trip() {
        for s in Strategy::ALL {
            assert_eq!(Strategy::from_name(s.name()), Some(s));
        }
    }
}
