//! Simulated expert knowledge.
//!
//! A Gold Standard is the weight table of L1-regularised one-vs-rest
//! logistic regressions fitted on all available data, over either word counts
//! or inferred topic mixtures. The L1 penalty keeps the tables sparse, so
//! "feature t is not part of GS_y" is a meaningful statement.

use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::corpus::{LabeledCorpus, WordId};
use crate::error::{Error, Result};
use crate::explainers::{Explanation, FeatureKind};
use crate::learner::{row_from_tokens, Classifier, FitParams, Penalty, SoftmaxRegression, SparseRow, TrainSet};
use crate::metrics::macro_f1;
use crate::rng::derive;
use crate::split::{stratified_split, SplitFractions};
use crate::topic_model::{InferParams, LdaModel};

/// Weights at or below this magnitude do not make a feature part of a class's
/// Gold Standard.
pub const MEMBERSHIP_THRESHOLD: f64 = 1e-6;

/// Signed feature weights for one class, sorted by weight descending then id.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct ClassKnowledge {
    pub features: Vec<(u32, f64)>,
}

impl ClassKnowledge {
    /// Keeps entries above the membership threshold and sorts them.
    pub fn new(features: impl IntoIterator<Item = (u32, f64)>) -> Self {
        let mut features: Vec<(u32, f64)> =
            features.into_iter().filter(|&(_, w)| w.abs() > MEMBERSHIP_THRESHOLD).collect();
        features.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
        features.dedup_by_key(|f| f.0);
        Self { features }
    }

    pub fn weight(&self, feature: u32) -> Option<f64> {
        self.features.iter().find(|&&(f, _)| f == feature).map(|&(_, w)| w)
    }

    pub fn contains(&self, feature: u32) -> bool {
        self.weight(feature).is_some()
    }

    pub fn is_positive(&self, feature: u32) -> bool {
        matches!(self.weight(feature), Some(w) if w > 0.0)
    }

    pub fn is_negative(&self, feature: u32) -> bool {
        matches!(self.weight(feature), Some(w) if w < 0.0)
    }

    /// GS⁺: positive entries, strongest first.
    pub fn positive(&self) -> impl Iterator<Item = (u32, f64)> + '_ {
        self.features.iter().copied().filter(|&(_, w)| w > 0.0)
    }

    /// GS⁻.
    pub fn negative(&self) -> impl Iterator<Item = (u32, f64)> + '_ {
        self.features.iter().copied().filter(|&(_, w)| w < 0.0)
    }

    /// The top `ceil(k · |GS⁺|)` positive features.
    pub fn top_positive(&self, k_fraction: f64) -> Vec<u32> {
        let pos: Vec<u32> = self.positive().map(|(f, _)| f).collect();
        let n = (libm::ceil(k_fraction * pos.len() as f64 - 1e-9) as usize).min(pos.len());
        pos[..n].to_vec()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GoldStandard {
    pub kind: FeatureKind,
    pub per_class: Vec<ClassKnowledge>,
    /// Macro-F1 of the generating regression on a held-out fold.
    pub source_f1: f64,
}

impl GoldStandard {
    pub fn class(&self, y: usize) -> &ClassKnowledge {
        &self.per_class[y]
    }

    /// Weight table as-is from a fitted regression.
    pub fn from_model(kind: FeatureKind, model: &SoftmaxRegression, source_f1: f64) -> Self {
        let per_class = (0..model.num_classes)
            .map(|c| ClassKnowledge::new((0..model.num_features).map(|f| (f as u32, model.weight(f, c)))))
            .collect();
        Self { kind, per_class, source_f1 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GsParams {
    pub l1: f64,
    pub max_epochs: usize,
    pub holdout: f64,
    pub seed: u64,
}

impl Default for GsParams {
    fn default() -> Self {
        Self { l1: 0.002, max_epochs: 1500, holdout: 0.2, seed: 0 }
    }
}

/// One L1-penalised binary logistic regression per class (class vs rest),
/// stacked into a single model whose class-`c` weights are the log-odds
/// coefficients of the `c`-vs-rest fit. A one-vs-rest fit gives every class
/// its own evidence; a multinomial L1 fit can describe one class purely by
/// the absence of the others.
pub fn fit_one_vs_rest(train: &TrainSet, params: &FitParams) -> Result<SoftmaxRegression> {
    train.validate()?;
    let (f, c) = (train.num_features, train.num_classes);
    let mut stacked = SoftmaxRegression::zeros(f, c);
    for class in 0..c {
        let mut binary = TrainSet::new(f, 2);
        for (row, &l) in train.rows.iter().zip(&train.labels) {
            binary.push(row.clone(), usize::from(l == class));
        }
        if binary.classes_present() < 2 {
            continue;
        }
        let m = SoftmaxRegression::fit(&binary, params)?;
        for feature in 0..f {
            stacked.weights[feature * c + class] = m.weight(feature, 1) - m.weight(feature, 0);
        }
        stacked.bias[class] = m.bias[1] - m.bias[0];
    }
    Ok(stacked)
}

fn gs_from_rows(
    rows: &[SparseRow],
    labels: &[usize],
    num_features: usize,
    num_classes: usize,
    kind: FeatureKind,
    params: &GsParams,
) -> Result<GoldStandard> {
    let fit = FitParams { penalty: Penalty::L1(params.l1), max_epochs: params.max_epochs, tolerance: 1e-6, seed: params.seed };
    let split = stratified_split(
        labels,
        num_classes,
        &SplitFractions { train: 1.0 - params.holdout, pool: 0.0, test: params.holdout },
        derive(params.seed, &[0x65]),
    )?;
    let mut held_train = TrainSet::new(num_features, num_classes);
    for &i in &split.train {
        held_train.push(rows[i].clone(), labels[i]);
    }
    let source_f1 = if split.test.is_empty() {
        0.0
    } else {
        let m = fit_one_vs_rest(&held_train, &fit)?;
        let preds = split.test.iter().map(|&i| m.predict(&rows[i])).collect::<Result<Vec<_>>>()?;
        let truth: Vec<usize> = split.test.iter().map(|&i| labels[i]).collect();
        macro_f1(&preds, &truth, num_classes)?
    };
    let mut all = TrainSet::new(num_features, num_classes);
    for (r, &l) in rows.iter().zip(labels) {
        all.push(r.clone(), l);
    }
    let model = fit_one_vs_rest(&all, &fit)?;
    Ok(GoldStandard::from_model(kind, &model, source_f1))
}

/// Word-level Gold Standard from bag-of-words counts.
pub fn build_word_gs(corpus: &LabeledCorpus, params: &GsParams) -> Result<GoldStandard> {
    let rows: Vec<SparseRow> = corpus.documents.iter().map(|d| row_from_tokens(&d.tokens)).collect();
    gs_from_rows(&rows, &corpus.labels, corpus.vocabulary.len(), corpus.num_classes(), FeatureKind::Word, params)
}

/// Topic mixture of every document of the corpus as sparse rows.
pub fn topic_rows(corpus: &LabeledCorpus, lda: &LdaModel, infer: &InferParams, seed: u64) -> Vec<SparseRow> {
    corpus
        .documents
        .iter()
        .enumerate()
        .map(|(i, d)| {
            let theta = lda.infer(&d.tokens, infer, derive(seed, &[i as u64])).0;
            theta.0.iter().enumerate().map(|(t, &p)| (t as u32, p)).collect()
        })
        .collect()
}

/// Topic-level Gold Standard from inferred topic mixtures.
pub fn build_topic_gs(corpus: &LabeledCorpus, lda: &LdaModel, infer: &InferParams, params: &GsParams) -> Result<GoldStandard> {
    if lda.vocab_size != corpus.vocabulary.len() {
        return Err(Error::DimensionMismatch { expected: corpus.vocabulary.len(), got: lda.vocab_size });
    }
    let rows = topic_rows(corpus, lda, infer, derive(params.seed, &[0x7a]));
    gs_from_rows(&rows, &corpus.labels, lda.k, corpus.num_classes(), FeatureKind::Topic, params)
}

/// GS_local(x): the top `k_fraction` of GS_y⁺ that occur in the document, in
/// ranking order.
pub fn local_gs(gs: &GoldStandard, tokens: &[WordId], y: usize, k_fraction: f64) -> Result<Vec<WordId>> {
    if !(k_fraction > 0.0 && k_fraction <= 1.0) {
        return Err(Error::InvalidConfig("k_fraction must lie in (0, 1]".into()));
    }
    Ok(local_from_knowledge(gs.class(y), tokens, k_fraction))
}

pub fn local_from_knowledge(knowledge: &ClassKnowledge, tokens: &[WordId], k_fraction: f64) -> Vec<WordId> {
    knowledge.top_positive(k_fraction).into_iter().filter(|w| tokens.contains(w)).collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FeedbackSource {
    Simulated,
    Human,
}

/// An oracle's answer to one query.
///
/// `knowledge` holds the oracle's effective Gold Standard rows for the true
/// class and, on a false prediction, for the predicted class. Strategies read
/// membership, polarity and weights from there, so a human answer and a
/// simulated answer that agree on these rows produce identical
/// counterexamples.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorrectionFeedback {
    pub true_label: usize,
    /// Features of the presented explanation judged irrelevant for the true class.
    pub destructive: Vec<u32>,
    pub knowledge: Vec<(usize, ClassKnowledge)>,
    pub source: FeedbackSource,
}

impl CorrectionFeedback {
    pub fn knowledge_for(&self, class: usize) -> Option<&ClassKnowledge> {
        self.knowledge.iter().find(|(c, _)| *c == class).map(|(_, k)| k)
    }

    /// Relevant features with weights, per class (GS_y⁺, and GS_ŷ⁺ on a false
    /// prediction).
    pub fn constructive(&self) -> Vec<(usize, Vec<(u32, f64)>)> {
        self.knowledge.iter().map(|(c, k)| (*c, k.positive().collect())).collect()
    }
}

/// Features of `explanation` that have no entry in `knowledge`.
pub fn destructive_set(explanation: &Explanation, knowledge: &ClassKnowledge) -> Vec<u32> {
    explanation.feature_ids().filter(|&f| !knowledge.contains(f)).collect()
}

/// The simulated oracle's reaction to a presented explanation.
pub fn simulated_correction(
    gs: &GoldStandard,
    y: usize,
    y_hat: usize,
    explanation: &Explanation,
) -> Result<CorrectionFeedback> {
    if explanation.kind != gs.kind {
        return Err(Error::KindMismatch);
    }
    let mut knowledge = vec![(y, gs.class(y).clone())];
    if y_hat != y {
        knowledge.push((y_hat, gs.class(y_hat).clone()));
    }
    Ok(CorrectionFeedback {
        true_label: y,
        destructive: destructive_set(explanation, gs.class(y)),
        knowledge,
        source: FeedbackSource::Simulated,
    })
}
