//! Predictive and explanation-quality measures.

use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::corpus::WordId;
use crate::error::{Error, Result};
use crate::explainers::{lime_explain, remove_features, Explanation, InterpretableSpace, PerturbationConfig};
use crate::learner::{row_from_tokens, Classifier};
use crate::oracle::{local_gs, GoldStandard};
use crate::topic_model::TopicAssignment;

/// Unweighted mean of per-class F1 over `num_classes` classes. A class with
/// no true and no predicted instances scores 0.
pub fn macro_f1(predictions: &[usize], truths: &[usize], num_classes: usize) -> Result<f64> {
    if predictions.len() != truths.len() {
        return Err(Error::LengthMismatch { left: predictions.len(), right: truths.len() });
    }
    if num_classes == 0 {
        return Ok(0.0);
    }
    let mut tp = vec![0usize; num_classes];
    let mut fp = vec![0usize; num_classes];
    let mut fneg = vec![0usize; num_classes];
    for (&p, &t) in predictions.iter().zip(truths) {
        if p == t {
            tp[p] += 1;
        } else {
            fp[p] += 1;
            fneg[t] += 1;
        }
    }
    let total: f64 = (0..num_classes)
        .map(|c| {
            let denom = 2 * tp[c] + fp[c] + fneg[c];
            if denom == 0 {
                0.0
            } else {
                2.0 * tp[c] as f64 / denom as f64
            }
        })
        .sum();
    Ok(total / num_classes as f64)
}

/// Mean of `P(ŷ|x) − P(y|x)` over labeled documents.
pub fn avg_classification_margin(f: &dyn Classifier, docs: &[&[WordId]], labels: &[usize]) -> Result<f64> {
    if docs.len() != labels.len() {
        return Err(Error::LengthMismatch { left: docs.len(), right: labels.len() });
    }
    if docs.is_empty() {
        return Ok(0.0);
    }
    let mut total = 0.0;
    for (doc, &y) in docs.iter().zip(labels) {
        let p = f.predict_proba_tokens(doc)?;
        total += p.max() - p.prob(y);
    }
    Ok(total / docs.len() as f64)
}

/// One explained instance together with what is needed to remove features.
#[derive(Debug, Clone, PartialEq)]
pub struct ExplainedInstance {
    pub tokens: Vec<WordId>,
    /// Present for topic explanations.
    pub assignment: Option<TopicAssignment>,
    pub explanation: Explanation,
}

/// Mean absolute gap between the classifier and the surrogate at each
/// unperturbed instance.
pub fn mlae(instances: &[ExplainedInstance]) -> f64 {
    mean(instances.iter().map(|i| (i.explanation.model_prediction - i.explanation.local_prediction).abs()))
}

/// Mean weighted R² of the surrogates on their neighborhoods.
pub fn mean_r2(instances: &[ExplainedInstance]) -> f64 {
    mean(instances.iter().map(|i| i.explanation.surrogate_r2))
}

fn mean(values: impl Iterator<Item = f64>) -> f64 {
    let (sum, n) = values.fold((0.0, 0usize), |(s, n), v| (s + v, n + 1));
    if n == 0 {
        0.0
    } else {
        sum / n as f64
    }
}

/// Number of top features removed for a given fraction: `ceil(k · n)`, at
/// least one when `k > 0` and the explanation is non-empty.
pub fn removal_count(k_fraction: f64, n_features: usize) -> usize {
    if k_fraction <= 0.0 || n_features == 0 {
        return 0;
    }
    (libm::ceil(k_fraction * n_features as f64) as usize).clamp(1, n_features)
}

/// Combined Removal Impact: mean drop of the predicted-class probability after
/// removing the top `k_fraction` explanation features.
pub fn cri(f: &dyn Classifier, instances: &[ExplainedInstance], k_fraction: f64) -> Result<f64> {
    let mut total = 0.0;
    for inst in instances {
        let before = f.predict_proba_tokens(&inst.tokens)?;
        let predicted = before.argmax();
        let n = removal_count(k_fraction, inst.explanation.features.len());
        if n == 0 {
            continue;
        }
        let removed: Vec<u32> = inst.explanation.features[..n].iter().map(|&(id, _)| id).collect();
        let space = match &inst.assignment {
            Some(a) => InterpretableSpace::Topics(a),
            None => InterpretableSpace::Words,
        };
        let reduced = remove_features(&inst.tokens, space, &removed);
        let after = f.predict_proba(&row_from_tokens(&reduced))?;
        total += before.prob(predicted) - after.prob(predicted);
    }
    Ok(if instances.is_empty() { 0.0 } else { total / instances.len() as f64 })
}

/// Result of an Explanatory Accuracy evaluation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ExplanatoryAccuracy {
    pub value: f64,
    pub evaluated: usize,
    pub skipped: usize,
}

/// Mean share of each instance's local Gold Standard words recovered by a
/// LIME explanation of its true class whose complexity equals the size of the
/// local Gold Standard. Instances with an empty local Gold Standard are
/// skipped.
pub fn explanatory_accuracy(
    f: &dyn Classifier,
    gs_word: &GoldStandard,
    docs: &[&[WordId]],
    labels: &[usize],
    k_fraction: f64,
    num_samples: usize,
    seed: u64,
) -> Result<ExplanatoryAccuracy> {
    if docs.len() != labels.len() {
        return Err(Error::LengthMismatch { left: docs.len(), right: labels.len() });
    }
    let mut total = 0.0;
    let mut evaluated = 0;
    for (i, (doc, &y)) in docs.iter().zip(labels).enumerate() {
        let local = local_gs(gs_word, doc, y, k_fraction)?;
        if local.is_empty() {
            continue;
        }
        let cfg = PerturbationConfig {
            num_samples: num_samples.max(local.len() + 1),
            kernel_width: None,
            seed: crate::rng::derive(seed, &[i as u64]),
            complexity: local.len(),
        };
        let e = lime_explain(f, doc, y, &cfg)?;
        let hit = local.iter().filter(|&&w| e.contains(w)).count();
        total += hit as f64 / local.len() as f64;
        evaluated += 1;
    }
    if evaluated == 0 {
        return Err(Error::AllLocalGsEmpty);
    }
    Ok(ExplanatoryAccuracy { value: total / evaluated as f64, evaluated, skipped: docs.len() - evaluated })
}

/// A named metric curve over strictly increasing iterations.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct MetricSeries {
    pub name: String,
    pub points: Vec<(usize, f64)>,
}

impl MetricSeries {
    pub fn new(name: impl Into<String>) -> Self {
        Self { name: name.into(), points: Vec::new() }
    }

    pub fn push(&mut self, iteration: usize, value: f64) -> Result<()> {
        if matches!(self.points.last(), Some(&(last, _)) if last >= iteration) {
            return Err(Error::InvalidConfig(alloc::format!(
                "{}: iteration {iteration} not after {}",
                self.name,
                self.points.last().unwrap().0
            )));
        }
        self.points.push((iteration, value));
        Ok(())
    }

    pub fn last(&self) -> Option<f64> {
        self.points.last().map(|&(_, v)| v)
    }

    pub fn at(&self, iteration: usize) -> Option<f64> {
        self.points.iter().find(|&&(i, _)| i == iteration).map(|&(_, v)| v)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::explainers::FeatureKind;
    use crate::learner::ClassDistribution;
    use proptest::prelude::*;

    #[test]
    fn macro_f1_examples() {
        assert_eq!(macro_f1(&[0, 1, 2], &[0, 1, 2], 3).unwrap(), 1.0);
        assert_eq!(macro_f1(&[1, 0], &[0, 1], 2).unwrap(), 0.0);
        let v = macro_f1(&[0, 0, 1, 1, 2], &[0, 1, 1, 1, 2], 3).unwrap();
        assert!((v - (2.0 / 3.0 + 0.8 + 1.0) / 3.0).abs() < 1e-12);
        assert!((v - 0.8222).abs() < 1e-4);
        assert_eq!(macro_f1(&[0], &[0, 1], 2), Err(Error::LengthMismatch { left: 1, right: 2 }));
        // class 2 never appears: contributes 0
        assert!((macro_f1(&[0, 1], &[0, 1], 3).unwrap() - 2.0 / 3.0).abs() < 1e-12);
    }

    struct Table(Vec<Vec<f64>>);
    impl Classifier for Table {
        fn num_classes(&self) -> usize {
            2
        }
        fn num_features(&self) -> usize {
            10
        }
        fn predict_proba(&self, row: &[(WordId, f64)]) -> Result<ClassDistribution> {
            Ok(ClassDistribution(self.0[row[0].0 as usize].clone()))
        }
    }

    #[test]
    fn margin_examples() {
        let f = Table(vec![vec![0.7, 0.3], vec![0.2, 0.8]]);
        let d0: &[WordId] = &[0];
        let d1: &[WordId] = &[1];
        assert_eq!(avg_classification_margin(&f, &[d0, d1], &[0, 1]).unwrap(), 0.0);
        assert!((avg_classification_margin(&f, &[d0], &[1]).unwrap() - 0.4).abs() < 1e-12);
        assert!((avg_classification_margin(&f, &[d1, d0], &[1, 1]).unwrap() - 0.2).abs() < 1e-12);
    }

    fn explained(model: f64, local: f64, r2: f64) -> ExplainedInstance {
        ExplainedInstance {
            tokens: vec![1],
            assignment: None,
            explanation: Explanation {
                target_class: 0,
                kind: FeatureKind::Word,
                features: vec![(1, 0.1)],
                intercept: 0.0,
                surrogate_r2: r2,
                local_prediction: local,
                model_prediction: model,
            },
        }
    }

    #[test]
    fn fidelity_means() {
        assert_eq!(mlae(&[explained(0.4, 0.4, 1.0)]), 0.0);
        let v = mlae(&[explained(0.5, 0.52, 1.0), explained(0.3, 0.24, 1.0)]);
        assert!((v - 0.04).abs() < 1e-12);
        assert_eq!(mean_r2(&[explained(0.1, 0.1, 1.0), explained(0.1, 0.1, 1.0)]), 1.0);
    }

    /// P(class 0) = 0.9 when word 7 is present, else 0.4.
    struct Marker;
    impl Classifier for Marker {
        fn num_classes(&self) -> usize {
            2
        }
        fn num_features(&self) -> usize {
            10
        }
        fn predict_proba(&self, row: &[(WordId, f64)]) -> Result<ClassDistribution> {
            let p = if row.iter().any(|&(w, _)| w == 7) { 0.9 } else { 0.4 };
            Ok(ClassDistribution(vec![p, 1.0 - p]))
        }
    }

    #[test]
    fn cri_examples() {
        let mut inst = explained(0.9, 0.9, 1.0);
        inst.tokens = vec![7, 2, 7, 3];
        inst.explanation.features = vec![(7, 0.5), (2, 0.01)];
        assert_eq!(cri(&Marker, &[inst.clone()], 0.0).unwrap(), 0.0);
        assert!((cri(&Marker, &[inst.clone()], 0.5).unwrap() - 0.5).abs() < 1e-12);
        inst.explanation.features = vec![(2, 0.5), (3, 0.01)];
        assert_eq!(cri(&Marker, &[inst], 0.5).unwrap(), 0.0);
        assert_eq!(removal_count(0.2, 3), 1);
        assert_eq!(removal_count(0.2, 7), 2);
        assert_eq!(removal_count(0.0, 7), 0);
    }

    #[test]
    fn series_requires_increasing_iterations() {
        let mut s = MetricSeries::new("f1");
        s.push(0, 0.1).unwrap();
        s.push(3, 0.2).unwrap();
        assert!(s.push(3, 0.3).is_err());
        assert_eq!(s.at(3), Some(0.2));
    }

    proptest! {
        #[test]
        fn macro_f1_bounded_and_permutation_invariant(
            pairs in proptest::collection::vec((0usize..4, 0usize..4), 1..40),
            perm in Just([2usize, 0, 3, 1]),
        ) {
            let (p, t): (Vec<usize>, Vec<usize>) = pairs.into_iter().unzip();
            let a = macro_f1(&p, &t, 4).unwrap();
            prop_assert!((0.0..=1.0).contains(&a));
            let pp: Vec<usize> = p.iter().map(|&c| perm[c]).collect();
            let tt: Vec<usize> = t.iter().map(|&c| perm[c]).collect();
            prop_assert!((a - macro_f1(&pp, &tt, 4).unwrap()).abs() < 1e-12);
        }
    }
}
