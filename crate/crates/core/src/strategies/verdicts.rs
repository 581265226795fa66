//! Per-feature verdicts: the vocabulary a human oracle answers in.
//!
//! Each verdict maps onto one branch of the topic case table:
//! `irrelevant` zeroes a used feature, `relevant_wrong_polarity` and
//! `missing_concept` raise it, `relevant_used_correctly` keeps it. Verdicts
//! are turned into Gold Standard rows restricted to the features that can
//! influence a strategy, so a client answering truthfully from the Gold
//! Standard yields the same counterexamples as the simulated oracle.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use super::session::{feedback_with_knowledge, Query};
use crate::error::{Error, Result};
use crate::oracle::{ClassKnowledge, CorrectionFeedback, FeedbackSource, GoldStandard};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    RelevantUsedCorrectly,
    Irrelevant,
    RelevantWrongPolarity,
    MissingConcept,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FeatureVerdict {
    /// Class whose explanation (or knowledge) the verdict concerns.
    pub class: usize,
    pub feature: u32,
    pub verdict: Verdict,
    /// Importance magnitude; 1 when omitted.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub weight: Option<f64>,
}

fn sign(x: f64) -> f64 {
    if x < 0.0 {
        -1.0
    } else {
        1.0
    }
}

/// Translates verdicts on a pending query into feedback. `num_features` bounds
/// the ids a missing concept may reference.
pub fn feedback_from_verdicts(
    query: &Query,
    true_label: usize,
    verdicts: &[FeatureVerdict],
    num_classes: usize,
    num_features: usize,
) -> Result<CorrectionFeedback> {
    let bad = |msg: alloc::string::String| Err(Error::InvalidCorrection(msg));
    if true_label >= num_classes {
        return bad(format!("true label {true_label} out of range"));
    }
    let mut rows: BTreeMap<usize, Vec<(u32, f64)>> = BTreeMap::new();
    rows.insert(true_label, Vec::new());
    let mut seen = Vec::new();
    for v in verdicts {
        if v.class >= num_classes {
            return bad(format!("class {} out of range", v.class));
        }
        if seen.contains(&(v.class, v.feature)) {
            return bad(format!("duplicate verdict for feature {} of class {}", v.feature, v.class));
        }
        seen.push((v.class, v.feature));
        let magnitude = match v.weight {
            None => 1.0,
            Some(w) if w.is_finite() && w > 0.0 => w,
            Some(w) => return bad(format!("weight {w} must be positive and finite")),
        };
        let served = query.explanation_for(v.class).and_then(|e| e.weight(v.feature));
        let entry = match (v.verdict, served) {
            (Verdict::MissingConcept, _) if (v.feature as usize) < num_features => Some(magnitude),
            (Verdict::MissingConcept, _) => return bad(format!("feature {} out of range", v.feature)),
            (_, None) => return bad(format!("feature {} was not served for class {}", v.feature, v.class)),
            (Verdict::Irrelevant, Some(_)) => None,
            (Verdict::RelevantUsedCorrectly, Some(z)) => Some(sign(z) * magnitude),
            (Verdict::RelevantWrongPolarity, Some(z)) => Some(-sign(z) * magnitude),
        };
        let row = rows.entry(v.class).or_default();
        if let Some(w) = entry {
            row.push((v.feature, w));
        }
    }
    let knowledge = rows.into_iter().map(|(c, r)| (c, ClassKnowledge::new(r))).collect();
    Ok(feedback_with_knowledge(query, true_label, knowledge, FeedbackSource::Human))
}

/// Verdicts a truthful expert holding `gs` gives on a query whose true class
/// is `y`: a verdict for every served feature of the true and predicted
/// classes, and a missing concept for every positive Gold Standard feature
/// that was not served.
pub fn simulated_verdicts(query: &Query, gs: Option<&GoldStandard>, y: usize) -> Vec<FeatureVerdict> {
    let Some(gs) = gs else {
        return Vec::new();
    };
    let mut classes = alloc::vec![y];
    if query.y_hat != y {
        classes.push(query.y_hat);
    }
    let mut out = Vec::new();
    for class in classes {
        let knowledge = gs.class(class);
        let explanation = query.explanation_for(class);
        if let Some(e) = explanation {
            for &(feature, z) in &e.features {
                let (verdict, weight) = match knowledge.weight(feature) {
                    None => (Verdict::Irrelevant, None),
                    Some(g) if (g > 0.0) == (z >= 0.0) => (Verdict::RelevantUsedCorrectly, Some(g.abs())),
                    Some(g) => (Verdict::RelevantWrongPolarity, Some(g.abs())),
                };
                out.push(FeatureVerdict { class, feature, verdict, weight });
            }
        }
        for (feature, w) in knowledge.positive() {
            if !explanation.is_some_and(|e| e.contains(feature)) {
                out.push(FeatureVerdict { class, feature, verdict: Verdict::MissingConcept, weight: Some(w) });
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::explainers::{Explanation, FeatureKind};
    use crate::learner::ClassDistribution;
    use alloc::string::String;
    use alloc::vec;

    fn query(explanations: Vec<(usize, Vec<(u32, f64)>)>, y_hat: usize) -> Query {
        Query {
            iteration: 1,
            doc: 0,
            doc_id: String::from("d0"),
            y_hat,
            probabilities: ClassDistribution(vec![0.5, 0.5]),
            explanations: explanations
                .into_iter()
                .map(|(c, f)| Explanation {
                    target_class: c,
                    kind: FeatureKind::Topic,
                    features: f,
                    intercept: 0.0,
                    surrogate_r2: 0.0,
                    local_prediction: 0.0,
                    model_prediction: 0.0,
                })
                .collect(),
            theta: None,
            assignment: None,
        }
    }

    fn v(class: usize, feature: u32, verdict: Verdict, weight: Option<f64>) -> FeatureVerdict {
        FeatureVerdict { class, feature, verdict, weight }
    }

    #[test]
    fn verdicts_map_to_signed_knowledge() {
        let q = query(vec![(0, vec![(1, 0.3), (2, -0.2), (3, 0.1), (4, -0.05)])], 0);
        let fb = feedback_from_verdicts(
            &q,
            0,
            &[
                v(0, 1, Verdict::RelevantUsedCorrectly, Some(0.5)),
                v(0, 2, Verdict::RelevantWrongPolarity, Some(0.4)),
                v(0, 3, Verdict::Irrelevant, None),
                v(0, 4, Verdict::RelevantWrongPolarity, None),
                v(0, 9, Verdict::MissingConcept, Some(0.2)),
            ],
            2,
            10,
        )
        .unwrap();
        let k = fb.knowledge_for(0).unwrap();
        assert_eq!(k.features, [(4, 1.0), (1, 0.5), (2, 0.4), (9, 0.2)]);
        assert_eq!(fb.destructive, [3]);
        assert_eq!(fb.source, FeedbackSource::Human);
    }

    #[test]
    fn malformed_verdicts_are_rejected() {
        let q = query(vec![(0, vec![(1, 0.3)])], 0);
        let err = |vs: &[FeatureVerdict]| feedback_from_verdicts(&q, 0, vs, 2, 10).is_err();
        assert!(err(&[v(0, 7, Verdict::Irrelevant, None)]));
        assert!(err(&[v(0, 10, Verdict::MissingConcept, None)]));
        assert!(err(&[v(5, 1, Verdict::Irrelevant, None)]));
        assert!(err(&[v(0, 1, Verdict::Irrelevant, None), v(0, 1, Verdict::Irrelevant, None)]));
        assert!(err(&[v(0, 1, Verdict::RelevantUsedCorrectly, Some(-1.0))]));
        assert!(feedback_from_verdicts(&q, 3, &[], 2, 10).is_err());
    }

    #[test]
    fn truthful_verdicts_reproduce_relevant_knowledge() {
        let gs = GoldStandard {
            kind: FeatureKind::Topic,
            per_class: vec![
                ClassKnowledge::new([(0, 0.7), (1, -0.3), (2, 0.2), (5, -0.9)]),
                ClassKnowledge::new([(3, 0.4), (4, -0.1)]),
            ],
            source_f1: 0.0,
        };
        let q = query(vec![(0, vec![(0, 0.2), (1, 0.1), (6, -0.3)]), (1, vec![(4, 0.2), (3, -0.1)])], 1);
        let verdicts = simulated_verdicts(&q, Some(&gs), 0);
        let fb = feedback_from_verdicts(&q, 0, &verdicts, 2, 7).unwrap();
        // class 0 keeps its served entries and its positive part; the unserved negative topic 5 is dropped
        assert_eq!(fb.knowledge_for(0).unwrap().features, [(0, 0.7), (2, 0.2), (1, -0.3)]);
        assert_eq!(fb.knowledge_for(1).unwrap(), gs.class(1));
        assert_eq!(fb.destructive, [6]);
    }
}
