//! SemanticPush: counterexamples sampled from manipulated topic mixtures.

use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use super::{Counterexample, Provenance, StrategyConfig};
use crate::corpus::WordId;
use crate::error::{Error, Result};
use crate::explainers::Explanation;
use crate::oracle::ClassKnowledge;
use crate::rng::derive;
use crate::topic_model::{LdaModel, TopicAssignment, TopicMixture};

/// Renormalises a non-negative vector onto the simplex. `None` for an all-zero,
/// negative or non-finite input.
pub fn psi(weights: &[f64]) -> Option<Vec<f64>> {
    if weights.iter().any(|w| !w.is_finite() || *w < 0.0) {
        return None;
    }
    let sum: f64 = weights.iter().sum();
    if sum <= 0.0 {
        return None;
    }
    Some(weights.iter().map(|w| w / sum).collect())
}

/// What the correction does to one topic's probability.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TopicCase {
    Keep,
    Increase,
    Zero,
}

/// Case of a topic given its explanation weight (`None`: not in the
/// explanation) and its Gold Standard weight (`None`: no entry).
pub fn topic_case(explanation_weight: Option<f64>, gs_weight: Option<f64>) -> TopicCase {
    match (explanation_weight, gs_weight) {
        (Some(_), None) => TopicCase::Zero,
        (Some(z), Some(g)) if z < 0.0 && g > 0.0 => TopicCase::Increase,
        (None, Some(g)) if g > 0.0 => TopicCase::Increase,
        _ => TopicCase::Keep,
    }
}

fn check_lambda(lambda: f64) -> Result<()> {
    if (0.0..=1.0).contains(&lambda) {
        Ok(())
    } else {
        Err(Error::InvalidLambda(lambda))
    }
}

fn positive_vector(knowledge: &ClassKnowledge, k: usize) -> Vec<f64> {
    let mut v = vec![0.0; k];
    for (t, w) in knowledge.positive() {
        if (t as usize) < k {
            v[t as usize] = w;
        }
    }
    v
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorrectedMixture {
    pub cases: Vec<TopicCase>,
    /// θ̂ before renormalisation.
    pub unnormalized: Vec<f64>,
    pub mixture: TopicMixture,
    /// Every topic was zeroed and the mixture fell back to ψ(GS_y⁺).
    pub fallback: bool,
}

/// Applies the per-topic case table to `theta` and renormalises.
pub fn correction_mixture(
    theta: &TopicMixture,
    explanation: &Explanation,
    gs_y: &ClassKnowledge,
    lambda: f64,
) -> Result<CorrectedMixture> {
    check_lambda(lambda)?;
    let mut cases = Vec::with_capacity(theta.len());
    let unnormalized: Vec<f64> = theta
        .0
        .iter()
        .enumerate()
        .map(|(t, &p)| {
            let g = gs_y.weight(t as u32);
            let case = topic_case(explanation.weight(t as u32), g);
            cases.push(case);
            match case {
                TopicCase::Keep => p,
                TopicCase::Increase => p + lambda * g.unwrap_or(0.0) + (1.0 - lambda) * p,
                TopicCase::Zero => 0.0,
            }
        })
        .collect();
    let (mixture, fallback) = match psi(&unnormalized) {
        Some(m) => (m, false),
        None => (psi(&positive_vector(gs_y, theta.len())).ok_or(Error::DegenerateMixture)?, true),
    };
    Ok(CorrectedMixture { cases, unnormalized, mixture: TopicMixture(mixture), fallback })
}

/// Samples `length` tokens from the corrected mixture of an instance.
#[allow(clippy::too_many_arguments)]
pub fn semantic_correction(
    theta: &TopicMixture,
    gs_y: &ClassKnowledge,
    explanation: &Explanation,
    lambda: f64,
    lda: &LdaModel,
    length: usize,
    seed: u64,
) -> Result<(Vec<WordId>, bool)> {
    let c = correction_mixture(theta, explanation, gs_y, lambda)?;
    Ok((lda.sample_document(&c.mixture, length, seed)?, c.fallback))
}

/// `λ·ψ(C_add) + (1−λ)·ψ(x_add)` where `C_add` holds the positive Gold
/// Standard topics missing from the explanation's positive part and `x_add`
/// the instance's own probabilities on those topics. `None` when `C_add` is
/// empty.
pub fn completion_mixture(
    theta: &TopicMixture,
    explanation: &Explanation,
    gs_y: &ClassKnowledge,
    lambda: f64,
) -> Result<Option<TopicMixture>> {
    check_lambda(lambda)?;
    let k = theta.len();
    let mut c_add = vec![0.0; k];
    let mut x_add = vec![0.0; k];
    for (t, w) in gs_y.positive() {
        let ti = t as usize;
        if ti < k && !matches!(explanation.weight(t), Some(z) if z > 0.0) {
            c_add[ti] = w;
            x_add[ti] = theta.0[ti];
        }
    }
    let Some(global) = psi(&c_add) else {
        return Ok(None);
    };
    let mixed = match psi(&x_add) {
        Some(local) => global.iter().zip(&local).map(|(g, l)| lambda * g + (1.0 - lambda) * l).collect(),
        None => global,
    };
    Ok(Some(TopicMixture(mixed)))
}

/// Tokens for the concepts the classifier forgot to learn; empty when there
/// are none.
#[allow(clippy::too_many_arguments)]
pub fn semantic_completion(
    theta: &TopicMixture,
    gs_y: &ClassKnowledge,
    explanation: &Explanation,
    lambda: f64,
    lda: &LdaModel,
    n_tokens: usize,
    seed: u64,
) -> Result<Vec<WordId>> {
    match completion_mixture(theta, explanation, gs_y, lambda)? {
        Some(m) if n_tokens > 0 => lda.sample_document(&m, n_tokens, seed),
        _ => Ok(Vec::new()),
    }
}

/// Everything SemanticPush needs about one answered query.
#[derive(Debug, Clone, Copy)]
pub struct PushInput<'a> {
    pub tokens: &'a [WordId],
    pub assignment: &'a TopicAssignment,
    pub theta: &'a TopicMixture,
    pub y: usize,
    pub y_hat: usize,
    /// topicLIME explanation for the true class.
    pub explanation_y: &'a Explanation,
    /// topicLIME explanation for the predicted class; required when `y ≠ ŷ`.
    pub explanation_y_hat: Option<&'a Explanation>,
    pub gs_y: &'a ClassKnowledge,
    pub gs_y_hat: Option<&'a ClassKnowledge>,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct PushOutcome {
    pub counterexamples: Vec<Counterexample>,
    /// A corrected mixture fell back to ψ(GS⁺).
    pub fallback: bool,
}

pub fn semantic_push(input: &PushInput<'_>, lda: &LdaModel, cfg: &StrategyConfig) -> Result<PushOutcome> {
    check_lambda(cfg.lambda)?;
    let mut out = PushOutcome::default();
    if input.y == input.y_hat {
        let dest: Vec<u32> = input.explanation_y.feature_ids().filter(|&t| !input.gs_y.contains(t)).collect();
        if dest.is_empty() {
            return Ok(out);
        }
        let kept: Vec<WordId> = input
            .tokens
            .iter()
            .zip(&input.assignment.0)
            .filter(|(_, &z)| !dest.contains(&(z as u32)))
            .map(|(&w, _)| w)
            .collect();
        let removed = input.tokens.len() - kept.len();
        let mixture = completion_mixture(input.theta, input.explanation_y, input.gs_y, cfg.lambda)?;
        for i in 0..cfg.m {
            let mut tokens = kept.clone();
            if let (Some(m), true) = (&mixture, removed > 0) {
                tokens.extend(lda.sample_document(m, removed, derive(cfg.seed, &[1, i as u64]))?);
            }
            if !tokens.is_empty() {
                out.counterexamples.push(Counterexample { tokens, label: input.y, provenance: Provenance::SemanticCompletion });
            }
        }
        return Ok(out);
    }
    let (Some(expl_hat), Some(gs_hat)) = (input.explanation_y_hat, input.gs_y_hat) else {
        return Err(Error::InvalidConfig("a false prediction needs the explanation and knowledge of the predicted class".into()));
    };
    let n_true = cfg.m.div_ceil(2);
    let parts = [
        (input.y, input.explanation_y, input.gs_y, n_true, Provenance::SemanticCorrectionTrue),
        (input.y_hat, expl_hat, gs_hat, cfg.m - n_true, Provenance::SemanticCorrectionPred),
    ];
    for (tag, (label, explanation, gs, count, provenance)) in parts.into_iter().enumerate() {
        if count == 0 {
            continue;
        }
        let c = correction_mixture(input.theta, explanation, gs, cfg.lambda)?;
        out.fallback |= c.fallback;
        for i in 0..count {
            let tokens = lda.sample_document(&c.mixture, cfg.counterexample_length, derive(cfg.seed, &[2 + tag as u64, i as u64]))?;
            out.counterexamples.push(Counterexample { tokens, label, provenance });
        }
    }
    Ok(out)
}
