//! Probabilistic multi-class base learner.
//!
//! [`Classifier`] is the contract the loop, the explainers and the metrics
//! rely on; [`SoftmaxRegression`] is the shipped implementation, trained by
//! full-batch gradient descent with backtracking line search (L2) or by the
//! proximal-gradient variant of the same loop (L1, used for sparse Gold
//! Standards).

use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::corpus::{bow_of, WordId};
use crate::error::{Error, Result};

/// Sparse feature vector: sorted (feature, value) pairs.
pub type SparseRow = Vec<(WordId, f64)>;

pub fn row_from_tokens(tokens: &[WordId]) -> SparseRow {
    bow_of(tokens).into_iter().map(|(w, c)| (w, c as f64)).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassDistribution(pub Vec<f64>);

impl ClassDistribution {
    pub fn uniform(n: usize) -> Self {
        Self(vec![1.0 / n as f64; n])
    }

    /// Index of the largest probability; ties go to the smallest index.
    pub fn argmax(&self) -> usize {
        let mut best = 0;
        for (i, &p) in self.0.iter().enumerate() {
            if p > self.0[best] {
                best = i;
            }
        }
        best
    }

    pub fn max(&self) -> f64 {
        self.0[self.argmax()]
    }

    pub fn prob(&self, class: usize) -> f64 {
        self.0[class]
    }

    /// Numerically stable softmax of raw scores.
    pub fn softmax(scores: &[f64]) -> Self {
        let m = scores.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let mut p: Vec<f64> = scores.iter().map(|&s| libm::exp(s - m)).collect();
        let z: f64 = p.iter().sum();
        p.iter_mut().for_each(|x| *x /= z);
        Self(p)
    }
}

/// A fitted probabilistic classifier over bag-of-words rows.
pub trait Classifier {
    fn num_classes(&self) -> usize;
    fn num_features(&self) -> usize;
    fn predict_proba(&self, row: &[(WordId, f64)]) -> Result<ClassDistribution>;

    fn predict(&self, row: &[(WordId, f64)]) -> Result<usize> {
        Ok(self.predict_proba(row)?.argmax())
    }

    fn predict_proba_tokens(&self, tokens: &[WordId]) -> Result<ClassDistribution> {
        self.predict_proba(&row_from_tokens(tokens))
    }
}

/// Labeled bag-of-words rows.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct TrainSet {
    pub rows: Vec<SparseRow>,
    pub labels: Vec<usize>,
    pub num_features: usize,
    pub num_classes: usize,
}

impl TrainSet {
    pub fn new(num_features: usize, num_classes: usize) -> Self {
        Self { rows: Vec::new(), labels: Vec::new(), num_features, num_classes }
    }

    pub fn push_tokens(&mut self, tokens: &[WordId], label: usize) {
        self.push(row_from_tokens(tokens), label);
    }

    pub fn push(&mut self, row: SparseRow, label: usize) {
        self.rows.push(row);
        self.labels.push(label);
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn classes_present(&self) -> usize {
        let mut seen = vec![false; self.num_classes];
        self.labels.iter().for_each(|&l| seen[l] = true);
        seen.iter().filter(|&&s| s).count()
    }

    pub fn validate(&self) -> Result<()> {
        if self.rows.len() != self.labels.len() {
            return Err(Error::LengthMismatch { left: self.rows.len(), right: self.labels.len() });
        }
        if let Some(&l) = self.labels.iter().find(|&&l| l >= self.num_classes) {
            return Err(Error::DimensionMismatch { expected: self.num_classes, got: l + 1 });
        }
        for row in &self.rows {
            if let Some(&(f, _)) = row.iter().find(|(f, _)| *f as usize >= self.num_features) {
                return Err(Error::DimensionMismatch { expected: self.num_features, got: f as usize + 1 });
            }
        }
        if self.classes_present() < 2 {
            return Err(Error::SingleClassTrainSet);
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "strength", rename_all = "snake_case")]
pub enum Penalty {
    L2(f64),
    L1(f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FitParams {
    pub penalty: Penalty,
    pub max_epochs: usize,
    pub tolerance: f64,
    /// Accepted for interface stability; full-batch descent from a zero start
    /// uses no randomness.
    pub seed: u64,
}

impl Default for FitParams {
    fn default() -> Self {
        Self { penalty: Penalty::L2(0.01), max_epochs: 300, tolerance: 1e-6, seed: 0 }
    }
}

/// Multinomial logistic regression. Weights are stored feature-major
/// (`weights[f * classes + c]`).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SoftmaxRegression {
    pub num_classes: usize,
    pub num_features: usize,
    pub weights: Vec<f64>,
    pub bias: Vec<f64>,
}

impl SoftmaxRegression {
    pub fn zeros(num_features: usize, num_classes: usize) -> Self {
        Self { num_classes, num_features, weights: vec![0.0; num_features * num_classes], bias: vec![0.0; num_classes] }
    }

    pub fn weight(&self, feature: usize, class: usize) -> f64 {
        self.weights[feature * self.num_classes + class]
    }

    fn scores_into(&self, row: &[(WordId, f64)], out: &mut [f64]) {
        out.copy_from_slice(&self.bias);
        for &(f, x) in row {
            let base = f as usize * self.num_classes;
            for (o, w) in out.iter_mut().zip(&self.weights[base..base + self.num_classes]) {
                *o += w * x;
            }
        }
    }

    pub fn fit(train: &TrainSet, params: &FitParams) -> Result<Self> {
        Ok(Self::fit_with_trace(train, params)?.0)
    }

    /// Fits and returns the objective value after every accepted step
    /// (first entry: the starting point).
    pub fn fit_with_trace(train: &TrainSet, params: &FitParams) -> Result<(Self, Vec<f64>)> {
        train.validate()?;
        let mut model = Self::zeros(train.num_features, train.num_classes);
        let (l2, l1) = match params.penalty {
            Penalty::L2(s) => (s, 0.0),
            Penalty::L1(s) => (0.0, s),
        };
        let mut grad_w = vec![0.0; model.weights.len()];
        let mut grad_b = vec![0.0; model.num_classes];
        let mut smooth = smooth_loss_and_grad(&model, train, l2, Some((&mut grad_w, &mut grad_b)));
        let mut trace = vec![smooth + l1 * l1_norm(&model.weights)];
        let mut step = 1.0;
        let mut trial = model.clone();
        for _ in 0..params.max_epochs {
            if l1 == 0.0 {
                let gnorm = grad_w.iter().chain(&grad_b).fold(0.0f64, |m, g| m.max(g.abs()));
                if gnorm < params.tolerance {
                    break;
                }
            }
            let sq: f64 = grad_w.iter().chain(&grad_b).map(|g| g * g).sum();
            step *= 2.0;
            let mut accepted = false;
            for _ in 0..60 {
                for ((t, w), g) in trial.weights.iter_mut().zip(&model.weights).zip(&grad_w) {
                    *t = soft_threshold(w - step * g, step * l1);
                }
                for ((t, b), g) in trial.bias.iter_mut().zip(&model.bias).zip(&grad_b) {
                    *t = b - step * g;
                }
                let f_trial = smooth_loss_and_grad(&trial, train, l2, None);
                let ok = if l1 == 0.0 {
                    f_trial <= smooth - 0.5 * step * sq
                } else {
                    let mut lin = 0.0;
                    let mut quad = 0.0;
                    for ((t, w), g) in trial.weights.iter().zip(&model.weights).zip(&grad_w) {
                        lin += g * (t - w);
                        quad += (t - w) * (t - w);
                    }
                    for ((t, b), g) in trial.bias.iter().zip(&model.bias).zip(&grad_b) {
                        lin += g * (t - b);
                        quad += (t - b) * (t - b);
                    }
                    f_trial <= smooth + lin + quad / (2.0 * step)
                };
                if ok {
                    accepted = true;
                    break;
                }
                step *= 0.5;
            }
            if !accepted {
                break;
            }
            let max_move = trial
                .weights
                .iter()
                .zip(&model.weights)
                .chain(trial.bias.iter().zip(&model.bias))
                .fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
            core::mem::swap(&mut model, &mut trial);
            smooth = smooth_loss_and_grad(&model, train, l2, Some((&mut grad_w, &mut grad_b)));
            trace.push(smooth + l1 * l1_norm(&model.weights));
            if l1 > 0.0 && max_move / step < params.tolerance {
                break;
            }
        }
        Ok((model, trace))
    }
}

fn soft_threshold(x: f64, t: f64) -> f64 {
    if t == 0.0 {
        x
    } else if x > t {
        x - t
    } else if x < -t {
        x + t
    } else {
        0.0
    }
}

fn l1_norm(w: &[f64]) -> f64 {
    w.iter().map(|x| x.abs()).sum()
}

/// Mean cross-entropy plus `l2 / 2 · |W|²` (bias unpenalized); fills the
/// gradient when buffers are supplied.
pub fn smooth_loss_and_grad(
    model: &SoftmaxRegression,
    train: &TrainSet,
    l2: f64,
    grad: Option<(&mut [f64], &mut [f64])>,
) -> f64 {
    let c = model.num_classes;
    let n = train.rows.len() as f64;
    let mut scores = vec![0.0; c];
    let mut loss = 0.0;
    let mut grad = grad;
    if let Some((gw, gb)) = grad.as_mut() {
        gw.iter_mut().for_each(|g| *g = 0.0);
        gb.iter_mut().for_each(|g| *g = 0.0);
    }
    for (row, &y) in train.rows.iter().zip(&train.labels) {
        model.scores_into(row, &mut scores);
        let m = scores.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let z: f64 = scores.iter().map(|&s| libm::exp(s - m)).sum();
        let lse = m + libm::log(z);
        loss += lse - scores[y];
        if let Some((gw, gb)) = grad.as_mut() {
            for k in 0..c {
                let p = libm::exp(scores[k] - lse);
                let r = (p - if k == y { 1.0 } else { 0.0 }) / n;
                gb[k] += r;
                for &(f, x) in row {
                    gw[f as usize * c + k] += r * x;
                }
            }
        }
    }
    let reg: f64 = model.weights.iter().map(|w| w * w).sum::<f64>() * 0.5 * l2;
    if let Some((gw, _)) = grad.as_mut() {
        for (g, w) in gw.iter_mut().zip(&model.weights) {
            *g += l2 * w;
        }
    }
    loss / n + reg
}

impl Classifier for SoftmaxRegression {
    fn num_classes(&self) -> usize {
        self.num_classes
    }

    fn num_features(&self) -> usize {
        self.num_features
    }

    fn predict_proba(&self, row: &[(WordId, f64)]) -> Result<ClassDistribution> {
        if let Some(&(f, _)) = row.iter().find(|(f, _)| *f as usize >= self.num_features) {
            return Err(Error::DimensionMismatch { expected: self.num_features, got: f as usize + 1 });
        }
        let mut scores = vec![0.0; self.num_classes];
        self.scores_into(row, &mut scores);
        Ok(ClassDistribution::softmax(&scores))
    }
}
