//! The explain → correct → retrain loop, steppable one answer at a time so a
//! human oracle can drive it as well as the simulated one.

use alloc::string::String;
use alloc::sync::Arc;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use super::{caipi_constructive, caipi_destructive, select_query, semantic_push, Counterexample, PushInput, Strategy, StrategyConfig};
use crate::corpus::{LabeledCorpus, WordId};
use crate::error::{Error, Result};
use crate::explainers::{explain, Explanation, InterpretableSpace, PerturbationConfig};
use crate::learner::{Classifier, ClassDistribution, FitParams, SoftmaxRegression, TrainSet};
use crate::metrics::{avg_classification_margin, explanatory_accuracy, macro_f1, MetricSeries};
use crate::oracle::{destructive_set, ClassKnowledge, CorrectionFeedback, FeedbackSource, GoldStandard};
use crate::rng::derive;
use crate::topic_model::{InferParams, LdaModel, TopicAssignment, TopicMixture};

const TAG_INFER: u64 = 0x1f;
const TAG_EXPLAIN: u64 = 0xe1;
const TAG_COUNTER: u64 = 0xc0;
const TAG_ACCURACY: u64 = 0xea;

/// Read-only inputs shared by every strategy of one experiment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LoopResources {
    pub corpus: LabeledCorpus,
    pub lda: LdaModel,
    pub gs_word: GoldStandard,
    pub gs_topic: GoldStandard,
    pub test: Vec<usize>,
}

impl LoopResources {
    /// The Gold Standard whose feature kind the strategy's explanations use.
    pub fn gold_standard(&self, strategy: Strategy) -> Option<&GoldStandard> {
        match strategy {
            Strategy::ActiveLearning => None,
            Strategy::CaipiD | Strategy::CaipiDc => Some(&self.gs_word),
            Strategy::SemanticPush => Some(&self.gs_topic),
        }
    }

    /// Topic mixture and token assignment of a corpus document.
    pub fn infer(&self, doc: usize, params: &InferParams, seed: u64) -> (TopicMixture, TopicAssignment) {
        self.lda.infer(&self.corpus.documents[doc].tokens, params, derive(seed, &[TAG_INFER, doc as u64]))
    }
}

/// Iterations between margin and explanatory-accuracy measurements; macro-F1
/// is measured every iteration. Zero disables a measure except at the final
/// iteration.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MetricCadence {
    pub margin: usize,
    pub explanatory_accuracy: usize,
}

impl Default for MetricCadence {
    fn default() -> Self {
        Self { margin: 10, explanatory_accuracy: 20 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LoopConfig {
    pub strategy: Strategy,
    pub iterations: usize,
    pub params: StrategyConfig,
    pub fit: FitParams,
    pub infer: InferParams,
    pub lime_samples: usize,
    pub topiclime_samples: usize,
    pub cadence: MetricCadence,
    pub accuracy_fraction: f64,
    pub accuracy_samples: usize,
}

impl LoopConfig {
    pub fn new(strategy: Strategy, iterations: usize, params: StrategyConfig) -> Self {
        Self {
            strategy,
            iterations,
            params,
            fit: FitParams::default(),
            infer: InferParams::default(),
            lime_samples: 1000,
            topiclime_samples: 500,
            cadence: MetricCadence::default(),
            accuracy_fraction: 0.1,
            accuracy_samples: 1000,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.params.validate()?;
        if self.iterations == 0 {
            return Err(Error::InvalidConfig("the iteration budget must be at least 1".into()));
        }
        if !(self.accuracy_fraction > 0.0 && self.accuracy_fraction <= 1.0) {
            return Err(Error::InvalidConfig("accuracy_fraction must lie in (0, 1]".into()));
        }
        Ok(())
    }
}

/// What is presented to the oracle.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Query {
    pub iteration: usize,
    /// Corpus index of the queried document.
    pub doc: usize,
    pub doc_id: String,
    pub y_hat: usize,
    pub probabilities: ClassDistribution,
    /// topicLIME for every class (SemanticPush), LIME for ŷ (CAIPI), none
    /// (active learning).
    pub explanations: Vec<Explanation>,
    pub theta: Option<TopicMixture>,
    pub assignment: Option<TopicAssignment>,
}

impl Query {
    pub fn explanation_for(&self, class: usize) -> Option<&Explanation> {
        self.explanations.iter().find(|e| e.target_class == class)
    }
}

/// Feedback whose destructive set is derived from the explanation presented
/// for the true class.
pub(crate) fn feedback_with_knowledge(
    query: &Query,
    y: usize,
    knowledge: Vec<(usize, ClassKnowledge)>,
    source: FeedbackSource,
) -> CorrectionFeedback {
    let empty = ClassKnowledge::default();
    let known = knowledge.iter().find(|(c, _)| *c == y).map(|(_, k)| k).unwrap_or(&empty);
    let destructive = query.explanation_for(y).map(|e| destructive_set(e, known)).unwrap_or_default();
    CorrectionFeedback { true_label: y, destructive, knowledge, source }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MetricSnapshot {
    pub iteration: usize,
    pub train_size: usize,
    pub pool_size: usize,
    pub macro_f1: f64,
    pub margin: Option<f64>,
    pub explanatory_accuracy: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IterationRecord {
    pub iteration: usize,
    pub query_doc: usize,
    pub query_id: String,
    pub y_hat: usize,
    pub y: usize,
    pub explanations: Vec<Explanation>,
    pub correction: CorrectionFeedback,
    pub counterexamples: Vec<Counterexample>,
    /// A corrected topic mixture degenerated and fell back to ψ(GS⁺).
    pub fallback: bool,
    pub metrics: MetricSnapshot,
}

/// Answers queries.
pub trait Oracle {
    fn answer(&mut self, query: &Query, resources: &LoopResources, strategy: Strategy) -> Result<CorrectionFeedback>;
}

/// Answers from the corpus labels and the Gold Standard matching the strategy.
#[derive(Debug, Clone, Copy, Default)]
pub struct SimulatedOracle;

impl Oracle for SimulatedOracle {
    fn answer(&mut self, query: &Query, resources: &LoopResources, strategy: Strategy) -> Result<CorrectionFeedback> {
        let y = resources.corpus.labels[query.doc];
        let mut knowledge = Vec::new();
        if let Some(gs) = resources.gold_standard(strategy) {
            knowledge.push((y, gs.class(y).clone()));
            if query.y_hat != y {
                knowledge.push((query.y_hat, gs.class(query.y_hat).clone()));
            }
        }
        Ok(feedback_with_knowledge(query, y, knowledge, FeedbackSource::Simulated))
    }
}

/// State of one strategy's interaction loop.
#[derive(Debug, Clone)]
pub struct InteractiveLoop {
    resources: Arc<LoopResources>,
    cfg: LoopConfig,
    train: TrainSet,
    pool: Vec<usize>,
    model: SoftmaxRegression,
    pending: Option<Query>,
    records: Vec<IterationRecord>,
    baseline: MetricSnapshot,
    series: [MetricSeries; 3],
}

impl InteractiveLoop {
    /// Fits the initial model on `train` and poses the first query.
    pub fn new(resources: Arc<LoopResources>, cfg: LoopConfig, train: &[usize], pool: &[usize]) -> Result<Self> {
        cfg.validate()?;
        let corpus = &resources.corpus;
        let mut set = TrainSet::new(corpus.vocabulary.len(), corpus.num_classes());
        for &i in train {
            set.push_tokens(&corpus.documents[i].tokens, corpus.labels[i]);
        }
        let model = SoftmaxRegression::fit(&set, &cfg.fit)?;
        let mut pool = pool.to_vec();
        pool.sort_unstable();
        pool.dedup();
        let mut this = Self {
            resources,
            cfg,
            train: set,
            pool,
            model,
            pending: None,
            records: Vec::new(),
            baseline: MetricSnapshot {
                iteration: 0,
                train_size: 0,
                pool_size: 0,
                macro_f1: 0.0,
                margin: None,
                explanatory_accuracy: None,
            },
            series: [
                MetricSeries::new("macro_f1"),
                MetricSeries::new("margin"),
                MetricSeries::new("explanatory_accuracy"),
            ],
        };
        this.baseline = this.snapshot(0, true)?;
        this.pending = this.next_query()?;
        Ok(this)
    }

    pub fn config(&self) -> &LoopConfig {
        &self.cfg
    }

    pub fn resources(&self) -> &Arc<LoopResources> {
        &self.resources
    }

    pub fn model(&self) -> &SoftmaxRegression {
        &self.model
    }

    pub fn pending_query(&self) -> Option<&Query> {
        self.pending.as_ref()
    }

    pub fn is_finished(&self) -> bool {
        self.pending.is_none()
    }

    pub fn records(&self) -> &[IterationRecord] {
        &self.records
    }

    pub fn baseline(&self) -> &MetricSnapshot {
        &self.baseline
    }

    /// macro-F1, margin and explanatory-accuracy curves, baseline included.
    pub fn series(&self) -> &[MetricSeries] {
        &self.series
    }

    pub fn train_size(&self) -> usize {
        self.train.len()
    }

    pub fn pool_size(&self) -> usize {
        self.pool.len()
    }

    fn next_query(&self) -> Result<Option<Query>> {
        if self.records.len() >= self.cfg.iterations || self.pool.is_empty() {
            return Ok(None);
        }
        let res = &*self.resources;
        let docs = &res.corpus.documents;
        let doc = select_query(&self.model, self.pool.iter().map(|&i| (i, docs[i].tokens.as_slice())))?;
        let tokens = &docs[doc].tokens;
        let probabilities = self.model.predict_proba_tokens(tokens)?;
        let y_hat = probabilities.argmax();
        let iteration = self.records.len() + 1;
        let seed = derive(self.cfg.params.seed, &[TAG_EXPLAIN, iteration as u64, doc as u64]);
        let mut theta = None;
        let mut assignment = None;
        let explanations = match self.cfg.strategy {
            Strategy::ActiveLearning => Vec::new(),
            _ if tokens.is_empty() => Vec::new(),
            Strategy::CaipiD | Strategy::CaipiDc => {
                let pc = PerturbationConfig {
                    num_samples: self.cfg.lime_samples,
                    kernel_width: None,
                    seed,
                    complexity: self.cfg.params.lime_features,
                };
                explain(&self.model, tokens, InterpretableSpace::Words, &[y_hat], &pc)?
            }
            Strategy::SemanticPush => {
                let (th, a) = res.infer(doc, &self.cfg.infer, self.cfg.params.seed);
                let pc = PerturbationConfig {
                    num_samples: self.cfg.topiclime_samples,
                    kernel_width: None,
                    seed,
                    complexity: self.cfg.params.topiclime_features,
                };
                let classes: Vec<usize> = (0..res.corpus.num_classes()).collect();
                let e = explain(&self.model, tokens, InterpretableSpace::Topics(&a), &classes, &pc)?;
                theta = Some(th);
                assignment = Some(a);
                e
            }
        };
        Ok(Some(Query {
            iteration,
            doc,
            doc_id: docs[doc].id.clone(),
            y_hat,
            probabilities,
            explanations,
            theta,
            assignment,
        }))
    }

    fn counterexamples(&self, query: &Query, feedback: &CorrectionFeedback) -> Result<(Vec<Counterexample>, bool)> {
        let res = &*self.resources;
        let tokens = &res.corpus.documents[query.doc].tokens;
        let y = feedback.true_label;
        let y_hat = query.y_hat;
        let mut params = self.cfg.params;
        params.seed = derive(params.seed, &[TAG_COUNTER, query.iteration as u64]);
        let empty = ClassKnowledge::default();
        let gs_y = feedback.knowledge_for(y).unwrap_or(&empty);
        Ok(match self.cfg.strategy {
            Strategy::ActiveLearning => (Vec::new(), false),
            Strategy::CaipiD => (caipi_destructive(tokens, y, y_hat, &feedback.destructive, params.m), false),
            Strategy::CaipiDc if y == y_hat => (caipi_destructive(tokens, y, y_hat, &feedback.destructive, params.m), false),
            Strategy::CaipiDc => (
                caipi_constructive(
                    tokens,
                    y,
                    y_hat,
                    gs_y,
                    params.local_gs_fraction,
                    params.m,
                    params.counterexample_length,
                    params.seed,
                ),
                false,
            ),
            Strategy::SemanticPush => {
                let (Some(expl_y), Some(theta), Some(assignment)) =
                    (query.explanation_for(y), query.theta.as_ref(), query.assignment.as_ref())
                else {
                    return Ok((Vec::new(), false));
                };
                let input = PushInput {
                    tokens,
                    assignment,
                    theta,
                    y,
                    y_hat,
                    explanation_y: expl_y,
                    explanation_y_hat: query.explanation_for(y_hat),
                    gs_y,
                    gs_y_hat: Some(feedback.knowledge_for(y_hat).unwrap_or(&empty)),
                };
                let out = semantic_push(&input, &res.lda, &params)?;
                (out.counterexamples, out.fallback)
            }
        })
    }

    /// Applies the oracle's answer to the pending query: generates
    /// counterexamples, grows the training set, retrains, measures and poses
    /// the next query.
    pub fn submit(&mut self, feedback: CorrectionFeedback) -> Result<&IterationRecord> {
        let query = self.pending.take().ok_or(Error::EmptyPool)?;
        let num_classes = self.resources.corpus.num_classes();
        if feedback.true_label >= num_classes {
            self.pending = Some(query);
            return Err(Error::InvalidConfig(alloc::format!("true label {} out of range", feedback.true_label)));
        }
        let (counterexamples, fallback) = match self.counterexamples(&query, &feedback) {
            Ok(v) => v,
            Err(e) => {
                self.pending = Some(query);
                return Err(e);
            }
        };
        let tokens = &self.resources.corpus.documents[query.doc].tokens;
        self.train.push_tokens(tokens, feedback.true_label);
        for c in &counterexamples {
            self.train.push_tokens(&c.tokens, c.label);
        }
        self.pool.retain(|&i| i != query.doc);
        self.model = SoftmaxRegression::fit(&self.train, &self.cfg.fit)?;
        let final_step = query.iteration >= self.cfg.iterations || self.pool.is_empty();
        let metrics = self.snapshot(query.iteration, final_step)?;
        self.records.push(IterationRecord {
            iteration: query.iteration,
            query_doc: query.doc,
            query_id: query.doc_id,
            y_hat: query.y_hat,
            y: feedback.true_label,
            explanations: query.explanations,
            correction: feedback,
            counterexamples,
            fallback,
            metrics,
        });
        self.pending = self.next_query()?;
        Ok(self.records.last().expect("just pushed"))
    }

    fn snapshot(&mut self, iteration: usize, force: bool) -> Result<MetricSnapshot> {
        let res = &*self.resources;
        let docs: Vec<&[WordId]> = res.test.iter().map(|&i| res.corpus.documents[i].tokens.as_slice()).collect();
        let labels: Vec<usize> = res.test.iter().map(|&i| res.corpus.labels[i]).collect();
        let due = |every: usize| force || (every > 0 && iteration % every == 0);
        let preds = docs.iter().map(|d| self.model.predict_proba_tokens(d).map(|p| p.argmax())).collect::<Result<Vec<_>>>()?;
        let f1 = macro_f1(&preds, &labels, res.corpus.num_classes())?;
        let margin = if due(self.cfg.cadence.margin) && !docs.is_empty() {
            Some(avg_classification_margin(&self.model, &docs, &labels)?)
        } else {
            None
        };
        let accuracy = if due(self.cfg.cadence.explanatory_accuracy) {
            match explanatory_accuracy(
                &self.model,
                &res.gs_word,
                &docs,
                &labels,
                self.cfg.accuracy_fraction,
                self.cfg.accuracy_samples,
                derive(self.cfg.params.seed, &[TAG_ACCURACY, iteration as u64]),
            ) {
                Ok(a) => Some(a.value),
                Err(Error::AllLocalGsEmpty) => None,
                Err(e) => return Err(e),
            }
        } else {
            None
        };
        self.series[0].push(iteration, f1)?;
        if let Some(m) = margin {
            self.series[1].push(iteration, m)?;
        }
        if let Some(a) = accuracy {
            self.series[2].push(iteration, a)?;
        }
        Ok(MetricSnapshot {
            iteration,
            train_size: self.train.len(),
            pool_size: self.pool.len(),
            macro_f1: f1,
            margin,
            explanatory_accuracy: accuracy,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LoopOutcome {
    pub strategy: Strategy,
    pub baseline: MetricSnapshot,
    pub records: Vec<IterationRecord>,
    pub series: Vec<MetricSeries>,
}

impl LoopOutcome {
    pub fn series(&self, name: &str) -> Option<&MetricSeries> {
        self.series.iter().find(|s| s.name == name)
    }

    pub fn from_loop(l: &InteractiveLoop) -> Self {
        Self {
            strategy: l.cfg.strategy,
            baseline: l.baseline,
            records: l.records.clone(),
            series: l.series.to_vec(),
        }
    }
}

/// Runs one strategy until the budget is spent or the pool is empty.
pub fn run_loop(
    resources: Arc<LoopResources>,
    cfg: LoopConfig,
    train: &[usize],
    pool: &[usize],
    oracle: &mut dyn Oracle,
) -> Result<LoopOutcome> {
    let mut l = InteractiveLoop::new(resources, cfg, train, pool)?;
    while let Some(query) = l.pending_query() {
        let feedback = oracle.answer(query, &l.resources, cfg.strategy)?;
        l.submit(feedback)?;
    }
    Ok(LoopOutcome::from_loop(&l))
}
