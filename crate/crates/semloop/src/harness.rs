//! Experiment orchestration and result persistence.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;
use std::sync::Arc;
use std::time::Instant;

use serde::{Deserialize, Serialize};
use semloop_core::corpus::LabeledCorpus;
use semloop_core::explainers::{explain, InterpretableSpace, PerturbationConfig};
use semloop_core::learner::{Classifier, SoftmaxRegression, TrainSet};
use semloop_core::metrics::{cri, mean_r2, mlae, ExplainedInstance};
use semloop_core::oracle::{build_topic_gs, build_word_gs, GoldStandard, GsParams};
use semloop_core::rng::derive;
use semloop_core::split::{stratified_split, Split};
use semloop_core::strategies::{
    run_loop, IterationRecord, LoopConfig, LoopOutcome, LoopResources, SimulatedOracle, Strategy,
};
use semloop_core::synthetic::news_like_corpus;
use semloop_core::topic_model::{fit_lda, select_k, KSelection, LdaModel, LdaParams};

use crate::config::{ConfigError, DatasetSpec, ExperimentConfig, SCHEMA_VERSION};
use crate::io::{load_dataset, read_json, read_jsonl, write_json, write_jsonl, IoError};

#[derive(Debug, thiserror::Error)]
pub enum HarnessError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Io(#[from] IoError),
    #[error("{context}: {source}")]
    Core { context: String, source: semloop_core::Error },
    #[error("{path}: {source}")]
    Fs { path: String, source: std::io::Error },
    #[error("{0}")]
    Results(String),
}

pub type Result<T> = std::result::Result<T, HarnessError>;

trait Context<T> {
    fn context(self, what: impl Into<String>) -> Result<T>;
}

impl<T> Context<T> for semloop_core::Result<T> {
    fn context(self, what: impl Into<String>) -> Result<T> {
        self.map_err(|source| HarnessError::Core { context: what.into(), source })
    }
}

fn fs_err(path: &Path) -> impl FnOnce(std::io::Error) -> HarnessError + '_ {
    move |source| HarnessError::Fs { path: path.display().to_string(), source }
}

const TAG_LDA: u64 = 1;
const TAG_GS: u64 = 2;
const TAG_SPLIT: u64 = 3;
const TAG_FIDELITY: u64 = 4;

pub fn load_corpus(cfg: &ExperimentConfig) -> Result<LabeledCorpus> {
    match &cfg.dataset {
        DatasetSpec::Synthetic(spec) => Ok(news_like_corpus(spec)),
        DatasetSpec::File { path, format, limit } => Ok(load_dataset(path, *format, &cfg.preprocess, *limit)?),
    }
}

/// Everything shared by the strategies of one experiment.
#[derive(Debug, Clone)]
pub struct Prepared {
    pub corpus: LabeledCorpus,
    pub k_selection: Option<KSelection>,
    pub lda: LdaModel,
    pub gs_word: GoldStandard,
    pub gs_topic: GoldStandard,
    pub split: Split,
}

impl Prepared {
    pub fn resources(&self) -> Arc<LoopResources> {
        Arc::new(LoopResources {
            corpus: self.corpus.clone(),
            lda: self.lda.clone(),
            gs_word: self.gs_word.clone(),
            gs_topic: self.gs_topic.clone(),
            test: self.split.test.clone(),
        })
    }

    pub fn setup_summary(&self, cfg: &ExperimentConfig) -> SetupSummary {
        SetupSummary {
            documents: self.corpus.len(),
            vocabulary: self.corpus.vocabulary.len(),
            classes: self.corpus.classes.clone(),
            k: self.lda.k,
            k_scores: self
                .k_selection
                .as_ref()
                .map(|s| s.reports.iter().map(|(k, r)| (*k, r.mean)).collect())
                .unwrap_or_default(),
            gs_word_f1: self.gs_word.source_f1,
            gs_topic_f1: self.gs_topic.source_f1,
            train: self.split.train.len(),
            pool: self.split.pool.len(),
            test: self.split.test.len(),
            counterexample_length: cfg.strategy_config(self.corpus.mean_length()).counterexample_length,
        }
    }
}

/// Splits the corpus, fits (or selects) the topic model and builds both Gold
/// Standards.
pub fn prepare(cfg: &ExperimentConfig) -> Result<Prepared> {
    let corpus = load_corpus(cfg)?;
    prepare_with_corpus(cfg, corpus)
}

pub fn prepare_with_corpus(cfg: &ExperimentConfig, corpus: LabeledCorpus) -> Result<Prepared> {
    corpus.validate().context("corpus")?;
    let lp = LdaParams {
        alpha: cfg.lda.alpha,
        beta: cfg.lda.beta,
        iterations: cfg.lda.iterations,
        seed: derive(cfg.seed, &[TAG_LDA]),
    };
    let (k, k_selection) = match cfg.lda.k {
        Some(k) => (k, None),
        None => {
            let sel = select_k(&corpus.documents, &corpus.vocabulary, &cfg.lda.k_candidates, &lp, &cfg.lda.coherence)
                .context("topic-count selection")?;
            (sel.best_k, Some(sel))
        }
    };
    let lda = fit_lda(&corpus.documents, &corpus.vocabulary, k, &lp).context("topic model")?;
    let gp = GsParams {
        l1: cfg.gold_standard.l1,
        max_epochs: cfg.gold_standard.max_epochs,
        holdout: cfg.gold_standard.holdout,
        seed: derive(cfg.seed, &[TAG_GS]),
    };
    let gs_word = build_word_gs(&corpus, &gp).context("word gold standard")?;
    let gs_topic = build_topic_gs(&corpus, &lda, &cfg.lda.infer, &gp).context("topic gold standard")?;
    let split = stratified_split(&corpus.labels, corpus.num_classes(), &cfg.split, derive(cfg.seed, &[TAG_SPLIT]))
        .context("split")?;
    Ok(Prepared { corpus, k_selection, lda, gs_word, gs_topic, split })
}

pub fn loop_config(cfg: &ExperimentConfig, strategy: Strategy, mean_length: usize) -> LoopConfig {
    LoopConfig {
        strategy,
        iterations: cfg.iterations,
        params: cfg.strategy_config(mean_length),
        fit: cfg.classifier,
        infer: cfg.lda.infer,
        lime_samples: cfg.explainer.lime_samples,
        topiclime_samples: cfg.explainer.topiclime_samples,
        cadence: cfg.metrics.cadence,
        accuracy_fraction: cfg.metrics.accuracy_fraction,
        accuracy_samples: cfg.metrics.accuracy_samples,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SetupSummary {
    pub documents: usize,
    pub vocabulary: usize,
    pub classes: Vec<String>,
    pub k: usize,
    pub k_scores: Vec<(usize, f64)>,
    pub gs_word_f1: f64,
    pub gs_topic_f1: f64,
    pub train: usize,
    pub pool: usize,
    pub test: usize,
    pub counterexample_length: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StrategyRun {
    pub outcome: LoopOutcome,
    pub wall_clock_ms: u128,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultLog {
    pub config: ExperimentConfig,
    pub setup: SetupSummary,
    pub runs: Vec<StrategyRun>,
    pub wall_clock_ms: u128,
}

impl ResultLog {
    pub fn run(&self, strategy: Strategy) -> Option<&LoopOutcome> {
        self.runs.iter().map(|r| &r.outcome).find(|o| o.strategy == strategy)
    }
}

/// Runs one strategy from the shared split.
pub fn run_strategy(cfg: &ExperimentConfig, prepared: &Prepared, strategy: Strategy) -> Result<LoopOutcome> {
    let lc = loop_config(cfg, strategy, prepared.corpus.mean_length());
    run_loop(prepared.resources(), lc, &prepared.split.train, &prepared.split.pool, &mut SimulatedOracle)
        .context(format!("strategy {}", strategy.name()))
}

/// Runs every configured strategy from the same split, topic model and Gold
/// Standards. Strategies run on separate threads.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<ResultLog> {
    cfg.validate()?;
    let start = Instant::now();
    let prepared = prepare(cfg)?;
    run_prepared(cfg, &prepared, start)
}

pub fn run_prepared(cfg: &ExperimentConfig, prepared: &Prepared, start: Instant) -> Result<ResultLog> {
    let runs = std::thread::scope(|scope| {
        let handles: Vec<_> = cfg
            .strategies
            .iter()
            .map(|&s| {
                scope.spawn(move || {
                    let t = Instant::now();
                    run_strategy(cfg, prepared, s).map(|outcome| StrategyRun { outcome, wall_clock_ms: t.elapsed().as_millis() })
                })
            })
            .collect();
        handles.into_iter().map(|h| h.join().expect("strategy thread panicked")).collect::<Result<Vec<_>>>()
    })?;
    Ok(ResultLog {
        config: cfg.clone(),
        setup: prepared.setup_summary(cfg),
        runs,
        wall_clock_ms: start.elapsed().as_millis(),
    })
}

#[derive(Serialize, Deserialize)]
struct VersionedRecord<T> {
    schema_version: u32,
    #[serde(flatten)]
    record: T,
}

/// `iteration,metric,value` rows ordered by iteration, then metric.
pub fn metrics_csv(outcome: &LoopOutcome) -> String {
    let mut rows: Vec<(usize, usize, &str, f64)> = Vec::new();
    for (order, series) in outcome.series.iter().enumerate() {
        for &(it, v) in &series.points {
            rows.push((it, order, series.name.as_str(), v));
        }
    }
    rows.sort_by_key(|r| (r.0, r.1));
    let mut out = String::from("iteration,metric,value\n");
    for (it, _, name, v) in rows {
        let _ = writeln!(out, "{it},{name},{v}");
    }
    out
}

pub fn parse_metrics_csv(text: &str) -> Result<Vec<(usize, String, f64)>> {
    let mut rdr = csv::Reader::from_reader(text.as_bytes());
    rdr.deserialize()
        .map(|r| r.map_err(|e| HarnessError::Results(format!("metrics.csv: {e}"))))
        .collect()
}

/// Writes `config.json`, `<strategy>/records.jsonl`, `<strategy>/metrics.csv`
/// and `report.json`.
pub fn write_result_log(log: &ResultLog, dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(fs_err(dir))?;
    write_json(&dir.join("config.json"), &log.config)?;
    for run in &log.runs {
        let sub = dir.join(run.outcome.strategy.name());
        fs::create_dir_all(&sub).map_err(fs_err(&sub))?;
        write_jsonl(
            &sub.join("records.jsonl"),
            run.outcome.records.iter().map(|record| VersionedRecord { schema_version: SCHEMA_VERSION, record }),
        )?;
        let path = sub.join("metrics.csv");
        fs::write(&path, metrics_csv(&run.outcome)).map_err(fs_err(&path))?;
    }
    Ok(write_json(&dir.join("report.json"), &summarize(log))?)
}

pub fn read_records(path: &Path) -> Result<Vec<IterationRecord>> {
    let rows: Vec<VersionedRecord<IterationRecord>> = read_jsonl(path)?;
    Ok(rows.into_iter().map(|r| r.record).collect())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StrategySummary {
    pub strategy: Strategy,
    pub iterations: usize,
    pub baseline_macro_f1: f64,
    pub final_macro_f1: f64,
    /// First iteration whose macro-F1 reaches 90% of the final value.
    pub reaches_90_percent_at: Option<usize>,
    pub final_margin: Option<f64>,
    pub final_explanatory_accuracy: Option<f64>,
    pub counterexamples: usize,
    pub fallbacks: usize,
    pub wall_clock_ms: u128,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub schema_version: u32,
    pub setup: SetupSummary,
    pub strategies: Vec<StrategySummary>,
    pub wall_clock_ms: u128,
}

pub fn summarize_outcome(outcome: &LoopOutcome, wall_clock_ms: u128) -> StrategySummary {
    let f1 = outcome.series("macro_f1");
    let final_f1 = f1.and_then(|s| s.last()).unwrap_or(outcome.baseline.macro_f1);
    let last = outcome.records.last().map(|r| r.metrics).unwrap_or(outcome.baseline);
    StrategySummary {
        strategy: outcome.strategy,
        iterations: outcome.records.len(),
        baseline_macro_f1: outcome.baseline.macro_f1,
        final_macro_f1: final_f1,
        reaches_90_percent_at: f1.and_then(|s| s.points.iter().find(|p| p.1 >= 0.9 * final_f1).map(|p| p.0)),
        final_margin: last.margin,
        final_explanatory_accuracy: last.explanatory_accuracy,
        counterexamples: outcome.records.iter().map(|r| r.counterexamples.len()).sum(),
        fallbacks: outcome.records.iter().filter(|r| r.fallback).count(),
        wall_clock_ms,
    }
}

pub fn summarize(log: &ResultLog) -> Report {
    Report {
        schema_version: SCHEMA_VERSION,
        setup: log.setup.clone(),
        strategies: log.runs.iter().map(|r| summarize_outcome(&r.outcome, r.wall_clock_ms)).collect(),
        wall_clock_ms: log.wall_clock_ms,
    }
}

fn opt(v: Option<f64>) -> String {
    v.map(|x| format!("{x:.4}")).unwrap_or_else(|| "-".into())
}

pub fn format_report(report: &Report) -> String {
    let s = &report.setup;
    let mut out = String::new();
    let _ = writeln!(
        out,
        "{} documents, {} terms, {} classes, K = {}, GS macro-F1 word {:.3} / topic {:.3}, split {}/{}/{}",
        s.documents,
        s.vocabulary,
        s.classes.len(),
        s.k,
        s.gs_word_f1,
        s.gs_topic_f1,
        s.train,
        s.pool,
        s.test
    );
    let _ = writeln!(
        out,
        "{:<14} {:>5} {:>9} {:>9} {:>8} {:>9} {:>9} {:>8}",
        "strategy", "iters", "F1 start", "F1 final", "90% at", "margin", "expl.acc", "counter"
    );
    for r in &report.strategies {
        let _ = writeln!(
            out,
            "{:<14} {:>5} {:>9.4} {:>9.4} {:>8} {:>9} {:>9} {:>8}",
            r.strategy.name(),
            r.iterations,
            r.baseline_macro_f1,
            r.final_macro_f1,
            r.reaches_90_percent_at.map(|i| i.to_string()).unwrap_or_else(|| "-".into()),
            opt(r.final_margin),
            opt(r.final_explanatory_accuracy),
            r.counterexamples
        );
    }
    out
}

/// Reads `report.json` and every strategy's `metrics.csv` from a results
/// directory, writes the combined `curves.csv` and returns the printable
/// summary.
pub fn report_dir(dir: &Path) -> Result<String> {
    let report: Report = read_json(&dir.join("report.json"))?;
    let mut curves = String::from("strategy,iteration,metric,value\n");
    for s in &report.strategies {
        let path = dir.join(s.strategy.name()).join("metrics.csv");
        let text = fs::read_to_string(&path).map_err(fs_err(&path))?;
        for (it, metric, v) in parse_metrics_csv(&text)? {
            let _ = writeln!(curves, "{},{it},{metric},{v}", s.strategy.name());
        }
    }
    let path = dir.join("curves.csv");
    fs::write(&path, curves).map_err(fs_err(&path))?;
    let mut text = format_report(&report);
    let fidelity = dir.join("fidelity.json");
    if fidelity.exists() {
        let table: FidelityTable = read_json(&fidelity)?;
        text.push('\n');
        text.push_str(&format_fidelity(&table));
    }
    Ok(text)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FidelityRow {
    pub explainer: String,
    pub mlae: f64,
    pub mean_r2: f64,
    pub cri: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FidelityTable {
    pub k: usize,
    pub documents: usize,
    pub cri_fraction: f64,
    pub rows: Vec<FidelityRow>,
}

impl FidelityTable {
    pub fn row(&self, explainer: &str) -> Option<&FidelityRow> {
        self.rows.iter().find(|r| r.explainer == explainer)
    }
}

/// Local-fidelity comparison of LIME and topicLIME: a softmax classifier is
/// fitted on every non-test document and the predicted class of the first
/// `fidelity_docs` non-empty test documents is explained both ways.
pub fn fidelity(cfg: &ExperimentConfig, prepared: &Prepared) -> Result<FidelityTable> {
    let corpus = &prepared.corpus;
    let mut train = TrainSet::new(corpus.vocabulary.len(), corpus.num_classes());
    for &i in prepared.split.train.iter().chain(&prepared.split.pool) {
        train.push_tokens(&corpus.documents[i].tokens, corpus.labels[i]);
    }
    let model = SoftmaxRegression::fit(&train, &cfg.classifier).context("fidelity classifier")?;
    let resources = prepared.resources();
    let mut lime = Vec::new();
    let mut topic = Vec::new();
    for &doc in prepared.split.test.iter().filter(|&&d| !corpus.documents[d].is_empty()).take(cfg.metrics.fidelity_docs) {
        let tokens = &corpus.documents[doc].tokens;
        let y_hat = model.predict_proba_tokens(tokens).context("fidelity")?.argmax();
        let seed = derive(cfg.seed, &[TAG_FIDELITY, doc as u64]);
        let pc = PerturbationConfig {
            num_samples: cfg.explainer.lime_samples,
            kernel_width: None,
            seed,
            complexity: cfg.strategy.lime_features,
        };
        let e = explain(&model, tokens, InterpretableSpace::Words, &[y_hat], &pc).context("LIME")?.remove(0);
        lime.push(ExplainedInstance { tokens: tokens.clone(), assignment: None, explanation: e });
        let (_, assignment) = resources.infer(doc, &cfg.lda.infer, cfg.seed);
        let pc = PerturbationConfig {
            num_samples: cfg.explainer.topiclime_samples,
            kernel_width: None,
            seed,
            complexity: cfg.strategy.topiclime_features,
        };
        let e = explain(&model, tokens, InterpretableSpace::Topics(&assignment), &[y_hat], &pc).context("topicLIME")?.remove(0);
        topic.push(ExplainedInstance { tokens: tokens.clone(), assignment: Some(assignment), explanation: e });
    }
    let k = cfg.metrics.cri_fraction;
    let row = |name: &str, inst: &[ExplainedInstance]| -> Result<FidelityRow> {
        Ok(FidelityRow { explainer: name.into(), mlae: mlae(inst), mean_r2: mean_r2(inst), cri: cri(&model, inst, k).context("CRI")? })
    };
    Ok(FidelityTable {
        k: prepared.lda.k,
        documents: lime.len(),
        cri_fraction: k,
        rows: vec![row("lime", &lime)?, row("topiclime", &topic)?],
    })
}

pub fn format_fidelity(table: &FidelityTable) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "local fidelity over {} test documents (K = {})", table.documents, table.k);
    let _ = writeln!(out, "{:<10} {:>13} {:>9} {:>9}", "explainer", "Approx.Error", "R²", "CRI");
    for r in &table.rows {
        let _ = writeln!(out, "{:<10} {:>13.4} {:>9.4} {:>9.4}", r.explainer, r.mlae, r.mean_r2, r.cri);
    }
    out
}
