//! Experiment configuration: one schema-versioned JSON document.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use semloop_core::corpus::PreprocessConfig;
use semloop_core::learner::FitParams;
use semloop_core::oracle::GsParams;
use semloop_core::split::SplitFractions;
use semloop_core::strategies::{MetricCadence, Strategy, StrategyConfig};
use semloop_core::synthetic::NewsLikeSpec;
use semloop_core::topic_model::{CoherenceParams, InferParams};

use crate::io::{read_json, DatasetFormat, IoError};

pub const SCHEMA_VERSION: u32 = 1;

/// Environment variable that overrides the configured seed.
pub const SEED_ENV: &str = "SEMLOOP_SEED";

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error(transparent)]
    Io(#[from] IoError),
    #[error("unsupported schema version {0} (expected {SCHEMA_VERSION})")]
    SchemaVersion(u32),
    #[error("invalid configuration: {0}")]
    Invalid(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum DatasetSpec {
    /// Generated news-like corpus.
    Synthetic(NewsLikeSpec),
    File {
        path: PathBuf,
        format: DatasetFormat,
        /// Keep only the first `limit` documents.
        #[serde(default)]
        limit: Option<usize>,
    },
}

impl Default for DatasetSpec {
    fn default() -> Self {
        DatasetSpec::Synthetic(NewsLikeSpec::default())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LdaSpec {
    /// Fixed topic count; when absent K is chosen by coherence among
    /// `k_candidates`.
    pub k: Option<usize>,
    pub k_candidates: Vec<usize>,
    pub alpha: Option<f64>,
    pub beta: f64,
    pub iterations: usize,
    pub coherence: CoherenceParams,
    pub infer: InferParams,
}

impl Default for LdaSpec {
    fn default() -> Self {
        Self {
            k: None,
            k_candidates: (5..=20).collect(),
            alpha: None,
            beta: 0.01,
            iterations: 500,
            coherence: CoherenceParams::default(),
            infer: InferParams::default(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct StrategySpec {
    pub m: usize,
    pub lambda: f64,
    /// Tokens per sampled counterexample; the corpus mean length when absent.
    pub counterexample_length: Option<usize>,
    pub lime_features: usize,
    pub topiclime_features: usize,
    pub local_gs_fraction: f64,
}

impl Default for StrategySpec {
    fn default() -> Self {
        let d = StrategyConfig::default();
        Self {
            m: d.m,
            lambda: d.lambda,
            counterexample_length: None,
            lime_features: d.lime_features,
            topiclime_features: d.topiclime_features,
            local_gs_fraction: d.local_gs_fraction,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GoldStandardSpec {
    pub l1: f64,
    pub max_epochs: usize,
    pub holdout: f64,
}

impl Default for GoldStandardSpec {
    fn default() -> Self {
        let d = GsParams::default();
        Self { l1: d.l1, max_epochs: d.max_epochs, holdout: d.holdout }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExplainerSpec {
    pub lime_samples: usize,
    pub topiclime_samples: usize,
}

impl Default for ExplainerSpec {
    fn default() -> Self {
        Self { lime_samples: 1000, topiclime_samples: 500 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MetricSpec {
    pub cadence: MetricCadence,
    /// Share of the global word Gold Standard forming each local Gold Standard.
    pub accuracy_fraction: f64,
    pub accuracy_samples: usize,
    /// Share of explanation features removed for the removal-impact score.
    pub cri_fraction: f64,
    /// Test documents explained by the fidelity comparison.
    pub fidelity_docs: usize,
}

impl Default for MetricSpec {
    fn default() -> Self {
        Self {
            cadence: MetricCadence::default(),
            accuracy_fraction: 0.1,
            accuracy_samples: 1000,
            cri_fraction: 0.2,
            fidelity_docs: 200,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub schema_version: u32,
    pub dataset: DatasetSpec,
    pub preprocess: PreprocessConfig,
    pub split: SplitFractions,
    pub strategies: Vec<Strategy>,
    pub iterations: usize,
    pub strategy: StrategySpec,
    pub lda: LdaSpec,
    pub classifier: FitParams,
    pub gold_standard: GoldStandardSpec,
    pub explainer: ExplainerSpec,
    pub metrics: MetricSpec,
    pub seed: u64,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            schema_version: SCHEMA_VERSION,
            dataset: DatasetSpec::default(),
            preprocess: PreprocessConfig::default(),
            split: SplitFractions::default(),
            strategies: Strategy::ALL.to_vec(),
            iterations: 200,
            strategy: StrategySpec::default(),
            lda: LdaSpec::default(),
            classifier: FitParams::default(),
            gold_standard: GoldStandardSpec::default(),
            explainer: ExplainerSpec::default(),
            metrics: MetricSpec::default(),
            seed: 0,
        }
    }
}

impl ExperimentConfig {
    /// Reads a config file and applies the `SEMLOOP_SEED` override.
    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let mut cfg: Self = read_json(path)?;
        cfg.apply_seed_env()?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn apply_seed_env(&mut self) -> Result<(), ConfigError> {
        if let Ok(v) = std::env::var(SEED_ENV) {
            self.seed = v.trim().parse().map_err(|_| ConfigError::Invalid(format!("{SEED_ENV}=`{v}` is not a u64")))?;
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let invalid = |m: &str| Err(ConfigError::Invalid(m.to_string()));
        if self.schema_version != SCHEMA_VERSION {
            return Err(ConfigError::SchemaVersion(self.schema_version));
        }
        self.split.validate().map_err(|e| ConfigError::Invalid(e.to_string()))?;
        if self.split.train <= 0.0 {
            return invalid("the training fraction must be positive");
        }
        if self.iterations == 0 {
            return invalid("iterations must be at least 1");
        }
        if self.strategies.is_empty() {
            return invalid("no strategies listed");
        }
        if self.lda.k.is_none() && self.lda.k_candidates.is_empty() {
            return invalid("set lda.k or lda.k_candidates");
        }
        if self.lda.k.into_iter().chain(self.lda.k_candidates.iter().copied()).any(|k| k < 2) {
            return invalid("topic counts must be at least 2");
        }
        if !(self.metrics.cri_fraction > 0.0 && self.metrics.cri_fraction <= 1.0) {
            return invalid("metrics.cri_fraction must lie in (0, 1]");
        }
        self.preprocess.validate().map_err(|e| ConfigError::Invalid(e.to_string()))?;
        self.strategy_config(1).validate().map_err(|e| ConfigError::Invalid(e.to_string()))
    }

    /// Strategy hyperparameters for a corpus with the given mean length.
    pub fn strategy_config(&self, mean_length: usize) -> StrategyConfig {
        let s = &self.strategy;
        StrategyConfig {
            m: s.m,
            lambda: s.lambda,
            counterexample_length: s.counterexample_length.unwrap_or(mean_length),
            lime_features: s.lime_features,
            topiclime_features: s.topiclime_features,
            local_gs_fraction: s.local_gs_fraction,
            seed: self.seed,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_round_trip_and_validate() {
        let cfg = ExperimentConfig::default();
        cfg.validate().unwrap();
        let text = serde_json::to_string(&cfg).unwrap();
        assert_eq!(serde_json::from_str::<ExperimentConfig>(&text).unwrap(), cfg);
    }

    #[test]
    fn partial_documents_fill_defaults() {
        let cfg: ExperimentConfig = serde_json::from_str(r#"{"iterations": 5, "strategies": ["al", "semantic_push"]}"#).unwrap();
        assert_eq!(cfg.iterations, 5);
        assert_eq!(cfg.strategies, [Strategy::ActiveLearning, Strategy::SemanticPush]);
        assert_eq!(cfg.strategy.m, 10);
        assert_eq!(cfg.strategy.lambda, 0.95);
    }

    #[test]
    fn bad_values_are_rejected() {
        let mut cfg = ExperimentConfig { iterations: 0, ..Default::default() };
        assert!(cfg.validate().is_err());
        cfg.iterations = 3;
        cfg.split = SplitFractions { train: 0.5, pool: 0.4, test: 0.2 };
        assert!(cfg.validate().is_err());
        cfg.split = SplitFractions::default();
        cfg.strategy.lambda = 1.2;
        assert!(cfg.validate().is_err());
        assert!(serde_json::from_str::<ExperimentConfig>(r#"{"iteratons": 5}"#).is_err());
    }
}
