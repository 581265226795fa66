//! HTTP+JSON service exposing live interaction loops so a human can answer
//! queries in place of the simulated Gold Standard.
//!
//! Every session owns one [`InteractiveLoop`]. A correction runs on a clone
//! of the committed loop and replaces it only on success, so concurrent reads
//! always see the last committed state and a failed correction changes
//! nothing. A second correction arriving while one is in flight gets 409.

use std::collections::HashMap;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::{Arc, Mutex};

use axum::extract::rejection::JsonRejection;
use axum::extract::{Path, State};
use axum::http::{HeaderValue, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use serde::{Deserialize, Serialize};
use semloop_core::explainers::FeatureKind;
use semloop_core::learner::ClassDistribution;
use semloop_core::oracle::GoldStandard;
use semloop_core::strategies::{
    feedback_from_verdicts, FeatureVerdict, InteractiveLoop, IterationRecord, LoopResources, MetricSnapshot,
    Provenance, Query, Strategy,
};
use semloop_core::metrics::MetricSeries;
use tower_http::cors::{AllowOrigin, Any, CorsLayer};

use crate::config::{ExperimentConfig, StrategySpec, SCHEMA_VERSION};
use crate::harness::{loop_config, Prepared};

/// Representative words shown per topic.
const TOPIC_WORDS: usize = 8;
/// Gold Standard features offered as hints per class.
const GS_HINTS: usize = 10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Phase {
    AwaitingCorrection,
    Retraining,
    Finished,
}

#[derive(Debug, thiserror::Error)]
pub enum ServiceError {
    #[error("unknown session {0}")]
    UnknownSession(String),
    #[error("{0}")]
    WrongPhase(String),
    #[error("{0}")]
    Schema(String),
    #[error("{0}")]
    InvalidConfig(String),
    #[error("{0}")]
    Internal(String),
}

impl ServiceError {
    fn status(&self) -> StatusCode {
        match self {
            ServiceError::UnknownSession(_) => StatusCode::NOT_FOUND,
            ServiceError::WrongPhase(_) => StatusCode::CONFLICT,
            ServiceError::Schema(_) => StatusCode::UNPROCESSABLE_ENTITY,
            ServiceError::InvalidConfig(_) => StatusCode::BAD_REQUEST,
            ServiceError::Internal(_) => StatusCode::INTERNAL_SERVER_ERROR,
        }
    }

    fn code(&self) -> &'static str {
        match self {
            ServiceError::UnknownSession(_) => "unknown_session",
            ServiceError::WrongPhase(_) => "wrong_phase",
            ServiceError::Schema(_) => "schema_error",
            ServiceError::InvalidConfig(_) => "invalid_config",
            ServiceError::Internal(_) => "internal",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErrorBody {
    pub error: String,
    pub message: String,
}

impl IntoResponse for ServiceError {
    fn into_response(self) -> Response {
        let body = ErrorBody { error: self.code().into(), message: self.to_string() };
        (self.status(), Json(body)).into_response()
    }
}

impl From<JsonRejection> for ServiceError {
    fn from(r: JsonRejection) -> Self {
        ServiceError::Schema(r.body_text())
    }
}

type ApiResult<T> = Result<Json<T>, ServiceError>;

/// Body of `POST /v1/sessions`. The corpus, topic model, Gold Standards and
/// split are those the service was started with.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StartSession {
    pub strategy: Strategy,
    #[serde(default)]
    pub iterations: Option<usize>,
    /// Overrides the strategy seed of the service configuration.
    #[serde(default)]
    pub seed: Option<u64>,
    #[serde(default)]
    pub params: Option<StrategySpec>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionInfo {
    pub schema_version: u32,
    pub session_id: String,
    pub strategy: Strategy,
    pub phase: Phase,
    pub iteration: usize,
    pub iterations: usize,
    pub classes: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TopicFeature {
    pub class: usize,
    pub topic: u32,
    pub weight: f64,
    pub top_words: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WordFeature {
    pub class: usize,
    pub word: u32,
    pub term: String,
    pub weight: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HintFeature {
    pub feature: u32,
    /// Term for word features, representative words for topics.
    pub label: String,
    pub weight: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassHints {
    pub class: usize,
    pub features: Vec<HintFeature>,
}

/// Everything a client needs to answer the pending query.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QueryPayload {
    pub schema_version: u32,
    pub session_id: String,
    pub strategy: Strategy,
    pub phase: Phase,
    pub text: String,
    pub classes: Vec<String>,
    pub y_hat: usize,
    pub probabilities: ClassDistribution,
    pub topic_features: Vec<TopicFeature>,
    pub word_features: Vec<WordFeature>,
    /// Strongest positive Gold Standard features per class.
    pub gs_hints: Vec<ClassHints>,
    pub query: Query,
}

/// Body of `POST /v1/sessions/{id}/correction`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CorrectionRequest {
    #[serde(default)]
    pub session_id: Option<String>,
    pub true_label: usize,
    #[serde(default)]
    pub verdicts: Vec<FeatureVerdict>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CounterexamplePreview {
    pub label: usize,
    pub provenance: Provenance,
    pub tokens: Vec<u32>,
    pub text: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricDelta {
    pub macro_f1: f64,
    pub margin: Option<f64>,
    pub explanatory_accuracy: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorrectionSummary {
    pub schema_version: u32,
    pub session_id: String,
    pub iteration: usize,
    pub y_hat: usize,
    pub y: usize,
    pub counterexamples: Vec<CounterexamplePreview>,
    pub fallback: bool,
    pub metrics: MetricSnapshot,
    /// Change against the previous iteration (against the baseline for the
    /// first one); `None` where either side was not measured.
    pub delta: MetricDelta,
    pub phase: Phase,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsPayload {
    pub schema_version: u32,
    pub session_id: String,
    pub phase: Phase,
    pub baseline: MetricSnapshot,
    pub series: Vec<MetricSeries>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RecordsPayload {
    pub schema_version: u32,
    pub session_id: String,
    pub records: Vec<IterationRecord>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GoldStandardPayload {
    pub schema_version: u32,
    pub kind: FeatureKind,
    /// Per class, `[feature, weight]` sorted by weight descending.
    pub classes: Vec<Vec<(u32, f64)>>,
}

struct Session {
    committed: InteractiveLoop,
    busy: bool,
}

impl Session {
    fn phase(&self) -> Phase {
        if self.busy {
            Phase::Retraining
        } else if self.committed.is_finished() {
            Phase::Finished
        } else {
            Phase::AwaitingCorrection
        }
    }
}

/// Shared service state.
pub struct ServiceState {
    config: ExperimentConfig,
    resources: Arc<LoopResources>,
    train: Vec<usize>,
    pool: Vec<usize>,
    sessions: Mutex<HashMap<String, Arc<Mutex<Session>>>>,
    next_id: AtomicU64,
}

impl ServiceState {
    pub fn new(config: ExperimentConfig, prepared: &Prepared) -> Self {
        Self {
            resources: prepared.resources(),
            train: prepared.split.train.clone(),
            pool: prepared.split.pool.clone(),
            config,
            sessions: Mutex::new(HashMap::new()),
            next_id: AtomicU64::new(1),
        }
    }

    pub fn resources(&self) -> &Arc<LoopResources> {
        &self.resources
    }

    fn session(&self, id: &str) -> Result<Arc<Mutex<Session>>, ServiceError> {
        self.sessions.lock().unwrap().get(id).cloned().ok_or_else(|| ServiceError::UnknownSession(id.into()))
    }

    fn start(&self, req: StartSession) -> Result<SessionInfo, ServiceError> {
        let mut cfg = self.config.clone();
        if let Some(t) = req.iterations {
            cfg.iterations = t;
        }
        if let Some(seed) = req.seed {
            cfg.seed = seed;
        }
        if let Some(p) = req.params {
            cfg.strategy = p;
        }
        let lc = loop_config(&cfg, req.strategy, self.resources.corpus.mean_length());
        let l = InteractiveLoop::new(self.resources.clone(), lc, &self.train, &self.pool)
            .map_err(|e| ServiceError::InvalidConfig(e.to_string()))?;
        let id = format!("s{}", self.next_id.fetch_add(1, Ordering::Relaxed));
        let session = Session { committed: l, busy: false };
        let info = self.info(&id, &session);
        self.sessions.lock().unwrap().insert(id, Arc::new(Mutex::new(session)));
        Ok(info)
    }

    fn info(&self, id: &str, s: &Session) -> SessionInfo {
        SessionInfo {
            schema_version: SCHEMA_VERSION,
            session_id: id.into(),
            strategy: s.committed.config().strategy,
            phase: s.phase(),
            iteration: s.committed.records().len(),
            iterations: s.committed.config().iterations,
            classes: self.resources.corpus.classes.clone(),
        }
    }

    fn topic_words(&self, topic: u32) -> Vec<String> {
        let lda = &self.resources.lda;
        lda.top_words(topic as usize, TOPIC_WORDS)
            .into_iter()
            .map(|w| self.resources.corpus.vocabulary.term(w).to_string())
            .collect()
    }

    fn hints(&self, gs: &GoldStandard) -> Vec<ClassHints> {
        let vocab = &self.resources.corpus.vocabulary;
        (0..gs.per_class.len())
            .map(|class| ClassHints {
                class,
                features: gs
                    .class(class)
                    .positive()
                    .take(GS_HINTS)
                    .map(|(feature, weight)| HintFeature {
                        feature,
                        label: match gs.kind {
                            FeatureKind::Word => vocab.term(feature).to_string(),
                            FeatureKind::Topic => self.topic_words(feature).join(" "),
                        },
                        weight,
                    })
                    .collect(),
            })
            .collect()
    }

    fn payload(&self, id: &str, s: &Session, q: &Query) -> QueryPayload {
        let strategy = s.committed.config().strategy;
        let vocab = &self.resources.corpus.vocabulary;
        let mut topic_features = Vec::new();
        let mut word_features = Vec::new();
        for e in &q.explanations {
            for &(f, weight) in &e.features {
                match e.kind {
                    FeatureKind::Topic => topic_features.push(TopicFeature {
                        class: e.target_class,
                        topic: f,
                        weight,
                        top_words: self.topic_words(f),
                    }),
                    FeatureKind::Word => word_features.push(WordFeature {
                        class: e.target_class,
                        word: f,
                        term: vocab.term(f).to_string(),
                        weight,
                    }),
                }
            }
        }
        QueryPayload {
            schema_version: SCHEMA_VERSION,
            session_id: id.into(),
            strategy,
            phase: s.phase(),
            text: self.resources.corpus.documents[q.doc].raw.clone(),
            classes: self.resources.corpus.classes.clone(),
            y_hat: q.y_hat,
            probabilities: q.probabilities.clone(),
            topic_features,
            word_features,
            gs_hints: self.resources.gold_standard(strategy).map(|gs| self.hints(gs)).unwrap_or_default(),
            query: q.clone(),
        }
    }

    fn query(&self, id: &str) -> Result<QueryPayload, ServiceError> {
        let slot = self.session(id)?;
        let s = slot.lock().unwrap();
        match (s.phase(), s.committed.pending_query()) {
            (Phase::AwaitingCorrection, Some(q)) => Ok(self.payload(id, &s, q)),
            (phase, _) => Err(ServiceError::WrongPhase(format!("session {id} is {phase:?}, no query pending"))),
        }
    }

    /// Validates and applies one correction. Runs the retraining outside the
    /// session lock.
    fn correct(&self, id: &str, req: CorrectionRequest) -> Result<CorrectionSummary, ServiceError> {
        if req.session_id.as_deref().is_some_and(|s| s != id) {
            return Err(ServiceError::Schema("session_id does not match the path".into()));
        }
        let slot = self.session(id)?;
        let mut working = {
            let mut s = slot.lock().unwrap();
            match s.phase() {
                Phase::AwaitingCorrection => {}
                phase => return Err(ServiceError::WrongPhase(format!("session {id} is {phase:?}"))),
            }
            s.busy = true;
            s.committed.clone()
        };
        let result = self.apply(&mut working, req);
        let mut s = slot.lock().unwrap();
        s.busy = false;
        let record = result?;
        s.committed = working;
        let previous = match s.committed.records() {
            [.., prev, _] => prev.metrics,
            _ => *s.committed.baseline(),
        };
        let vocab = &self.resources.corpus.vocabulary;
        let diff = |a: Option<f64>, b: Option<f64>| a.zip(b).map(|(a, b)| a - b);
        Ok(CorrectionSummary {
            schema_version: SCHEMA_VERSION,
            session_id: id.into(),
            iteration: record.iteration,
            y_hat: record.y_hat,
            y: record.y,
            counterexamples: record
                .counterexamples
                .iter()
                .map(|c| CounterexamplePreview {
                    label: c.label,
                    provenance: c.provenance,
                    tokens: c.tokens.clone(),
                    text: c.tokens.iter().map(|&t| vocab.term(t)).collect::<Vec<_>>().join(" "),
                })
                .collect(),
            fallback: record.fallback,
            metrics: record.metrics,
            delta: MetricDelta {
                macro_f1: record.metrics.macro_f1 - previous.macro_f1,
                margin: diff(record.metrics.margin, previous.margin),
                explanatory_accuracy: diff(record.metrics.explanatory_accuracy, previous.explanatory_accuracy),
            },
            phase: s.phase(),
        })
    }

    fn apply(&self, l: &mut InteractiveLoop, req: CorrectionRequest) -> Result<IterationRecord, ServiceError> {
        let query = l.pending_query().ok_or_else(|| ServiceError::WrongPhase("no query pending".into()))?;
        let corpus = &self.resources.corpus;
        let num_features = match l.config().strategy {
            Strategy::SemanticPush => self.resources.lda.k,
            _ => corpus.vocabulary.len(),
        };
        let feedback =
            feedback_from_verdicts(query, req.true_label, &req.verdicts, corpus.num_classes(), num_features)
                .map_err(|e| ServiceError::Schema(e.to_string()))?;
        l.submit(feedback).cloned().map_err(|e| ServiceError::Internal(e.to_string()))
    }

    fn metrics(&self, id: &str) -> Result<MetricsPayload, ServiceError> {
        let slot = self.session(id)?;
        let s = slot.lock().unwrap();
        Ok(MetricsPayload {
            schema_version: SCHEMA_VERSION,
            session_id: id.into(),
            phase: s.phase(),
            baseline: *s.committed.baseline(),
            series: s.committed.series().to_vec(),
        })
    }

    fn records(&self, id: &str) -> Result<RecordsPayload, ServiceError> {
        let slot = self.session(id)?;
        let s = slot.lock().unwrap();
        Ok(RecordsPayload { schema_version: SCHEMA_VERSION, session_id: id.into(), records: s.committed.records().to_vec() })
    }

    fn gold_standard(&self, id: &str) -> Result<GoldStandardPayload, ServiceError> {
        let slot = self.session(id)?;
        let strategy = slot.lock().unwrap().committed.config().strategy;
        let gs = self
            .resources
            .gold_standard(strategy)
            .ok_or_else(|| ServiceError::WrongPhase(format!("{} takes no explanation feedback", strategy.name())))?;
        Ok(GoldStandardPayload {
            schema_version: SCHEMA_VERSION,
            kind: gs.kind,
            classes: gs.per_class.iter().map(|k| k.features.clone()).collect(),
        })
    }
}

async fn blocking<T, F>(state: Arc<ServiceState>, f: F) -> ApiResult<T>
where
    T: Send + 'static,
    F: FnOnce(&ServiceState) -> Result<T, ServiceError> + Send + 'static,
{
    tokio::task::spawn_blocking(move || f(&state))
        .await
        .map_err(|e| ServiceError::Internal(e.to_string()))?
        .map(Json)
}

async fn start_session(
    State(state): State<Arc<ServiceState>>,
    body: Result<Json<StartSession>, JsonRejection>,
) -> Result<(StatusCode, Json<SessionInfo>), ServiceError> {
    let Json(req) = body?;
    let info = blocking(state, move |s| s.start(req)).await?;
    Ok((StatusCode::CREATED, info))
}

async fn get_session(State(state): State<Arc<ServiceState>>, Path(id): Path<String>) -> ApiResult<SessionInfo> {
    let slot = state.session(&id)?;
    let s = slot.lock().unwrap();
    Ok(Json(state.info(&id, &s)))
}

async fn get_query(State(state): State<Arc<ServiceState>>, Path(id): Path<String>) -> ApiResult<QueryPayload> {
    state.query(&id).map(Json)
}

async fn post_correction(
    State(state): State<Arc<ServiceState>>,
    Path(id): Path<String>,
    body: Result<Json<CorrectionRequest>, JsonRejection>,
) -> ApiResult<CorrectionSummary> {
    let Json(req) = body?;
    blocking(state, move |s| s.correct(&id, req)).await
}

async fn get_metrics(State(state): State<Arc<ServiceState>>, Path(id): Path<String>) -> ApiResult<MetricsPayload> {
    state.metrics(&id).map(Json)
}

async fn get_records(State(state): State<Arc<ServiceState>>, Path(id): Path<String>) -> ApiResult<RecordsPayload> {
    state.records(&id).map(Json)
}

async fn get_gold_standard(
    State(state): State<Arc<ServiceState>>,
    Path(id): Path<String>,
) -> ApiResult<GoldStandardPayload> {
    state.gold_standard(&id).map(Json)
}

/// Routes under `/v1`. `ui_origin` restricts CORS to one origin; any origin
/// is allowed when absent.
pub fn router(state: Arc<ServiceState>, ui_origin: Option<HeaderValue>) -> Router {
    let cors = CorsLayer::new()
        .allow_methods(Any)
        .allow_headers(Any)
        .allow_origin(ui_origin.map(AllowOrigin::exact).unwrap_or_else(AllowOrigin::any));
    let v1 = Router::new()
        .route("/sessions", post(start_session))
        .route("/sessions/{id}", get(get_session))
        .route("/sessions/{id}/query", get(get_query))
        .route("/sessions/{id}/correction", post(post_correction))
        .route("/sessions/{id}/metrics", get(get_metrics))
        .route("/sessions/{id}/records", get(get_records))
        .route("/sessions/{id}/gold_standard", get(get_gold_standard));
    Router::new().nest("/v1", v1).layer(cors).with_state(state)
}

pub async fn serve(listener: tokio::net::TcpListener, state: Arc<ServiceState>, ui_origin: Option<HeaderValue>) -> std::io::Result<()> {
    axum::serve(listener, router(state, ui_origin)).await
}
