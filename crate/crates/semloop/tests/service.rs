use std::sync::{Arc, OnceLock};

use axum::body::Body;
use axum::http::{Request, StatusCode};
use axum::Router;
use http_body_util::BodyExt;
use semloop::config::ExperimentConfig;
use semloop::harness::{prepare, run_strategy, Prepared};
use semloop::service::{
    router, CorrectionSummary, GoldStandardPayload, MetricsPayload, QueryPayload, RecordsPayload, ServiceState,
    SessionInfo,
};
use semloop_core::oracle::{ClassKnowledge, GoldStandard};
use semloop_core::strategies::{simulated_verdicts, FeatureVerdict, Provenance, Strategy, Verdict};
use serde_json::{json, Value};
use tower::ServiceExt;

fn setup() -> &'static (ExperimentConfig, Prepared) {
    static SETUP: OnceLock<(ExperimentConfig, Prepared)> = OnceLock::new();
    SETUP.get_or_init(|| {
        let mut cfg = ExperimentConfig::default();
        cfg.lda.k = Some(14);
        cfg.iterations = 20;
        cfg.seed = 3;
        let prepared = prepare(&cfg).unwrap();
        (cfg, prepared)
    })
}

fn app() -> Router {
    let (cfg, prepared) = setup();
    router(Arc::new(ServiceState::new(cfg.clone(), prepared)), None)
}

async fn call(app: &Router, method: &str, uri: &str, body: Option<Value>) -> (StatusCode, Value) {
    let req = Request::builder().method(method).uri(uri).header("content-type", "application/json");
    let req = req.body(body.map(|b| Body::from(b.to_string())).unwrap_or_else(Body::empty)).unwrap();
    let resp = app.clone().oneshot(req).await.unwrap();
    let status = resp.status();
    let bytes = resp.into_body().collect().await.unwrap().to_bytes();
    let value = if bytes.is_empty() { Value::Null } else { serde_json::from_slice(&bytes).unwrap() };
    (status, value)
}

fn parse<T: serde::de::DeserializeOwned>(v: Value) -> T {
    serde_json::from_value(v).unwrap()
}

async fn start(app: &Router, body: Value) -> SessionInfo {
    let (status, v) = call(app, "POST", "/v1/sessions", Some(body)).await;
    assert_eq!(status, StatusCode::CREATED, "{v}");
    parse(v)
}

async fn query(app: &Router, id: &str) -> QueryPayload {
    let (status, v) = call(app, "GET", &format!("/v1/sessions/{id}/query"), None).await;
    assert_eq!(status, StatusCode::OK, "{v}");
    parse(v)
}

async fn correct(app: &Router, id: &str, true_label: usize, verdicts: &[FeatureVerdict]) -> (StatusCode, Value) {
    let body = json!({ "true_label": true_label, "verdicts": verdicts });
    call(app, "POST", &format!("/v1/sessions/{id}/correction"), Some(body)).await
}

fn verdict(class: usize, feature: u32, verdict: Verdict) -> FeatureVerdict {
    FeatureVerdict { class, feature, verdict, weight: None }
}

#[tokio::test]
async fn fresh_session_awaits_a_correction() {
    let app = app();
    let a = start(&app, json!({ "strategy": "semantic_push" })).await;
    let b = start(&app, json!({ "strategy": "semantic_push" })).await;
    assert_ne!(a.session_id, b.session_id);
    assert_eq!(format!("{:?}", a.phase), "AwaitingCorrection");

    let q = query(&app, &a.session_id).await;
    assert!(!q.topic_features.is_empty());
    assert!(q.topic_features.iter().all(|t| !t.top_words.is_empty()));
    assert!(!q.text.is_empty());
    assert_eq!(q.classes.len(), 4);
    assert_eq!(q.gs_hints.len(), 4);
    assert_eq!(q.query.explanations.len(), 4);

    let caipi = start(&app, json!({ "strategy": "caipi_dc" })).await;
    let q = query(&app, &caipi.session_id).await;
    assert!(!q.word_features.is_empty());
    assert!(q.word_features.iter().all(|w| w.class == q.y_hat && !w.term.is_empty()));
}

#[tokio::test]
async fn bad_requests_are_rejected() {
    let app = app();
    let (status, v) = call(&app, "POST", "/v1/sessions", Some(json!({ "strategy": "al", "iterations": 0 }))).await;
    assert_eq!(status, StatusCode::BAD_REQUEST);
    assert_eq!(v["error"], "invalid_config");
    let (status, _) = call(&app, "POST", "/v1/sessions", Some(json!({ "strategy": "bogus" }))).await;
    assert_eq!(status, StatusCode::UNPROCESSABLE_ENTITY);

    for path in ["query", "metrics", "records"] {
        let (status, v) = call(&app, "GET", &format!("/v1/sessions/nope/{path}"), None).await;
        assert_eq!(status, StatusCode::NOT_FOUND);
        assert_eq!(v["error"], "unknown_session");
    }

    let s = start(&app, json!({ "strategy": "semantic_push" })).await;
    let q = query(&app, &s.session_id).await;
    let unserved = (0..14).find(|t| !q.query.explanation_for(q.y_hat).unwrap().contains(*t)).unwrap();
    let bad = [verdict(q.y_hat, unserved, Verdict::Irrelevant)];
    let (status, v) = correct(&app, &s.session_id, q.y_hat, &bad).await;
    assert_eq!(status, StatusCode::UNPROCESSABLE_ENTITY);
    assert_eq!(v["error"], "schema_error");
    let (status, _) = correct(&app, &s.session_id, 9, &[]).await;
    assert_eq!(status, StatusCode::UNPROCESSABLE_ENTITY);
    let (status, _) =
        call(&app, "POST", &format!("/v1/sessions/{}/correction", s.session_id), Some(json!({ "label": 1 }))).await;
    assert_eq!(status, StatusCode::UNPROCESSABLE_ENTITY);

    // Nothing above changed the session.
    assert_eq!(query(&app, &s.session_id).await, q);
    let (_, m) = call(&app, "GET", &format!("/v1/sessions/{}/metrics", s.session_id), None).await;
    let m: MetricsPayload = parse(m);
    assert!(m.series.iter().all(|s| s.points.iter().all(|p| p.0 == 0)));
}

#[tokio::test]
async fn accepted_correction_matches_its_case() {
    let app = app();
    let s = start(&app, json!({ "strategy": "semantic_push" })).await;
    let id = s.session_id.as_str();
    let q = query(&app, id).await;
    let expl = q.query.explanation_for(q.y_hat).unwrap().clone();

    // Everything judged right: nothing to push.
    let all_right: Vec<_> = expl.features.iter().map(|&(t, _)| verdict(q.y_hat, t, Verdict::RelevantUsedCorrectly)).collect();
    let (status, v) = correct(&app, id, q.y_hat, &all_right).await;
    assert_eq!(status, StatusCode::OK, "{v}");
    let summary: CorrectionSummary = parse(v);
    assert!(summary.counterexamples.is_empty());
    assert_eq!(summary.iteration, 1);

    // One topic judged irrelevant: it is cut out of every counterexample.
    let q = query(&app, id).await;
    let expl = q.query.explanation_for(q.y_hat).unwrap().clone();
    let t = expl.features[0].0;
    let mut verdicts = vec![verdict(q.y_hat, t, Verdict::Irrelevant)];
    verdicts.extend(expl.features[1..].iter().map(|&(f, _)| verdict(q.y_hat, f, Verdict::RelevantUsedCorrectly)));
    let (status, v) = correct(&app, id, q.y_hat, &verdicts).await;
    assert_eq!(status, StatusCode::OK, "{v}");
    let summary: CorrectionSummary = parse(v);
    let tokens = &setup().1.corpus.documents[q.query.doc].tokens;
    let assignment = q.query.assignment.as_ref().unwrap();
    let kept: Vec<u32> =
        tokens.iter().zip(&assignment.0).filter(|(_, &z)| z as u32 != t).map(|(&w, _)| w).collect();
    assert!(kept.len() < tokens.len());
    assert_eq!(summary.counterexamples.len(), 10);
    for c in &summary.counterexamples {
        assert_eq!(c.provenance, Provenance::SemanticCompletion);
        assert_eq!(c.label, q.y_hat);
        assert_eq!(c.tokens, kept);
    }

    let (_, records) = call(&app, "GET", &format!("/v1/sessions/{id}/records"), None).await;
    let records: RecordsPayload = parse(records);
    assert_eq!(records.records.len(), 2);
    assert_eq!(records.records[1].correction.destructive, vec![t]);
}

#[tokio::test]
async fn finished_session_has_no_query() {
    let app = app();
    let s = start(&app, json!({ "strategy": "al", "iterations": 1 })).await;
    let q = query(&app, &s.session_id).await;
    let (status, v) = correct(&app, &s.session_id, q.y_hat, &[]).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(v["phase"], "finished");
    let (status, v) = call(&app, "GET", &format!("/v1/sessions/{}/query", s.session_id), None).await;
    assert_eq!(status, StatusCode::CONFLICT);
    assert_eq!(v["error"], "wrong_phase");
    let (status, _) = correct(&app, &s.session_id, 0, &[]).await;
    assert_eq!(status, StatusCode::CONFLICT);
}

#[tokio::test(flavor = "multi_thread", worker_threads = 2)]
async fn concurrent_corrections_conflict() {
    let app = app();
    let s = start(&app, json!({ "strategy": "semantic_push" })).await;
    let q = query(&app, &s.session_id).await;
    let y = (q.y_hat + 1) % 4;
    let (a, b) = tokio::join!(correct(&app, &s.session_id, y, &[]), correct(&app, &s.session_id, y, &[]));
    let mut statuses = [a.0, b.0];
    statuses.sort();
    assert_eq!(statuses, [StatusCode::OK, StatusCode::CONFLICT]);
    let (_, records) = call(&app, "GET", &format!("/v1/sessions/{}/records", s.session_id), None).await;
    assert_eq!(parse::<RecordsPayload>(records).records.len(), 1);
}

#[tokio::test]
async fn cors_preflight_is_answered() {
    let app = app();
    let req = Request::builder()
        .method("OPTIONS")
        .uri("/v1/sessions")
        .header("origin", "http://localhost:5173")
        .header("access-control-request-method", "POST")
        .body(Body::empty())
        .unwrap();
    let resp = app.oneshot(req).await.unwrap();
    assert!(resp.status().is_success());
    assert!(resp.headers().contains_key("access-control-allow-origin"));
}

/// Answers every query the way the simulated oracle would, over HTTP only.
async fn drive_gold_standard_client(app: &Router, strategy: Strategy) -> (MetricsPayload, RecordsPayload) {
    let labels = &setup().1.corpus.labels;
    let s = start(app, json!({ "strategy": strategy })).await;
    let id = s.session_id.as_str();
    let (status, v) = call(app, "GET", &format!("/v1/sessions/{id}/gold_standard"), None).await;
    let gs = (status == StatusCode::OK).then(|| {
        let p: GoldStandardPayload = parse(v);
        GoldStandard { kind: p.kind, per_class: p.classes.into_iter().map(ClassKnowledge::new).collect(), source_f1: 0.0 }
    });
    loop {
        let (status, v) = call(app, "GET", &format!("/v1/sessions/{id}/query"), None).await;
        if status == StatusCode::CONFLICT {
            break;
        }
        let q: QueryPayload = parse(v);
        let y = labels[q.query.doc];
        let verdicts = simulated_verdicts(&q.query, gs.as_ref(), y);
        let (status, v) = correct(app, id, y, &verdicts).await;
        assert_eq!(status, StatusCode::OK, "{v}");
    }
    let (_, m) = call(app, "GET", &format!("/v1/sessions/{id}/metrics"), None).await;
    let (_, r) = call(app, "GET", &format!("/v1/sessions/{id}/records"), None).await;
    (parse(m), parse(r))
}

#[tokio::test]
async fn gold_standard_client_reproduces_headless_run() {
    let (cfg, prepared) = setup();
    let app = app();
    for strategy in Strategy::ALL {
        let headless = run_strategy(cfg, prepared, strategy).unwrap();
        let (metrics, records) = drive_gold_standard_client(&app, strategy).await;
        assert_eq!(metrics.baseline, headless.baseline, "{strategy:?}");
        assert_eq!(metrics.series, headless.series, "{strategy:?}");
        assert_eq!(records.records.len(), 20);
        for (served, local) in records.records.iter().zip(&headless.records) {
            assert_eq!(served.query_doc, local.query_doc);
            assert_eq!(served.counterexamples, local.counterexamples, "{strategy:?} iteration {}", local.iteration);
            assert_eq!(served.metrics, local.metrics);
        }
    }
}
