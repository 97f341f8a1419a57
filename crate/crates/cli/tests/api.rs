use std::collections::HashMap;
use std::path::PathBuf;
use std::sync::Arc;

use axum::body::Body;
use axum::http::{header, Method, Request, StatusCode};
use axum::Router;
use http_body_util::BodyExt;
use serde_json::{json, Value};
use tower::ServiceExt;

use factcheck_cli::server::{router, AppState};
use factcheck_core::annotation::{AnnotationStore, MergePrefiller};
use factcheck_core::{FactcheckDocument, Pipeline, PipelineConfig, PipelineInput};

fn e2e_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../core/tests/fixtures/e2e")
}

fn eiffel() -> FactcheckDocument {
    let config = PipelineConfig::load(e2e_dir().join("pipeline.toml")).unwrap();
    let pipeline = Pipeline::from_config(config).unwrap();
    let line = std::fs::read_to_string(e2e_dir().join("inputs.jsonl"))
        .unwrap()
        .lines()
        .find(|l| l.contains("\"eiffel\""))
        .unwrap()
        .to_string();
    let input: PipelineInput = serde_json::from_str(&line).unwrap();
    let mut doc = pipeline.run(&input).unwrap().document;
    doc.revised_response = None;
    doc.document_verdict = None;
    doc
}

fn app() -> Router {
    let mut store = AnnotationStore::in_memory(Arc::new(MergePrefiller)).with_k(1);
    store.add_document(eiffel()).unwrap();
    let tokens = HashMap::from([
        ("tok-a".to_string(), "ann-a".to_string()),
        ("tok-b".to_string(), "ann-b".to_string()),
        ("tok-lead".to_string(), "lead".to_string()),
    ]);
    router(AppState::new(store, tokens), None)
}

async fn call(app: &Router, method: Method, uri: &str, token: Option<&str>, body: Option<Value>) -> (StatusCode, Value) {
    let mut req = Request::builder().method(method).uri(uri);
    if let Some(t) = token {
        req = req.header(header::AUTHORIZATION, format!("Bearer {t}"));
    }
    let req = match body {
        Some(b) => req.header(header::CONTENT_TYPE, "application/json").body(Body::from(b.to_string())),
        None => req.body(Body::empty()),
    }
    .unwrap();
    let resp = app.clone().oneshot(req).await.unwrap();
    let status = resp.status();
    let bytes = resp.into_body().collect().await.unwrap().to_bytes();
    let text = String::from_utf8(bytes.to_vec()).unwrap();
    let value = serde_json::from_str(&text).unwrap_or(Value::String(text));
    (status, value)
}

async fn open(app: &Router, token: &str) -> Value {
    let (status, session) = call(app, Method::POST, "/sessions", Some(token), Some(json!({"document_id": "eiffel"}))).await;
    assert_eq!(status, StatusCode::CREATED, "{session}");
    session
}

async fn submit_both(app: &Router, a: &Value, b: &Value) {
    for (token, s) in [("tok-a", a), ("tok-b", b)] {
        let uri = format!("/sessions/{}/submit", s["session_id"].as_str().unwrap());
        let (status, body) = call(app, Method::POST, &uri, Some(token), None).await;
        assert_eq!(status, StatusCode::OK, "{body}");
        assert_eq!(body["status"], "submitted");
    }
}

async fn consolidate(app: &Router) -> Value {
    let (status, record) =
        call(app, Method::POST, "/documents/eiffel/consolidate", Some("tok-lead"), Some(json!({}))).await;
    assert_eq!(status, StatusCode::OK, "{record}");
    record
}

#[tokio::test]
async fn requests_without_a_known_token_are_rejected() {
    let app = app();
    let (status, body) = call(&app, Method::GET, "/documents", None, None).await;
    assert_eq!(status, StatusCode::UNAUTHORIZED);
    assert_eq!(body["code"], "unauthorized");
    let (status, _) = call(&app, Method::GET, "/documents", Some("nope"), None).await;
    assert_eq!(status, StatusCode::UNAUTHORIZED);
}

#[tokio::test]
async fn discovery_lists_steps() {
    let (status, body) = call(&app(), Method::GET, "/config.json", None, None).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(body["steps"][0], "step1-decompose-cw");
    assert!(body["endpoints"]["export"].is_string());
}

#[tokio::test]
async fn sessions_are_private_and_blinded() {
    let app = app();
    let a = open(&app, "tok-a").await;
    assert_eq!(a["step"], "step1-decompose-cw");
    let uri = format!("/sessions/{}", a["session_id"].as_str().unwrap());
    let (status, _) = call(&app, Method::GET, &uri, Some("tok-a"), None).await;
    assert_eq!(status, StatusCode::OK);
    let (status, body) = call(&app, Method::GET, &uri, Some("tok-b"), None).await;
    assert_eq!(status, StatusCode::FORBIDDEN, "{body}");

    let (status, body) = call(&app, Method::POST, "/sessions", Some("tok-a"), Some(json!({"document_id": "eiffel"}))).await;
    assert_eq!(status, StatusCode::CONFLICT, "{body}");

    let (status, body) = call(&app, Method::GET, "/documents/eiffel/disagreements", Some("tok-lead"), None).await;
    assert_eq!(status, StatusCode::CONFLICT);
    assert_eq!(body["code"], "not-ready", "{body}");

    let (status, _) = call(&app, Method::POST, "/sessions", Some("tok-a"), Some(json!({"document_id": "missing"}))).await;
    assert_eq!(status, StatusCode::NOT_FOUND);
}

#[tokio::test]
async fn frozen_fields_are_reported_with_paths() {
    let app = app();
    let a = open(&app, "tok-a").await;
    let mut draft = a["draft"].clone();
    draft["response"] = json!("Something else entirely.");
    let uri = format!("/sessions/{}/draft", a["session_id"].as_str().unwrap());
    let (status, body) = call(&app, Method::PUT, &uri, Some("tok-a"), Some(draft)).await;
    assert_eq!(status, StatusCode::UNPROCESSABLE_ENTITY, "{body}");
    assert!(body["field_paths"].as_array().unwrap().iter().any(|p| p == "response"), "{body}");
}

#[tokio::test]
async fn full_workflow_over_http() {
    let app = app();

    // Step 1: one importance disagreement, resolved explicitly.
    let a = open(&app, "tok-a").await;
    let b = open(&app, "tok-b").await;
    let mut draft = b["draft"].clone();
    draft["sentences"][0]["claims"][0]["importance"] = json!("intermediate");
    let uri = format!("/sessions/{}/draft", b["session_id"].as_str().unwrap());
    let (status, body) = call(&app, Method::PUT, &uri, Some("tok-b"), Some(draft)).await;
    assert_eq!(status, StatusCode::OK, "{body}");
    submit_both(&app, &a, &b).await;

    let (status, list) = call(&app, Method::GET, "/documents/eiffel/disagreements", Some("tok-lead"), None).await;
    assert_eq!(status, StatusCode::OK);
    let list = list.as_array().unwrap();
    assert_eq!(list.len(), 1, "{list:?}");
    let path = list[0]["field_path"].as_str().unwrap().to_string();

    let (status, body) =
        call(&app, Method::POST, "/documents/eiffel/consolidate", Some("tok-lead"), Some(json!({}))).await;
    assert_eq!(status, StatusCode::UNPROCESSABLE_ENTITY, "{body}");
    let (status, record) = call(
        &app,
        Method::POST,
        "/documents/eiffel/consolidate",
        Some("tok-lead"),
        Some(json!({"resolutions": {path: "most-important"}})),
    )
    .await;
    assert_eq!(status, StatusCode::OK, "{record}");
    assert_eq!(record["outcome"], "consensus");
    assert_eq!(record["disagreements"][0]["resolver"], "lead");

    // Step 2: annotator A adds manual evidence.
    let a = open(&app, "tok-a").await;
    let b = open(&app, "tok-b").await;
    assert_eq!(a["step"], "step2-stance-correct");
    let uri = format!("/sessions/{}/claims/c1/evidence", a["session_id"].as_str().unwrap());
    let (status, body) = call(&app, Method::POST, &uri, Some("tok-a"), Some(json!({"snippet": ""}))).await;
    assert_eq!(status, StatusCode::UNPROCESSABLE_ENTITY, "{body}");
    let (status, session) = call(
        &app,
        Method::POST,
        &uri,
        Some("tok-a"),
        Some(json!({"snippet": "Gustave Eiffel's company built the tower in Paris.", "stance": "completely-support"})),
    )
    .await;
    assert_eq!(status, StatusCode::CREATED, "{session}");
    let evidence = session["draft"]["sentences"][0]["claims"][0]["evidence"].as_array().unwrap();
    assert_eq!(evidence.len(), 2);
    assert_eq!(evidence[1]["url"], "manual:c1:1");
    submit_both(&app, &a, &b).await;
    let (_, list) = call(&app, Method::GET, "/documents/eiffel/disagreements?step=step2", Some("tok-lead"), None).await;
    let paths: Vec<_> = list.as_array().unwrap().iter().map(|d| d["field_path"].clone()).collect();
    let resolutions: serde_json::Map<String, Value> =
        list.as_array().unwrap().iter().map(|d| (d["field_path"].as_str().unwrap().to_string(), d["value_a"].clone())).collect();
    assert!(!paths.is_empty());
    let (status, body) = call(
        &app,
        Method::POST,
        "/documents/eiffel/consolidate",
        Some("tok-lead"),
        Some(json!({"resolutions": resolutions})),
    )
    .await;
    assert_eq!(status, StatusCode::OK, "{body}");

    // Nothing is exported before step 3 is consolidated.
    let (status, body) = call(&app, Method::GET, "/export", Some("tok-lead"), None).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(body, Value::String(String::new()));

    let a = open(&app, "tok-a").await;
    let b = open(&app, "tok-b").await;
    assert_eq!(a["step"], "step3-merge-revise");
    submit_both(&app, &a, &b).await;
    consolidate(&app).await;

    let (_, docs) = call(&app, Method::GET, "/documents", Some("tok-a"), None).await;
    assert_eq!(docs[0]["step"], Value::Null);

    let (status, text) = call(&app, Method::GET, "/export?source=dolly-open-qa", Some("tok-lead"), None).await;
    assert_eq!(status, StatusCode::OK);
    let line = text.as_str().map(str::to_string).unwrap_or_else(|| text.to_string());
    let exported: FactcheckDocument = serde_json::from_str(line.trim()).unwrap();
    assert_eq!(exported.id, "eiffel");
    assert_eq!(exported.document_verdict, Some(factcheck_core::DocumentVerdict::FactuallyCorrect));
    assert_eq!(exported.sentences[0].claims[0].evidence.iter().filter(|e| e.manual).count(), 1);

    let (_, other) = call(&app, Method::GET, "/export?source=in-house", Some("tok-lead"), None).await;
    assert_eq!(other, Value::String(String::new()));

    let (status, summary) = call(&app, Method::GET, "/export?format=summary", Some("tok-lead"), None).await;
    assert_eq!(status, StatusCode::OK, "{summary}");
    assert_eq!(summary["stats"]["documents"], 1);
    assert_eq!(summary["evidence_breakdown"]["needed_manual"], 1);

    let (status, _) = call(&app, Method::POST, "/sessions", Some("tok-a"), Some(json!({"document_id": "eiffel"}))).await;
    assert_eq!(status, StatusCode::CONFLICT);
}
