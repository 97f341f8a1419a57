//! HTTP API for the annotation workflow.

use std::collections::HashMap;
use std::path::PathBuf;
use std::sync::Arc;

use axum::extract::{FromRequestParts, Path, Query, State};
use axum::http::request::Parts;
use axum::http::{header, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post, put};
use axum::{Json, Router};
use parking_lot::Mutex;
use serde::{Deserialize, Serialize};
use serde_json::json;

use factcheck_core::annotation::{
    evidence_breakdown, AnnotationStore, ConsolidationRequest, ExportFilter, ManualEvidence, Step, WorkflowError,
};
use factcheck_core::model::{validate_dataset, DatasetOptions, FactcheckDocument, Source};
use factcheck_core::Error;

#[derive(Clone)]
pub struct AppState {
    store: Arc<Mutex<AnnotationStore>>,
    /// Bearer token -> annotator id.
    tokens: Arc<HashMap<String, String>>,
}

impl AppState {
    pub fn new(store: AnnotationStore, tokens: HashMap<String, String>) -> Self {
        Self { store: Arc::new(Mutex::new(store)), tokens: Arc::new(tokens) }
    }

    /// Runs a store operation on the blocking pool; pre-fill may call out
    /// to providers with blocking clients.
    async fn with_store<T, F>(&self, f: F) -> Result<T, ApiError>
    where
        T: Send + 'static,
        F: FnOnce(&mut AnnotationStore) -> factcheck_core::Result<T> + Send + 'static,
    {
        let store = self.store.clone();
        tokio::task::spawn_blocking(move || f(&mut store.lock()))
            .await
            .map_err(|e| ApiError::internal(e.to_string()))?
            .map_err(ApiError::from)
    }
}

#[derive(Debug, Serialize)]
pub struct ApiError {
    #[serde(skip)]
    status: StatusCode,
    code: String,
    message: String,
    field_paths: Vec<String>,
}

impl ApiError {
    fn new(status: StatusCode, code: &str, message: impl Into<String>) -> Self {
        Self { status, code: code.into(), message: message.into(), field_paths: Vec::new() }
    }

    fn internal(message: String) -> Self {
        Self::new(StatusCode::INTERNAL_SERVER_ERROR, "internal", message)
    }
}

impl From<Error> for ApiError {
    fn from(e: Error) -> Self {
        let message = e.to_string();
        match e {
            Error::Workflow(w) => {
                let status = match &w {
                    WorkflowError::UnknownDocument(_) | WorkflowError::UnknownSession(_) | WorkflowError::UnknownClaim(_) => {
                        StatusCode::NOT_FOUND
                    }
                    WorkflowError::Forbidden(_) => StatusCode::FORBIDDEN,
                    WorkflowError::MissingResolution(_)
                    | WorkflowError::InvalidResolution { .. }
                    | WorkflowError::FrozenFields(_) => StatusCode::UNPROCESSABLE_ENTITY,
                    _ => StatusCode::CONFLICT,
                };
                Self { status, code: w.code().into(), message, field_paths: w.field_paths() }
            }
            Error::Validation(v) => Self {
                status: StatusCode::UNPROCESSABLE_ENTITY,
                code: "validation".into(),
                message,
                field_paths: v.field_paths(),
            },
            Error::InvalidInput(_) | Error::Json(_) => Self::new(StatusCode::BAD_REQUEST, "invalid-input", message),
            Error::Provider(_) => Self::new(StatusCode::BAD_GATEWAY, "provider", message),
            other => Self::internal(other.to_string()),
        }
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        (self.status, Json(&self)).into_response()
    }
}

/// The authenticated annotator.
pub struct Annotator(pub String);

impl FromRequestParts<AppState> for Annotator {
    type Rejection = ApiError;

    async fn from_request_parts(parts: &mut Parts, state: &AppState) -> Result<Self, Self::Rejection> {
        let token = parts
            .headers
            .get(header::AUTHORIZATION)
            .and_then(|v| v.to_str().ok())
            .and_then(|v| v.strip_prefix("Bearer "))
            .map(str::trim);
        match token.and_then(|t| state.tokens.get(t)) {
            Some(id) => Ok(Annotator(id.clone())),
            None => Err(ApiError::new(StatusCode::UNAUTHORIZED, "unauthorized", "missing or unknown bearer token")),
        }
    }
}

#[derive(Deserialize)]
struct CreateSession {
    document_id: String,
}

#[derive(Deserialize, Default)]
struct SubmitBody {
    #[serde(default)]
    draft: Option<FactcheckDocument>,
}

#[derive(Deserialize)]
struct StepQuery {
    step: Option<String>,
}

#[derive(Deserialize)]
struct ExportQuery {
    source: Option<Source>,
    format: Option<String>,
}

fn parse_step(s: Option<&str>) -> Result<Option<Step>, ApiError> {
    s.map(|s| Step::parse(s).ok_or_else(|| ApiError::new(StatusCode::BAD_REQUEST, "invalid-input", format!("unknown step {s:?}"))))
        .transpose()
}

async fn create_session(
    State(state): State<AppState>,
    Annotator(who): Annotator,
    Json(body): Json<CreateSession>,
) -> Result<impl IntoResponse, ApiError> {
    log::debug!("POST /sessions {} by {who}", body.document_id);
    let session = state.with_store(move |s| s.create_session(&body.document_id, &who)).await?;
    Ok((StatusCode::CREATED, Json(session)))
}

async fn get_session(
    State(state): State<AppState>,
    Annotator(who): Annotator,
    Path(id): Path<String>,
) -> Result<impl IntoResponse, ApiError> {
    let session = state.with_store(move |s| s.session(&id, &who).cloned()).await?;
    Ok(Json(session))
}

async fn put_draft(
    State(state): State<AppState>,
    Annotator(who): Annotator,
    Path(id): Path<String>,
    Json(draft): Json<FactcheckDocument>,
) -> Result<impl IntoResponse, ApiError> {
    let session = state.with_store(move |s| s.update_draft(&id, &who, draft)).await?;
    Ok(Json(session))
}

async fn submit(
    State(state): State<AppState>,
    Annotator(who): Annotator,
    Path(id): Path<String>,
    body: Option<Json<SubmitBody>>,
) -> Result<impl IntoResponse, ApiError> {
    let draft = body.and_then(|Json(b)| b.draft);
    let session = state.with_store(move |s| s.submit(&id, &who, draft)).await?;
    Ok(Json(session))
}

async fn disagreements(
    State(state): State<AppState>,
    Annotator(_who): Annotator,
    Path(id): Path<String>,
    Query(q): Query<StepQuery>,
) -> Result<impl IntoResponse, ApiError> {
    let step = parse_step(q.step.as_deref())?;
    let list = state
        .with_store(move |s| {
            let step = match step {
                Some(step) => step,
                None => s.document(&id)?.step.ok_or_else(|| {
                    Error::InvalidInput(format!("document {id} is complete; pass ?step="))
                })?,
            };
            s.disagreements(&id, step)
        })
        .await?;
    Ok(Json(list))
}

async fn consolidate(
    State(state): State<AppState>,
    Annotator(who): Annotator,
    Path(id): Path<String>,
    Json(mut req): Json<ConsolidationRequest>,
) -> Result<impl IntoResponse, ApiError> {
    if req.resolver.is_empty() {
        req.resolver = who;
    }
    let record = state.with_store(move |s| s.consolidate(&id, req)).await?;
    Ok(Json(record))
}

async fn add_evidence(
    State(state): State<AppState>,
    Annotator(who): Annotator,
    Path((id, claim_id)): Path<(String, String)>,
    Json(item): Json<ManualEvidence>,
) -> Result<impl IntoResponse, ApiError> {
    let session = state.with_store(move |s| s.add_manual_evidence(&id, &who, &claim_id, item)).await?;
    Ok((StatusCode::CREATED, Json(session)))
}

async fn export(
    State(state): State<AppState>,
    Annotator(_who): Annotator,
    Query(q): Query<ExportQuery>,
) -> Result<Response, ApiError> {
    let filter = ExportFilter { source: q.source };
    let docs = state.with_store(move |s| s.export(&filter)).await?;
    if q.format.as_deref() == Some("summary") {
        let stats = validate_dataset(&docs, DatasetOptions::default()).map_err(Error::from)?;
        let body = json!({ "stats": stats, "evidence_breakdown": evidence_breakdown(&docs) });
        return Ok(Json(body).into_response());
    }
    let mut out = String::new();
    for doc in &docs {
        out.push_str(&serde_json::to_string(doc).map_err(Error::from)?);
        out.push('\n');
    }
    Ok(([(header::CONTENT_TYPE, "application/x-ndjson")], out).into_response())
}

#[derive(Serialize)]
struct DocumentSummary {
    document_id: String,
    step: Option<Step>,
    discarded: bool,
}

async fn list_documents(
    State(state): State<AppState>,
    Annotator(_who): Annotator,
) -> Result<impl IntoResponse, ApiError> {
    let docs = state
        .with_store(|s| {
            Ok(s.state()
                .documents
                .iter()
                .map(|(id, d)| DocumentSummary { document_id: id.clone(), step: d.step, discarded: d.discarded })
                .collect::<Vec<_>>())
        })
        .await?;
    Ok(Json(docs))
}

async fn discovery() -> impl IntoResponse {
    Json(json!({
        "api_version": 1,
        "steps": Step::ALL,
        "endpoints": {
            "create_session": "POST /sessions",
            "get_session": "GET /sessions/{id}",
            "put_draft": "PUT /sessions/{id}/draft",
            "submit": "POST /sessions/{id}/submit",
            "disagreements": "GET /documents/{id}/disagreements?step=",
            "consolidate": "POST /documents/{id}/consolidate",
            "manual_evidence": "POST /sessions/{id}/claims/{cid}/evidence",
            "export": "GET /export",
            "documents": "GET /documents",
        },
        "auth": "Authorization: Bearer <token>",
    }))
}

pub fn router(state: AppState, static_dir: Option<PathBuf>) -> Router {
    let api = Router::new()
        .route("/config.json", get(discovery))
        .route("/sessions", post(create_session))
        .route("/sessions/{id}", get(get_session))
        .route("/sessions/{id}/draft", put(put_draft))
        .route("/sessions/{id}/submit", post(submit))
        .route("/sessions/{id}/claims/{cid}/evidence", post(add_evidence))
        .route("/documents", get(list_documents))
        .route("/documents/{id}/disagreements", get(disagreements))
        .route("/documents/{id}/consolidate", post(consolidate))
        .route("/export", get(export))
        .with_state(state);
    match static_dir {
        Some(dir) => api.fallback_service(tower_http::services::ServeDir::new(dir)),
        None => api,
    }
}
