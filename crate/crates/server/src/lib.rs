//! REST service for the human review round: annotators list flagged drafts,
//! claim one under a lease, and submit annotations to an append-only
//! journal.
//!
//! Authentication is a single shared bearer token plus an `x-annotator-id`
//! header naming the annotator. That suits a trusted team on a private
//! network; it is not production-grade access control.

mod state;

use std::collections::{BTreeMap, BTreeSet};
use std::sync::Arc;
use std::time::Duration;

use axum::body::Bytes;
use axum::extract::{Path, Query, Request, State};
use axum::http::{header, StatusCode};
use axum::middleware::{self, Next};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Extension, Json, Router};
use instructlr_core::annotation::{agreement, export_merged_sheet, merge_annotations, AgreementLabel, ADJUDICATOR};
use instructlr_core::config::Config;
use instructlr_core::pipeline::{RunPaths, Stage};
use instructlr_core::{AnnotationRecord, CheckedDraft, ErrorCategory, TriageStatus, Verdict};
use serde::{Deserialize, Serialize};
use serde_json::json;

pub use state::{AppState, ClaimOutcome, Clock, Lease, StateError};

pub const ANNOTATOR_HEADER: &str = "x-annotator-id";

#[derive(Debug)]
pub struct ApiError {
    status: StatusCode,
    body: serde_json::Value,
}

impl ApiError {
    fn new(status: StatusCode, message: impl Into<String>) -> Self {
        Self {
            status,
            body: json!({ "error": message.into() }),
        }
    }

    fn not_found(id: &str) -> Self {
        Self::new(StatusCode::NOT_FOUND, format!("unknown draft {id}"))
    }

    fn conflict(lease: Lease) -> Self {
        Self {
            status: StatusCode::CONFLICT,
            body: json!({ "error": "draft is claimed by another annotator", "lease": lease }),
        }
    }

    fn invalid(field: &str, message: impl Into<String>) -> Self {
        Self {
            status: StatusCode::BAD_REQUEST,
            body: json!({ "error": message.into(), "field": field }),
        }
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        (self.status, Json(self.body)).into_response()
    }
}

impl From<StateError> for ApiError {
    fn from(e: StateError) -> Self {
        tracing::error!("{e}");
        Self::new(StatusCode::INTERNAL_SERVER_ERROR, e.to_string())
    }
}

#[derive(Clone)]
struct Annotator(String);

async fn authenticate(State(state): State<Arc<AppState>>, mut req: Request, next: Next) -> Response {
    let headers = req.headers();
    let bearer = headers
        .get(header::AUTHORIZATION)
        .and_then(|v| v.to_str().ok())
        .and_then(|v| v.strip_prefix("Bearer "));
    if state.token.is_empty() || bearer != Some(state.token.as_str()) {
        return ApiError::new(StatusCode::UNAUTHORIZED, "missing or wrong bearer token").into_response();
    }
    let annotator = headers
        .get(ANNOTATOR_HEADER)
        .and_then(|v| v.to_str().ok())
        .map(str::trim)
        .filter(|v| !v.is_empty())
        .map(str::to_string);
    let Some(annotator) = annotator else {
        return ApiError::new(StatusCode::UNAUTHORIZED, format!("missing {ANNOTATOR_HEADER} header")).into_response();
    };
    req.extensions_mut().insert(Annotator(annotator));
    next.run(req).await
}

pub fn router(state: Arc<AppState>) -> Router {
    Router::new()
        .route("/api/drafts", get(list_drafts))
        .route("/api/drafts/{id}", get(get_draft))
        .route("/api/drafts/{id}/claim", post(claim))
        .route("/api/drafts/{id}/annotation", post(annotate))
        .route("/api/progress", get(progress))
        .route("/api/agreement", get(agreement_report))
        .route("/api/export.csv", get(export_csv))
        .layer(middleware::from_fn_with_state(state.clone(), authenticate))
        .with_state(state)
}

#[derive(Deserialize)]
struct ListQuery {
    status: Option<String>,
}

fn parse_status(s: &str) -> Result<TriageStatus, ApiError> {
    serde_json::from_value(json!(s)).map_err(|_| {
        ApiError::invalid("status", format!("unknown status {s:?}; use top_priority, low_priority or accepted"))
    })
}

/// Drafts in review order, leaving out those another annotator has claimed.
/// Without a status filter, all flagged drafts.
async fn list_drafts(
    State(state): State<Arc<AppState>>,
    Extension(Annotator(me)): Extension<Annotator>,
    Query(q): Query<ListQuery>,
) -> Result<Json<Vec<CheckedDraft>>, ApiError> {
    let wanted = q.status.as_deref().map(parse_status).transpose()?;
    let mut drafts: Vec<CheckedDraft> = state
        .drafts
        .iter()
        .filter(|c| match wanted {
            Some(s) => c.status == s,
            None => c.status != TriageStatus::Accepted,
        })
        .filter(|c| state.held_by_other(&c.draft.id, &me).is_none())
        .cloned()
        .collect();
    drafts.sort_by(|a, b| (a.status.review_rank(), &a.draft.id).cmp(&(b.status.review_rank(), &b.draft.id)));
    Ok(Json(drafts))
}

#[derive(Serialize)]
struct DraftView<'a> {
    #[serde(flatten)]
    checked: &'a CheckedDraft,
    lease: Option<Lease>,
}

async fn get_draft(
    State(state): State<Arc<AppState>>,
    Extension(Annotator(me)): Extension<Annotator>,
    Path(id): Path<String>,
) -> Result<Response, ApiError> {
    let checked = state.draft(&id).ok_or_else(|| ApiError::not_found(&id))?;
    let lease = state.held_by_other(&id, &me);
    Ok(Json(DraftView { checked, lease }).into_response())
}

async fn claim(
    State(state): State<Arc<AppState>>,
    Extension(Annotator(me)): Extension<Annotator>,
    Path(id): Path<String>,
) -> Result<Json<Lease>, ApiError> {
    state.draft(&id).ok_or_else(|| ApiError::not_found(&id))?;
    match state.claim(&id, &me) {
        ClaimOutcome::Granted(lease) => Ok(Json(lease)),
        ClaimOutcome::Held(lease) => Err(ApiError::conflict(lease)),
    }
}

/// Request body for an annotation; the draft and annotator come from the
/// path and header, and must match if repeated in the body.
#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct Submission {
    draft_id: Option<String>,
    annotator_id: Option<String>,
    is_correct: Verdict,
    #[serde(default)]
    corrected_instruction: Option<String>,
    #[serde(default)]
    corrected_response: Option<String>,
    #[serde(default)]
    error_category: Option<ErrorCategory>,
    #[serde(default)]
    comments: Option<String>,
}

fn non_blank(v: Option<String>) -> Option<String> {
    v.filter(|s| !s.trim().is_empty())
}

async fn annotate(
    State(state): State<Arc<AppState>>,
    Extension(Annotator(me)): Extension<Annotator>,
    Path(id): Path<String>,
    body: Bytes,
) -> Result<(StatusCode, Json<AnnotationRecord>), ApiError> {
    state.draft(&id).ok_or_else(|| ApiError::not_found(&id))?;
    let sub: Submission =
        serde_json::from_slice(&body).map_err(|e| ApiError::invalid("body", format!("invalid annotation: {e}")))?;
    if sub.draft_id.as_ref().is_some_and(|d| *d != id) {
        return Err(ApiError::invalid("draft_id", "does not match the path"));
    }
    if sub.annotator_id.as_ref().is_some_and(|a| *a != me) {
        return Err(ApiError::invalid("annotator_id", format!("does not match the {ANNOTATOR_HEADER} header")));
    }
    let record = AnnotationRecord {
        draft_id: id,
        annotator_id: me,
        is_correct: sub.is_correct,
        corrected_instruction: non_blank(sub.corrected_instruction),
        corrected_response: non_blank(sub.corrected_response),
        error_category: sub.error_category,
        comments: non_blank(sub.comments),
    };
    record.validate().map_err(|issue| ApiError::invalid(issue.field, issue.to_string()))?;
    match state.submit(record.clone())? {
        Ok(()) => Ok((StatusCode::CREATED, Json(record))),
        Err(lease) => Err(ApiError::conflict(lease)),
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Progress {
    pub total: usize,
    pub top_priority: usize,
    pub low_priority: usize,
    /// Drafts with at least one annotation.
    pub reviewed: usize,
    pub annotations: usize,
    /// Drafts whose vote produced a decision.
    pub decided: usize,
    pub needs_adjudication: usize,
    /// Annotated drafts per annotator.
    pub by_annotator: BTreeMap<String, usize>,
}

async fn progress(State(state): State<Arc<AppState>>) -> Json<Progress> {
    let records = state.records();
    let count = |s| state.drafts.iter().filter(|c| c.status == s).count();
    let mut by_annotator: BTreeMap<String, BTreeSet<&str>> = BTreeMap::new();
    for r in records.iter().filter(|r| r.annotator_id != ADJUDICATOR) {
        by_annotator.entry(r.annotator_id.clone()).or_default().insert(&r.draft_id);
    }
    let decisions = merge_annotations(&records);
    Json(Progress {
        total: state.drafts.len(),
        top_priority: count(TriageStatus::TopPriority),
        low_priority: count(TriageStatus::LowPriority),
        reviewed: decisions.len(),
        annotations: records.len(),
        decided: decisions.iter().filter(|d| !d.needs_adjudication).count(),
        needs_adjudication: decisions.iter().filter(|d| d.needs_adjudication).count(),
        by_annotator: by_annotator.into_iter().map(|(k, v)| (k, v.len())).collect(),
    })
}

#[derive(Deserialize)]
struct AgreementQuery {
    items: Option<usize>,
    #[serde(default)]
    label: AgreementLabel,
}

async fn agreement_report(
    State(state): State<Arc<AppState>>,
    Query(q): Query<AgreementQuery>,
) -> Result<Response, ApiError> {
    let report = agreement(&state.records(), q.label, q.items)
        .map_err(|e| ApiError::new(StatusCode::UNPROCESSABLE_ENTITY, e.to_string()))?;
    Ok(Json(report).into_response())
}

/// The review sheet filled with the current merged decisions.
async fn export_csv(State(state): State<Arc<AppState>>) -> Result<Response, ApiError> {
    let decisions = merge_annotations(&state.records());
    let csv = export_merged_sheet(&state.drafts, &decisions)
        .map_err(|e| ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, e.to_string()))?;
    Ok((
        [
            (header::CONTENT_TYPE, "text/csv; charset=utf-8"),
            (header::CONTENT_DISPOSITION, "attachment; filename=\"merged.csv\""),
        ],
        csv,
    )
        .into_response())
}

#[derive(Debug, thiserror::Error)]
pub enum ServeError {
    #[error("service.token is empty; set a shared token to enable the service")]
    NoToken,
    #[error(transparent)]
    State(#[from] StateError),
    #[error("binding {addr}: {source}")]
    Bind {
        addr: String,
        #[source]
        source: std::io::Error,
    },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Build the state from a run configuration: drafts from the run's
/// `checked.jsonl`, annotations from the configured journal.
pub fn state_from_config(config: &Config) -> Result<AppState, ServeError> {
    if config.service.token.is_empty() {
        return Err(ServeError::NoToken);
    }
    let checked = RunPaths::new(&config.paths.work_dir).output(Stage::Check);
    Ok(AppState::load(
        &checked,
        &config.journal_path(),
        &config.service.token,
        Duration::from_secs(config.service.lease_minutes * 60),
    )?)
}

pub async fn serve(config: &Config) -> Result<(), ServeError> {
    let state = Arc::new(state_from_config(config)?);
    let addr = config.service.bind.clone();
    let listener = tokio::net::TcpListener::bind(&addr)
        .await
        .map_err(|source| ServeError::Bind { addr: addr.clone(), source })?;
    tracing::info!(%addr, drafts = state.drafts.len(), "serving review API");
    axum::serve(listener, router(state))
        .with_graceful_shutdown(async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await?;
    Ok(())
}
