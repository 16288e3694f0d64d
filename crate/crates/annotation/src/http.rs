//! HTTP routes.
//!
//! | method | path | body / query | response |
//! |---|---|---|---|
//! | GET | `/gold` | | gold items without answers |
//! | POST | `/annotators/{id}/qualification` | `{"answers": [{"gold_id", "choice"}]}` | status and score |
//! | GET | `/annotators/{id}` | | annotator record |
//! | GET | `/tasks/next` | `?annotator=&criterion=` | task, or 204 when none is left |
//! | POST | `/judgments` | `{"task_id", "annotator_id", "criterion", "choice"}` | acknowledgment |
//! | GET | `/export` | `?criterion=` | resolved comparisons |
//! | GET | `/progress` | | totals |
//!
//! Errors are `{"error": code, "message": text}` with a 4xx status.

use std::sync::{Arc, RwLock};

use axum::extract::{Path, Query, State};
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use facetkit_core::stats::Criterion;
use serde::Deserialize;

use crate::model::{GoldAnswer, JudgmentRequest};
use crate::{AnnotationError, AnnotationService};

pub type SharedService = Arc<RwLock<AnnotationService>>;

impl IntoResponse for AnnotationError {
    fn into_response(self) -> Response {
        let status = match self {
            AnnotationError::UnknownTask(_) => StatusCode::NOT_FOUND,
            AnnotationError::NotQualified(_) => StatusCode::FORBIDDEN,
            AnnotationError::AlreadyQualified(_)
            | AnnotationError::AlreadyRejected(_)
            | AnnotationError::DuplicateJudgment { .. }
            | AnnotationError::TaskComplete(_) => StatusCode::CONFLICT,
            AnnotationError::UnknownGoldSet
            | AnnotationError::CriterionMismatch(_)
            | AnnotationError::Config(_) => StatusCode::BAD_REQUEST,
            AnnotationError::Log(_) => StatusCode::INTERNAL_SERVER_ERROR,
        };
        let body = serde_json::json!({ "error": self.code(), "message": self.to_string() });
        (status, Json(body)).into_response()
    }
}

pub fn router(service: SharedService) -> Router {
    Router::new()
        .route("/gold", get(gold))
        .route("/annotators/:id", get(annotator))
        .route("/annotators/:id/qualification", post(qualify))
        .route("/tasks/next", get(next_task))
        .route("/judgments", post(submit))
        .route("/export", get(export))
        .route("/progress", get(progress))
        .with_state(service)
}

/// Serves until `shutdown` resolves.
pub async fn serve(
    listener: tokio::net::TcpListener,
    service: AnnotationService,
    shutdown: impl std::future::Future<Output = ()> + Send + 'static,
) -> std::io::Result<()> {
    let app = router(Arc::new(RwLock::new(service)));
    axum::serve(listener, app).with_graceful_shutdown(shutdown).await
}

// A poisoned lock means a handler panicked mid-request; the state itself is
// only ever changed after a successful log append, so it stays usable.
fn read(s: &SharedService) -> std::sync::RwLockReadGuard<'_, AnnotationService> {
    s.read().unwrap_or_else(|e| e.into_inner())
}

fn write(s: &SharedService) -> std::sync::RwLockWriteGuard<'_, AnnotationService> {
    s.write().unwrap_or_else(|e| e.into_inner())
}

async fn gold(State(s): State<SharedService>) -> Response {
    Json(read(&s).gold_views()).into_response()
}

async fn annotator(State(s): State<SharedService>, Path(id): Path<String>) -> Response {
    Json(read(&s).annotator(&id)).into_response()
}

#[derive(Deserialize)]
struct QualificationBody {
    answers: Vec<GoldAnswer>,
}

async fn qualify(
    State(s): State<SharedService>,
    Path(id): Path<String>,
    Json(body): Json<QualificationBody>,
) -> Result<Response, AnnotationError> {
    let result = write(&s).run_qualification(&id, &body.answers)?;
    Ok(Json(result).into_response())
}

#[derive(Deserialize)]
struct NextQuery {
    annotator: String,
    criterion: Criterion,
}

async fn next_task(
    State(s): State<SharedService>,
    Query(q): Query<NextQuery>,
) -> Result<Response, AnnotationError> {
    match write(&s).next_task(&q.annotator, q.criterion)? {
        Some(task) => Ok(Json(task).into_response()),
        None => Ok(StatusCode::NO_CONTENT.into_response()),
    }
}

async fn submit(
    State(s): State<SharedService>,
    Json(body): Json<JudgmentRequest>,
) -> Result<Response, AnnotationError> {
    let ack = write(&s).submit_judgment(body)?;
    Ok((StatusCode::CREATED, Json(ack)).into_response())
}

#[derive(Deserialize)]
struct ExportQuery {
    criterion: Criterion,
}

async fn export(State(s): State<SharedService>, Query(q): Query<ExportQuery>) -> Response {
    Json(read(&s).export(q.criterion)).into_response()
}

async fn progress(State(s): State<SharedService>) -> Response {
    Json(read(&s).progress()).into_response()
}
