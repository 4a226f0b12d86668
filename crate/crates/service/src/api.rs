//! Review queue HTTP JSON API.

use axum::extract::rejection::JsonRejection;
use axum::extract::{Path, Query, State};
use axum::http::{header, HeaderMap, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use serde::{Deserialize, Serialize};
use std::future::Future;
use std::sync::Arc;

use vexeval_core::corpus::{Evaluation, VexCategory};
use vexeval_core::inference::EvaluationDraft;
use vexeval_core::review::{
    Decision, EnqueueOutcome, ItemId, Page, PageQuery, ReviewError, ReviewItem, ReviewQueue,
    ReviewStatus, DEFAULT_PAGE_SIZE,
};

/// Error body of every non-2xx response.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ErrorBody {
    pub error: String,
    pub message: String,
}

#[derive(Debug)]
pub struct ApiError {
    status: StatusCode,
    body: ErrorBody,
}

impl ApiError {
    fn new(status: StatusCode, error: &str, message: impl Into<String>) -> Self {
        Self {
            status,
            body: ErrorBody {
                error: error.to_string(),
                message: message.into(),
            },
        }
    }
}

impl From<ReviewError> for ApiError {
    fn from(e: ReviewError) -> Self {
        let (status, kind) = match &e {
            ReviewError::NotFound(_) => (StatusCode::NOT_FOUND, "not_found"),
            ReviewError::AlreadyDecided { .. } => (StatusCode::CONFLICT, "already_decided"),
            ReviewError::InvalidEdit(_) => (StatusCode::UNPROCESSABLE_ENTITY, "invalid_edit"),
            ReviewError::NotReviewable { .. } => {
                (StatusCode::UNPROCESSABLE_ENTITY, "not_reviewable")
            }
            ReviewError::Storage(_) | ReviewError::Chain(_) => {
                (StatusCode::INTERNAL_SERVER_ERROR, "storage")
            }
        };
        if status.is_server_error() {
            tracing::error!(error = %e, "review storage failure");
        }
        Self::new(status, kind, e.to_string())
    }
}

impl From<JsonRejection> for ApiError {
    fn from(e: JsonRejection) -> Self {
        Self::new(StatusCode::BAD_REQUEST, "invalid_body", e.body_text())
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        (self.status, Json(self.body)).into_response()
    }
}

type ApiResult<T> = Result<T, ApiError>;

/// Query string of `GET /queue`. `status=any` lists every status.
#[derive(Debug, Default, Deserialize)]
pub struct QueueParams {
    pub cursor: Option<ItemId>,
    pub page_size: Option<usize>,
    pub status: Option<String>,
    pub category: Option<String>,
}

impl QueueParams {
    fn to_query(&self) -> ApiResult<PageQuery> {
        let status = match self.status.as_deref() {
            None => Some(ReviewStatus::Pending),
            Some(s) if s.eq_ignore_ascii_case("any") => None,
            Some(s) => Some(ReviewStatus::from_label(s).ok_or_else(|| {
                ApiError::new(
                    StatusCode::BAD_REQUEST,
                    "invalid_query",
                    format!("unknown status {s:?}"),
                )
            })?),
        };
        let category = self
            .category
            .as_deref()
            .map(|c| {
                VexCategory::from_label(c).ok_or_else(|| {
                    ApiError::new(
                        StatusCode::BAD_REQUEST,
                        "invalid_query",
                        format!("unknown category {c:?}"),
                    )
                })
            })
            .transpose()?;
        Ok(PageQuery {
            cursor: self.cursor,
            page_size: self.page_size.unwrap_or(DEFAULT_PAGE_SIZE),
            status,
            category,
        })
    }
}

/// Body of `GET /healthz`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Health {
    pub status: String,
    pub items: usize,
}

fn reviewer(headers: &HeaderMap) -> ApiResult<String> {
    headers
        .get(header::AUTHORIZATION)
        .and_then(|v| v.to_str().ok())
        .and_then(|v| v.strip_prefix("Bearer "))
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(str::to_string)
        .ok_or_else(|| {
            ApiError::new(
                StatusCode::UNAUTHORIZED,
                "unauthorized",
                "a bearer token naming the reviewer is required",
            )
        })
}

async fn enqueue(
    State(queue): State<Arc<ReviewQueue>>,
    body: Result<Json<EvaluationDraft>, JsonRejection>,
) -> ApiResult<(StatusCode, Json<EnqueueOutcome>)> {
    let Json(draft) = body?;
    let outcome = queue.enqueue(draft, "api")?;
    let status = if outcome.created {
        StatusCode::CREATED
    } else {
        StatusCode::OK
    };
    Ok((status, Json(outcome)))
}

async fn list_queue(
    State(queue): State<Arc<ReviewQueue>>,
    Query(params): Query<QueueParams>,
) -> ApiResult<Json<Page>> {
    Ok(Json(queue.next_page(&params.to_query()?)))
}

async fn get_item(
    State(queue): State<Arc<ReviewQueue>>,
    Path(id): Path<ItemId>,
) -> ApiResult<Json<ReviewItem>> {
    queue
        .get(id)
        .map(Json)
        .ok_or_else(|| ReviewError::NotFound(id).into())
}

async fn decide(
    State(queue): State<Arc<ReviewQueue>>,
    Path(id): Path<ItemId>,
    headers: HeaderMap,
    body: Result<Json<Decision>, JsonRejection>,
) -> ApiResult<Json<ReviewItem>> {
    let reviewer = reviewer(&headers)?;
    let Json(decision) = body?;
    Ok(Json(queue.submit_decision(id, &decision, &reviewer)?))
}

async fn export_accepted(State(queue): State<Arc<ReviewQueue>>) -> Json<Vec<Evaluation>> {
    Json(queue.accepted_evaluations())
}

async fn healthz(State(queue): State<Arc<ReviewQueue>>) -> Json<Health> {
    Json(Health {
        status: "ok".into(),
        items: queue.len(),
    })
}

pub fn router(queue: Arc<ReviewQueue>) -> Router {
    Router::new()
        .route("/drafts", post(enqueue))
        .route("/queue", get(list_queue))
        .route("/items/{id}", get(get_item))
        .route("/items/{id}/decision", post(decide))
        .route("/export/accepted", get(export_accepted))
        .route("/healthz", get(healthz))
        .with_state(queue)
}

/// Serves the API until `shutdown` resolves, then snapshots the queue.
pub async fn serve(
    listener: tokio::net::TcpListener,
    queue: Arc<ReviewQueue>,
    shutdown: impl Future<Output = ()> + Send + 'static,
) -> std::io::Result<()> {
    tracing::info!(addr = ?listener.local_addr()?, "review API listening");
    axum::serve(listener, router(queue.clone()))
        .with_graceful_shutdown(shutdown)
        .await?;
    queue.snapshot().map_err(std::io::Error::other)?;
    tracing::info!("review API stopped");
    Ok(())
}
