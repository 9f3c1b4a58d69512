//! HTTP session API.
//!
//! | method | path | body | response |
//! |---|---|---|---|
//! | GET | `/domains` | | loaded domains with slot captions and row counts |
//! | POST | `/sessions` | `{"domain": ..}` | `201` session header with the opening turn |
//! | POST | `/sessions/{id}/messages` | `{"text": ..}` | the resulting turn |
//! | GET | `/sessions/{id}/state` | | the engine's serialized information state, verbatim |
//! | GET | `/sessions/{id}` | | header, stage, transcript, move trace, last entity table |
//! | DELETE | `/sessions/{id}` | | `204` |
//!
//! Errors are `{"error": kind, "detail": text}` with 400 (bad request),
//! 404 (unknown or expired session, unknown domain), 409 (session not
//! awaiting input), 502 (language-model failure; the session is unchanged)
//! or 500.

use std::sync::Arc;
use std::time::Duration;

use axum::extract::rejection::JsonRejection;
use axum::extract::{Path, State};
use axum::http::{header, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use serde::{Deserialize, Serialize};

use tod_core::moves::MoveError;
use tod_core::strategy::{Presentation, Stage, StrategyError, TraceEntry, TranscriptEntry};
use tod_core::TurnResult;

use crate::store::{lock, ApiSession, SessionStore};

#[derive(Debug, Serialize, Deserialize)]
pub struct ErrorBody {
    pub error: String,
    pub detail: String,
}

#[derive(Debug)]
pub struct ApiError {
    status: StatusCode,
    body: ErrorBody,
}

impl ApiError {
    fn new(status: StatusCode, error: &str, detail: impl Into<String>) -> Self {
        Self {
            status,
            body: ErrorBody {
                error: error.to_string(),
                detail: detail.into(),
            },
        }
    }

    fn no_session(id: &str) -> Self {
        Self::new(StatusCode::NOT_FOUND, "unknown_session", format!("no active session `{id}`"))
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        (self.status, Json(self.body)).into_response()
    }
}

impl From<JsonRejection> for ApiError {
    fn from(rejection: JsonRejection) -> Self {
        Self::new(StatusCode::BAD_REQUEST, "bad_request", rejection.body_text())
    }
}

impl From<StrategyError> for ApiError {
    fn from(e: StrategyError) -> Self {
        let detail = e.to_string();
        match e {
            StrategyError::Completed | StrategyError::InputRequired | StrategyError::NothingPresented => {
                Self::new(StatusCode::CONFLICT, "not_awaiting_input", detail)
            }
            StrategyError::EmptyInput => Self::new(StatusCode::BAD_REQUEST, "empty_message", detail),
            StrategyError::Move(MoveError::Nlu(_)) | StrategyError::Move(MoveError::Classifier(_)) => {
                Self::new(StatusCode::BAD_GATEWAY, "backend_failure", detail)
            }
            StrategyError::MoveBudgetExceeded | StrategyError::Move(_) => {
                Self::new(StatusCode::INTERNAL_SERVER_ERROR, "engine_failure", detail)
            }
        }
    }
}

#[derive(Debug, Serialize, Deserialize)]
pub struct CreateSession {
    pub domain: String,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct PostMessage {
    pub text: String,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct DomainInfo {
    pub domain: String,
    pub slots: Vec<String>,
    pub rows: usize,
}

/// Full view of one session for inspectors.
#[derive(Debug, Serialize)]
pub struct SessionView {
    #[serde(flatten)]
    pub header: ApiSession,
    pub stage: Stage,
    pub transcript: Vec<TranscriptEntry>,
    pub trace: Vec<TraceEntry>,
    pub table: Option<Presentation>,
    pub state: serde_json::Value,
}

pub fn router(store: Arc<SessionStore>) -> Router {
    Router::new()
        .route("/domains", get(list_domains))
        .route("/sessions", post(create_session))
        .route("/sessions/{id}", get(session_view).delete(delete_session))
        .route("/sessions/{id}/state", get(session_state))
        .route("/sessions/{id}/messages", post(post_message))
        .with_state(store)
}

/// Periodically drops idle sessions.
pub fn spawn_sweeper(store: Arc<SessionStore>) -> tokio::task::JoinHandle<()> {
    let period = (store.idle_timeout() / 2).clamp(Duration::from_millis(10), Duration::from_secs(30));
    tokio::spawn(async move {
        let mut tick = tokio::time::interval(period);
        loop {
            tick.tick().await;
            let dropped = store.sweep();
            if dropped > 0 {
                log::info!("expired {dropped} idle sessions");
            }
        }
    })
}

async fn list_domains(State(store): State<Arc<SessionStore>>) -> Json<Vec<DomainInfo>> {
    Json(
        store
            .dictionaries()
            .iter()
            .map(|(domain, dict)| DomainInfo {
                domain: domain.clone(),
                slots: dict.schema.slots.iter().map(|s| s.caption.clone()).collect(),
                rows: dict.database.len(),
            })
            .collect(),
    )
}

async fn create_session(
    State(store): State<Arc<SessionStore>>,
    body: Result<Json<CreateSession>, JsonRejection>,
) -> Result<(StatusCode, Json<ApiSession>), ApiError> {
    let Json(req) = body?;
    let domain = req.domain.trim().to_lowercase();
    let header = store.create(&domain).ok_or_else(|| {
        ApiError::new(StatusCode::NOT_FOUND, "unknown_domain", format!("domain `{domain}` is not loaded"))
    })?;
    log::debug!("session {} started for {domain}", header.session_id);
    Ok((StatusCode::CREATED, Json(header)))
}

async fn post_message(
    State(store): State<Arc<SessionStore>>,
    Path(id): Path<String>,
    body: Result<Json<PostMessage>, JsonRejection>,
) -> Result<Json<TurnResult>, ApiError> {
    let Json(req) = body?;
    let entry = store.get(&id).ok_or_else(|| ApiError::no_session(&id))?;
    // Engine work (and a possible language-model call) runs off the reactor.
    let turn = tokio::task::spawn_blocking(move || {
        let mut guard = lock(&entry);
        guard.touch();
        let turn = guard.session.advance(Some(&req.text))?;
        guard.header.last_turn = turn.clone();
        Ok::<_, StrategyError>(turn)
    })
    .await
    .map_err(|e| ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, "engine_failure", e.to_string()))??;
    Ok(Json(turn))
}

async fn session_state(
    State(store): State<Arc<SessionStore>>,
    Path(id): Path<String>,
) -> Result<Response, ApiError> {
    let entry = store.get(&id).ok_or_else(|| ApiError::no_session(&id))?;
    let body = lock(&entry).session.state().to_json();
    Ok(([(header::CONTENT_TYPE, "application/json")], body).into_response())
}

async fn session_view(
    State(store): State<Arc<SessionStore>>,
    Path(id): Path<String>,
) -> Result<Json<SessionView>, ApiError> {
    let entry = store.get(&id).ok_or_else(|| ApiError::no_session(&id))?;
    let guard = lock(&entry);
    let session = &guard.session;
    let state = serde_json::from_str(&session.state().to_json())
        .map_err(|e| ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, "engine_failure", e.to_string()))?;
    Ok(Json(SessionView {
        header: guard.header.clone(),
        stage: session.stage(),
        transcript: session.transcript().to_vec(),
        trace: session.trace().to_vec(),
        table: session.last_presentation().cloned(),
        state,
    }))
}

async fn delete_session(
    State(store): State<Arc<SessionStore>>,
    Path(id): Path<String>,
) -> Result<StatusCode, ApiError> {
    if store.remove(&id) {
        Ok(StatusCode::NO_CONTENT)
    } else {
        Err(ApiError::no_session(&id))
    }
}

/// Binds `addr` and serves until the process is stopped.
pub async fn serve(store: Arc<SessionStore>, addr: std::net::SocketAddr) -> std::io::Result<()> {
    serve_on(store, tokio::net::TcpListener::bind(addr).await?).await
}

/// Serves on an already bound listener.
pub async fn serve_on(store: Arc<SessionStore>, listener: tokio::net::TcpListener) -> std::io::Result<()> {
    log::info!("listening on {}", listener.local_addr()?);
    spawn_sweeper(store.clone());
    axum::serve(listener, router(store)).await
}
