//! JSON API over [`ChatService`].
//!
//! | Method | Path                          | Body             | Reply                                    |
//! |--------|-------------------------------|------------------|------------------------------------------|
//! | POST   | `/sessions`                   |                  | `{"id", "greeting"}`                     |
//! | POST   | `/sessions/{id}/messages`     | `{"text": ...}`  | `{"reply", "action", "turn", "degraded", "state"}` |
//! | GET    | `/sessions/{id}/state`        |                  | state snapshot                           |
//! | GET    | `/sessions/{id}/transcript`   |                  | `[{"speaker", "text"}]`                  |
//! | GET    | `/health`                     |                  | `{"ready": bool}`                        |
//!
//! Errors come back as `{"error": message, "code": ...}`.

use std::sync::Arc;

use axum::extract::{Path, State};
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use concierge_core::parse::ParseError;
use serde::Deserialize;
use serde_json::json;

use crate::service::{ChatService, ServiceError};

#[derive(Debug, Deserialize)]
pub struct MessageBody {
    pub text: String,
}

impl ServiceError {
    fn status(&self) -> (StatusCode, &'static str) {
        match self {
            ServiceError::NotReady => (StatusCode::SERVICE_UNAVAILABLE, "not_ready"),
            ServiceError::UnknownSession(_) => (StatusCode::NOT_FOUND, "unknown_session"),
            ServiceError::Rejected(ParseError::TooLong(_)) => (StatusCode::PAYLOAD_TOO_LARGE, "message_too_long"),
            ServiceError::Rejected(ParseError::Empty) => (StatusCode::BAD_REQUEST, "empty_message"),
            ServiceError::Internal(_) => (StatusCode::INTERNAL_SERVER_ERROR, "internal"),
        }
    }
}

impl IntoResponse for ServiceError {
    fn into_response(self) -> Response {
        let (status, code) = self.status();
        (status, Json(json!({ "error": self.to_string(), "code": code }))).into_response()
    }
}

type Shared = State<Arc<ChatService>>;

async fn create_session(State(svc): Shared) -> Result<Response, ServiceError> {
    let created = svc.create_session()?;
    Ok((StatusCode::CREATED, Json(created)).into_response())
}

async fn post_message(
    State(svc): Shared,
    Path(id): Path<String>,
    Json(body): Json<MessageBody>,
) -> Result<Response, ServiceError> {
    Ok(Json(svc.post_message(&id, &body.text).await?).into_response())
}

async fn get_state(State(svc): Shared, Path(id): Path<String>) -> Result<Response, ServiceError> {
    Ok(Json(svc.get_state(&id).await?).into_response())
}

async fn get_transcript(State(svc): Shared, Path(id): Path<String>) -> Result<Response, ServiceError> {
    Ok(Json(svc.transcript(&id).await?).into_response())
}

async fn health(State(svc): Shared) -> Response {
    let status = if svc.is_ready() { StatusCode::OK } else { StatusCode::SERVICE_UNAVAILABLE };
    (status, Json(json!({ "ready": svc.is_ready() }))).into_response()
}

pub fn router(service: Arc<ChatService>) -> Router {
    Router::new()
        .route("/health", get(health))
        .route("/sessions", post(create_session))
        .route("/sessions/{id}/messages", post(post_message))
        .route("/sessions/{id}/state", get(get_state))
        .route("/sessions/{id}/transcript", get(get_transcript))
        .with_state(service)
}
