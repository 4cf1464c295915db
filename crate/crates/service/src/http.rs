//! JSON REST API over the engine.
//!
//! Errors come back as `{"error": <code>, "message": <text>}`; the code is
//! stable and distinguishes every rejection the phase machine can produce.

use std::sync::Arc;

use axum::extract::rejection::JsonRejection;
use axum::extract::{Path, State};
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use selex_core::study::{StudyError, SurveyItem, SURVEY_ITEMS};
use serde::{Deserialize, Serialize};

use crate::engine::{DecisionRequest, Engine, EngineError, InputSubmission, NextItem, SessionView, SurveySubmission};
use crate::export::ExportBundle;

#[derive(Debug, Serialize, Deserialize)]
pub struct ErrorBody {
    pub error: String,
    pub message: String,
}

pub enum ApiError {
    Engine(EngineError),
    /// The request body is not valid JSON for the endpoint.
    Body(JsonRejection),
}

impl From<EngineError> for ApiError {
    fn from(e: EngineError) -> Self {
        ApiError::Engine(e)
    }
}

impl From<JsonRejection> for ApiError {
    fn from(e: JsonRejection) -> Self {
        ApiError::Body(e)
    }
}

impl std::fmt::Display for ApiError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            ApiError::Engine(e) => e.fmt(f),
            ApiError::Body(e) => f.write_str(&e.body_text()),
        }
    }
}

impl ApiError {
    pub fn status_and_code(&self) -> (StatusCode, &'static str) {
        use EngineError as E;
        let engine_error = match self {
            ApiError::Body(e) => return (e.status(), "invalid_body"),
            ApiError::Engine(e) => e,
        };
        match engine_error {
            E::UnknownSession(_) => (StatusCode::NOT_FOUND, "unknown_session"),
            E::Study(e) => match e {
                StudyError::WrongPhase { .. } => (StatusCode::CONFLICT, "wrong_phase"),
                StudyError::Duplicate(_) => (StatusCode::CONFLICT, "duplicate"),
                StudyError::OutOfOrder { .. } => (StatusCode::CONFLICT, "out_of_order"),
                StudyError::UnknownDoc(_) => (StatusCode::UNPROCESSABLE_ENTITY, "unknown_doc"),
                StudyError::UnknownCondition(_) => (StatusCode::UNPROCESSABLE_ENTITY, "unknown_condition"),
                StudyError::InvalidRating { .. } => (StatusCode::UNPROCESSABLE_ENTITY, "invalid_rating"),
                _ => (StatusCode::INTERNAL_SERVER_ERROR, "internal"),
            },
            E::InvalidInput(_) => (StatusCode::UNPROCESSABLE_ENTITY, "invalid_input"),
            E::PanelUnavailable => (StatusCode::CONFLICT, "panel_unavailable"),
            E::Store(_) | E::Pipeline(_) => (StatusCode::INTERNAL_SERVER_ERROR, "internal"),
        }
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let (status, code) = self.status_and_code();
        if status.is_server_error() {
            log::error!("{self}");
        }
        let body = ErrorBody {
            error: code.to_string(),
            message: self.to_string(),
        };
        (status, Json(body)).into_response()
    }
}

type ApiResult<T> = Result<Json<T>, ApiError>;

#[derive(Debug, Default, Serialize, Deserialize)]
pub struct CreateSession {
    #[serde(default)]
    pub condition: Option<String>,
}

pub fn router(engine: Arc<Engine>) -> Router {
    Router::new()
        .route("/sessions", post(create_session))
        .route("/sessions/{id}", get(get_session))
        .route("/sessions/{id}/consent", post(consent))
        .route("/sessions/{id}/next", get(next_item))
        .route("/sessions/{id}/input", post(submit_input))
        .route("/sessions/{id}/decision", post(record_decision))
        .route("/sessions/{id}/survey", post(submit_survey))
        .route("/survey", get(survey_schema))
        .route("/export", get(export))
        .with_state(engine)
}

// Engine calls fsync and may train a model, so they run off the async workers.
async fn blocking<T, F>(engine: Arc<Engine>, f: F) -> ApiResult<T>
where
    T: Send + 'static,
    F: FnOnce(&Engine) -> Result<T, EngineError> + Send + 'static,
{
    tokio::task::spawn_blocking(move || f(&engine))
        .await
        .expect("engine task panicked")
        .map(Json)
        .map_err(ApiError::Engine)
}

async fn create_session(
    State(engine): State<Arc<Engine>>,
    body: Result<Option<Json<CreateSession>>, JsonRejection>,
) -> Result<(StatusCode, Json<SessionView>), ApiError> {
    let condition = body?.and_then(|Json(b)| b.condition);
    let view = blocking(engine, move |e| e.create_session(condition.as_deref()).map(|s| SessionView::from(&s))).await?;
    Ok((StatusCode::CREATED, view))
}

async fn get_session(State(engine): State<Arc<Engine>>, Path(id): Path<String>) -> ApiResult<SessionView> {
    blocking(engine, move |e| e.session(&id).map(|s| SessionView::from(&s))).await
}

async fn consent(State(engine): State<Arc<Engine>>, Path(id): Path<String>) -> ApiResult<SessionView> {
    blocking(engine, move |e| e.consent(&id).map(|s| SessionView::from(&s))).await
}

async fn next_item(State(engine): State<Arc<Engine>>, Path(id): Path<String>) -> ApiResult<NextItem> {
    blocking(engine, move |e| e.next_item(&id)).await
}

async fn submit_input(
    State(engine): State<Arc<Engine>>,
    Path(id): Path<String>,
    body: Result<Json<InputSubmission>, JsonRejection>,
) -> ApiResult<SessionView> {
    let Json(body) = body?;
    blocking(engine, move |e| e.submit_input(&id, body).map(|s| SessionView::from(&s))).await
}

#[derive(Debug, Serialize, Deserialize)]
pub struct DecisionResponse {
    pub decision: selex_core::study::Decision,
    pub session: SessionView,
}

async fn record_decision(
    State(engine): State<Arc<Engine>>,
    Path(id): Path<String>,
    body: Result<Json<DecisionRequest>, JsonRejection>,
) -> ApiResult<DecisionResponse> {
    let Json(body) = body?;
    blocking(engine, move |e| {
        let decision = e.record_decision(&id, body)?;
        let session = SessionView::from(&e.session(&id)?);
        Ok(DecisionResponse { decision, session })
    })
    .await
}

async fn submit_survey(
    State(engine): State<Arc<Engine>>,
    Path(id): Path<String>,
    body: Result<Json<SurveySubmission>, JsonRejection>,
) -> ApiResult<SessionView> {
    let Json(body) = body?;
    blocking(engine, move |e| e.submit_survey(&id, body).map(|s| SessionView::from(&s))).await
}

async fn survey_schema() -> Json<&'static [SurveyItem]> {
    Json(&SURVEY_ITEMS)
}

async fn export(State(engine): State<Arc<Engine>>) -> ApiResult<ExportBundle> {
    blocking(engine, |e| e.export()).await
}
