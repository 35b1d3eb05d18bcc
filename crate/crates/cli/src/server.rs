//! Live annotation sessions over HTTP with JSON bodies.
//!
//! | method | path | body | reply |
//! |---|---|---|---|
//! | POST | `/sessions` | session config | 201 `{"session_id"}` |
//! | GET | `/sessions` | | `{"sessions": [id, ...]}` |
//! | POST | `/sessions/{id}/advance` | optional `{request_id, expected_version}` | event |
//! | POST | `/sessions/{id}/label` | `{label, allow_new, request_id, expected_version}` | event |
//! | POST | `/sessions/{id}/challenge` | `{final_label, request_id, expected_version}` | event |
//! | POST | `/sessions/{id}/commands` | a raw log line (`{"op": ...}`) | event |
//! | GET | `/sessions/{id}/state` | | state, no grid |
//! | POST | `/sessions/{id}/state` | `{"grid": [[x...], ...]}` | state with posteriors on the grid |
//! | GET | `/sessions/{id}/snapshot` | | model snapshot |
//!
//! Only `label`, `allow_new` and `final_label` are required; the delivery
//! fields may be omitted. Errors are `{"error": code, "message": text}` with
//! the status from [`status_for`].

use std::sync::Arc;

use anyhow::Context;
use axum::body::Bytes;
use axum::extract::{Path, State};
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use isgp::session::{Command, Request};
use isgp::{SessionConfig, SessionError, SessionStore};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::SessionArgs;

type Shared = Arc<SessionStore>;

#[derive(Debug, Serialize, Deserialize)]
pub struct ErrorBody {
    pub error: String,
    pub message: String,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct Created {
    pub session_id: String,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct SessionList {
    pub sessions: Vec<String>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct Delivery {
    #[serde(default)]
    request_id: Option<String>,
    #[serde(default)]
    expected_version: Option<u64>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct LabelBody {
    label: String,
    #[serde(default)]
    allow_new: bool,
    #[serde(default)]
    request_id: Option<String>,
    #[serde(default)]
    expected_version: Option<u64>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct ChallengeBody {
    final_label: String,
    #[serde(default)]
    request_id: Option<String>,
    #[serde(default)]
    expected_version: Option<u64>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct GridBody {
    #[serde(default)]
    grid: Vec<Vec<f64>>,
}

pub enum ApiError {
    Session(SessionError),
    BadRequest(String),
    Internal(String),
}

impl From<SessionError> for ApiError {
    fn from(e: SessionError) -> Self {
        ApiError::Session(e)
    }
}

pub fn status_for(e: &SessionError) -> StatusCode {
    match e {
        SessionError::UnknownSession(_) => StatusCode::NOT_FOUND,
        SessionError::InvalidConfig(_) => StatusCode::BAD_REQUEST,
        SessionError::QueryPending
        | SessionError::NoLabelRequest
        | SessionError::NoChallenge
        | SessionError::Exhausted
        | SessionError::Stale { .. } => StatusCode::CONFLICT,
        SessionError::UnknownClass(_) | SessionError::Model(_) => StatusCode::UNPROCESSABLE_ENTITY,
        SessionError::Io { .. } | SessionError::Corrupt { .. } | SessionError::Replay { .. } => {
            StatusCode::INTERNAL_SERVER_ERROR
        }
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let (status, error, message) = match self {
            ApiError::Session(e) => (status_for(&e), e.code().to_string(), e.to_string()),
            ApiError::BadRequest(m) => (StatusCode::BAD_REQUEST, "bad_request".into(), m),
            ApiError::Internal(m) => (StatusCode::INTERNAL_SERVER_ERROR, "internal".into(), m),
        };
        if status.is_server_error() {
            log::error!("{error}: {message}");
        }
        (status, Json(ErrorBody { error, message })).into_response()
    }
}

fn parse<T: DeserializeOwned + Default>(body: &Bytes) -> Result<T, ApiError> {
    if body.iter().all(u8::is_ascii_whitespace) {
        return Ok(T::default());
    }
    parse_required(body)
}

fn parse_required<T: DeserializeOwned>(body: &Bytes) -> Result<T, ApiError> {
    serde_json::from_slice(body).map_err(|e| ApiError::BadRequest(e.to_string()))
}

// store calls may fsync, so keep them off the async workers
async fn blocking<T, F>(store: Shared, f: F) -> Result<T, ApiError>
where
    T: Send + 'static,
    F: FnOnce(&SessionStore) -> Result<T, SessionError> + Send + 'static,
{
    tokio::task::spawn_blocking(move || f(&store))
        .await
        .map_err(|e| ApiError::Internal(e.to_string()))?
        .map_err(ApiError::from)
}

async fn apply(store: Shared, id: String, request: Request) -> Result<Response, ApiError> {
    let event = blocking(store, move |s| s.apply(&id, request)).await?;
    Ok(Json(event).into_response())
}

async fn create(State(store): State<Shared>, body: Bytes) -> Result<Response, ApiError> {
    let config: SessionConfig = parse_required(&body)?;
    let session_id = blocking(store, move |s| s.create(config)).await?;
    log::info!("created session {session_id}");
    Ok((StatusCode::CREATED, Json(Created { session_id })).into_response())
}

async fn list(State(store): State<Shared>) -> Json<SessionList> {
    Json(SessionList { sessions: store.ids() })
}

async fn advance(State(store): State<Shared>, Path(id): Path<String>, body: Bytes) -> Result<Response, ApiError> {
    let d: Delivery = parse(&body)?;
    let request = Request {
        request_id: d.request_id,
        expected_version: d.expected_version,
        command: Command::Advance,
    };
    apply(store, id, request).await
}

async fn label(State(store): State<Shared>, Path(id): Path<String>, body: Bytes) -> Result<Response, ApiError> {
    let b: LabelBody = parse_required(&body)?;
    let request = Request {
        request_id: b.request_id,
        expected_version: b.expected_version,
        command: Command::SubmitLabel {
            label: b.label,
            allow_new: b.allow_new,
        },
    };
    apply(store, id, request).await
}

async fn challenge(State(store): State<Shared>, Path(id): Path<String>, body: Bytes) -> Result<Response, ApiError> {
    let b: ChallengeBody = parse_required(&body)?;
    let request = Request {
        request_id: b.request_id,
        expected_version: b.expected_version,
        command: Command::ResolveChallenge {
            final_label: b.final_label,
        },
    };
    apply(store, id, request).await
}

async fn command(State(store): State<Shared>, Path(id): Path<String>, body: Bytes) -> Result<Response, ApiError> {
    let request: Request = parse_required(&body)?;
    apply(store, id, request).await
}

async fn state(store: Shared, id: String, grid: Vec<Vec<f64>>) -> Result<Response, ApiError> {
    let view = blocking(store, move |s| s.state(&id, &grid)).await?;
    Ok(Json(view).into_response())
}

async fn get_state(State(store): State<Shared>, Path(id): Path<String>) -> Result<Response, ApiError> {
    state(store, id, Vec::new()).await
}

async fn post_state(State(store): State<Shared>, Path(id): Path<String>, body: Bytes) -> Result<Response, ApiError> {
    let b: GridBody = parse(&body)?;
    state(store, id, b.grid).await
}

async fn snapshot(State(store): State<Shared>, Path(id): Path<String>) -> Result<Response, ApiError> {
    let snap = blocking(store, move |s| s.snapshot(&id)).await?;
    Ok(Json(snap).into_response())
}

pub fn router(store: Shared) -> Router {
    Router::new()
        .route("/sessions", post(create).get(list))
        .route("/sessions/{id}/advance", post(advance))
        .route("/sessions/{id}/label", post(label))
        .route("/sessions/{id}/challenge", post(challenge))
        .route("/sessions/{id}/commands", post(command))
        .route("/sessions/{id}/state", get(get_state).post(post_state))
        .route("/sessions/{id}/snapshot", get(snapshot))
        .with_state(store)
}

pub async fn serve(args: &SessionArgs) -> anyhow::Result<()> {
    let store = SessionStore::open(&args.out).with_context(|| args.out.display().to_string())?;
    log::info!("{} session(s) restored from {}", store.ids().len(), args.out.display());
    let listener = tokio::net::TcpListener::bind(args.addr).await?;
    log::info!("listening on http://{}", listener.local_addr()?);
    axum::serve(listener, router(Arc::new(store)))
        .with_graceful_shutdown(async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await?;
    Ok(())
}
