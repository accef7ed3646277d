//! HTTP JSON API over an adjudication [`Session`].
//!
//! All routes live under `/api/v1`. Reads share the session; decision writes
//! are serialized and acknowledged only after the log entry is synced.

use std::collections::HashMap;
use std::net::SocketAddr;
use std::path::{Path, PathBuf};
use std::sync::{Arc, RwLock};

use axum::body::Bytes;
use axum::extract::{Path as UrlPath, Query, State};
use axum::http::{header, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use ner_audit::adjudication::{Filter, Progress, Session, SessionError, MAX_PAGE_SIZE};
use ner_audit::diff::{from_jsonl, Disagreement};
use regex::Regex;
use serde::{Deserialize, Serialize};
use serde_json::json;
use thiserror::Error;
use tokio::net::TcpListener;
use tower_http::services::ServeDir;

pub const DEFAULT_PAGE_SIZE: usize = 50;

#[derive(Debug, Clone)]
pub struct ServeConfig {
    pub disagreements: PathBuf,
    pub log: PathBuf,
    pub addr: SocketAddr,
    pub static_dir: Option<PathBuf>,
}

#[derive(Debug, Error)]
pub enum ServeError {
    #[error("{path}: {source}")]
    Read {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("{path}: {source}")]
    Disagreements {
        path: PathBuf,
        source: ner_audit::diff::JsonlError,
    },
    #[error(transparent)]
    Session(#[from] SessionError),
    #[error("cannot listen on {addr}: {source}")]
    Bind {
        addr: SocketAddr,
        source: std::io::Error,
    },
    #[error("server: {0}")]
    Serve(std::io::Error),
}

/// Shared state: the session behind a reader-writer lock.
pub struct AppState {
    session: RwLock<Session>,
    /// Serializes writers so log order equals acknowledgment order.
    writer: tokio::sync::Mutex<()>,
}

impl AppState {
    pub fn new(session: Session) -> Arc<Self> {
        Arc::new(AppState {
            session: RwLock::new(session),
            writer: tokio::sync::Mutex::new(()),
        })
    }

    pub fn load(disagreements: &Path, log: &Path) -> Result<Arc<Self>, ServeError> {
        let text = std::fs::read_to_string(disagreements).map_err(|source| ServeError::Read {
            path: disagreements.to_path_buf(),
            source,
        })?;
        let items: Vec<Disagreement> = from_jsonl(&text).map_err(|source| ServeError::Disagreements {
            path: disagreements.to_path_buf(),
            source,
        })?;
        Ok(Self::new(Session::open(items, log)?))
    }

    fn read(&self) -> std::sync::RwLockReadGuard<'_, Session> {
        self.session.read().unwrap_or_else(|e| e.into_inner())
    }
}

pub fn router(state: Arc<AppState>, static_dir: Option<&Path>) -> Router {
    let api = Router::new()
        .route("/disagreements", get(list_disagreements))
        .route("/disagreements/{diff_id}", get(get_disagreement))
        .route("/decisions", post(post_decision))
        .route("/progress", get(progress))
        .route("/export", get(export))
        .fallback(|| async { ApiError::new(StatusCode::NOT_FOUND, "not_found", "no such endpoint") });
    let app = Router::new().nest("/api/v1", api).with_state(state);
    match static_dir {
        Some(dir) => app.fallback_service(ServeDir::new(dir)),
        None => app,
    }
}

/// Bind the listener; the returned future serves until ctrl-c.
pub async fn bind(config: &ServeConfig) -> Result<(SocketAddr, Router, TcpListener), ServeError> {
    let state = AppState::load(&config.disagreements, &config.log)?;
    let app = router(state, config.static_dir.as_deref());
    let listener = TcpListener::bind(config.addr).await.map_err(|source| ServeError::Bind {
        addr: config.addr,
        source,
    })?;
    let addr = listener.local_addr().map_err(ServeError::Serve)?;
    Ok((addr, app, listener))
}

pub async fn serve(listener: TcpListener, app: Router) -> Result<(), ServeError> {
    axum::serve(listener, app)
        .with_graceful_shutdown(async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await
        .map_err(ServeError::Serve)
}

#[derive(Debug)]
struct ApiError {
    status: StatusCode,
    code: &'static str,
    message: String,
}

impl ApiError {
    fn new(status: StatusCode, code: &'static str, message: impl Into<String>) -> Self {
        ApiError {
            status,
            code,
            message: message.into(),
        }
    }

    fn bad_request(message: impl Into<String>) -> Self {
        Self::new(StatusCode::BAD_REQUEST, "bad_request", message)
    }
}

impl From<SessionError> for ApiError {
    fn from(e: SessionError) -> Self {
        let (status, code) = match &e {
            SessionError::UnknownDiffId(_) => (StatusCode::NOT_FOUND, "unknown_diff_id"),
            SessionError::MalformedLabel(_) => (StatusCode::UNPROCESSABLE_ENTITY, "malformed_label"),
            SessionError::BadPage(_) => (StatusCode::BAD_REQUEST, "bad_page"),
            _ => (StatusCode::INTERNAL_SERVER_ERROR, "internal"),
        };
        ApiError::new(status, code, e.to_string())
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let body = json!({ "error": { "code": self.code, "message": self.message } });
        (self.status, Json(body)).into_response()
    }
}

fn parse_param<T: std::str::FromStr>(q: &HashMap<String, String>, key: &str) -> Result<Option<T>, ApiError> {
    match q.get(key).map(|s| s.trim()).filter(|s| !s.is_empty()) {
        None => Ok(None),
        Some(v) => v
            .parse()
            .map(Some)
            .map_err(|_| ApiError::bad_request(format!("invalid {key}: {v:?}"))),
    }
}

#[derive(Serialize)]
struct PageBody {
    total: usize,
    page: usize,
    page_size: usize,
    items: Vec<ner_audit::adjudication::ReviewItem>,
}

async fn list_disagreements(
    State(state): State<Arc<AppState>>,
    Query(q): Query<HashMap<String, String>>,
) -> Result<Json<PageBody>, ApiError> {
    let version_pattern = match q.get("version_pattern").filter(|s| !s.is_empty()) {
        Some(p) => Some(Regex::new(p).map_err(|e| ApiError::bad_request(format!("invalid version_pattern: {e}")))?),
        None => None,
    };
    let filter = Filter {
        undecided_only: parse_param(&q, "undecided")?.unwrap_or(false),
        domain: parse_param(&q, "domain")?,
        format: parse_param(&q, "format")?,
        version_pattern,
    };
    let page = parse_param(&q, "page")?.unwrap_or(0);
    let page_size = parse_param(&q, "page_size")?.unwrap_or(DEFAULT_PAGE_SIZE);
    if page_size > MAX_PAGE_SIZE {
        return Err(SessionError::BadPage(format!("page_size must be at most {MAX_PAGE_SIZE}")).into());
    }
    let p = state.read().list_disagreements(&filter, page, page_size)?;
    Ok(Json(PageBody {
        total: p.total,
        page: p.page,
        page_size: p.page_size,
        items: p.items,
    }))
}

async fn get_disagreement(
    State(state): State<Arc<AppState>>,
    UrlPath(diff_id): UrlPath<String>,
) -> Result<Response, ApiError> {
    match state.read().get(&diff_id) {
        Some(item) => Ok(Json(item).into_response()),
        None => Err(SessionError::UnknownDiffId(diff_id).into()),
    }
}

#[derive(Deserialize)]
struct DecisionBody {
    diff_id: String,
    chosen_label: String,
    #[serde(default = "default_chooser")]
    chooser: String,
    #[serde(default)]
    note: Option<String>,
}

fn default_chooser() -> String {
    "adjudicator".to_string()
}

#[derive(Serialize)]
struct DecisionResponse {
    progress: Progress,
}

async fn post_decision(State(state): State<Arc<AppState>>, body: Bytes) -> Result<Json<DecisionResponse>, ApiError> {
    let body: DecisionBody =
        serde_json::from_slice(&body).map_err(|e| ApiError::bad_request(format!("invalid decision body: {e}")))?;
    let _turn = state.writer.lock().await;
    let st = state.clone();
    // the log write syncs to disk, so keep it off the async workers
    let progress = tokio::task::spawn_blocking(move || {
        let mut session = st.session.write().unwrap_or_else(|e| e.into_inner());
        session.record_decision(&body.diff_id, &body.chosen_label, &body.chooser, body.note)
    })
    .await
    .map_err(|e| ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, "internal", e.to_string()))??;
    Ok(Json(DecisionResponse { progress }))
}

async fn progress(State(state): State<Arc<AppState>>) -> Response {
    let session = state.read();
    let p = session.progress();
    Json(json!({
        "total": p.total,
        "decided": p.decided,
        "remaining": p.remaining,
        "per_version_stats": session.stats(),
    }))
    .into_response()
}

async fn export(State(state): State<Arc<AppState>>) -> Response {
    let body = state.read().export_decisions();
    ([(header::CONTENT_TYPE, "application/x-ndjson")], body).into_response()
}
