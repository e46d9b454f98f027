//! HTTP annotation service: human annotators drive a live UniCBE session.
//!
//! | method | path | |
//! |---|---|---|
//! | `POST` | `/sessions` | create from models, samples and responses |
//! | `GET` | `/sessions/{id}/next?annotator=` | next anonymized pair, `204` when none is free |
//! | `POST` | `/assignments/{id}/preference` | `{"choice": "left" \| "right" \| "tie"}` |
//! | `GET` | `/sessions/{id}/leaderboard` | scores, per-pair `ε`, β, budget |
//! | `GET` | `/sessions/{id}/export` | record log as JSON Lines |
//!
//! When a token is configured every request must carry it in the
//! [`TOKEN_HEADER`] header.

pub mod api;
mod error;
mod live;
mod persist;

use std::collections::HashMap;
use std::path::PathBuf;
use std::sync::Arc;
use std::time::{Duration, Instant};

use axum::extract::{Path, Query, Request, State};
use axum::http::{header, StatusCode};
use axum::middleware::{self, Next};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use parking_lot::{Mutex, RwLock};
use serde::Deserialize;

use api::{Created, CreateSession, LeaderboardView, Submission};
pub use error::ServiceError;
pub use live::{leaderboard, library_session, LiveSession};
pub use persist::{RECORDS_FILE, SESSION_FILE};

pub const TOKEN_HEADER: &str = "x-unicbe-token";
pub const DEFAULT_TTL: Duration = Duration::from_secs(600);

#[derive(Debug, Clone)]
pub struct ServiceConfig {
    /// How long an assignment stays reserved for its annotator.
    pub ttl: Duration,
    pub token: Option<String>,
    /// Where sessions are persisted; in memory only when `None`.
    pub data_dir: Option<PathBuf>,
}

impl Default for ServiceConfig {
    fn default() -> Self {
        Self {
            ttl: DEFAULT_TTL,
            token: None,
            data_dir: None,
        }
    }
}

#[derive(Default)]
struct Sessions {
    by_id: HashMap<String, Arc<Mutex<LiveSession>>>,
    by_name: HashMap<String, String>,
}

struct Inner {
    config: ServiceConfig,
    sessions: RwLock<Sessions>,
    /// assignment id → session id
    assignments: Mutex<HashMap<String, String>>,
}

#[derive(Clone)]
pub struct AppState(Arc<Inner>);

impl AppState {
    /// Opens the service, rebuilding any sessions found in `data_dir`.
    pub fn new(config: ServiceConfig) -> Result<Self, ServiceError> {
        let mut sessions = Sessions::default();
        if let Some(root) = &config.data_dir {
            for live in persist::load_all(root)? {
                sessions.by_name.insert(live.spec.name.clone(), live.id.clone());
                sessions.by_id.insert(live.id.clone(), Arc::new(Mutex::new(live)));
            }
        }
        Ok(Self(Arc::new(Inner {
            config,
            sessions: RwLock::new(sessions),
            assignments: Mutex::new(HashMap::new()),
        })))
    }

    pub fn session_ids(&self) -> Vec<String> {
        let mut ids: Vec<String> = self.0.sessions.read().by_id.keys().cloned().collect();
        ids.sort();
        ids
    }

    fn session(&self, id: &str) -> Result<Arc<Mutex<LiveSession>>, ServiceError> {
        self.0
            .sessions
            .read()
            .by_id
            .get(id)
            .cloned()
            .ok_or_else(|| ServiceError::UnknownSession(id.to_string()))
    }
}

pub fn router(state: AppState) -> Router {
    Router::new()
        .route("/sessions", post(create_session))
        .route("/sessions/{id}/next", get(next_assignment))
        .route("/sessions/{id}/leaderboard", get(get_leaderboard))
        .route("/sessions/{id}/export", get(export))
        .route("/assignments/{id}/preference", post(submit))
        .layer(middleware::from_fn_with_state(state.clone(), check_token))
        .with_state(state)
}

async fn check_token(State(state): State<AppState>, req: Request, next: Next) -> Response {
    if let Some(token) = &state.0.config.token {
        let given = req.headers().get(TOKEN_HEADER).and_then(|v| v.to_str().ok());
        if given != Some(token.as_str()) {
            return ServiceError::Unauthorized.into_response();
        }
    }
    next.run(req).await
}

async fn create_session(
    State(state): State<AppState>,
    Json(spec): Json<CreateSession>,
) -> Result<(StatusCode, Json<Created>), ServiceError> {
    let id = uuid::Uuid::new_v4().to_string();
    let live = LiveSession::create(id.clone(), spec)?;
    let created = Created {
        id: id.clone(),
        name: live.spec.name.clone(),
        models: live.spec.models.len(),
        samples: live.spec.samples.len(),
        full_budget: live.session().full_budget(),
    };
    let mut sessions = state.0.sessions.write();
    if sessions.by_name.contains_key(&live.spec.name) {
        return Err(ServiceError::DuplicateName(live.spec.name.clone()));
    }
    if let Some(root) = &state.0.config.data_dir {
        persist::save_new(root, &live)?;
    }
    sessions.by_name.insert(live.spec.name.clone(), id.clone());
    sessions.by_id.insert(id, Arc::new(Mutex::new(live)));
    Ok((StatusCode::CREATED, Json(created)))
}

#[derive(Deserialize)]
struct NextQuery {
    #[serde(default)]
    annotator: Option<String>,
}

async fn next_assignment(
    State(state): State<AppState>,
    Path(id): Path<String>,
    Query(q): Query<NextQuery>,
) -> Result<Response, ServiceError> {
    let session = state.session(&id)?;
    let annotator = q.annotator.unwrap_or_default();
    let assignment = session.lock().next(&annotator, Instant::now(), state.0.config.ttl)?;
    match assignment {
        Some(a) => {
            state.0.assignments.lock().insert(a.assignment.clone(), id);
            Ok(Json(a).into_response())
        }
        None => Ok(StatusCode::NO_CONTENT.into_response()),
    }
}

async fn submit(
    State(state): State<AppState>,
    Path(assignment): Path<String>,
    Json(body): Json<Submission>,
) -> Result<Json<LeaderboardView>, ServiceError> {
    let session_id = state
        .0
        .assignments
        .lock()
        .get(&assignment)
        .cloned()
        .ok_or_else(|| ServiceError::Gone(assignment.clone()))?;
    let session = state.session(&session_id)?;
    let mut live = session.lock();
    let (rec, view) = live.submit(&assignment, body.choice, Instant::now())?;
    if let Some(root) = &state.0.config.data_dir {
        persist::append(root, &live, &rec)?;
    }
    Ok(Json(view))
}

async fn get_leaderboard(
    State(state): State<AppState>,
    Path(id): Path<String>,
) -> Result<Json<LeaderboardView>, ServiceError> {
    let session = state.session(&id)?;
    let (snapshot, pending) = {
        let mut live = session.lock();
        live.expire(Instant::now());
        (live.session().clone(), live.pending())
    };
    Ok(Json(LeaderboardView {
        session: id,
        pending,
        leaderboard: leaderboard(&snapshot)?,
    }))
}

async fn export(State(state): State<AppState>, Path(id): Path<String>) -> Result<Response, ServiceError> {
    let session = state.session(&id)?;
    let live = session.lock();
    let mut body = String::new();
    for rec in live.session().records() {
        body.push_str(&persist::line(&live, rec)?);
        body.push('\n');
    }
    Ok(([(header::CONTENT_TYPE, "application/x-ndjson")], body).into_response())
}
