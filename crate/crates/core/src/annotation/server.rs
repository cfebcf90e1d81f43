use std::collections::HashMap;
use std::path::{Path, PathBuf};
use std::sync::{Arc, Mutex};

use axum::extract::{Path as UrlPath, Query, State};
use axum::http::{HeaderMap, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use serde::{Deserialize, Serialize};

use super::{AgreementReport, BatchItem, Campaign, Disagreement, ItemStatus, PhaseSummary};
use crate::error::{Error, Result};
use crate::store::Store;
use crate::types::{Label, Verdict};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Role {
    Coder,
    Moderator,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TokenEntry {
    pub token: String,
    pub user: String,
    pub role: Role,
}

/// Bearer tokens, read from a TOML file with `[[tokens]]` tables.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct TokenFile {
    pub tokens: Vec<TokenEntry>,
}

impl TokenFile {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        toml::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Principal {
    pub user: String,
    pub role: Role,
}

#[derive(Clone)]
pub struct AppState {
    inner: Arc<Mutex<(Campaign, Store)>>,
    tokens: Arc<HashMap<String, Principal>>,
}

impl AppState {
    pub fn new(store: Store, tokens: TokenFile) -> Result<Self> {
        let campaign = Campaign::load(&store)?;
        let tokens = tokens
            .tokens
            .into_iter()
            .map(|t| {
                (
                    t.token,
                    Principal {
                        user: t.user,
                        role: t.role,
                    },
                )
            })
            .collect();
        Ok(Self {
            inner: Arc::new(Mutex::new((campaign, store))),
            tokens: Arc::new(tokens),
        })
    }

    fn authenticate(&self, headers: &HeaderMap) -> Result<Principal> {
        let token = headers
            .get(axum::http::header::AUTHORIZATION)
            .and_then(|v| v.to_str().ok())
            .and_then(|v| v.strip_prefix("Bearer "))
            .ok_or_else(|| Error::Auth("missing bearer token".into()))?;
        self.tokens
            .get(token.trim())
            .cloned()
            .ok_or_else(|| Error::Auth("unknown token".into()))
    }

    fn with<T>(&self, f: impl FnOnce(&mut Campaign, &mut Store) -> Result<T>) -> Result<T> {
        let mut guard = self
            .inner
            .lock()
            .map_err(|_| Error::State("state lock poisoned".into()))?;
        let (campaign, store) = &mut *guard;
        f(campaign, store)
    }
}

struct ApiError(Error);

impl From<Error> for ApiError {
    fn from(e: Error) -> Self {
        ApiError(e)
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let status = match &self.0 {
            Error::Auth(_) => StatusCode::UNAUTHORIZED,
            Error::Forbidden(_) | Error::Permission(_) => StatusCode::FORBIDDEN,
            Error::NotFound(_) => StatusCode::NOT_FOUND,
            Error::Conflict(_) | Error::State(_) => StatusCode::CONFLICT,
            Error::Parameter(_) | Error::Format(_) => StatusCode::BAD_REQUEST,
            _ => StatusCode::INTERNAL_SERVER_ERROR,
        };
        let body = serde_json::json!({"error": {"code": self.0.code(), "message": self.0.to_string()}});
        (status, Json(body)).into_response()
    }
}

type ApiResult<T> = std::result::Result<Json<T>, ApiError>;

async fn phases(State(st): State<AppState>, headers: HeaderMap) -> ApiResult<Vec<PhaseSummary>> {
    st.authenticate(&headers)?;
    Ok(Json(st.with(|c, _| Ok(c.phases()))?))
}

#[derive(Debug, Deserialize)]
struct NextQuery {
    coder: Option<String>,
    n: Option<usize>,
}

/// Coders act for themselves; moderators may act for anyone.
fn acting_as(p: &Principal, requested: Option<String>) -> Result<String> {
    match requested {
        Some(c) if c != p.user && p.role != Role::Moderator => {
            Err(Error::Forbidden(format!("{} may not act as {c}", p.user)))
        }
        Some(c) => Ok(c),
        None => Ok(p.user.clone()),
    }
}

async fn next(
    State(st): State<AppState>,
    headers: HeaderMap,
    UrlPath(phase_id): UrlPath<String>,
    Query(q): Query<NextQuery>,
) -> ApiResult<Vec<BatchItem>> {
    let p = st.authenticate(&headers)?;
    let coder = acting_as(&p, q.coder)?;
    Ok(Json(
        st.with(|c, s| c.next_batch(s, &phase_id, &coder, q.n.unwrap_or(10)))?,
    ))
}

#[derive(Debug, Deserialize)]
struct VerdictBody {
    phase_id: String,
    post_id: String,
    verdict: Verdict,
    #[serde(default)]
    coder: Option<String>,
    #[serde(default)]
    note: Option<String>,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct VerdictReply {
    pub status: ItemStatus,
}

async fn verdicts(
    State(st): State<AppState>,
    headers: HeaderMap,
    Json(b): Json<VerdictBody>,
) -> ApiResult<VerdictReply> {
    let p = st.authenticate(&headers)?;
    let coder = acting_as(&p, b.coder)?;
    let status = st.with(|c, s| c.submit_verdict(s, &b.phase_id, &b.post_id, &coder, b.verdict, b.note))?;
    Ok(Json(VerdictReply { status }))
}

async fn disagreements(
    State(st): State<AppState>,
    headers: HeaderMap,
    UrlPath(phase_id): UrlPath<String>,
) -> ApiResult<Vec<Disagreement>> {
    st.authenticate(&headers)?;
    Ok(Json(st.with(|c, s| c.disagreement_queue(s, &phase_id))?))
}

#[derive(Debug, Deserialize)]
struct ConsensusBody {
    phase_id: String,
    post_id: String,
    label: Label,
    #[serde(default, rename = "override")]
    allow_override: bool,
}

async fn consensus(
    State(st): State<AppState>,
    headers: HeaderMap,
    Json(b): Json<ConsensusBody>,
) -> ApiResult<VerdictReply> {
    let p = st.authenticate(&headers)?;
    if p.role != Role::Moderator {
        return Err(Error::Permission(format!("{} is not a moderator", p.user)).into());
    }
    st.with(|c, s| c.record_consensus(s, &b.phase_id, &b.post_id, b.label, &p.user, b.allow_override))?;
    Ok(Json(VerdictReply {
        status: ItemStatus::Closed,
    }))
}

async fn agreement(
    State(st): State<AppState>,
    headers: HeaderMap,
    UrlPath(phase_id): UrlPath<String>,
) -> ApiResult<AgreementReport> {
    st.authenticate(&headers)?;
    Ok(Json(st.with(|c, _| c.agreement(&phase_id))?))
}

/// The JSON API, plus static files from `ui_dir` at `/` when given.
pub fn router(state: AppState, ui_dir: Option<PathBuf>) -> Router {
    let api = Router::new()
        .route("/api/phases", get(phases))
        .route("/api/phases/{id}/next", get(next))
        .route("/api/phases/{id}/disagreements", get(disagreements))
        .route("/api/verdicts", post(verdicts))
        .route("/api/consensus", post(consensus))
        .route("/api/agreement/{phase}", get(agreement))
        .with_state(state);
    match ui_dir {
        Some(dir) => api.fallback_service(tower_http::services::ServeDir::new(dir)),
        None => api,
    }
}

pub async fn serve(listener: tokio::net::TcpListener, app: Router) -> std::io::Result<()> {
    axum::serve(listener, app).await
}
