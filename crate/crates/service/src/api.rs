//! HTTP endpoints over in-memory sessions.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::{Arc, RwLock};

use axum::body::Bytes;
use axum::extract::rejection::{JsonRejection, QueryRejection};
use axum::extract::{Path as UrlPath, Query, State};
use axum::http::{header, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use serde::{Deserialize, Serialize};
use serde_json::json;
use talkchart::dataset::Dataset;
use talkchart::engine::{ChartSpec, EngineError, Session, Status};
use talkchart::pipeline::Interpreter;
use tokio::sync::Mutex;

use crate::suggest::SuggestionIndex;

pub const DEFAULT_SUGGESTIONS: usize = 10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum ErrorCode {
    BadCsv,
    BadRequest,
    UnknownDataset,
    UnknownSession,
    UnknownChart,
    ParseEmpty,
    UnsupportedOp,
}

#[derive(Debug)]
pub struct ApiError {
    pub status: StatusCode,
    pub code: ErrorCode,
    pub message: String,
}

impl ApiError {
    fn new(status: StatusCode, code: ErrorCode, message: impl Into<String>) -> ApiError {
        ApiError {
            status,
            code,
            message: message.into(),
        }
    }

    fn bad_request(message: impl Into<String>) -> ApiError {
        ApiError::new(StatusCode::BAD_REQUEST, ErrorCode::BadRequest, message)
    }

    fn not_found(code: ErrorCode, id: &str) -> ApiError {
        let what = match code {
            ErrorCode::UnknownDataset => "dataset",
            ErrorCode::UnknownSession => "session",
            _ => "chart",
        };
        ApiError::new(StatusCode::NOT_FOUND, code, format!("unknown {what} `{id}`"))
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let body = json!({ "error": { "code": self.code, "message": self.message } });
        (self.status, Json(body)).into_response()
    }
}

impl From<JsonRejection> for ApiError {
    fn from(r: JsonRejection) -> ApiError {
        ApiError::bad_request(r.body_text())
    }
}

impl From<QueryRejection> for ApiError {
    fn from(r: QueryRejection) -> ApiError {
        ApiError::bad_request(r.body_text())
    }
}

type ApiResult<T> = Result<T, ApiError>;

struct SessionSlot {
    dataset_id: String,
    session: Mutex<Session>,
}

/// Shared service state. Sessions are locked individually so requests on one
/// session queue in arrival order while other sessions proceed.
pub struct AppState {
    interpreter: Arc<Interpreter>,
    suggestions: SuggestionIndex,
    datasets: RwLock<BTreeMap<String, Arc<Dataset>>>,
    sessions: RwLock<BTreeMap<String, Arc<SessionSlot>>>,
    next_id: AtomicU64,
}

#[derive(Debug, Serialize, Deserialize)]
struct Snapshot {
    dataset_id: String,
    history: String,
}

impl AppState {
    pub fn new(interpreter: Arc<Interpreter>, suggestions: SuggestionIndex) -> AppState {
        AppState {
            interpreter,
            suggestions,
            datasets: RwLock::default(),
            sessions: RwLock::default(),
            next_id: AtomicU64::new(1),
        }
    }

    fn fresh_id(&self, prefix: &str) -> String {
        format!("{prefix}{}", self.next_id.fetch_add(1, Ordering::Relaxed))
    }

    pub fn add_dataset(&self, dataset: Dataset) -> String {
        let id = self.fresh_id("d");
        self.insert_dataset(id.clone(), dataset);
        id
    }

    fn insert_dataset(&self, id: String, dataset: Dataset) {
        self.datasets.write().unwrap().insert(id, Arc::new(dataset));
    }

    fn dataset(&self, id: &str) -> ApiResult<Arc<Dataset>> {
        self.datasets
            .read()
            .unwrap()
            .get(id)
            .cloned()
            .ok_or_else(|| ApiError::not_found(ErrorCode::UnknownDataset, id))
    }

    fn open_session(&self, dataset_id: &str, history: Option<&str>) -> ApiResult<(String, Session)> {
        let dataset = self.dataset(dataset_id)?;
        let interpreter = Arc::clone(&self.interpreter);
        let session = match history {
            Some(log) => Session::replay(interpreter, (*dataset).clone(), log)
                .map_err(|e| ApiError::bad_request(e.to_string()))?,
            None => Session::new(interpreter, (*dataset).clone()),
        };
        Ok((self.fresh_id("s"), session))
    }

    fn insert_session(&self, id: String, dataset_id: String, session: Session) {
        let slot = SessionSlot {
            dataset_id,
            session: Mutex::new(session),
        };
        self.sessions.write().unwrap().insert(id, Arc::new(slot));
    }

    fn session(&self, id: &str) -> ApiResult<Arc<SessionSlot>> {
        self.sessions
            .read()
            .unwrap()
            .get(id)
            .cloned()
            .ok_or_else(|| ApiError::not_found(ErrorCode::UnknownSession, id))
    }

    /// Writes uploaded datasets as CSV and every session as its dataset id
    /// plus history log.
    pub async fn snapshot(&self, dir: &Path) -> std::io::Result<()> {
        let datasets: Vec<(String, Arc<Dataset>)> =
            self.datasets.read().unwrap().iter().map(|(k, v)| (k.clone(), Arc::clone(v))).collect();
        let sessions: Vec<(String, Arc<SessionSlot>)> =
            self.sessions.read().unwrap().iter().map(|(k, v)| (k.clone(), Arc::clone(v))).collect();
        std::fs::create_dir_all(dir.join("datasets"))?;
        std::fs::create_dir_all(dir.join("sessions"))?;
        let mut names = BTreeMap::new();
        for (id, ds) in datasets {
            std::fs::write(dir.join("datasets").join(format!("{id}.csv")), dataset_csv(&ds)?)?;
            names.insert(id, ds.name.clone());
        }
        let names = serde_json::to_string_pretty(&names).map_err(std::io::Error::other)?;
        std::fs::write(dir.join("datasets").join("names.json"), names)?;
        for (id, slot) in sessions {
            let snap = Snapshot {
                dataset_id: slot.dataset_id.clone(),
                history: slot.session.lock().await.history_log(),
            };
            let text = serde_json::to_string_pretty(&snap).map_err(std::io::Error::other)?;
            std::fs::write(dir.join("sessions").join(format!("{id}.json")), text)?;
        }
        Ok(())
    }

    /// Loads a snapshot written by [`AppState::snapshot`]. Missing
    /// directories are treated as empty.
    pub fn restore(&self, dir: &Path) -> anyhow::Result<()> {
        let mut max_id = 0;
        let mut bump = |id: &str| {
            if let Ok(n) = id[1..].parse::<u64>() {
                max_id = max_id.max(n);
            }
        };
        let names_path = dir.join("datasets").join("names.json");
        let names: BTreeMap<String, String> = if names_path.is_file() {
            serde_json::from_str(&std::fs::read_to_string(&names_path)?)?
        } else {
            BTreeMap::new()
        };
        for (id, path) in snapshot_files(&dir.join("datasets"), "csv")? {
            let bytes = std::fs::read(&path)?;
            let name = names.get(&id).map_or(id.as_str(), String::as_str);
            let ds = Dataset::from_csv(name, &bytes).map_err(|e| anyhow::anyhow!("{}: {e}", path.display()))?;
            bump(&id);
            self.insert_dataset(id, ds);
        }
        for (id, path) in snapshot_files(&dir.join("sessions"), "json")? {
            let snap: Snapshot = serde_json::from_str(&std::fs::read_to_string(&path)?)?;
            let (_, session) = self
                .open_session(&snap.dataset_id, Some(&snap.history))
                .map_err(|e| anyhow::anyhow!("{}: {}", path.display(), e.message))?;
            bump(&id);
            self.insert_session(id, snap.dataset_id, session);
        }
        self.next_id.fetch_max(max_id + 1, Ordering::Relaxed);
        Ok(())
    }
}

fn snapshot_files(dir: &Path, ext: &str) -> std::io::Result<Vec<(String, PathBuf)>> {
    if !dir.is_dir() {
        return Ok(vec![]);
    }
    let mut out = Vec::new();
    for entry in std::fs::read_dir(dir)? {
        let path = entry?.path();
        if path.extension().and_then(|e| e.to_str()) == Some(ext) {
            if let Some(stem) = path.file_stem().and_then(|s| s.to_str()) {
                out.push((stem.to_string(), path.clone()));
            }
        }
    }
    out.sort();
    Ok(out)
}

fn dataset_csv(ds: &Dataset) -> std::io::Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(ds.columns.iter().map(|c| c.name.as_str()))?;
    for row in &ds.rows {
        w.write_record(row.iter().map(|c| c.as_deref().unwrap_or("")))?;
    }
    w.into_inner().map_err(|e| e.into_error())
}

pub fn router(state: Arc<AppState>) -> Router {
    Router::new()
        .route("/datasets", post(upload_dataset))
        .route("/sessions", post(create_session))
        .route("/sessions/{id}", get(session_info))
        .route("/sessions/{id}/utterances", post(submit_utterance))
        .route("/sessions/{id}/charts/{cid}/spec", get(chart_spec))
        .route("/sessions/{id}/history", get(history))
        .route("/suggest", get(suggest))
        .with_state(state)
}

#[derive(Debug, Deserialize)]
struct UploadQuery {
    name: Option<String>,
}

#[derive(Debug, Serialize)]
struct ColumnInfo<'a> {
    name: &'a str,
    #[serde(rename = "type")]
    semantic_type: &'static str,
}

async fn upload_dataset(
    State(state): State<Arc<AppState>>,
    query: Result<Query<UploadQuery>, QueryRejection>,
    body: Bytes,
) -> ApiResult<impl IntoResponse> {
    let Query(q) = query?;
    let name = q.name.unwrap_or_else(|| "data".to_string());
    let ds = Dataset::from_csv(&name, &body)
        .map_err(|e| ApiError::new(StatusCode::BAD_REQUEST, ErrorCode::BadCsv, e.to_string()))?;
    let columns: Vec<ColumnInfo> = ds
        .columns
        .iter()
        .map(|c| ColumnInfo {
            name: &c.name,
            semantic_type: c.semantic_type.as_str(),
        })
        .collect();
    let body = json!({ "name": ds.name, "columns": columns, "rows": ds.rows.len() });
    let id = state.add_dataset(ds);
    let mut body = body;
    body["dataset_id"] = json!(id);
    Ok((StatusCode::CREATED, Json(body)))
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct CreateSession {
    dataset_id: String,
    /// Optional history log to replay.
    history: Option<String>,
}

async fn create_session(
    State(state): State<Arc<AppState>>,
    body: Result<Json<CreateSession>, JsonRejection>,
) -> ApiResult<impl IntoResponse> {
    let Json(req) = body?;
    let (id, session) = state.open_session(&req.dataset_id, req.history.as_deref())?;
    let body = session_body(&id, &req.dataset_id, &session);
    state.insert_session(id, req.dataset_id, session);
    Ok((StatusCode::CREATED, Json(body)))
}

fn session_body(id: &str, dataset_id: &str, session: &Session) -> serde_json::Value {
    let charts: Vec<&str> = session.charts().iter().map(|c| c.id.as_str()).collect();
    json!({
        "session_id": id,
        "dataset_id": dataset_id,
        "charts": charts,
        "active_chart": session.active_chart().id,
        "history_length": session.history().len(),
    })
}

async fn session_info(
    State(state): State<Arc<AppState>>,
    UrlPath(id): UrlPath<String>,
) -> ApiResult<Json<serde_json::Value>> {
    let slot = state.session(&id)?;
    let session = slot.session.lock().await;
    Ok(Json(session_body(&id, &slot.dataset_id, &session)))
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct Utterance {
    text: String,
}

#[derive(Debug, Serialize)]
struct UtteranceResponse<'a> {
    utterance: &'a str,
    actions: Vec<String>,
    statuses: &'a [Status],
    trace: talkchart::pipeline::Explanation<'a>,
    chart: &'a str,
    version: u64,
    spec: ChartSpec,
}

async fn submit_utterance(
    State(state): State<Arc<AppState>>,
    UrlPath(id): UrlPath<String>,
    body: Result<Json<Utterance>, JsonRejection>,
) -> ApiResult<Response> {
    let slot = state.session(&id)?;
    let Json(req) = body?;
    let mut session = slot.session.lock().await;
    let sub = session.submit(&req.text).map_err(|e| match e {
        EngineError::EmptyUtterance => {
            ApiError::new(StatusCode::UNPROCESSABLE_ENTITY, ErrorCode::ParseEmpty, "empty utterance")
        }
        other => ApiError::bad_request(other.to_string()),
    })?;
    let statuses = &sub.outcome.statuses;
    if statuses.iter().all(|s| matches!(s, Status::Unsupported { .. })) {
        let message = if statuses.is_empty() {
            "no editing action recognized".to_string()
        } else {
            statuses
                .iter()
                .filter_map(|s| match s {
                    Status::Unsupported { message } => Some(message.as_str()),
                    _ => None,
                })
                .collect::<Vec<_>>()
                .join("; ")
        };
        return Err(ApiError::new(StatusCode::UNPROCESSABLE_ENTITY, ErrorCode::UnsupportedOp, message));
    }
    let spec = session
        .export_spec(&sub.outcome.chart)
        .map_err(|e| ApiError::bad_request(e.to_string()))?;
    let body = UtteranceResponse {
        utterance: &req.text,
        actions: sub.interpretation.sequence.actions.iter().map(|a| a.canonical()).collect(),
        statuses,
        trace: sub.interpretation.explain(),
        chart: &sub.outcome.chart,
        version: sub.outcome.version,
        spec,
    };
    Ok(Json(body).into_response())
}

async fn chart_spec(
    State(state): State<Arc<AppState>>,
    UrlPath((id, cid)): UrlPath<(String, String)>,
) -> ApiResult<Response> {
    let slot = state.session(&id)?;
    let session = slot.session.lock().await;
    let spec = session
        .export_spec(&cid)
        .map_err(|_| ApiError::not_found(ErrorCode::UnknownChart, &cid))?;
    Ok(([(header::CONTENT_TYPE, "application/json")], spec.to_json()).into_response())
}

async fn history(State(state): State<Arc<AppState>>, UrlPath(id): UrlPath<String>) -> ApiResult<Response> {
    let slot = state.session(&id)?;
    let log = slot.session.lock().await.history_log();
    Ok(([(header::CONTENT_TYPE, "application/x-ndjson")], log).into_response())
}

#[derive(Debug, Deserialize)]
struct SuggestQuery {
    #[serde(default)]
    prefix: String,
    k: Option<usize>,
}

async fn suggest(
    State(state): State<Arc<AppState>>,
    query: Result<Query<SuggestQuery>, QueryRejection>,
) -> ApiResult<Json<serde_json::Value>> {
    let Query(q) = query?;
    let k = q.k.unwrap_or(DEFAULT_SUGGESTIONS);
    if k == 0 {
        return Err(ApiError::bad_request("k must be at least 1"));
    }
    let hits = state.suggestions.suggest(&q.prefix, k);
    Ok(Json(json!({ "prefix": q.prefix, "suggestions": hits })))
}
