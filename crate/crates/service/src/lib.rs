//! HTTP facade over the vedit pipeline for interactive use: upload a
//! session, draw the mask, tune the alignment, propagate, preview frames
//! and download the condition pack.
//!
//! Sessions live in memory, optionally mirrored to a directory. Every
//! session has its own lock, so work on one session never blocks another.

use std::collections::HashMap;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use axum::body::Bytes;
use axum::extract::{DefaultBodyLimit, Multipart, Path as UrlPath, Query, State};
use axum::http::{header, HeaderValue, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post, put};
use axum::{Json, Router};
use serde::{Deserialize, Serialize};
use serde_json::json;
use tokio::sync::{Mutex, RwLock};
use tower_http::cors::{AllowOrigin, CorsLayer};
use tracing::{info, warn};
use vedit_core::align::Alignment;
use vedit_core::geometry::io;
use vedit_core::pipeline::{
    self, AlignmentMode, ConditionPack, EditSession, SessionConfig, SessionRun,
};
use vedit_core::{Error, ErrorKind, Image, Mask, Stage};

const UPLOAD_LIMIT: usize = 1 << 30;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Phase {
    Created,
    Masked,
    Aligned,
    Propagated,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PreviewKind {
    Pcr,
    Mask,
    Overlay,
    Masked,
}

/// Previews depend on the frame, the kind, and the settings the run used.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
struct PreviewKey {
    frame: usize,
    kind: PreviewKind,
    scale: u64,
    shift: u64,
    epsilon: u64,
}

pub struct SessionRecord {
    pub session: EditSession,
    pub phase: Phase,
    alignment: Option<Alignment>,
    run: Option<Arc<SessionRun>>,
    pack: Option<Arc<Vec<u8>>>,
    previews: HashMap<PreviewKey, Bytes>,
}

impl SessionRecord {
    fn new(session: EditSession) -> Self {
        let phase = if session.mask.is_empty() {
            Phase::Created
        } else {
            Phase::Masked
        };
        SessionRecord {
            session,
            phase,
            alignment: None,
            run: None,
            pack: None,
            previews: HashMap::new(),
        }
    }

    /// Drops everything computed from the mask, alignment or settings.
    fn invalidate(&mut self) {
        self.alignment = None;
        self.run = None;
        self.pack = None;
        self.previews.clear();
        self.phase = if self.session.mask.is_empty() {
            Phase::Created
        } else {
            Phase::Masked
        };
    }

    fn status(&self, id: &str) -> serde_json::Value {
        json!({
            "id": id,
            "state": self.phase,
            "frames": self.session.frames.len(),
            "width": self.session.width(),
            "height": self.session.height(),
            "config": self.session.config,
            "alignment": self.alignment,
        })
    }
}

#[derive(Clone, Default)]
pub struct AppState {
    sessions: Arc<RwLock<HashMap<String, Arc<Mutex<SessionRecord>>>>>,
    persist_dir: Option<PathBuf>,
}

impl AppState {
    pub fn new(persist_dir: Option<PathBuf>) -> Self {
        AppState {
            sessions: Arc::default(),
            persist_dir,
        }
    }

    /// Loads every session directory under the persistence root.
    pub async fn restore(&self) -> vedit_core::Result<usize> {
        let Some(root) = &self.persist_dir else {
            return Ok(0);
        };
        let entries = match std::fs::read_dir(root) {
            Ok(e) => e,
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => return Ok(0),
            Err(e) => return Err(Error::io(root, e)),
        };
        let mut sessions = self.sessions.write().await;
        for entry in entries.flatten() {
            let id = entry.file_name().to_string_lossy().into_owned();
            match EditSession::read_dir(&entry.path()) {
                Ok(s) => {
                    sessions.insert(id, Arc::new(Mutex::new(SessionRecord::new(s))));
                }
                Err(e) => warn!("skipping persisted session {id}: {e}"),
            }
        }
        Ok(sessions.len())
    }

    fn persist(&self, id: &str, session: &EditSession) -> Result<(), ApiError> {
        if let Some(root) = &self.persist_dir {
            session.write_dir(&root.join(id))?;
        }
        Ok(())
    }

    async fn record(&self, id: &str) -> Result<Arc<Mutex<SessionRecord>>, ApiError> {
        self.sessions
            .read()
            .await
            .get(id)
            .cloned()
            .ok_or_else(|| ApiError::not_found(format!("no session {id}")))
    }
}

#[derive(Debug)]
pub struct ApiError {
    status: StatusCode,
    message: String,
    stage: Option<&'static str>,
}

impl ApiError {
    fn not_found(message: String) -> Self {
        ApiError {
            status: StatusCode::NOT_FOUND,
            message,
            stage: None,
        }
    }

    fn conflict(message: String) -> Self {
        ApiError {
            status: StatusCode::CONFLICT,
            message,
            stage: None,
        }
    }

    fn invalid(message: String) -> Self {
        ApiError {
            status: StatusCode::UNPROCESSABLE_ENTITY,
            message,
            stage: None,
        }
    }
}

impl From<Error> for ApiError {
    fn from(e: Error) -> Self {
        let status = match e.kind() {
            // upload decoding problems are the client's fault
            ErrorKind::Io | ErrorKind::Validation => StatusCode::UNPROCESSABLE_ENTITY,
            ErrorKind::Internal => StatusCode::INTERNAL_SERVER_ERROR,
        };
        ApiError {
            status,
            stage: e.stage().map(|s| s.name()),
            message: e.to_string(),
        }
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let body = Json(json!({ "error": self.message, "stage": self.stage }));
        (self.status, body).into_response()
    }
}

type ApiResult<T> = Result<T, ApiError>;

pub fn router(state: AppState, cors_origin: Option<HeaderValue>) -> Router {
    let cors = match cors_origin {
        Some(origin) => CorsLayer::new().allow_origin(AllowOrigin::exact(origin)),
        None => CorsLayer::new().allow_origin(AllowOrigin::any()),
    }
    .allow_methods(tower_http::cors::Any)
    .allow_headers(tower_http::cors::Any);
    Router::new()
        .route("/sessions", post(create_session))
        .route("/sessions/{id}", get(session_status))
        .route("/sessions/{id}/mask", put(put_mask))
        .route("/sessions/{id}/config", put(put_config))
        .route("/sessions/{id}/alignment", put(put_alignment))
        .route("/sessions/{id}/propagate", post(propagate))
        .route("/sessions/{id}/frames/{frame}/preview", get(preview))
        .route("/sessions/{id}/pack", get(pack))
        .layer(DefaultBodyLimit::max(UPLOAD_LIMIT))
        .layer(cors)
        .with_state(state)
}

fn need<T>(v: Option<T>, what: &str) -> ApiResult<T> {
    v.ok_or_else(|| ApiError::invalid(format!("missing field {what}")))
}

fn upload_path(field: &str) -> PathBuf {
    Path::new("<upload>").join(field)
}

async fn create_session(State(state): State<AppState>, mut form: Multipart) -> ApiResult<Response> {
    let mut frames = Vec::new();
    let mut cameras = None;
    let mut d_ori = None;
    let mut edited_image = None;
    let mut edited_depth = None;
    let mut mask = None;
    let mut config = SessionConfig::default();
    while let Some(field) = form
        .next_field()
        .await
        .map_err(|e| ApiError::invalid(format!("bad multipart body: {e}")))?
    {
        let name = field
            .name()
            .unwrap_or_default()
            .trim_end_matches("[]")
            .to_string();
        let data = field
            .bytes()
            .await
            .map_err(|e| ApiError::invalid(format!("bad multipart field {name}: {e}")))?;
        let origin = upload_path(&name);
        match name.as_str() {
            "frames" => frames.push(io::decode_png_rgb(&data, &origin)?),
            "cameras" => cameras = Some(io::decode_cameras(&data, &origin)?),
            "d_ori" => d_ori = Some(io::decode_pfm(&data, &origin)?),
            "edited_image" => edited_image = Some(io::decode_png_rgb(&data, &origin)?),
            "edited_depth" => edited_depth = Some(io::decode_pfm(&data, &origin)?),
            "mask" => mask = Some(io::decode_png_mask(&data, &origin)?),
            "config" => {
                config = serde_json::from_slice(&data)
                    .map_err(|e| ApiError::invalid(format!("bad config: {e}")))?
            }
            other => return Err(ApiError::invalid(format!("unexpected field {other}"))),
        }
    }
    let d_ori: vedit_core::DepthMap = need(d_ori, "d_ori")?;
    let (w, h) = (d_ori.width(), d_ori.height());
    let session = EditSession {
        frames,
        cameras: need(cameras, "cameras")?,
        edited_image: need(edited_image, "edited_image")?,
        edited_depth_raw: need(edited_depth, "edited_depth")?,
        mask: mask.unwrap_or_else(|| Mask::new(w, h)),
        d_ori,
        config,
    };
    session.validate()?;
    let id = uuid::Uuid::new_v4().simple().to_string();
    state.persist(&id, &session)?;
    let record = SessionRecord::new(session);
    let body = record.status(&id);
    state
        .sessions
        .write()
        .await
        .insert(id.clone(), Arc::new(Mutex::new(record)));
    info!("created session {id}");
    Ok((StatusCode::CREATED, Json(body)).into_response())
}

async fn session_status(
    State(state): State<AppState>,
    UrlPath(id): UrlPath<String>,
) -> ApiResult<Response> {
    let record = state.record(&id).await?;
    let r = record.lock().await;
    Ok(Json(r.status(&id)).into_response())
}

async fn put_mask(
    State(state): State<AppState>,
    UrlPath(id): UrlPath<String>,
    body: Bytes,
) -> ApiResult<StatusCode> {
    let record = state.record(&id).await?;
    let mut r = record.lock().await;
    let mask = io::decode_png_mask(&body, &upload_path("mask"))?;
    mask.check_size("mask", r.session.width(), r.session.height())?;
    r.session.mask = mask;
    r.invalidate();
    state.persist(&id, &r.session)?;
    Ok(StatusCode::NO_CONTENT)
}

/// Partial update of the session settings.
#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct ConfigPatch {
    epsilon: Option<f64>,
    splat_radius: Option<u32>,
    erode_radius: Option<usize>,
    prompt: Option<String>,
}

async fn put_config(
    State(state): State<AppState>,
    UrlPath(id): UrlPath<String>,
    Json(patch): Json<ConfigPatch>,
) -> ApiResult<Response> {
    let record = state.record(&id).await?;
    let mut r = record.lock().await;
    let mut config = r.session.config.clone();
    if let Some(e) = patch.epsilon {
        config.epsilon = e;
    }
    if let Some(s) = patch.splat_radius {
        config.splat_radius = s;
    }
    if let Some(e) = patch.erode_radius {
        config.erode_radius = e;
    }
    if let Some(p) = patch.prompt {
        config.prompt = p;
    }
    config.validate()?;
    if config != r.session.config {
        r.session.config = config;
        r.invalidate();
        state.persist(&id, &r.session)?;
    }
    Ok(Json(r.status(&id)).into_response())
}

async fn put_alignment(
    State(state): State<AppState>,
    UrlPath(id): UrlPath<String>,
    Json(mode): Json<AlignmentMode>,
) -> ApiResult<Response> {
    let record = state.record(&id).await?;
    let mut r = record.lock().await;
    if r.phase < Phase::Masked {
        return Err(ApiError::conflict("draw a mask before aligning".into()));
    }
    if let (true, Some(a)) = (r.session.config.alignment == mode, r.alignment) {
        return Ok(Json(alignment_body(&a)).into_response());
    }
    let mut candidate = r.session.clone();
    candidate.config.alignment = mode;
    let (alignment, _) =
        tokio::task::spawn_blocking(move || pipeline::resolve_alignment(&candidate))
            .await
            .map_err(|e| Error::Internal(e.to_string()))??;
    r.session.config.alignment = mode;
    r.invalidate();
    r.alignment = Some(alignment);
    r.phase = Phase::Aligned;
    state.persist(&id, &r.session)?;
    Ok(Json(alignment_body(&alignment)).into_response())
}

fn alignment_body(a: &Alignment) -> serde_json::Value {
    json!({
        "scale": a.scale,
        "shift": a.shift,
        "residual_rmse": a.residual_rmse,
        "pixel_count": a.pixel_count,
    })
}

async fn propagate(
    State(state): State<AppState>,
    UrlPath(id): UrlPath<String>,
) -> ApiResult<Response> {
    let record = state.record(&id).await?;
    let mut r = record.lock().await;
    if r.phase < Phase::Masked {
        return Err(ApiError::conflict("draw a mask before propagating".into()));
    }
    if r.run.is_none() {
        let session = r.session.clone();
        let run = tokio::task::spawn_blocking(move || pipeline::execute(&session))
            .await
            .map_err(|e| Error::Internal(e.to_string()))??;
        r.alignment = Some(run.scene.alignment);
        r.run = Some(Arc::new(run));
        r.pack = None;
        r.previews.clear();
        r.phase = Phase::Propagated;
    }
    Ok(Json(json!({ "frames": r.session.frames.len() })).into_response())
}

#[derive(Debug, Deserialize)]
struct PreviewQuery {
    kind: PreviewKind,
}

fn png_response(bytes: Bytes) -> Response {
    ([(header::CONTENT_TYPE, "image/png")], bytes).into_response()
}

fn overlay(frame: &Image, mask: &Mask) -> Image {
    Image::from_fn(frame.width(), frame.height(), |x, y| {
        let p = frame.get(x, y);
        if mask.get(x, y) {
            [0.5 * p[0] + 0.5, 0.5 * p[1], 0.5 * p[2]]
        } else {
            p
        }
    })
}

async fn preview(
    State(state): State<AppState>,
    UrlPath((id, frame)): UrlPath<(String, usize)>,
    Query(q): Query<PreviewQuery>,
) -> ApiResult<Response> {
    let record = state.record(&id).await?;
    let (key, run, original) = {
        let r = record.lock().await;
        let Some(run) = r.run.clone() else {
            return Err(ApiError::conflict("session has not been propagated".into()));
        };
        let original = r
            .session
            .frames
            .get(frame)
            .cloned()
            .ok_or_else(|| ApiError::not_found(format!("no frame {frame}")))?;
        let a = run.scene.alignment;
        let key = PreviewKey {
            frame,
            kind: q.kind,
            scale: a.scale.to_bits(),
            shift: a.shift.to_bits(),
            epsilon: r.session.config.epsilon.to_bits(),
        };
        if let Some(hit) = r.previews.get(&key) {
            return Ok(png_response(hit.clone()));
        }
        (key, run, original)
    };
    let rendered_from = run.clone();
    let bytes = tokio::task::spawn_blocking(move || {
        let mask = &run.masks[frame];
        Bytes::from(match key.kind {
            PreviewKind::Pcr => io::encode_png_rgb(&run.renders[frame].color),
            PreviewKind::Mask => io::encode_png_mask(mask),
            PreviewKind::Overlay => io::encode_png_rgb(&overlay(&original, mask)),
            PreviewKind::Masked => io::encode_png_rgb(&original.zero_masked(mask)),
        })
    })
    .await
    .map_err(|e| Error::Internal(e.to_string()))?;
    let mut r = record.lock().await;
    // the session may have changed while rendering; only cache current work
    if r.run
        .as_ref()
        .is_some_and(|cur| Arc::ptr_eq(cur, &rendered_from))
    {
        r.previews.insert(key, bytes.clone());
    }
    Ok(png_response(bytes))
}

async fn pack(State(state): State<AppState>, UrlPath(id): UrlPath<String>) -> ApiResult<Response> {
    let record = state.record(&id).await?;
    let mut r = record.lock().await;
    let Some(run) = r.run.clone() else {
        return Err(ApiError::conflict("session has not been propagated".into()));
    };
    let bytes = match &r.pack {
        Some(b) => b.clone(),
        None => {
            let session = r.session.clone();
            let tar = tokio::task::spawn_blocking(move || {
                ConditionPack::assemble(&session, &run)
                    .map(|p| p.to_tar())
                    .map_err(|e| e.at(Stage::Assemble))
            })
            .await
            .map_err(|e| Error::Internal(e.to_string()))??;
            let tar = Arc::new(tar);
            r.pack = Some(tar.clone());
            tar
        }
    };
    Ok((
        [
            (header::CONTENT_TYPE, "application/x-tar"),
            (
                header::CONTENT_DISPOSITION,
                "attachment; filename=\"pack.tar\"",
            ),
        ],
        Bytes::from((*bytes).clone()),
    )
        .into_response())
}
