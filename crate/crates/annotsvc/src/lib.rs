//! HTTP service over a workspace: frames, predicted segments and
//! revisioned ground-truth annotations for the review UI.
//!
//! Routes:
//!
//! - `GET /api/videos`
//! - `GET /api/videos/{id}/frame/{n}` (grayscale PNG)
//! - `GET /api/videos/{id}/predictions[?filtered=true]`
//! - `GET /api/videos/{id}/annotations`
//! - `PUT /api/videos/{id}/annotations`

mod record;

use std::collections::HashMap;
use std::io::Cursor;
use std::net::SocketAddr;
use std::sync::{Arc, Mutex};

use axum::body::Bytes;
use axum::extract::{Path, Query, State};
use axum::http::{header, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::get;
use axum::{Json, Router};
use serde::Deserialize;
use serde_json::json;
use strokeloc::ingest::VideoMeta;
use strokeloc::workspace::{Predictions, Workspace};

pub use record::{parse_update, AnnotationRecord, AnnotationUpdate, FieldError};

#[derive(Debug)]
pub enum ApiError {
    NotFound(String),
    BadRequest(FieldError),
    Conflict(AnnotationRecord),
    Internal(String),
}

impl From<strokeloc::Error> for ApiError {
    fn from(e: strokeloc::Error) -> Self {
        match e {
            strokeloc::Error::NotFound(what) => ApiError::NotFound(what),
            strokeloc::Error::FrameOutOfRange { .. } => ApiError::NotFound(e.to_string()),
            other => ApiError::Internal(other.to_string()),
        }
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        match self {
            ApiError::NotFound(what) => (StatusCode::NOT_FOUND, Json(json!({ "error": format!("not found: {what}") }))).into_response(),
            ApiError::BadRequest(e) => (
                StatusCode::BAD_REQUEST,
                Json(json!({ "error": e.to_string(), "field": e.field, "message": e.message })),
            )
                .into_response(),
            ApiError::Conflict(current) => (StatusCode::CONFLICT, Json(current)).into_response(),
            ApiError::Internal(msg) => (StatusCode::INTERNAL_SERVER_ERROR, Json(json!({ "error": msg }))).into_response(),
        }
    }
}

type ApiResult<T> = Result<T, ApiError>;

#[derive(Clone)]
struct AppState {
    ws: Arc<Workspace>,
    /// One write lock per video id.
    locks: Arc<Mutex<HashMap<String, Arc<tokio::sync::Mutex<()>>>>>,
}

impl AppState {
    fn lock_for(&self, id: &str) -> Arc<tokio::sync::Mutex<()>> {
        let mut locks = self.locks.lock().expect("lock table is never poisoned");
        locks.entry(id.to_owned()).or_default().clone()
    }

    /// Metadata of a workspace video, or 404.
    fn meta(&self, id: &str) -> ApiResult<VideoMeta> {
        let plain = !id.is_empty() && id.chars().all(|c| c.is_ascii_alphanumeric() || matches!(c, '_' | '-' | '.')) && !id.starts_with('.');
        if !plain || !self.ws.video_path(id).is_file() {
            return Err(ApiError::NotFound(format!("video {id}")));
        }
        Ok(self.ws.open_video(id)?.meta().clone())
    }

    fn read_record(&self, id: &str) -> ApiResult<AnnotationRecord> {
        let path = self.ws.gt_segments_path(id);
        match std::fs::read(&path) {
            Ok(bytes) => serde_json::from_slice(&bytes).map_err(|e| ApiError::Internal(format!("{}: {e}", path.display()))),
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => Ok(AnnotationRecord::empty(id)),
            Err(e) => Err(ApiError::Internal(format!("{}: {e}", path.display()))),
        }
    }
}

async fn blocking<T: Send + 'static>(f: impl FnOnce() -> ApiResult<T> + Send + 'static) -> ApiResult<T> {
    tokio::task::spawn_blocking(f)
        .await
        .map_err(|e| ApiError::Internal(e.to_string()))?
}

async fn list_videos(State(st): State<AppState>) -> ApiResult<Json<Vec<VideoMeta>>> {
    blocking(move || {
        let ids = st.ws.list_videos()?;
        let metas = ids.iter().map(|id| st.meta(id)).collect::<ApiResult<Vec<_>>>()?;
        Ok(Json(metas))
    })
    .await
}

async fn frame(State(st): State<AppState>, Path((id, n)): Path<(String, u64)>) -> ApiResult<Response> {
    let png = blocking(move || {
        st.meta(&id)?;
        let frame = st.ws.open_video(&id)?.frame_at(n)?;
        let mut buf = Cursor::new(Vec::new());
        image::GrayImage::from_raw(frame.width(), frame.height(), frame.into_pixels())
            .ok_or_else(|| ApiError::Internal("frame buffer size mismatch".into()))?
            .write_to(&mut buf, image::ImageFormat::Png)
            .map_err(|e| ApiError::Internal(e.to_string()))?;
        Ok(buf.into_inner())
    })
    .await?;
    Ok(([(header::CONTENT_TYPE, "image/png")], png).into_response())
}

#[derive(Deserialize)]
struct PredictionsQuery {
    #[serde(default)]
    filtered: bool,
}

async fn predictions(State(st): State<AppState>, Path(id): Path<String>, Query(q): Query<PredictionsQuery>) -> ApiResult<Response> {
    let body = blocking(move || {
        st.meta(&id)?;
        let which = if q.filtered { Predictions::Filtered } else { Predictions::Raw };
        let set = st.ws.read_segments(&id, which)?;
        let mut buf = Vec::new();
        set.write_json(&mut buf)?;
        Ok(buf)
    })
    .await?;
    Ok(([(header::CONTENT_TYPE, "application/json")], body).into_response())
}

async fn get_annotations(State(st): State<AppState>, Path(id): Path<String>) -> ApiResult<Json<AnnotationRecord>> {
    blocking(move || {
        st.meta(&id)?;
        Ok(Json(st.read_record(&id)?))
    })
    .await
}

async fn put_annotations(State(st): State<AppState>, Path(id): Path<String>, body: Bytes) -> ApiResult<Json<AnnotationRecord>> {
    let meta = {
        let (st, id) = (st.clone(), id.clone());
        blocking(move || st.meta(&id)).await?
    };
    let update = parse_update(&body, &id, meta.n_frames).map_err(ApiError::BadRequest)?;

    let lock = st.lock_for(&id);
    let _guard = lock.lock().await;
    blocking(move || {
        let current = st.read_record(&id)?;
        if current.revision != update.expected_revision {
            return Err(ApiError::Conflict(current));
        }
        let next = AnnotationRecord {
            format_version: strokeloc::FORMAT_VERSION.into(),
            video_id: id.clone(),
            segments: update.segments,
            revision: current.revision + 1,
            updated_at: Some(chrono::Utc::now().to_rfc3339_opts(chrono::SecondsFormat::Millis, true)),
        };
        let mut bytes = serde_json::to_vec(&next).map_err(|e| ApiError::Internal(e.to_string()))?;
        bytes.push(b'\n');
        strokeloc::fsio::write_atomic(&st.ws.gt_segments_path(&id), &bytes)?;
        Ok(Json(next))
    })
    .await
}

/// The service's routes over `ws`.
pub fn router(ws: Workspace) -> Router {
    let state = AppState {
        ws: Arc::new(ws),
        locks: Arc::default(),
    };
    Router::new()
        .route("/api/videos", get(list_videos))
        .route("/api/videos/{id}/frame/{n}", get(frame))
        .route("/api/videos/{id}/predictions", get(predictions))
        .route("/api/videos/{id}/annotations", get(get_annotations).put(put_annotations))
        .with_state(state)
}

/// Serves on an already bound listener until the task is dropped.
pub async fn serve_on(listener: tokio::net::TcpListener, ws: Workspace) -> std::io::Result<()> {
    axum::serve(listener, router(ws)).await
}

/// Binds `addr` and serves.
pub async fn serve(ws: Workspace, addr: SocketAddr) -> std::io::Result<()> {
    let listener = tokio::net::TcpListener::bind(addr).await?;
    serve_on(listener, ws).await
}
