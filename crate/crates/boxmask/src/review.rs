//! HTTP curation service: frames, overlays and accept/reject verdicts.
//!
//! Verdicts go to an append-only JSONL log behind a single writer lock; the
//! in-memory view is the replay of that log.

use std::collections::BTreeMap;
use std::fs::{File, OpenOptions};
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::{Arc, Mutex, RwLock};
use std::time::{SystemTime, UNIX_EPOCH};

use axum::body::Bytes;
use axum::extract::{Path as UrlPath, Query, State};
use axum::http::{header, HeaderMap, HeaderValue, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use boxmask_core::curation::{CurationView, Decision, VerdictRecord};
use boxmask_core::{FrameRecord, OutputClass, SemanticMask, Weather, IGNORE};
use image::{Rgb, RgbImage};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use tower_http::services::ServeDir;

use crate::fsio::{encode_rgb_png, read_mask, read_rgb};
use crate::manifest::Manifest;
use crate::pipeline::mask_file;
use crate::report::ClassPixels;
use crate::{Error, Result};

/// Header carrying the reviewer id on verdict submissions.
pub const REVIEWER_HEADER: &str = "x-reviewer-id";
/// Optional header making verdict submissions safe to retry.
pub const IDEMPOTENCY_HEADER: &str = "idempotency-key";

pub const DEFAULT_PAGE_SIZE: usize = 50;
pub const MAX_PAGE_SIZE: usize = 500;

/// Overlay colors for Vehicle, Sign, Human.
pub const PALETTE: [[u8; 3]; 3] = [[0, 90, 255], [255, 210, 0], [255, 40, 40]];
pub const OVERLAY_ALPHA: f32 = 0.5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ReviewState {
    Unreviewed,
    Accepted,
    Rejected,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrameSummary {
    pub frame_id: String,
    pub weather: Weather,
    pub state: ReviewState,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pixels: Option<ClassPixels>,
    /// Foreground classes present in the mask.
    pub classes: Vec<OutputClass>,
    pub history_len: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub verdict: Option<VerdictRecord>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FramePage {
    pub total: usize,
    pub page: usize,
    pub page_size: usize,
    pub frames: Vec<FrameSummary>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AcceptanceStats {
    pub frames: usize,
    pub reviewed: usize,
    pub accepted: usize,
    pub rejected: usize,
    pub verdicts: u64,
    pub acceptance_rate: Option<f64>,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StateFilter {
    #[default]
    All,
    Unreviewed,
    Reviewed,
    Accepted,
    Rejected,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ListQuery {
    #[serde(default)]
    pub state: StateFilter,
    pub weather: Option<Weather>,
    pub page: Option<usize>,
    pub page_size: Option<usize>,
}

#[derive(Debug, thiserror::Error)]
pub enum ReviewError {
    #[error("unknown frame `{0}`")]
    NotFound(String),
    #[error("{0}")]
    BadRequest(String),
    #[error("{0}")]
    Conflict(String),
    #[error(transparent)]
    Store(#[from] Error),
}

impl IntoResponse for ReviewError {
    fn into_response(self) -> Response {
        let status = match &self {
            ReviewError::NotFound(_) => StatusCode::NOT_FOUND,
            ReviewError::BadRequest(_) => StatusCode::BAD_REQUEST,
            ReviewError::Conflict(_) => StatusCode::CONFLICT,
            ReviewError::Store(_) => StatusCode::INTERNAL_SERVER_ERROR,
        };
        (status, Json(serde_json::json!({ "error": self.to_string() }))).into_response()
    }
}

struct FrameInfo {
    index: usize,
    pixels: Option<ClassPixels>,
}

pub struct ReviewStore {
    manifest: Manifest,
    masks: PathBuf,
    frames: BTreeMap<String, FrameInfo>,
    log_path: PathBuf,
    writer: Mutex<File>,
    view: RwLock<CurationView>,
}

fn now_ms() -> u64 {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map_or(0, |d| d.as_millis() as u64)
}

/// Reads a verdict log. A torn final line (no trailing newline) is cut off
/// so that later appends start on a clean line.
pub fn load_log(path: &Path) -> Result<Vec<VerdictRecord>> {
    let bytes = match std::fs::read(path) {
        Ok(b) => b,
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => return Ok(Vec::new()),
        Err(e) => return Err(Error::io(path, e)),
    };
    let complete = bytes.iter().rposition(|&b| b == b'\n').map_or(0, |i| i + 1);
    if complete < bytes.len() {
        let f = OpenOptions::new().write(true).open(path).map_err(|e| Error::io(path, e))?;
        f.set_len(complete as u64).map_err(|e| Error::io(path, e))?;
    }
    let text = std::str::from_utf8(&bytes[..complete]).map_err(|e| Error::format(path, e))?;
    let mut records = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let r: VerdictRecord = serde_json::from_str(line).map_err(|e| Error::Parse {
            path: path.to_path_buf(),
            line: i + 1,
            message: e.to_string(),
        })?;
        records.push(r);
    }
    Ok(records)
}

impl ReviewStore {
    /// Opens the store, replaying `log_path` if it exists.
    pub fn open(manifest: Manifest, masks: &Path, log_path: &Path) -> Result<Self> {
        let records = load_log(log_path)?;
        if let Some(dir) = log_path.parent().filter(|d| !d.as_os_str().is_empty()) {
            std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        }
        let file = OpenOptions::new()
            .create(true)
            .append(true)
            .open(log_path)
            .map_err(|e| Error::io(log_path, e))?;
        let pixels: Vec<Option<ClassPixels>> = manifest
            .frames
            .par_iter()
            .map(|f| read_mask(&mask_file(masks, &f.frame_id)).ok().map(|m| ClassPixels::of(&m)))
            .collect();
        let frames = manifest
            .frames
            .iter()
            .zip(pixels)
            .enumerate()
            .map(|(index, (f, pixels))| (f.frame_id.clone(), FrameInfo { index, pixels }))
            .collect();
        Ok(ReviewStore {
            manifest,
            masks: masks.to_path_buf(),
            frames,
            log_path: log_path.to_path_buf(),
            writer: Mutex::new(file),
            view: RwLock::new(CurationView::replay(&records)),
        })
    }

    pub fn log_path(&self) -> &Path {
        &self.log_path
    }

    fn frame(&self, frame_id: &str) -> std::result::Result<(&FrameRecord, &FrameInfo), ReviewError> {
        let info = self
            .frames
            .get(frame_id)
            .ok_or_else(|| ReviewError::NotFound(frame_id.to_string()))?;
        Ok((&self.manifest.frames[info.index], info))
    }

    fn summary(&self, view: &CurationView, f: &FrameRecord, info: &FrameInfo) -> FrameSummary {
        let verdict = view.latest(&f.frame_id).cloned();
        let state = match verdict.as_ref().map(|v| v.decision) {
            None => ReviewState::Unreviewed,
            Some(Decision::Accept) => ReviewState::Accepted,
            Some(Decision::Reject) => ReviewState::Rejected,
        };
        let classes = info.pixels.map_or_else(Vec::new, |p| {
            let counts = p.classes();
            OutputClass::FOREGROUND
                .into_iter()
                .filter(|c| counts[c.index()] > 0)
                .collect()
        });
        FrameSummary {
            frame_id: f.frame_id.clone(),
            weather: f.weather,
            state,
            pixels: info.pixels,
            classes,
            history_len: view.history_len(&f.frame_id),
            verdict,
        }
    }

    /// Frames in id order, filtered and paginated (pages start at 1).
    pub fn list_frames(&self, q: &ListQuery) -> std::result::Result<FramePage, ReviewError> {
        let page = q.page.unwrap_or(1);
        let page_size = q.page_size.unwrap_or(DEFAULT_PAGE_SIZE);
        if page == 0 || page_size == 0 || page_size > MAX_PAGE_SIZE {
            return Err(ReviewError::BadRequest(format!(
                "page must be >= 1 and page_size in 1..={MAX_PAGE_SIZE}"
            )));
        }
        let view = self.view.read().expect("view lock");
        let matching: Vec<FrameSummary> = self
            .frames
            .values()
            .map(|info| (&self.manifest.frames[info.index], info))
            .filter(|(f, _)| q.weather.is_none_or(|w| f.weather == w))
            .filter(|(f, _)| {
                let d = view.decision(&f.frame_id);
                match q.state {
                    StateFilter::All => true,
                    StateFilter::Unreviewed => d.is_none(),
                    StateFilter::Reviewed => d.is_some(),
                    StateFilter::Accepted => d == Some(Decision::Accept),
                    StateFilter::Rejected => d == Some(Decision::Reject),
                }
            })
            .map(|(f, info)| self.summary(&view, f, info))
            .collect();
        let total = matching.len();
        let frames = matching.into_iter().skip((page - 1) * page_size).take(page_size).collect();
        Ok(FramePage {
            total,
            page,
            page_size,
            frames,
        })
    }

    pub fn frame_summary(&self, frame_id: &str) -> std::result::Result<FrameSummary, ReviewError> {
        let (f, info) = self.frame(frame_id)?;
        let view = self.view.read().expect("view lock");
        Ok(self.summary(&view, f, info))
    }

    /// Appends a verdict. Returns the stored record and whether it is new;
    /// a repeated idempotency key returns the earlier record unchanged.
    pub fn record_verdict(
        &self,
        frame_id: &str,
        decision: Decision,
        note: Option<String>,
        reviewer: &str,
        idempotency_key: Option<String>,
    ) -> std::result::Result<(VerdictRecord, bool), ReviewError> {
        self.frame(frame_id)?;
        if reviewer.trim().is_empty() {
            return Err(ReviewError::BadRequest("reviewer id must not be empty".into()));
        }
        let mut file = self.writer.lock().expect("writer lock");
        if let Some(key) = &idempotency_key {
            if let Some(prev) = self.view.read().expect("view lock").by_key(key) {
                if prev.frame_id != frame_id || prev.decision != decision {
                    return Err(ReviewError::Conflict(format!(
                        "idempotency key `{key}` already used for a different verdict"
                    )));
                }
                return Ok((prev.clone(), false));
            }
        }
        let record = VerdictRecord {
            seq: self.view.read().expect("view lock").next_seq(),
            frame_id: frame_id.to_string(),
            decision,
            note: note.filter(|n| !n.trim().is_empty()),
            reviewer: reviewer.trim().to_string(),
            timestamp_ms: now_ms(),
            idempotency_key,
        };
        let mut line = serde_json::to_string(&record).expect("verdicts serialize");
        line.push('\n');
        file.write_all(line.as_bytes())
            .and_then(|()| file.sync_data())
            .map_err(|e| Error::io(&self.log_path, e))?;
        self.view.write().expect("view lock").apply(record.clone());
        Ok((record, true))
    }

    pub fn acceptance(&self) -> AcceptanceStats {
        let view = self.view.read().expect("view lock");
        AcceptanceStats {
            frames: self.frames.len(),
            reviewed: view.reviewed(),
            accepted: view.accepted(),
            rejected: view.reviewed() - view.accepted(),
            verdicts: view.next_seq(),
            acceptance_rate: view.acceptance_rate(),
        }
    }

    /// Manifest records whose latest verdict is Accept, in id order.
    pub fn export_curated_manifest(&self) -> Vec<FrameRecord> {
        let view = self.view.read().expect("view lock");
        view.curated()
            .into_iter()
            .filter_map(|id| self.frames.get(id))
            .map(|info| self.manifest.frames[info.index].clone())
            .collect()
    }

    pub fn image_path(&self, frame_id: &str) -> std::result::Result<PathBuf, ReviewError> {
        let (f, _) = self.frame(frame_id)?;
        Ok(self.manifest.resolve(&f.image))
    }

    pub fn mask_path(&self, frame_id: &str) -> std::result::Result<PathBuf, ReviewError> {
        self.frame(frame_id)?;
        Ok(mask_file(&self.masks, frame_id))
    }

    /// Photo resampled to the mask size with the mask blended on top.
    pub fn render_overlay(&self, frame_id: &str) -> std::result::Result<Vec<u8>, ReviewError> {
        let mask = read_mask(&self.mask_path(frame_id)?).map_err(not_found_or_store(frame_id))?;
        let photo = read_rgb(&self.image_path(frame_id)?).map_err(not_found_or_store(frame_id))?;
        Ok(encode_rgb_png(&overlay(&photo, &mask)))
    }
}

fn not_found_or_store(frame_id: &str) -> impl Fn(Error) -> ReviewError + '_ {
    move |e| {
        if e.is_not_found() {
            ReviewError::NotFound(format!("{frame_id}: {e}"))
        } else {
            ReviewError::Store(e)
        }
    }
}

/// Alpha-blends the fixed palette over `photo` at the mask resolution.
/// Background is left untouched and Ignore is darkened.
pub fn overlay(photo: &RgbImage, mask: &SemanticMask) -> RgbImage {
    let (w, h) = mask.dims();
    let base = if photo.dimensions() == (w, h) {
        photo.clone()
    } else {
        image::imageops::resize(photo, w, h, image::imageops::FilterType::Triangle)
    };
    RgbImage::from_fn(w, h, |x, y| {
        let Rgb(p) = *base.get_pixel(x, y);
        match mask.get(x, y) {
            IGNORE => Rgb(p.map(|v| v / 3)),
            label => match OutputClass::from_id(label) {
                Some(OutputClass::Background) | None => Rgb(p),
                Some(c) => {
                    let col = PALETTE[c.index() - 1];
                    Rgb(std::array::from_fn(|i| {
                        let v = (1.0 - OVERLAY_ALPHA) * f32::from(p[i]) + OVERLAY_ALPHA * f32::from(col[i]);
                        v.round() as u8
                    }))
                }
            },
        }
    })
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct VerdictBody {
    decision: Decision,
    #[serde(default)]
    note: Option<String>,
}

type AppState = Arc<ReviewStore>;

async fn list_frames(
    State(store): State<AppState>,
    query: std::result::Result<Query<ListQuery>, axum::extract::rejection::QueryRejection>,
) -> std::result::Result<Json<FramePage>, ReviewError> {
    let Query(q) = query.map_err(|e| ReviewError::BadRequest(e.body_text()))?;
    store.list_frames(&q).map(Json)
}

async fn frame_summary(
    State(store): State<AppState>,
    UrlPath(id): UrlPath<String>,
) -> std::result::Result<Json<FrameSummary>, ReviewError> {
    store.frame_summary(&id).map(Json)
}

fn content_type_for(path: &Path) -> &'static str {
    match path.extension().and_then(|e| e.to_str()).map(str::to_ascii_lowercase).as_deref() {
        Some("png") => "image/png",
        Some("jpg" | "jpeg") => "image/jpeg",
        _ => "application/octet-stream",
    }
}

async fn send_file(path: PathBuf, frame_id: String) -> std::result::Result<Response, ReviewError> {
    let ct = content_type_for(&path);
    let bytes = tokio::task::spawn_blocking({
        let path = path.clone();
        move || std::fs::read(&path)
    })
    .await
    .expect("reader task")
    .map_err(|e| not_found_or_store(&frame_id)(Error::io(&path, e)))?;
    Ok(([(header::CONTENT_TYPE, HeaderValue::from_static(ct))], bytes).into_response())
}

async fn frame_image(
    State(store): State<AppState>,
    UrlPath(id): UrlPath<String>,
) -> std::result::Result<Response, ReviewError> {
    send_file(store.image_path(&id)?, id).await
}

async fn frame_mask(
    State(store): State<AppState>,
    UrlPath(id): UrlPath<String>,
) -> std::result::Result<Response, ReviewError> {
    send_file(store.mask_path(&id)?, id).await
}

async fn frame_overlay(
    State(store): State<AppState>,
    UrlPath(id): UrlPath<String>,
) -> std::result::Result<Response, ReviewError> {
    let png = tokio::task::spawn_blocking(move || store.render_overlay(&id))
        .await
        .expect("overlay task")?;
    Ok(([(header::CONTENT_TYPE, HeaderValue::from_static("image/png"))], png).into_response())
}

async fn post_verdict(
    State(store): State<AppState>,
    UrlPath(id): UrlPath<String>,
    headers: HeaderMap,
    body: Bytes,
) -> std::result::Result<Response, ReviewError> {
    let header_str = |name: &str| -> std::result::Result<Option<String>, ReviewError> {
        headers
            .get(name)
            .map(|v| {
                v.to_str()
                    .map(str::to_string)
                    .map_err(|_| ReviewError::BadRequest(format!("{name} must be visible ASCII")))
            })
            .transpose()
    };
    let reviewer = header_str(REVIEWER_HEADER)?
        .ok_or_else(|| ReviewError::BadRequest(format!("missing {REVIEWER_HEADER} header")))?;
    let key = header_str(IDEMPOTENCY_HEADER)?;
    let body: VerdictBody =
        serde_json::from_slice(&body).map_err(|e| ReviewError::BadRequest(format!("invalid verdict: {e}")))?;
    let (record, created) = tokio::task::spawn_blocking(move || {
        store.record_verdict(&id, body.decision, body.note, &reviewer, key)
    })
    .await
    .expect("writer task")?;
    let status = if created { StatusCode::CREATED } else { StatusCode::OK };
    Ok((status, Json(record)).into_response())
}

async fn acceptance(State(store): State<AppState>) -> Json<AcceptanceStats> {
    Json(store.acceptance())
}

async fn export_manifest(State(store): State<AppState>) -> Response {
    let body = crate::manifest::to_jsonl(&store.export_curated_manifest());
    ([(header::CONTENT_TYPE, HeaderValue::from_static("application/x-ndjson"))], body).into_response()
}

/// The `/api/v1` routes, plus static hosting of `ui_dir` when given.
pub fn router(store: Arc<ReviewStore>, ui_dir: Option<&Path>) -> Router {
    let api = Router::new()
        .route("/frames", get(list_frames))
        .route("/frames/{id}", get(frame_summary))
        .route("/frames/{id}/image", get(frame_image))
        .route("/frames/{id}/mask", get(frame_mask))
        .route("/frames/{id}/overlay", get(frame_overlay))
        .route("/frames/{id}/verdict", post(post_verdict))
        .route("/stats/acceptance", get(acceptance))
        .route("/export/manifest", get(export_manifest))
        .with_state(store);
    let app = Router::new().nest("/api/v1", api);
    match ui_dir {
        Some(dir) => app.fallback_service(ServeDir::new(dir).append_index_html_on_directories(true)),
        None => app,
    }
}

/// Binds `addr` and serves until the process is stopped.
pub async fn serve(addr: &str, app: Router) -> Result<()> {
    let listener = tokio::net::TcpListener::bind(addr)
        .await
        .map_err(|e| Error::io(addr, e))?;
    let local = listener.local_addr().map_err(|e| Error::io(addr, e))?;
    eprintln!("review service listening on http://{local}");
    axum::serve(listener, app).await.map_err(|e| Error::io(addr, e))
}
