//! HTTP labeling API consumed by the browser UI.
//!
//! ```text
//! GET  /api/queue/next       200 {clip_id, transcript, audio_url, queued_remaining} | 204
//! GET  /api/audio/{clip_id}  200 audio/wav | 404
//! POST /api/labels           {clip_id, label} -> 200 {accepted, auto_propagated, remaining} | 400 | 404
//! GET  /api/stats            200 {manual, propagated, classified, queued, total}
//! ```
//!
//! All state sits behind one mutex, so mutations and the re-propagation they
//! trigger are serialized. Anything outside `/api` is served from the
//! optional UI directory.

use std::net::SocketAddr;
use std::path::{Component, Path, PathBuf};
use std::sync::{Arc, Mutex};

use axum::body::Body;
use axum::extract::{Path as UrlPath, State};
use axum::http::{header, StatusCode, Uri};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use percent_encoding::{utf8_percent_encode, NON_ALPHANUMERIC};
use serde::{Deserialize, Serialize};
use tokio::sync::oneshot;

use super::{LabelError, Labeler};

#[derive(Clone)]
struct AppState {
    labeler: Arc<Mutex<Labeler>>,
    ui_dir: Option<PathBuf>,
}

#[derive(Debug, Serialize, Deserialize, PartialEq)]
pub struct QueueItem {
    pub clip_id: String,
    pub transcript: Option<String>,
    pub audio_url: String,
    pub queued_remaining: usize,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct LabelRequest {
    pub clip_id: String,
    pub label: String,
}

#[derive(Debug, Serialize)]
struct ErrorBody {
    error: String,
}

fn error(status: StatusCode, message: impl ToString) -> Response {
    (status, Json(ErrorBody { error: message.to_string() })).into_response()
}

pub fn router(labeler: Arc<Mutex<Labeler>>, ui_dir: Option<PathBuf>) -> Router {
    Router::new()
        .route("/api/queue/next", get(next))
        .route("/api/audio/{clip_id}", get(audio))
        .route("/api/labels", post(submit))
        .route("/api/stats", get(stats))
        .fallback(static_file)
        .with_state(AppState { labeler, ui_dir })
}

async fn next(State(state): State<AppState>) -> Response {
    let labeler = state.labeler.lock().unwrap();
    match labeler.next_queued() {
        Some(clip) => Json(QueueItem {
            clip_id: clip.clip_id.clone(),
            transcript: clip.transcript.clone(),
            audio_url: format!("/api/audio/{}", utf8_percent_encode(&clip.clip_id, NON_ALPHANUMERIC)),
            queued_remaining: labeler.queue().len(),
        })
        .into_response(),
        None => StatusCode::NO_CONTENT.into_response(),
    }
}

async fn audio(State(state): State<AppState>, UrlPath(clip_id): UrlPath<String>) -> Response {
    let path = {
        let labeler = state.labeler.lock().unwrap();
        match labeler.clip(&clip_id) {
            Some(c) => c.audio_path.clone(),
            None => return error(StatusCode::NOT_FOUND, format!("unknown clip {clip_id:?}")),
        }
    };
    let Some(path) = path else {
        return error(StatusCode::NOT_FOUND, format!("clip {clip_id:?} has no audio"));
    };
    match tokio::fs::read(&path).await {
        Ok(bytes) => ([(header::CONTENT_TYPE, "audio/wav")], bytes).into_response(),
        Err(e) => error(StatusCode::NOT_FOUND, format!("{}: {e}", path.display())),
    }
}

async fn submit(State(state): State<AppState>, body: Result<Json<LabelRequest>, axum::extract::rejection::JsonRejection>) -> Response {
    let Json(req) = match body {
        Ok(b) => b,
        Err(e) => return error(StatusCode::BAD_REQUEST, e.body_text()),
    };
    let labeler = state.labeler.clone();
    let result = tokio::task::spawn_blocking(move || labeler.lock().unwrap().submit_label(&req.clip_id, &req.label))
        .await
        .expect("labeling task panicked");
    match result {
        Ok(outcome) => Json(outcome).into_response(),
        Err(e @ LabelError::UnknownClip(_)) => error(StatusCode::NOT_FOUND, e),
        Err(e @ LabelError::UnknownLabel { .. }) => error(StatusCode::BAD_REQUEST, e),
        Err(e) => error(StatusCode::INTERNAL_SERVER_ERROR, e),
    }
}

async fn stats(State(state): State<AppState>) -> Response {
    Json(state.labeler.lock().unwrap().stats()).into_response()
}

async fn static_file(State(state): State<AppState>, uri: Uri) -> Response {
    let Some(root) = &state.ui_dir else {
        return StatusCode::NOT_FOUND.into_response();
    };
    let rel = uri.path().trim_start_matches('/');
    let rel = if rel.is_empty() { "index.html" } else { rel };
    let rel = Path::new(rel);
    if !rel.components().all(|c| matches!(c, Component::Normal(_))) {
        return StatusCode::NOT_FOUND.into_response();
    }
    let path = root.join(rel);
    match tokio::fs::read(&path).await {
        Ok(bytes) => Response::builder()
            .header(header::CONTENT_TYPE, content_type(&path))
            .body(Body::from(bytes))
            .expect("static response"),
        Err(_) => StatusCode::NOT_FOUND.into_response(),
    }
}

fn content_type(path: &Path) -> &'static str {
    match path.extension().and_then(|e| e.to_str()) {
        Some("html") => "text/html; charset=utf-8",
        Some("js") | Some("mjs") => "text/javascript",
        Some("css") => "text/css",
        Some("json") => "application/json",
        Some("svg") => "image/svg+xml",
        Some("png") => "image/png",
        Some("wav") => "audio/wav",
        _ => "application/octet-stream",
    }
}

/// Serves until `shutdown` resolves.
pub async fn serve(
    listener: tokio::net::TcpListener,
    labeler: Arc<Mutex<Labeler>>,
    ui_dir: Option<PathBuf>,
    shutdown: impl std::future::Future<Output = ()> + Send + 'static,
) -> std::io::Result<()> {
    axum::serve(listener, router(labeler, ui_dir))
        .with_graceful_shutdown(shutdown)
        .await
}

/// A server running on its own thread; stops on drop.
pub struct BackgroundServer {
    addr: SocketAddr,
    labeler: Arc<Mutex<Labeler>>,
    shutdown: Option<oneshot::Sender<()>>,
    thread: Option<std::thread::JoinHandle<()>>,
}

impl BackgroundServer {
    pub fn start(labeler: Labeler, addr: SocketAddr, ui_dir: Option<PathBuf>) -> std::io::Result<Self> {
        let listener = std::net::TcpListener::bind(addr)?;
        listener.set_nonblocking(true)?;
        let addr = listener.local_addr()?;
        let labeler = Arc::new(Mutex::new(labeler));
        let shared = labeler.clone();
        let (tx, rx) = oneshot::channel::<()>();
        let thread = std::thread::spawn(move || {
            let rt = tokio::runtime::Builder::new_multi_thread()
                .worker_threads(2)
                .enable_all()
                .build()
                .expect("server runtime");
            rt.block_on(async move {
                let listener = tokio::net::TcpListener::from_std(listener).expect("server listener");
                let _ = serve(listener, shared, ui_dir, async {
                    let _ = rx.await;
                })
                .await;
            });
        });
        Ok(Self {
            addr,
            labeler,
            shutdown: Some(tx),
            thread: Some(thread),
        })
    }

    pub fn addr(&self) -> SocketAddr {
        self.addr
    }

    pub fn base_url(&self) -> String {
        format!("http://{}", self.addr)
    }

    pub fn labeler(&self) -> Arc<Mutex<Labeler>> {
        self.labeler.clone()
    }
}

impl Drop for BackgroundServer {
    fn drop(&mut self) {
        if let Some(tx) = self.shutdown.take() {
            let _ = tx.send(());
        }
        if let Some(t) = self.thread.take() {
            let _ = t.join();
        }
    }
}
