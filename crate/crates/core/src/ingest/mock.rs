//! In-process activity server speaking the listing schema the scraper
//! expects. Used by tests, examples and local dry runs of `escape scrape`.

use std::collections::HashMap;
use std::io::Cursor;
use std::net::SocketAddr;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::{Arc, Mutex};

use axum::body::Body;
use axum::extract::{Path, Query, State};
use axum::http::{header, HeaderMap, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::get;
use axum::{Json, Router};
use chrono::{TimeZone, Utc};
use serde::Deserialize;
use tokio::sync::oneshot;

use super::scrape::Activity;

#[derive(Debug, Clone, Default)]
pub struct MockFixture {
    pub activities: Vec<Activity>,
    /// Extra raw entries appended to the listing; useful for malformed payloads.
    pub raw_extras: Vec<serde_json::Value>,
    pub audio: HashMap<String, Vec<u8>>,
    /// Cookie the server accepts; anything else gets 401.
    pub cookie: String,
    /// Number of initial requests answered with 500.
    pub fail_first: usize,
}

impl MockFixture {
    /// Three activities on two devices, each with a short 16 kHz WAV.
    pub fn three_activities() -> Self {
        let base = Utc.with_ymd_and_hms(2017, 3, 1, 8, 0, 0).unwrap();
        let rows = [
            ("act-001", "G090LF0964", "Kitchen Dot", "SUCCESS", "set timer for five minutes"),
            ("act-002", "G090LF0964", "Kitchen Dot", "SUCCESS", "play the smiths"),
            ("act-003", "B0F00712", "Living Room Echo", "FAULT", "alexa"),
        ];
        let mut fixture = MockFixture {
            cookie: "session-id=mock; ubid-main=123".into(),
            ..Default::default()
        };
        for (i, (id, serial, name, status, text)) in rows.into_iter().enumerate() {
            fixture.activities.push(Activity {
                id: id.into(),
                timestamp: base + chrono::Duration::minutes(17 * i as i64),
                device_serial: serial.into(),
                device_name: name.into(),
                status: status.into(),
                transcript: Some(text.into()),
                has_audio: true,
            });
            fixture.audio.insert(id.into(), tone_wav(220.0 * (i + 1) as f64, 0.4));
        }
        fixture
    }
}

/// 16-bit mono 16 kHz WAV bytes of a sine tone.
pub fn tone_wav(freq: f64, seconds: f64) -> Vec<u8> {
    let spec = hound::WavSpec {
        channels: 1,
        sample_rate: 16_000,
        bits_per_sample: 16,
        sample_format: hound::SampleFormat::Int,
    };
    let mut buf = Vec::new();
    {
        let mut w = hound::WavWriter::new(Cursor::new(&mut buf), spec).expect("in-memory wav");
        let n = (seconds * 16_000.0) as usize;
        for i in 0..n {
            let v = 0.3 * (2.0 * std::f64::consts::PI * freq * i as f64 / 16_000.0).sin();
            w.write_sample((v * 32767.0) as i16).expect("in-memory wav");
        }
        w.finalize().expect("in-memory wav");
    }
    buf
}

struct Shared {
    fixture: Mutex<MockFixture>,
    requests: AtomicUsize,
    log: Mutex<Vec<String>>,
}

/// Handle to a running mock; the server stops when this is dropped.
pub struct MockServer {
    addr: SocketAddr,
    shared: Arc<Shared>,
    shutdown: Option<oneshot::Sender<()>>,
    thread: Option<std::thread::JoinHandle<()>>,
}

#[derive(Deserialize)]
struct ListQuery {
    offset: Option<usize>,
    size: Option<usize>,
}

impl MockServer {
    /// Starts the server on a loopback port in a background thread with its
    /// own runtime, so it can be used from sync and async callers alike.
    pub fn start(fixture: MockFixture) -> std::io::Result<Self> {
        let shared = Arc::new(Shared {
            fixture: Mutex::new(fixture),
            requests: AtomicUsize::new(0),
            log: Mutex::new(Vec::new()),
        });
        let listener = std::net::TcpListener::bind("127.0.0.1:0")?;
        listener.set_nonblocking(true)?;
        let addr = listener.local_addr()?;
        let (tx, rx) = oneshot::channel::<()>();
        let app = Router::new()
            .route("/api/activities", get(list))
            .route("/api/activities/{id}/audio", get(audio))
            .with_state(shared.clone());
        let thread = std::thread::spawn(move || {
            let rt = tokio::runtime::Builder::new_current_thread()
                .enable_all()
                .build()
                .expect("mock runtime");
            rt.block_on(async move {
                let listener = tokio::net::TcpListener::from_std(listener).expect("mock listener");
                let _ = axum::serve(listener, app)
                    .with_graceful_shutdown(async {
                        let _ = rx.await;
                    })
                    .await;
            });
        });
        Ok(Self {
            addr,
            shared,
            shutdown: Some(tx),
            thread: Some(thread),
        })
    }

    pub fn base_url(&self) -> String {
        format!("http://{}", self.addr)
    }

    pub fn request_count(&self) -> usize {
        self.shared.requests.load(Ordering::SeqCst)
    }

    /// `"<path> cookie=<cookie header>"` per request, in arrival order.
    pub fn request_log(&self) -> Vec<String> {
        self.shared.log.lock().unwrap().clone()
    }

    pub fn update(&self, f: impl FnOnce(&mut MockFixture)) {
        f(&mut self.shared.fixture.lock().unwrap());
    }
}

impl Drop for MockServer {
    fn drop(&mut self) {
        if let Some(tx) = self.shutdown.take() {
            let _ = tx.send(());
        }
        if let Some(t) = self.thread.take() {
            let _ = t.join();
        }
    }
}

/// Shared gatekeeping: logging, injected failures and cookie check.
fn admit(shared: &Shared, headers: &HeaderMap, what: String) -> Result<(), Response> {
    let n = shared.requests.fetch_add(1, Ordering::SeqCst);
    let cookie = headers
        .get(header::COOKIE)
        .and_then(|v| v.to_str().ok())
        .unwrap_or("")
        .to_string();
    shared.log.lock().unwrap().push(format!("{what} cookie={cookie}"));
    let fixture = shared.fixture.lock().unwrap();
    if n < fixture.fail_first {
        return Err(StatusCode::INTERNAL_SERVER_ERROR.into_response());
    }
    if cookie != fixture.cookie {
        return Err(StatusCode::UNAUTHORIZED.into_response());
    }
    Ok(())
}

async fn list(
    State(shared): State<Arc<Shared>>,
    headers: HeaderMap,
    Query(q): Query<ListQuery>,
) -> Response {
    let offset = q.offset.unwrap_or(0);
    let size = q.size.unwrap_or(50).max(1);
    if let Err(resp) = admit(&shared, &headers, format!("/api/activities?offset={offset}&size={size}")) {
        return resp;
    }
    let fixture = shared.fixture.lock().unwrap();
    let all: Vec<serde_json::Value> = fixture
        .activities
        .iter()
        .map(|a| serde_json::to_value(a).expect("activity serializes"))
        .chain(fixture.raw_extras.iter().cloned())
        .collect();
    let page: Vec<_> = all.into_iter().skip(offset).take(size).collect();
    Json(serde_json::json!({ "activities": page })).into_response()
}

async fn audio(State(shared): State<Arc<Shared>>, headers: HeaderMap, Path(id): Path<String>) -> Response {
    if let Err(resp) = admit(&shared, &headers, format!("/api/activities/{id}/audio")) {
        return resp;
    }
    let fixture = shared.fixture.lock().unwrap();
    match fixture.audio.get(&id) {
        Some(bytes) => Response::builder()
            .header(header::CONTENT_TYPE, "audio/wav")
            .body(Body::from(bytes.clone()))
            .expect("static response"),
        None => StatusCode::NOT_FOUND.into_response(),
    }
}
