//! Cookie-session client that pages through an activity listing and mirrors
//! it into an [`Archive`].
//!
//! Endpoint paths are templates with `{offset}`, `{size}` and `{id}`
//! placeholders. The listing payload is this crate's own schema (see
//! [`ActivityPage`]); it is what the bundled mock server speaks.

use std::time::Duration;

use chrono::{DateTime, Utc};
use futures::stream::{self, StreamExt, TryStreamExt};
use percent_encoding::{utf8_percent_encode, NON_ALPHANUMERIC};
use reqwest::header::{HeaderMap, HeaderValue, COOKIE};
use reqwest::{StatusCode, Url};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::{Archive, IngestError, InteractionRecord};

#[derive(Debug, Error)]
pub enum ScrapeError {
    #[error("cookie must not be empty")]
    EmptyCookie,
    #[error("invalid base url {url:?}: {message}")]
    BadUrl { url: String, message: String },
    #[error("authentication failed (HTTP {status}) at {url}: the session cookie has probably expired, copy a fresh one from a signed-in browser")]
    Auth { status: u16, url: String },
    #[error("HTTP {status} from {url}")]
    Http { status: u16, url: String },
    #[error("request to {url} failed after {attempts} attempts: {message}")]
    Network {
        url: String,
        attempts: u32,
        message: String,
    },
    #[error("listing page at offset {offset} is not valid JSON: {message}")]
    BadPage { offset: usize, message: String },
    #[error(transparent)]
    Archive(#[from] IngestError),
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ScrapeConfig {
    pub base_url: String,
    /// Sent verbatim as the `Cookie` header.
    pub cookie: String,
    pub page_size: usize,
    /// Listing path template, e.g. `/api/activities?offset={offset}&size={size}`.
    pub list_template: String,
    /// Audio path template, e.g. `/api/activities/{id}/audio`.
    pub audio_template: String,
    pub max_retries: u32,
    /// First retry delay; doubles on every further attempt.
    pub backoff_ms: u64,
    /// Concurrent audio downloads.
    pub jobs: usize,
    pub timeout_ms: u64,
}

impl ScrapeConfig {
    pub fn new(base_url: impl Into<String>, cookie: impl Into<String>) -> Self {
        Self {
            base_url: base_url.into(),
            cookie: cookie.into(),
            page_size: 50,
            list_template: "/api/activities?offset={offset}&size={size}".into(),
            audio_template: "/api/activities/{id}/audio".into(),
            max_retries: 3,
            backoff_ms: 200,
            jobs: 4,
            timeout_ms: 30_000,
        }
    }
}

/// One listing entry as served by the activity endpoint.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Activity {
    pub id: String,
    pub timestamp: DateTime<Utc>,
    pub device_serial: String,
    pub device_name: String,
    pub status: String,
    #[serde(default)]
    pub transcript: Option<String>,
    #[serde(default)]
    pub has_audio: bool,
}

/// A listing page. Entries are kept as raw JSON so one bad entry does not
/// sink the page.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct ActivityPage {
    pub activities: Vec<serde_json::Value>,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct ScrapeOutcome {
    pub new_records: usize,
    pub audio_files: usize,
    pub already_present: usize,
    pub malformed: usize,
    pub pages: usize,
}

struct Client {
    http: reqwest::Client,
    base: Url,
    max_retries: u32,
    backoff: Duration,
}

impl Client {
    fn new(config: &ScrapeConfig) -> Result<Self, ScrapeError> {
        if config.cookie.trim().is_empty() {
            return Err(ScrapeError::EmptyCookie);
        }
        let base = Url::parse(&config.base_url).map_err(|e| ScrapeError::BadUrl {
            url: config.base_url.clone(),
            message: e.to_string(),
        })?;
        if base.cannot_be_a_base() {
            return Err(ScrapeError::BadUrl {
                url: config.base_url.clone(),
                message: "not a hierarchical url".into(),
            });
        }
        let mut cookie = HeaderValue::from_str(config.cookie.trim_end_matches(['\r', '\n']))
            .map_err(|_| ScrapeError::EmptyCookie)?;
        cookie.set_sensitive(true);
        let mut headers = HeaderMap::new();
        headers.insert(COOKIE, cookie);
        let http = reqwest::Client::builder()
            .default_headers(headers)
            .timeout(Duration::from_millis(config.timeout_ms))
            .build()
            .map_err(|e| ScrapeError::BadUrl {
                url: config.base_url.clone(),
                message: e.to_string(),
            })?;
        Ok(Self {
            http,
            base,
            max_retries: config.max_retries,
            backoff: Duration::from_millis(config.backoff_ms),
        })
    }

    fn url(&self, path: &str) -> Result<Url, ScrapeError> {
        self.base.join(path).map_err(|e| ScrapeError::BadUrl {
            url: format!("{}{}", self.base, path),
            message: e.to_string(),
        })
    }

    /// GET with bounded exponential backoff on transport errors, 5xx and 429.
    async fn get(&self, url: &Url) -> Result<Vec<u8>, ScrapeError> {
        let mut attempt = 0u32;
        loop {
            attempt += 1;
            let failure = match self.http.get(url.clone()).send().await {
                Ok(resp) => {
                    let status = resp.status();
                    if status == StatusCode::UNAUTHORIZED || status == StatusCode::FORBIDDEN {
                        return Err(ScrapeError::Auth {
                            status: status.as_u16(),
                            url: url.to_string(),
                        });
                    }
                    if status.is_success() {
                        match resp.bytes().await {
                            Ok(b) => return Ok(b.to_vec()),
                            Err(e) => e.to_string(),
                        }
                    } else if status.is_server_error() || status == StatusCode::TOO_MANY_REQUESTS {
                        format!("HTTP {status}")
                    } else {
                        return Err(ScrapeError::Http {
                            status: status.as_u16(),
                            url: url.to_string(),
                        });
                    }
                }
                Err(e) => e.to_string(),
            };
            if attempt > self.max_retries {
                return Err(ScrapeError::Network {
                    url: url.to_string(),
                    attempts: attempt,
                    message: failure,
                });
            }
            let delay = self.backoff * 2u32.saturating_pow(attempt - 1);
            log::warn!("GET {url} failed ({failure}); retry {attempt} in {delay:?}");
            tokio::time::sleep(delay).await;
        }
    }
}

fn fill(template: &str, offset: usize, size: usize, id: &str) -> String {
    template
        .replace("{offset}", &offset.to_string())
        .replace("{size}", &size.to_string())
        .replace("{id}", &utf8_percent_encode(id, NON_ALPHANUMERIC).to_string())
}

/// Pages through the listing until an empty page, adding every activity not
/// yet in `archive`. Audio for a page is downloaded (up to `jobs` at a time)
/// before that page's records are appended, in listing order, so a record
/// never points at missing audio and reruns are idempotent.
pub async fn scrape(config: &ScrapeConfig, archive: &mut Archive) -> Result<ScrapeOutcome, ScrapeError> {
    let client = Client::new(config)?;
    let page_size = config.page_size.max(1);
    let mut outcome = ScrapeOutcome::default();
    let mut offset = 0usize;

    loop {
        let url = client.url(&fill(&config.list_template, offset, page_size, ""))?;
        let body = client.get(&url).await?;
        let page: ActivityPage = serde_json::from_slice(&body).map_err(|e| ScrapeError::BadPage {
            offset,
            message: e.to_string(),
        })?;
        if page.activities.is_empty() {
            break;
        }
        outcome.pages += 1;
        let raw_count = page.activities.len();

        let mut fresh = Vec::new();
        for raw in page.activities {
            match serde_json::from_value::<Activity>(raw.clone()) {
                Ok(a) if a.id.is_empty() => {
                    log::warn!("skipping activity with empty id at offset {offset}");
                    outcome.malformed += 1;
                }
                Ok(a) if archive.contains(&a.id) || fresh.iter().any(|f: &Activity| f.id == a.id) => {
                    outcome.already_present += 1;
                }
                Ok(a) => fresh.push(a),
                Err(e) => {
                    log::warn!("skipping malformed activity at offset {offset}: {e}: {raw}");
                    outcome.malformed += 1;
                }
            }
        }

        let downloads: Vec<Option<Vec<u8>>> = stream::iter(fresh.iter())
            .map(|a| {
                let client = &client;
                async move {
                    if !a.has_audio {
                        return Ok(None);
                    }
                    let url = client.url(&fill(&config.audio_template, 0, 0, &a.id))?;
                    client.get(&url).await.map(Some)
                }
            })
            .buffered(config.jobs.max(1))
            .try_collect()
            .await?;

        for (activity, audio) in fresh.into_iter().zip(downloads) {
            let audio_file = match audio {
                Some(bytes) => {
                    outcome.audio_files += 1;
                    Some(archive.store_audio(&activity.id, &bytes)?)
                }
                None => None,
            };
            archive.append(InteractionRecord {
                id: activity.id,
                timestamp_utc: activity.timestamp,
                device_serial: activity.device_serial,
                device_name: activity.device_name,
                status: activity.status,
                transcript: activity.transcript,
                audio_file,
            })?;
            outcome.new_records += 1;
        }
        offset += raw_count;
    }
    Ok(outcome)
}
