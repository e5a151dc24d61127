//! Interaction archives: on-disk layout, WAV audio and the scraping client.
//!
//! An archive is a directory:
//!
//! ```text
//! <root>/records.jsonl     one InteractionRecord per line
//! <root>/audio/<id>.wav    audio as downloaded (16-bit PCM mono expected)
//! <root>/labels.jsonl      speaker labels, see crate::label
//! ```

mod archive;
pub mod mock;
mod scrape;
mod wav;

use std::path::PathBuf;

use thiserror::Error;

pub use archive::{audio_file_name, open_archive, write_records, Archive, InteractionRecord, AUDIO_DIR, RECORDS_FILE};
pub use scrape::{scrape, Activity, ActivityPage, ScrapeConfig, ScrapeError, ScrapeOutcome};
pub use wav::{read_wav, read_wav_bytes, write_wav, AudioClip};

#[derive(Debug, Error)]
pub enum IngestError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("records file not found: {0}")]
    MissingRecords(PathBuf),
    #[error("{path}:{line}: malformed record: {message}")]
    MalformedRecord {
        path: PathBuf,
        line: usize,
        message: String,
    },
    #[error("{path}:{line}: duplicate record id {id:?}")]
    DuplicateId { path: PathBuf, line: usize, id: String },
    #[error("{path}: unsupported channel count {channels} (mono required)")]
    UnsupportedChannels { path: PathBuf, channels: u16 },
    #[error("{path}: unsupported bit depth {bits} (16-bit PCM required)")]
    UnsupportedBitDepth { path: PathBuf, bits: u16 },
    #[error("{path}: unsupported codec (16-bit integer PCM required)")]
    UnsupportedCodec { path: PathBuf },
    #[error("{path}: malformed or truncated WAV: {message}")]
    MalformedWav { path: PathBuf, message: String },
    #[error("{path}: empty audio")]
    EmptyAudio { path: PathBuf },
}

impl IngestError {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Self::Io {
            path: path.into(),
            source,
        }
    }
}
