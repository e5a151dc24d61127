use std::collections::HashMap;
use std::fs::{self, File, OpenOptions};
use std::io::{BufRead, BufReader, Write};
use std::path::{Component, Path, PathBuf};

use chrono::{DateTime, Utc};
use percent_encoding::{utf8_percent_encode, AsciiSet, NON_ALPHANUMERIC};
use serde::{Deserialize, Serialize};

use super::{read_wav, AudioClip, IngestError};

pub const RECORDS_FILE: &str = "records.jsonl";
pub const AUDIO_DIR: &str = "audio";

const FILE_SAFE: &AsciiSet = &NON_ALPHANUMERIC.remove(b'-').remove(b'_').remove(b'.');

/// One interaction with the assistant.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct InteractionRecord {
    pub id: String,
    pub timestamp_utc: DateTime<Utc>,
    pub device_serial: String,
    pub device_name: String,
    pub status: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub transcript: Option<String>,
    /// Path relative to the archive root, always under `audio/`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub audio_file: Option<String>,
}

/// File name used for a clip's audio: the id percent-encoded down to
/// `[A-Za-z0-9._-]`, plus `.wav`.
pub fn audio_file_name(id: &str) -> String {
    format!("{}.wav", utf8_percent_encode(id, FILE_SAFE))
}

#[derive(Debug)]
pub struct Archive {
    root: PathBuf,
    records: Vec<InteractionRecord>,
    index: HashMap<String, usize>,
}

/// Opens an existing archive, validating every line of `records.jsonl`.
pub fn open_archive(path: impl AsRef<Path>) -> Result<Archive, IngestError> {
    let root = path.as_ref().to_path_buf();
    let records_path = root.join(RECORDS_FILE);
    if !records_path.is_file() {
        return Err(IngestError::MissingRecords(records_path));
    }
    let file = File::open(&records_path).map_err(|e| IngestError::io(&records_path, e))?;
    let mut archive = Archive {
        root,
        records: Vec::new(),
        index: HashMap::new(),
    };
    for (n, line) in BufReader::new(file).lines().enumerate() {
        let line_no = n + 1;
        let line = line.map_err(|e| IngestError::io(&records_path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let record: InteractionRecord =
            serde_json::from_str(&line).map_err(|e| IngestError::MalformedRecord {
                path: records_path.clone(),
                line: line_no,
                message: e.to_string(),
            })?;
        if record.id.is_empty() {
            return Err(IngestError::MalformedRecord {
                path: records_path.clone(),
                line: line_no,
                message: "empty id".into(),
            });
        }
        if archive.index.contains_key(&record.id) {
            return Err(IngestError::DuplicateId {
                path: records_path.clone(),
                line: line_no,
                id: record.id,
            });
        }
        archive.index.insert(record.id.clone(), archive.records.len());
        archive.records.push(record);
    }
    Ok(archive)
}

impl Archive {
    /// Creates the directory layout if missing and opens the archive.
    pub fn create(path: impl AsRef<Path>) -> Result<Archive, IngestError> {
        let root = path.as_ref();
        let audio = root.join(AUDIO_DIR);
        fs::create_dir_all(&audio).map_err(|e| IngestError::io(&audio, e))?;
        let records = root.join(RECORDS_FILE);
        if !records.exists() {
            File::create(&records).map_err(|e| IngestError::io(&records, e))?;
        }
        open_archive(root)
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn audio_dir(&self) -> PathBuf {
        self.root.join(AUDIO_DIR)
    }

    pub fn records_path(&self) -> PathBuf {
        self.root.join(RECORDS_FILE)
    }

    pub fn records(&self) -> &[InteractionRecord] {
        &self.records
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn contains(&self, id: &str) -> bool {
        self.index.contains_key(id)
    }

    pub fn get(&self, id: &str) -> Option<&InteractionRecord> {
        self.index.get(id).map(|&i| &self.records[i])
    }

    /// Absolute audio path for a record, if it names a file that exists under
    /// the audio directory.
    pub fn audio_path(&self, record: &InteractionRecord) -> Option<PathBuf> {
        let rel = Path::new(record.audio_file.as_deref()?);
        let mut parts = rel.components();
        if parts.next() != Some(Component::Normal(AUDIO_DIR.as_ref())) {
            return None;
        }
        if !parts.all(|c| matches!(c, Component::Normal(_))) {
            return None;
        }
        let path = self.root.join(rel);
        path.is_file().then_some(path)
    }

    /// Reads a record's audio; the clip id is the record id.
    pub fn load_clip(&self, record: &InteractionRecord) -> Option<Result<AudioClip, IngestError>> {
        let path = self.audio_path(record)?;
        Some(read_wav(&path).map(|mut clip| {
            clip.id = record.id.clone();
            clip
        }))
    }

    /// Relative path a record's audio should be stored at.
    pub fn audio_rel_path(id: &str) -> String {
        format!("{AUDIO_DIR}/{}", audio_file_name(id))
    }

    /// Writes raw audio bytes for `id` atomically; returns the relative path.
    pub fn store_audio(&self, id: &str, bytes: &[u8]) -> Result<String, IngestError> {
        let rel = Self::audio_rel_path(id);
        let dest = self.root.join(&rel);
        let tmp = dest.with_extension("wav.part");
        fs::write(&tmp, bytes).map_err(|e| IngestError::io(&tmp, e))?;
        fs::rename(&tmp, &dest).map_err(|e| IngestError::io(&dest, e))?;
        Ok(rel)
    }

    /// Appends a new record. Duplicates are rejected.
    pub fn append(&mut self, record: InteractionRecord) -> Result<(), IngestError> {
        let path = self.records_path();
        if self.contains(&record.id) {
            return Err(IngestError::DuplicateId {
                path,
                line: self.records.len() + 1,
                id: record.id,
            });
        }
        let mut line = serde_json::to_string(&record).expect("record serializes");
        line.push('\n');
        let mut file = OpenOptions::new()
            .append(true)
            .open(&path)
            .map_err(|e| IngestError::io(&path, e))?;
        file.write_all(line.as_bytes())
            .map_err(|e| IngestError::io(&path, e))?;
        self.index.insert(record.id.clone(), self.records.len());
        self.records.push(record);
        Ok(())
    }
}

/// Writes `records` as a fresh `records.jsonl` under `root`.
pub fn write_records(root: &Path, records: &[InteractionRecord]) -> Result<(), IngestError> {
    let path = root.join(RECORDS_FILE);
    let mut out = String::new();
    for r in records {
        out.push_str(&serde_json::to_string(r).expect("record serializes"));
        out.push('\n');
    }
    fs::write(&path, out).map_err(|e| IngestError::io(&path, e))
}
