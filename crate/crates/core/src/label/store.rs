use std::collections::BTreeMap;
use std::fs::{File, OpenOptions};
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};

use super::LabelError;

pub const LABELS_FILE: &str = "labels.jsonl";

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LabelSource {
    Manual,
    Propagated,
    Classified,
}

/// Nearest manually labeled clip behind a propagated label.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub nearest_clip: String,
    pub divergence: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabelRecord {
    pub clip_id: String,
    pub label: String,
    pub source: LabelSource,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub labeled_at: Option<DateTime<Utc>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub provenance: Option<Provenance>,
}

impl LabelRecord {
    pub fn manual(clip_id: impl Into<String>, label: impl Into<String>) -> Self {
        Self {
            clip_id: clip_id.into(),
            label: label.into(),
            source: LabelSource::Manual,
            labeled_at: Some(Utc::now()),
            provenance: None,
        }
    }
}

/// Clip id to label, backed by an append-only JSON-lines file where the last
/// line for a clip wins. Manual labels are never replaced by machine labels.
#[derive(Debug, Default)]
pub struct LabelStore {
    path: Option<PathBuf>,
    records: BTreeMap<String, LabelRecord>,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct SourceCounts {
    pub manual: usize,
    pub propagated: usize,
    pub classified: usize,
}

impl LabelStore {
    pub fn in_memory() -> Self {
        Self::default()
    }

    /// Loads `path` if it exists; later writes append to it.
    pub fn open(path: impl Into<PathBuf>) -> Result<Self, LabelError> {
        let path = path.into();
        let mut store = Self {
            path: Some(path.clone()),
            records: BTreeMap::new(),
        };
        if path.exists() {
            store.load_lines(&path)?;
        }
        Ok(store)
    }

    /// `labels.jsonl` inside an archive root.
    pub fn open_in(archive_root: &Path) -> Result<Self, LabelError> {
        Self::open(archive_root.join(LABELS_FILE))
    }

    /// Reads records from another file without attaching to it, applying the
    /// usual precedence. Used to lay classifier output over a store.
    pub fn overlay(&mut self, path: &Path) -> Result<(), LabelError> {
        let attached = self.path.take();
        let result = self.load_lines(path);
        self.path = attached;
        result
    }

    fn load_lines(&mut self, path: &Path) -> Result<(), LabelError> {
        let file = File::open(path).map_err(|e| LabelError::io(path, e))?;
        for (n, line) in BufReader::new(file).lines().enumerate() {
            let line = line.map_err(|e| LabelError::io(path, e))?;
            if line.trim().is_empty() {
                continue;
            }
            let record: LabelRecord = serde_json::from_str(&line).map_err(|e| LabelError::Malformed {
                path: path.to_path_buf(),
                line: n + 1,
                message: e.to_string(),
            })?;
            if self.allowed(&record) {
                self.records.insert(record.clip_id.clone(), record);
            }
        }
        Ok(())
    }

    fn allowed(&self, record: &LabelRecord) -> bool {
        match self.records.get(&record.clip_id) {
            Some(existing) => record.source == LabelSource::Manual || existing.source != LabelSource::Manual,
            None => true,
        }
    }

    /// Stores `record` unless it is a machine label for a manually labeled
    /// clip. Returns whether it was stored.
    pub fn put(&mut self, record: LabelRecord) -> Result<bool, LabelError> {
        if !self.allowed(&record) {
            return Ok(false);
        }
        if let Some(path) = &self.path {
            let mut line = serde_json::to_string(&record).expect("label serializes");
            line.push('\n');
            let mut f = OpenOptions::new()
                .create(true)
                .append(true)
                .open(path)
                .map_err(|e| LabelError::io(path, e))?;
            f.write_all(line.as_bytes()).map_err(|e| LabelError::io(path, e))?;
        }
        self.records.insert(record.clip_id.clone(), record);
        Ok(true)
    }

    pub fn get(&self, clip_id: &str) -> Option<&LabelRecord> {
        self.records.get(clip_id)
    }

    pub fn iter(&self) -> impl Iterator<Item = &LabelRecord> {
        self.records.values()
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn manual(&self) -> impl Iterator<Item = &LabelRecord> {
        self.iter().filter(|r| r.source == LabelSource::Manual)
    }

    pub fn counts(&self) -> SourceCounts {
        let mut c = SourceCounts::default();
        for r in self.iter() {
            match r.source {
                LabelSource::Manual => c.manual += 1,
                LabelSource::Propagated => c.propagated += 1,
                LabelSource::Classified => c.classified += 1,
            }
        }
        c
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn machine(id: &str, label: &str, source: LabelSource) -> LabelRecord {
        LabelRecord {
            clip_id: id.into(),
            label: label.into(),
            source,
            labeled_at: None,
            provenance: None,
        }
    }

    #[test]
    fn manual_wins() {
        let mut s = LabelStore::in_memory();
        assert!(s.put(LabelRecord::manual("a", "Male")).unwrap());
        assert!(!s.put(machine("a", "Female", LabelSource::Propagated)).unwrap());
        assert!(!s.put(machine("a", "Female", LabelSource::Classified)).unwrap());
        assert_eq!(s.get("a").unwrap().label, "Male");
        assert!(s.put(LabelRecord::manual("a", "Female")).unwrap());
        assert_eq!(s.get("a").unwrap().label, "Female");
    }

    #[test]
    fn last_line_wins_on_reload() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join(LABELS_FILE);
        {
            let mut s = LabelStore::open(&path).unwrap();
            s.put(machine("b", "Male", LabelSource::Propagated)).unwrap();
            s.put(machine("b", "Female", LabelSource::Propagated)).unwrap();
            s.put(LabelRecord::manual("c", "Male")).unwrap();
        }
        let s = LabelStore::open(&path).unwrap();
        assert_eq!(s.get("b").unwrap().label, "Female");
        assert_eq!(
            s.counts(),
            SourceCounts {
                manual: 1,
                propagated: 1,
                classified: 0
            }
        );
    }

    #[test]
    fn overlay_respects_manual() {
        let dir = tempfile::tempdir().unwrap();
        let extra = dir.path().join("classified.jsonl");
        let lines = [
            serde_json::to_string(&machine("a", "Female", LabelSource::Classified)).unwrap(),
            serde_json::to_string(&machine("z", "Female", LabelSource::Classified)).unwrap(),
        ];
        std::fs::write(&extra, lines.join("\n")).unwrap();
        let mut s = LabelStore::in_memory();
        s.put(LabelRecord::manual("a", "Male")).unwrap();
        s.overlay(&extra).unwrap();
        assert_eq!(s.get("a").unwrap().label, "Male");
        assert_eq!(s.get("z").unwrap().source, LabelSource::Classified);
    }

    #[test]
    fn malformed_line() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join(LABELS_FILE);
        std::fs::write(&path, "{\"clip_id\":\"a\"}\n").unwrap();
        assert!(matches!(LabelStore::open(&path), Err(LabelError::Malformed { line: 1, .. })));
    }
}
