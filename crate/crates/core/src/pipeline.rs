//! Archive-level steps shared by the CLI and the examples: feature
//! extraction with partial-failure accounting, the similarity matrix,
//! signatures for labeling, and metadata sidecars next to derived files.

use std::collections::BTreeMap;
use std::net::SocketAddr;
use std::path::{Path, PathBuf};

use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::cache::{self, CacheError};
use crate::dsp::{clip_features, DspError, MfccExtractor, MfccMatrix, MfccParams};
use crate::hmm::{similarity_matrix, FitOptions, HmmError, SimilarityMatrix};
use crate::ingest::{Archive, IngestError};
use crate::label::{ClipInfo, LabelSource, LabelStore, DEFAULT_THRESHOLD};
use crate::learn::{default_alpha_grid, CvOptions};
use crate::stats::{fit_gaussian, GaussianSignature, StatsError, DEFAULT_EPSILON};

pub const DERIVED_DIR: &str = "derived";
pub const FEATURES_FILE: &str = "features.bin";
pub const SIMILARITY_FILE: &str = "similarity.bin";
pub const EVALUATION_FILE: &str = "evaluation.csv";
pub const SUMMARY_FILE: &str = "evaluation.json";
pub const CLASSIFIED_FILE: &str = "classified.jsonl";
pub const CLASSIFIER_FILE: &str = "classifier.json";

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error(transparent)]
    Ingest(#[from] IngestError),
    #[error(transparent)]
    Dsp(#[from] DspError),
    #[error(transparent)]
    Hmm(#[from] HmmError),
    #[error(transparent)]
    Stats(#[from] StatsError),
    #[error("{path}: {source}")]
    Cache {
        path: PathBuf,
        #[source]
        source: CacheError,
    },
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("no features at {0}; run `features` first")]
    NoFeatures(PathBuf),
    #[error("feature extraction failed for every clip")]
    AllFailed,
    #[error("invalid configuration: {0}")]
    Config(String),
}

/// Everything that determines a run's outputs. Written in full into every
/// metadata sidecar.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub archive: PathBuf,
    pub seed: u64,
    pub mfcc: MfccParams,
    pub hmm: FitOptions,
    pub threshold: f64,
    pub alpha_grid: Vec<f64>,
    pub splits: usize,
    pub test_fraction: f64,
    pub inner_folds: usize,
    pub bind: SocketAddr,
}

impl RunConfig {
    pub fn new(archive: impl Into<PathBuf>) -> Self {
        Self {
            archive: archive.into(),
            seed: 0,
            mfcc: MfccParams::default(),
            hmm: FitOptions::default(),
            threshold: DEFAULT_THRESHOLD,
            alpha_grid: default_alpha_grid(),
            splits: 100,
            test_fraction: 0.33,
            inner_folds: 3,
            bind: SocketAddr::from(([127, 0, 0, 1], 8750)),
        }
    }

    pub fn validate(&self) -> Result<(), PipelineError> {
        let bad = |m: &str| Err(PipelineError::Config(m.to_string()));
        if !(self.threshold > 0.0 && self.threshold.is_finite()) {
            return bad("threshold must be positive");
        }
        if self.splits == 0 {
            return bad("splits must be positive");
        }
        if !(self.test_fraction > 0.0 && self.test_fraction < 1.0) {
            return bad("test fraction must be in (0, 1)");
        }
        if self.inner_folds < 2 {
            return bad("inner folds must be at least 2");
        }
        if self.alpha_grid.is_empty() || self.alpha_grid.iter().any(|a| !(*a >= 0.0 && a.is_finite())) {
            return bad("alpha grid must be non-empty, finite and non-negative");
        }
        if self.hmm.n_states == 0 {
            return bad("HMM needs at least one state");
        }
        self.mfcc
            .validate(crate::dsp::EXPECTED_SAMPLE_RATE)
            .map_err(|e| PipelineError::Config(e.to_string()))
    }

    pub fn cv_options(&self) -> CvOptions {
        CvOptions {
            n_repeats: self.splits,
            inner_folds: self.inner_folds,
            test_fraction: self.test_fraction,
            alpha_grid: self.alpha_grid.clone(),
            seed: self.seed,
        }
    }

    pub fn derived_dir(&self) -> PathBuf {
        self.archive.join(DERIVED_DIR)
    }
}

#[derive(Debug, Serialize)]
struct Meta<'a> {
    tool: &'static str,
    version: &'static str,
    command: &'a str,
    config: &'a RunConfig,
}

/// `<artifact>.meta.json`
pub fn meta_path(artifact: &Path) -> PathBuf {
    let mut name = artifact.file_name().unwrap_or_default().to_os_string();
    name.push(".meta.json");
    artifact.with_file_name(name)
}

/// Writes the sidecar for `artifact`. Contains no timestamps, so identical
/// runs leave identical sidecars.
pub fn write_meta(artifact: &Path, command: &str, config: &RunConfig) -> Result<(), PipelineError> {
    let meta = Meta {
        tool: env!("CARGO_PKG_NAME"),
        version: env!("CARGO_PKG_VERSION"),
        command,
        config,
    };
    let path = meta_path(artifact);
    let mut json = serde_json::to_string_pretty(&meta).expect("metadata serializes");
    json.push('\n');
    std::fs::write(&path, json).map_err(|source| PipelineError::Io { path, source })
}

pub fn ensure_dir(dir: &Path) -> Result<(), PipelineError> {
    std::fs::create_dir_all(dir).map_err(|source| PipelineError::Io {
        path: dir.to_path_buf(),
        source,
    })
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ClipFailure {
    pub clip_id: String,
    pub reason: String,
}

#[derive(Debug)]
pub struct FeatureRun {
    /// In archive order.
    pub features: Vec<MfccMatrix>,
    pub failures: Vec<ClipFailure>,
    /// Records with no audio reference.
    pub without_audio: usize,
}

/// MFCCs for every record with audio, in parallel on the current rayon pool.
/// A clip that cannot be read or is too short is reported, not fatal.
pub fn extract_features(archive: &Archive, params: &MfccParams) -> Result<FeatureRun, PipelineError> {
    MfccExtractor::new(params.clone())?;
    let with_audio: Vec<_> = archive.records().iter().filter(|r| r.audio_file.is_some()).collect();
    let without_audio = archive.len() - with_audio.len();
    let results: Vec<Result<MfccMatrix, ClipFailure>> = with_audio
        .par_iter()
        .map_init(
            || MfccExtractor::new(params.clone()).expect("params validated"),
            |extractor, record| {
                let fail = |reason: String| ClipFailure {
                    clip_id: record.id.clone(),
                    reason,
                };
                let clip = archive
                    .load_clip(record)
                    .expect("record has audio")
                    .map_err(|e| fail(e.to_string()))?;
                clip_features(extractor, &clip).map_err(|e| fail(e.to_string()))
            },
        )
        .collect();
    let mut features = Vec::new();
    let mut failures = Vec::new();
    for r in results {
        match r {
            Ok(f) => features.push(f),
            Err(e) => failures.push(e),
        }
    }
    Ok(FeatureRun {
        features,
        failures,
        without_audio,
    })
}

pub fn save_features(path: &Path, features: &[MfccMatrix]) -> Result<(), PipelineError> {
    let entries: Vec<(String, DMatrix<f64>)> = features
        .iter()
        .map(|f| (f.clip_id().to_string(), f.frames().clone()))
        .collect();
    cache::save(path, &entries).map_err(|source| PipelineError::Cache {
        path: path.to_path_buf(),
        source,
    })
}

pub fn load_features(path: &Path) -> Result<Vec<MfccMatrix>, PipelineError> {
    if !path.exists() {
        return Err(PipelineError::NoFeatures(path.to_path_buf()));
    }
    let entries = cache::load(path).map_err(|source| PipelineError::Cache {
        path: path.to_path_buf(),
        source,
    })?;
    entries
        .into_iter()
        .map(|(id, m)| MfccMatrix::new(id, m).map_err(PipelineError::from))
        .collect()
}

/// One entry per row, keyed by clip id.
pub fn save_similarity(path: &Path, sim: &SimilarityMatrix) -> Result<(), PipelineError> {
    let scores = sim.scores();
    let entries: Vec<(String, DMatrix<f64>)> = sim
        .clip_ids()
        .iter()
        .enumerate()
        .map(|(i, id)| (id.clone(), DMatrix::from_fn(1, scores.ncols(), |_, j| scores[(i, j)])))
        .collect();
    cache::save(path, &entries).map_err(|source| PipelineError::Cache {
        path: path.to_path_buf(),
        source,
    })
}

pub fn load_similarity(path: &Path) -> Result<SimilarityMatrix, PipelineError> {
    let corrupt = |m: String| PipelineError::Cache {
        path: path.to_path_buf(),
        source: CacheError::Corrupt(m),
    };
    let entries = cache::load(path).map_err(|source| PipelineError::Cache {
        path: path.to_path_buf(),
        source,
    })?;
    let n = entries.len();
    if entries.iter().any(|(_, row)| row.shape() != (1, n)) {
        return Err(corrupt(format!("expected {n} rows of length {n}")));
    }
    let scores = DMatrix::from_fn(n, n, |i, j| entries[i].1[(0, j)]);
    let ids = entries.into_iter().map(|(id, _)| id).collect();
    SimilarityMatrix::new(ids, scores).map_err(|e| corrupt(e.to_string()))
}

pub fn compute_similarity(features: &[MfccMatrix], config: &RunConfig) -> Result<SimilarityMatrix, PipelineError> {
    Ok(similarity_matrix(features, config.seed, &config.hmm)?)
}

pub fn signatures(features: &[MfccMatrix]) -> Result<BTreeMap<String, GaussianSignature>, PipelineError> {
    features
        .par_iter()
        .map(|f| Ok((f.clip_id().to_string(), fit_gaussian(f, DEFAULT_EPSILON)?)))
        .collect()
}

/// Queue entries for the labeler, for clips that have features.
pub fn clip_infos(archive: &Archive, features: &[MfccMatrix]) -> Vec<ClipInfo> {
    features
        .iter()
        .filter_map(|f| archive.get(f.clip_id()))
        .map(|r| ClipInfo {
            clip_id: r.id.clone(),
            timestamp: r.timestamp_utc,
            transcript: r.transcript.clone(),
            audio_path: archive.audio_path(r),
        })
        .collect()
}

/// Human and propagated labels for clips in `ids`, in `ids` order. Classifier
/// output is never used as training data.
pub fn training_labels(store: &LabelStore, ids: &[String]) -> Vec<(String, String)> {
    ids.iter()
        .filter_map(|id| store.get(id))
        .filter(|r| r.source != LabelSource::Classified)
        .map(|r| (r.clip_id.clone(), r.label.clone()))
        .collect()
}
