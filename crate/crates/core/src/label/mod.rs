//! Speaker labels and KL-divergence label bootstrapping.
//!
//! A clip with no label inherits the label of its nearest manually labeled
//! clip when their symmetric KL divergence is strictly below the threshold;
//! otherwise it waits in a queue for a human. Propagation only ever starts
//! from manual labels, never from other propagated ones.

mod propagate;
pub mod server;
mod store;

use std::path::PathBuf;

use thiserror::Error;

pub use propagate::{propagate, ClipInfo, LabelStats, Labeler, PropagateOutcome, SubmitOutcome, DEFAULT_THRESHOLD};
pub use store::{LabelRecord, LabelSource, LabelStore, Provenance, SourceCounts, LABELS_FILE};

use crate::stats::StatsError;

/// Speaker labels used when none are configured.
pub fn default_label_set() -> Vec<String> {
    vec!["Male".into(), "Female".into()]
}

#[derive(Debug, Error)]
pub enum LabelError {
    #[error("no manual labels yet: label at least one clip by hand to bootstrap propagation")]
    BootstrapRequired,
    #[error("unknown clip {0:?}")]
    UnknownClip(String),
    #[error("unknown label {label:?}; expected one of {allowed:?}")]
    UnknownLabel { label: String, allowed: Vec<String> },
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}:{line}: malformed label record: {message}")]
    Malformed { path: PathBuf, line: usize, message: String },
    #[error(transparent)]
    Stats(#[from] StatsError),
}

impl LabelError {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Self::Io {
            path: path.into(),
            source,
        }
    }
}
