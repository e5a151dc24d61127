use std::collections::BTreeMap;
use std::path::PathBuf;

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};

use super::{LabelError, LabelRecord, LabelSource, LabelStore, Provenance};
use crate::stats::{sym_kl, GaussianSignature};

/// Symmetric KL divergence below which a label is propagated.
pub const DEFAULT_THRESHOLD: f64 = 50.0;

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct PropagateOutcome {
    pub newly_propagated: usize,
    /// Unlabeled clips no manual clip is close enough to, in id order.
    pub queued_ids: Vec<String>,
}

/// One propagation pass over every clip without a label.
///
/// Each unlabeled clip is compared with every manually labeled clip that has
/// a signature. If the smallest divergence is `< threshold` the clip takes
/// that clip's label (ties go to the smaller clip id); otherwise it is queued.
pub fn propagate(
    signatures: &BTreeMap<String, GaussianSignature>,
    store: &mut LabelStore,
    threshold: f64,
) -> Result<PropagateOutcome, LabelError> {
    let references: Vec<(&GaussianSignature, String)> = store
        .manual()
        .filter_map(|r| signatures.get(&r.clip_id).map(|s| (s, r.label.clone())))
        .collect();
    if references.is_empty() {
        return Err(LabelError::BootstrapRequired);
    }

    let mut outcome = PropagateOutcome::default();
    for (clip_id, sig) in signatures {
        if store.get(clip_id).is_some() {
            continue;
        }
        let mut best: Option<(f64, &GaussianSignature, &String)> = None;
        for (reference, label) in &references {
            let d = sym_kl(sig, reference)?;
            if best.is_none_or(|(b, _, _)| d < b) {
                best = Some((d, reference, label));
            }
        }
        let (divergence, nearest, label) = best.expect("references is non-empty");
        if divergence < threshold {
            store.put(LabelRecord {
                clip_id: clip_id.clone(),
                label: label.clone(),
                source: LabelSource::Propagated,
                labeled_at: Some(Utc::now()),
                provenance: Some(Provenance {
                    nearest_clip: nearest.clip_id().to_string(),
                    divergence,
                }),
            })?;
            outcome.newly_propagated += 1;
        } else {
            outcome.queued_ids.push(clip_id.clone());
        }
    }
    Ok(outcome)
}

/// What the labeling UI shows for a clip.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ClipInfo {
    pub clip_id: String,
    pub timestamp: DateTime<Utc>,
    pub transcript: Option<String>,
    #[serde(skip)]
    pub audio_path: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SubmitOutcome {
    pub accepted: bool,
    pub auto_propagated: usize,
    pub remaining: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LabelStats {
    pub manual: usize,
    pub propagated: usize,
    pub classified: usize,
    pub queued: usize,
    pub total: usize,
}

/// Human-in-the-loop labeling session over a fixed set of clips.
pub struct Labeler {
    clips: BTreeMap<String, ClipInfo>,
    signatures: BTreeMap<String, GaussianSignature>,
    store: LabelStore,
    threshold: f64,
    label_set: Vec<String>,
    /// Ascending (timestamp, id).
    queue: Vec<String>,
}

impl Labeler {
    /// Only clips with both metadata and a signature take part.
    pub fn new(
        clips: Vec<ClipInfo>,
        signatures: Vec<GaussianSignature>,
        store: LabelStore,
        threshold: f64,
        label_set: Vec<String>,
    ) -> Result<Self, LabelError> {
        let mut signatures: BTreeMap<String, GaussianSignature> =
            signatures.into_iter().map(|s| (s.clip_id().to_string(), s)).collect();
        let clips: BTreeMap<String, ClipInfo> = clips
            .into_iter()
            .filter(|c| signatures.contains_key(&c.clip_id))
            .map(|c| (c.clip_id.clone(), c))
            .collect();
        signatures.retain(|id, _| clips.contains_key(id));
        let mut labeler = Self {
            clips,
            signatures,
            store,
            threshold,
            label_set,
            queue: Vec::new(),
        };
        labeler.refresh()?;
        Ok(labeler)
    }

    /// Runs propagation and rebuilds the queue. Before the first manual label
    /// every unlabeled clip is queued.
    pub fn refresh(&mut self) -> Result<PropagateOutcome, LabelError> {
        let outcome = match propagate(&self.signatures, &mut self.store, self.threshold) {
            Ok(o) => o,
            Err(LabelError::BootstrapRequired) => PropagateOutcome {
                newly_propagated: 0,
                queued_ids: self
                    .clips
                    .keys()
                    .filter(|id| self.store.get(id).is_none())
                    .cloned()
                    .collect(),
            },
            Err(e) => return Err(e),
        };
        let mut queue = outcome.queued_ids.clone();
        queue.sort_by(|a, b| {
            let (ca, cb) = (&self.clips[a], &self.clips[b]);
            ca.timestamp.cmp(&cb.timestamp).then_with(|| a.cmp(b))
        });
        self.queue = queue;
        Ok(outcome)
    }

    pub fn next_queued(&self) -> Option<&ClipInfo> {
        self.queue.first().map(|id| &self.clips[id])
    }

    pub fn queue(&self) -> &[String] {
        &self.queue
    }

    pub fn clip(&self, clip_id: &str) -> Option<&ClipInfo> {
        self.clips.get(clip_id)
    }

    pub fn label_set(&self) -> &[String] {
        &self.label_set
    }

    pub fn store(&self) -> &LabelStore {
        &self.store
    }

    /// Records a manual label, re-propagates and reports how much of the
    /// queue that cleared.
    pub fn submit_label(&mut self, clip_id: &str, label: &str) -> Result<SubmitOutcome, LabelError> {
        if !self.clips.contains_key(clip_id) {
            return Err(LabelError::UnknownClip(clip_id.to_string()));
        }
        if !self.label_set.iter().any(|l| l == label) {
            return Err(LabelError::UnknownLabel {
                label: label.to_string(),
                allowed: self.label_set.clone(),
            });
        }
        self.store.put(LabelRecord::manual(clip_id, label))?;
        let outcome = self.refresh()?;
        Ok(SubmitOutcome {
            accepted: true,
            auto_propagated: outcome.newly_propagated,
            remaining: self.queue.len(),
        })
    }

    pub fn stats(&self) -> LabelStats {
        let counts = self.store.counts();
        LabelStats {
            manual: counts.manual,
            propagated: counts.propagated,
            classified: counts.classified,
            queued: self.queue.len(),
            total: self.clips.len(),
        }
    }
}
