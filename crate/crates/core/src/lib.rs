//! Toolkit for voice-assistant interaction archives.
//!
//! The crate covers the whole path from a scraped archive of interactions to
//! per-speaker usage statistics:
//!
//! - [`ingest`]: the on-disk archive (`records.jsonl`, `audio/*.wav`), WAV
//!   decoding and a cookie-session scraping client.
//! - [`dsp`]: Mel-frequency cepstral coefficients with wake-word truncation.
//! - [`stats`]: full-covariance Gaussian signatures and (symmetric) KL
//!   divergence between them.
//! - [`label`]: human-in-the-loop label bootstrapping driven by KL divergence,
//!   plus the HTTP labeling API.
//! - [`hmm`]: per-clip Gaussian HMMs and the cross log-likelihood similarity
//!   matrix.
//! - [`learn`]: standardization, PCA, ridge classification and leak-controlled
//!   nested cross-validation.
//! - [`report`]: intent categorization and usage counts.
//! - [`cli`]: the `escape` command line.
//!
//! Runnable walkthroughs of each capability live in the crate's `examples/`
//! directory.

pub mod cache;
pub mod cli;
pub mod dsp;
pub mod hmm;
pub mod ingest;
pub mod label;
pub mod learn;
pub mod pipeline;
pub mod report;
pub mod stats;
pub mod synth;

pub use dsp::{MfccMatrix, MfccParams};
pub use hmm::{HmmModel, SimilarityMatrix};
pub use ingest::{Archive, AudioClip, InteractionRecord};
pub use label::{LabelRecord, LabelSource, LabelStore};
pub use stats::GaussianSignature;

/// Number of cepstral coefficients kept per frame.
pub const N_CEPSTRA: usize = 13;
