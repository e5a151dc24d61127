//! Speaker classification on similarity features.
//!
//! Rows of the similarity matrix are feature vectors; columns are indexed by
//! clip. Every evaluation repeat drops the columns belonging to its test
//! clips before anything is fitted, so no test clip contributes a feature.

mod cv;
mod pca;
mod ridge;
mod scale;
mod split;

use thiserror::Error;

pub use cv::{
    default_alpha_grid, drop_test_columns, nested_cv_evaluate, select_alpha, train_final_and_classify,
    write_split_csv, BinaryLabels, ClassifyOutcome, CvOptions, EvaluationSummary, FeatureMatrix, SplitReport,
};
pub use pca::{pca, PcaResult};
pub use ridge::{ridge_fit, RidgeFit, RidgeModel, RidgePath};
pub use scale::{standardize_fit, Scaler, STD_FLOOR};
pub use split::{derive_seed, stratified_folds, stratified_split};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LearnError {
    #[error("cannot fit on an empty set of rows")]
    EmptyFitSet,
    #[error("requested {requested} components but at most {max} are available")]
    TooManyComponents { requested: usize, max: usize },
    #[error("labels must contain exactly two classes, found {0}")]
    NotBinary(usize),
    #[error("class {label:?} has {count} members, need at least {needed}")]
    ClassTooSmall { label: String, count: usize, needed: usize },
    #[error("training rows must include both classes")]
    MissingClass,
    #[error("unknown clip id {0:?}")]
    UnknownId(String),
    #[error("alpha grid is empty")]
    EmptyAlphaGrid,
    #[error("regularization strength must be finite and >= 0, got {0}")]
    BadAlpha(f64),
    #[error("test fraction must be in (0, 1), got {0}")]
    BadFraction(f64),
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
}
