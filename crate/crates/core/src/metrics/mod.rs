//! Segment aggregation and ranking, plus every ranking-similarity and
//! separability statistic the evaluation uses.

mod aggregate;
mod auc;
mod correlation;
mod rbo;
mod stability;

use thiserror::Error;

pub use aggregate::{rank_segments, segment_mean_saliency};
pub use auc::{auc_from_scores, ScoredLabel};
pub use correlation::{kendall_tau, kendalls_w, spearman_rho, KendallsW};
pub use rbo::{rbo, rbo_ranked, RboParams, RboVariant};
pub use stability::stability_ratio;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MetricsError {
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("non-finite value at index {0}")]
    NonFiniteValue(usize),
    #[error("input is empty")]
    EmptyInput,
    #[error("lists have different lengths ({left} vs {right})")]
    LengthMismatch { left: usize, right: usize },
    #[error("lists do not contain the same items")]
    LabelSetMismatch,
    #[error("list contains a duplicate item")]
    DuplicateItem,
    #[error("need at least {needed} elements, got {got}")]
    TooFewElements { needed: usize, got: usize },
    #[error("persistence must lie in (0, 1), got {0}")]
    InvalidPersistence(f64),
    #[error("row {row} is not a permutation of 1..={n}")]
    NotAPermutation { row: usize, n: usize },
    #[error("bad rank matrix shape: {0}")]
    ShapeError(String),
    #[error("scores cover only one class; AUC is undefined")]
    SingleClassOnly,
    #[error("input difference is zero")]
    ZeroDenominator,
}
