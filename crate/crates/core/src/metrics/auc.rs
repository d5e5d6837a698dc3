use serde::{Deserialize, Serialize};

use super::MetricsError;

/// A similarity score paired with whether the prediction changed.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScoredLabel {
    pub score: f64,
    pub class_changed: bool,
}

impl ScoredLabel {
    pub fn new(score: f64, class_changed: bool) -> Self {
        Self {
            score,
            class_changed,
        }
    }
}

/// ROC-AUC of the rule "low score ⇒ class changed".
///
/// Counts pairs (unchanged `u`, changed `c`) with `u > c`, ties counting one
/// half, over `n_unchanged * n_changed`. This is the normalized Mann-Whitney
/// U. Pair counts are kept as integers (in halves), so the result is the
/// exact quotient regardless of evaluation order.
pub fn auc_from_scores(samples: &[ScoredLabel]) -> Result<f64, MetricsError> {
    if let Some(i) = samples.iter().position(|s| !s.score.is_finite()) {
        return Err(MetricsError::NonFiniteValue(i));
    }
    let mut changed: Vec<f64> = samples
        .iter()
        .filter(|s| s.class_changed)
        .map(|s| s.score)
        .collect();
    let n_changed = changed.len();
    let n_unchanged = samples.len() - n_changed;
    if n_changed == 0 || n_unchanged == 0 {
        return Err(MetricsError::SingleClassOnly);
    }
    changed.sort_by(|a, b| a.partial_cmp(b).expect("finite"));

    let twice_wins: u64 = samples
        .iter()
        .filter(|s| !s.class_changed)
        .map(|s| {
            let below = changed.partition_point(|&c| c < s.score);
            let tied = changed[below..].partition_point(|&c| c == s.score);
            2 * below as u64 + tied as u64
        })
        .sum();
    Ok(twice_wins as f64 / (2 * n_unchanged as u64 * n_changed as u64) as f64)
}
