use serde::{Deserialize, Serialize};

use super::EvalRecord;
use crate::metrics::{auc_from_scores, kendalls_w, MetricsError, ScoredLabel};

/// What responsiveness becomes when a cell has only one class.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DegeneratePolicy {
    #[default]
    Missing,
    /// Use chance level, 0.5.
    Half,
}

/// Which per-record similarity score a metric is computed from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Similarity {
    Rbo,
    Tau,
    Rho,
}

impl Similarity {
    pub const ALL: [Similarity; 3] = [Similarity::Rbo, Similarity::Tau, Similarity::Rho];

    pub fn name(self) -> &'static str {
        match self {
            Similarity::Rbo => "rbo",
            Similarity::Tau => "tau",
            Similarity::Rho => "rho",
        }
    }

    pub fn score(self, r: &EvalRecord) -> f64 {
        match self {
            Similarity::Rbo => r.rbo,
            Similarity::Tau => r.tau,
            Similarity::Rho => r.rho,
        }
    }
}

/// Median with the even-count rule "mean of the two middle values".
pub fn median(values: &[f64]) -> Option<f64> {
    if values.is_empty() {
        return None;
    }
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let mid = v.len() / 2;
    Some(if v.len().is_multiple_of(2) {
        (v[mid - 1] + v[mid]) / 2.0
    } else {
        v[mid]
    })
}

/// Median similarity over records whose predicted class did not change.
pub fn consistency(records: &[EvalRecord], by: Similarity) -> Option<f64> {
    let unchanged: Vec<f64> = records
        .iter()
        .filter(|r| !r.class_changed)
        .map(|r| by.score(r))
        .collect();
    median(&unchanged)
}

/// AUC of "low similarity predicts a class change". `None` means the cell
/// had a single class and the policy left it missing.
pub fn responsiveness(
    records: &[EvalRecord],
    by: Similarity,
    policy: DegeneratePolicy,
) -> Result<Option<f64>, MetricsError> {
    let samples: Vec<ScoredLabel> = records
        .iter()
        .map(|r| ScoredLabel::new(by.score(r), r.class_changed))
        .collect();
    match auc_from_scores(&samples) {
        Ok(auc) => Ok(Some(auc)),
        Err(MetricsError::SingleClassOnly) | Err(MetricsError::EmptyInput) => Ok(match policy {
            DegeneratePolicy::Missing => None,
            DegeneratePolicy::Half => Some(0.5),
        }),
        Err(e) => Err(e),
    }
}

/// Population variance; 0 for fewer than two values.
pub fn variance(values: &[f64]) -> f64 {
    if values.len() < 2 {
        return 0.0;
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n
}

/// Consistency, responsiveness and their product for one (CAM, spec) cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellResult {
    pub cam_method: String,
    pub spec: String,
    pub consistency: Option<f64>,
    pub responsiveness: Option<f64>,
    pub rm: Option<f64>,
    pub n_unchanged: usize,
    pub n_changed: usize,
    /// Variance of per-image RBO over all records of the cell.
    pub rm_variance: f64,
    /// Robustness computed with Kendall's tau in place of RBO.
    pub rm_tau: Option<f64>,
    /// Robustness computed with Spearman's rho in place of RBO.
    pub rm_rho: Option<f64>,
    pub stability_median: Option<f64>,
    /// Only one class present, so the degenerate policy decided responsiveness.
    pub single_class: bool,
    pub warnings: Vec<String>,
}

impl CellResult {
    pub fn rm_by(&self, by: Similarity) -> Option<f64> {
        match by {
            Similarity::Rbo => self.rm,
            Similarity::Tau => self.rm_tau,
            Similarity::Rho => self.rm_rho,
        }
    }
}

fn product(a: Option<f64>, b: Option<f64>) -> Option<f64> {
    Some(a? * b?)
}

/// Builds the cell for `records`, which must share one CAM and spec.
pub fn robustness_metric(
    records: &[EvalRecord],
    policy: DegeneratePolicy,
) -> Result<CellResult, MetricsError> {
    let first = records.first().ok_or(MetricsError::EmptyInput)?;
    let n_changed = records.iter().filter(|r| r.class_changed).count();
    let n_unchanged = records.len() - n_changed;
    let single_class = n_changed == 0 || n_unchanged == 0;
    let mut warnings = Vec::new();

    let consistency_rbo = consistency(records, Similarity::Rbo);
    let responsiveness_rbo = responsiveness(records, Similarity::Rbo, policy)?;
    if consistency_rbo.is_none() {
        warnings.push("every perturbation changed the class; consistency is missing".to_owned());
    }
    if single_class {
        let outcome = match policy {
            DegeneratePolicy::Missing => "responsiveness is missing",
            DegeneratePolicy::Half => "responsiveness set to 0.5 by policy",
        };
        let which = if n_changed == 0 { "no" } else { "every" };
        warnings.push(format!("{which} perturbation changed the class; {outcome}"));
    }
    let degenerate = records.iter().filter(|r| r.degenerate_cam).count();
    if degenerate > 0 {
        warnings.push(format!("{degenerate} record(s) had a constant CAM"));
    }

    let rm_with = |by: Similarity| -> Result<Option<f64>, MetricsError> {
        Ok(product(consistency(records, by), responsiveness(records, by, policy)?))
    };
    let rbos: Vec<f64> = records.iter().map(|r| r.rbo).collect();
    let stabilities: Vec<f64> = records.iter().filter_map(|r| r.stability).collect();
    Ok(CellResult {
        cam_method: first.cam_method.clone(),
        spec: first.spec.clone(),
        consistency: consistency_rbo,
        responsiveness: responsiveness_rbo,
        rm: product(consistency_rbo, responsiveness_rbo),
        n_unchanged,
        n_changed,
        rm_variance: variance(&rbos),
        rm_tau: rm_with(Similarity::Tau)?,
        rm_rho: rm_with(Similarity::Rho)?,
        stability_median: median(&stabilities),
        single_class,
        warnings,
    })
}

/// Groups records into cells in order of first appearance.
pub fn build_cells(
    records: &[EvalRecord],
    policy: DegeneratePolicy,
) -> Result<Vec<CellResult>, MetricsError> {
    let mut keys: Vec<(&str, &str)> = Vec::new();
    for r in records {
        let key = (r.cam_method.as_str(), r.spec.as_str());
        if !keys.contains(&key) {
            keys.push(key);
        }
    }
    keys.into_iter()
        .map(|(cam, spec)| {
            let cell: Vec<EvalRecord> = records
                .iter()
                .filter(|r| r.cam_method == cam && r.spec == spec)
                .cloned()
                .collect();
            robustness_metric(&cell, policy)
        })
        .collect()
}

/// Agreement of the CAM rankings produced by each similarity measure for one
/// perturbation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Agreement {
    pub spec: String,
    pub cams: Vec<String>,
    /// One row per similarity measure: rank (1 = most robust) of each CAM.
    pub ranks: Vec<(Similarity, Vec<u32>)>,
    pub w: f64,
    pub p_value: f64,
}

/// Ranks CAMs by robustness under each similarity measure and measures the
/// concordance with Kendall's W. Specs with fewer than two fully populated
/// CAMs are skipped.
pub fn rank_agreement(cells: &[CellResult]) -> Vec<Agreement> {
    let mut specs: Vec<&str> = Vec::new();
    for c in cells {
        if !specs.contains(&c.spec.as_str()) {
            specs.push(&c.spec);
        }
    }
    let mut out = Vec::new();
    for spec in specs {
        let usable: Vec<&CellResult> = cells
            .iter()
            .filter(|c| c.spec == spec && Similarity::ALL.iter().all(|&s| c.rm_by(s).is_some()))
            .collect();
        if usable.len() < 2 {
            continue;
        }
        let ranks: Vec<(Similarity, Vec<u32>)> = Similarity::ALL
            .iter()
            .map(|&s| (s, rank_descending(&usable.iter().map(|c| c.rm_by(s).expect("filtered")).collect::<Vec<_>>())))
            .collect();
        let matrix: Vec<Vec<u32>> = ranks.iter().map(|(_, r)| r.clone()).collect();
        let w = kendalls_w(&matrix).expect("rows are permutations of 1..n");
        out.push(Agreement {
            spec: spec.to_owned(),
            cams: usable.iter().map(|c| c.cam_method.clone()).collect(),
            ranks,
            w: w.w,
            p_value: w.p_value,
        });
    }
    out
}

/// 1-based ranks, highest value first; ties keep input order.
fn rank_descending(values: &[f64]) -> Vec<u32> {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[b].total_cmp(&values[a]));
    let mut ranks = vec![0; values.len()];
    for (rank, i) in order.into_iter().enumerate() {
        ranks[i] = rank as u32 + 1;
    }
    ranks
}
