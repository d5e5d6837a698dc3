use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::cells::{build_cells, rank_agreement, Agreement, CellResult, DegeneratePolicy};
use super::{EvalRecord, ImageFailure, PipelineError};
use crate::adapter::HandshakeInfo;
use crate::metrics::RboParams;
use crate::perturb::{Level, Params, PerturbationSpec};
use crate::segment::SegmentationParams;

/// Resolved parameters of one perturbation spec.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpecProvenance {
    pub label: String,
    pub kind: String,
    pub level: Option<Level>,
    pub params: Params,
}

impl From<&PerturbationSpec> for SpecProvenance {
    fn from(spec: &PerturbationSpec) -> Self {
        Self {
            label: spec.label(),
            kind: spec.kind.to_string(),
            level: spec.level,
            params: spec.params,
        }
    }
}

/// Everything needed to reproduce a run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunMetadata {
    pub tool: String,
    pub dataset: String,
    pub adapter: Option<HandshakeInfo>,
    pub seed: u64,
    pub cams: Vec<String>,
    pub specs: Vec<SpecProvenance>,
    pub segmentation: SegmentationParams,
    pub rbo: RboParams,
    pub degenerate_policy: DegeneratePolicy,
    pub stability_samples: usize,
    pub images_total: usize,
    pub images_evaluated: usize,
    pub failures: Vec<ImageFailure>,
}

impl RunMetadata {
    pub fn tool_version() -> String {
        format!("camrobust {}", env!("CARGO_PKG_VERSION"))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RobustnessReport {
    pub metadata: RunMetadata,
    pub cells: Vec<CellResult>,
    pub agreement: Vec<Agreement>,
}

/// Assembles the report from finished cells.
pub fn aggregate_report(
    cells: Vec<CellResult>,
    metadata: RunMetadata,
) -> Result<RobustnessReport, PipelineError> {
    if cells.is_empty() {
        return Err(PipelineError::EmptyReport);
    }
    let agreement = rank_agreement(&cells);
    Ok(RobustnessReport {
        metadata,
        cells,
        agreement,
    })
}

/// Groups records into cells under `metadata.degenerate_policy` and
/// assembles the report.
pub fn report_from_records(
    records: &[EvalRecord],
    metadata: RunMetadata,
) -> Result<RobustnessReport, PipelineError> {
    let cells = build_cells(records, metadata.degenerate_policy)?;
    aggregate_report(cells, metadata)
}

fn fmt_cell(rm: Option<f64>, variance: f64) -> String {
    match rm {
        Some(rm) => format!("{rm:.3}±{variance:.3}"),
        None => "NA".to_owned(),
    }
}

fn first_seen<'a>(items: impl Iterator<Item = &'a str>) -> Vec<&'a str> {
    let mut out: Vec<&str> = Vec::new();
    for item in items {
        if !out.contains(&item) {
            out.push(item);
        }
    }
    out
}

/// The RM table: one row per perturbation, one column per CAM, cells
/// formatted `rm±variance` or `NA`.
pub fn report_csv(report: &RobustnessReport) -> String {
    let cams = first_seen(report.cells.iter().map(|c| c.cam_method.as_str()));
    let specs = first_seen(report.cells.iter().map(|c| c.spec.as_str()));
    let mut w = csv::Writer::from_writer(Vec::new());
    let mut header = vec!["dataset", "noise", "level"];
    header.extend(&cams);
    w.write_record(&header).expect("in-memory write");
    for spec in specs {
        let (noise, level) = spec.split_once(':').unwrap_or((spec, "-"));
        let mut row = vec![
            report.metadata.dataset.clone(),
            noise.to_owned(),
            level.to_owned(),
        ];
        for cam in &cams {
            let cell = report
                .cells
                .iter()
                .find(|c| c.cam_method == *cam && c.spec == spec);
            row.push(cell.map_or("NA".to_owned(), |c| fmt_cell(c.rm, c.rm_variance)));
        }
        w.write_record(&row).expect("in-memory write");
    }
    String::from_utf8(w.into_inner().expect("flushed")).expect("utf-8")
}

#[derive(Serialize)]
struct ReportFile<'a> {
    generated_at: &'a str,
    #[serde(flatten)]
    report: &'a RobustnessReport,
}

/// Pretty JSON. The `generated_at` timestamp sits alone on the second line;
/// everything else is a pure function of the inputs.
pub fn report_json(report: &RobustnessReport, generated_at: &str) -> String {
    let mut s = serde_json::to_string_pretty(&ReportFile {
        generated_at,
        report,
    })
    .expect("report serializes");
    s.push('\n');
    s
}

/// Raw per-record scores of one cell, for violin plots.
pub fn distribution_csv(records: &[EvalRecord], cam: &str, spec: &str) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["image_id", "rbo", "tau", "rho", "class_changed"])
        .expect("in-memory write");
    for r in records.iter().filter(|r| r.cam_method == cam && r.spec == spec) {
        w.write_record([
            r.image_id.clone(),
            r.rbo.to_string(),
            r.tau.to_string(),
            r.rho.to_string(),
            r.class_changed.to_string(),
        ])
        .expect("in-memory write");
    }
    String::from_utf8(w.into_inner().expect("flushed")).expect("utf-8")
}

/// `<cam>_<spec>.csv` with the spec's `:` replaced by `-`.
pub fn distribution_file_name(cam: &str, spec: &str) -> String {
    let clean = |s: &str| -> String {
        s.chars()
            .map(|c| match c {
                ':' => '-',
                c if c.is_ascii_alphanumeric() || c == '-' || c == '_' || c == '+' => c,
                _ => '_',
            })
            .collect()
    };
    format!("{}_{}.csv", clean(cam), clean(spec))
}

/// Records plus the metadata they were produced under; input of `report`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RecordsFile {
    pub metadata: RunMetadata,
    pub records: Vec<EvalRecord>,
}

pub fn load_records(path: impl AsRef<Path>) -> Result<RecordsFile, PipelineError> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path)?;
    serde_json::from_str(&text).map_err(|e| PipelineError::Json(format!("{}: {e}", path.display())))
}

pub const REPORT_CSV: &str = "report.csv";
pub const REPORT_JSON: &str = "report.json";
pub const RECORDS_JSON: &str = "records.json";
pub const DISTRIBUTIONS_DIR: &str = "distributions";

/// Writes report.csv, report.json, records.json and distributions/. Refuses
/// to overwrite existing outputs unless `force`.
pub fn write_report(
    out_dir: &Path,
    report: &RobustnessReport,
    records: &[EvalRecord],
    generated_at: &str,
    force: bool,
) -> Result<Vec<PathBuf>, PipelineError> {
    let targets = [REPORT_CSV, REPORT_JSON, RECORDS_JSON, DISTRIBUTIONS_DIR].map(|n| out_dir.join(n));
    if !force {
        if let Some(existing) = targets.iter().find(|p| p.exists()) {
            return Err(PipelineError::OutputExists(existing.clone()));
        }
    }
    std::fs::create_dir_all(out_dir)?;
    let dist_dir = &targets[3];
    if dist_dir.exists() {
        std::fs::remove_dir_all(dist_dir)?;
    }
    std::fs::create_dir_all(dist_dir)?;

    let mut written = Vec::new();
    let mut put = |path: PathBuf, contents: String| -> Result<(), PipelineError> {
        std::fs::write(&path, contents)?;
        written.push(path);
        Ok(())
    };
    put(targets[0].clone(), report_csv(report))?;
    put(targets[1].clone(), report_json(report, generated_at))?;
    let mut records_json = serde_json::to_string_pretty(&RecordsFile {
        metadata: report.metadata.clone(),
        records: records.to_vec(),
    })
    .expect("records serialize");
    records_json.push('\n');
    put(targets[2].clone(), records_json)?;
    for cell in &report.cells {
        put(
            dist_dir.join(distribution_file_name(&cell.cam_method, &cell.spec)),
            distribution_csv(records, &cell.cam_method, &cell.spec),
        )?;
    }
    Ok(written)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn metadata() -> RunMetadata {
        RunMetadata {
            tool: RunMetadata::tool_version(),
            dataset: "toy".into(),
            adapter: None,
            seed: 7,
            cams: vec!["stubcam".into()],
            specs: vec![SpecProvenance::from(&"gaussian:medium".parse::<PerturbationSpec>().unwrap())],
            segmentation: SegmentationParams::default(),
            rbo: RboParams::default(),
            degenerate_policy: DegeneratePolicy::Missing,
            stability_samples: 0,
            images_total: 1,
            images_evaluated: 1,
            failures: vec![],
        }
    }

    fn cell(rm: Option<f64>, variance: f64) -> CellResult {
        CellResult {
            cam_method: "stubcam".into(),
            spec: "gaussian:medium".into(),
            consistency: rm,
            responsiveness: rm.map(|_| 1.0),
            rm,
            n_unchanged: 1,
            n_changed: 1,
            rm_variance: variance,
            rm_tau: None,
            rm_rho: None,
            stability_median: None,
            single_class: false,
            warnings: vec![],
        }
    }

    #[test]
    fn csv_cell_formatting() {
        let report = aggregate_report(vec![cell(Some(0.4), 0.05)], metadata()).unwrap();
        assert_eq!(
            report_csv(&report),
            "dataset,noise,level,stubcam\ntoy,gaussian,medium,0.400±0.050\n"
        );
        let report = aggregate_report(vec![cell(None, 0.0)], metadata()).unwrap();
        assert!(report_csv(&report).ends_with("toy,gaussian,medium,NA\n"));
    }

    #[test]
    fn no_cells_is_empty_report() {
        assert!(matches!(aggregate_report(vec![], metadata()), Err(PipelineError::EmptyReport)));
    }

    #[test]
    fn timestamp_is_alone_on_second_line() {
        let report = aggregate_report(vec![cell(Some(0.4), 0.05)], metadata()).unwrap();
        let a = report_json(&report, "2024-01-01T00:00:00Z");
        let b = report_json(&report, "2030-06-30T12:00:00Z");
        let strip = |s: &str| s.lines().enumerate().filter(|(i, _)| *i != 1).map(|(_, l)| l.to_owned()).collect::<Vec<_>>();
        assert!(a.lines().nth(1).unwrap().contains("generated_at"));
        assert_eq!(strip(&a), strip(&b));
    }

    #[test]
    fn refuses_to_overwrite_without_force() {
        let dir = tempfile::tempdir().unwrap();
        let report = aggregate_report(vec![cell(Some(0.4), 0.05)], metadata()).unwrap();
        write_report(dir.path(), &report, &[], "t", false).unwrap();
        assert!(matches!(
            write_report(dir.path(), &report, &[], "t", false),
            Err(PipelineError::OutputExists(_))
        ));
        write_report(dir.path(), &report, &[], "t", true).unwrap();
        assert!(dir.path().join("distributions/stubcam_gaussian-medium.csv").is_file());
    }
}
