use std::path::{Path, PathBuf};
use std::time::Duration;

use camrobust::adapter::protocol::{Op, Request, Response};
use camrobust::adapter::{AdapterClient, AdapterConfig, RequestHandler};
use camrobust::model::{write_saliency, Image, Manifest, ManifestEntry, SaliencyMap};
use camrobust::pipeline::{
    build_cells, consistency, evaluate_image, report_csv, report_from_records, run_evaluation,
    DegeneratePolicy, EvalConfig, EvalRecord, RunMetadata, Similarity,
};
use camrobust::segment::SegmenterKind;
use proptest::prelude::*;

/// Backend keyed on image roughness (mean absolute horizontal neighbour
/// difference): label 1 above [`ROUGH`], CAM `same` is a fixed left-heavy
/// map, CAM `flip` is left-heavy on smooth images and right-heavy on rough
/// ones.
struct RoughnessBackend {
    scratch: PathBuf,
}

const ROUGH: f64 = 17.0;
const SMOOTH: f64 = 1.0;

fn roughness(img: &Image) -> f64 {
    let (w, h) = (img.width(), img.height());
    let mut total = 0.0;
    for y in 0..h {
        for x in 0..w - 1 {
            let (a, b) = (img.pixel(x, y)[0] as f64, img.pixel(x + 1, y)[0] as f64);
            if (x < w / 2) == (x + 1 < w / 2) {
                total += (a - b).abs();
            }
        }
    }
    total / ((w - 2) * h) as f64
}

impl RequestHandler for RoughnessBackend {
    fn handle(&mut self, req: &Request) -> Response {
        let mut resp = Response::ok(req.id.clone());
        let load = || Image::load(req.image_path.as_deref().unwrap()).unwrap();
        match req.op {
            Op::Handshake => {
                resp.adapter_id = Some("roughness".into());
                resp.cams = Some(vec!["same".into(), "flip".into()]);
                resp.attacks = Some(vec![]);
            }
            Op::Shutdown => {}
            Op::Predict => resp.label = Some(u32::from(roughness(&load()) > ROUGH)),
            Op::Cam => {
                let reversed =
                    req.cam_method.as_deref() == Some("flip") && roughness(&load()) > SMOOTH;
                let map = SaliencyMap::from_fn(4, 4, |x, _| {
                    if (x < 2) != reversed { 1.0 } else { 0.0 }
                })
                .unwrap();
                let path = self.scratch.join(format!("{}.salm", req.id));
                write_saliency(&map, &path).unwrap();
                resp.saliency_path = Some(path.display().to_string());
            }
            Op::Adversarial => unreachable!("no attacks offered"),
        }
        resp
    }
}

fn client(root: &Path) -> AdapterClient {
    let cfg = AdapterConfig {
        timeout: Duration::from_secs(10),
        scratch_root: Some(root.to_path_buf()),
    };
    AdapterClient::in_process(|dir| RoughnessBackend { scratch: dir.to_path_buf() }, &cfg).unwrap()
}

fn two_tone(dir: &Path, id: &str, dark: u8) -> ManifestEntry {
    let path = dir.join(format!("{id}.png"));
    Image::from_fn(40, 24, |x, _| if x < 20 { [dark; 3] } else { [200; 3] })
        .unwrap()
        .save_png(&path)
        .unwrap();
    ManifestEntry {
        id: id.into(),
        image_path: path,
        reference_label: None,
    }
}

fn config(cams: &[&str]) -> EvalConfig {
    let specs = ["gaussian:low", "gaussian:high"].iter().map(|s| s.parse().unwrap()).collect();
    let mut config = EvalConfig::new(cams.iter().map(|c| c.to_string()).collect(), specs);
    config.segmentation.method = SegmenterKind::Felzenszwalb;
    config.seed = 7;
    config
}

#[test]
fn identical_cams_give_unit_rbo() {
    let dir = tempfile::tempdir().unwrap();
    let entry = two_tone(dir.path(), "a", 60);
    let records = evaluate_image(&entry, &config(&["same"]), &mut client(dir.path())).unwrap();
    assert_eq!(records.len(), 2);
    for r in &records {
        assert_eq!((r.rbo, r.tau, r.rho), (1.0, 1.0, 1.0), "{r:?}");
    }
    assert!(!records[0].class_changed);
}

#[test]
fn reversed_two_segment_ranking() {
    let dir = tempfile::tempdir().unwrap();
    let entry = two_tone(dir.path(), "a", 60);
    let records = evaluate_image(&entry, &config(&["flip"]), &mut client(dir.path())).unwrap();
    for r in &records {
        assert!((r.rbo - 0.9).abs() < 1e-12, "{r:?}");
        assert_eq!((r.tau, r.rho), (-1.0, -1.0));
    }
}

#[test]
fn only_high_noise_changes_the_class() {
    let dir = tempfile::tempdir().unwrap();
    let entry = two_tone(dir.path(), "a", 60);
    let records =
        evaluate_image(&entry, &config(&["same", "flip"]), &mut client(dir.path())).unwrap();
    assert_eq!(records.len(), 4);
    for r in &records {
        assert_eq!(r.class_changed, r.spec == "gaussian:high", "{r:?}");
        assert_eq!(r.class_changed, r.label_org != r.label_per);
    }
    let cams: Vec<&str> = records.iter().map(|r| r.cam_method.as_str()).collect();
    assert_eq!(cams, ["same", "same", "flip", "flip"]);
}

fn metadata() -> RunMetadata {
    let cfg = config(&["same", "flip"]);
    RunMetadata {
        tool: RunMetadata::tool_version(),
        dataset: "test".into(),
        adapter: None,
        seed: cfg.seed,
        cams: cfg.cams.clone(),
        specs: cfg.specs.iter().map(Into::into).collect(),
        segmentation: cfg.segmentation,
        rbo: cfg.rbo,
        degenerate_policy: DegeneratePolicy::Missing,
        stability_samples: cfg.stability_samples,
        images_total: 0,
        images_evaluated: 0,
        failures: vec![],
    }
}

#[test]
fn result_is_independent_of_order_and_partition() {
    let dir = tempfile::tempdir().unwrap();
    let entries: Vec<ManifestEntry> = ["e", "b", "d", "a", "c"]
        .iter()
        .zip([40, 50, 60, 70, 80])
        .map(|(id, dark)| two_tone(dir.path(), id, dark))
        .collect();
    let cfg = config(&["same", "flip"]);
    let run = |entries: Vec<ManifestEntry>, workers: usize| {
        let clients = (0..workers).map(|_| client(dir.path())).collect();
        let (outcome, clients) = run_evaluation(&Manifest { entries }, &cfg, clients).unwrap();
        for c in clients {
            c.shutdown().unwrap();
        }
        assert!(outcome.failures.is_empty());
        outcome.records
    };
    let serial = run(entries.clone(), 1);
    let mut reversed = entries.clone();
    reversed.reverse();
    let parallel = run(reversed, 3);
    let halves = [run(entries[..2].to_vec(), 2), run(entries[2..].to_vec(), 1)];
    let mut merged: Vec<EvalRecord> = halves.concat();
    camrobust::pipeline::sort_records(&mut merged);

    assert_eq!(serial.len(), 20);
    assert_eq!(serial, parallel);
    assert_eq!(serial, merged);
    let csv = |r: &[EvalRecord]| report_csv(&report_from_records(r, metadata()).unwrap());
    assert_eq!(csv(&serial), csv(&parallel));
    assert!(serial.windows(2).all(|w| w[0].image_id <= w[1].image_id));
}

#[test]
fn one_bad_image_is_a_failure_not_an_abort() {
    let dir = tempfile::tempdir().unwrap();
    let mut entries = vec![two_tone(dir.path(), "a", 60), two_tone(dir.path(), "c", 70)];
    std::fs::write(dir.path().join("b.png"), b"not a png").unwrap();
    entries.insert(1, ManifestEntry {
        id: "b".into(),
        image_path: dir.path().join("b.png"),
        reference_label: None,
    });
    let (outcome, _) =
        run_evaluation(&Manifest { entries }, &config(&["same"]), vec![client(dir.path())]).unwrap();
    assert_eq!(outcome.failures.len(), 1);
    assert_eq!(outcome.failures[0].image_id, "b");
    assert_eq!(outcome.records.len(), 4);
}

fn record(rbo: f64, class_changed: bool) -> EvalRecord {
    EvalRecord {
        image_id: "x".into(),
        cam_method: "cam".into(),
        spec: "gaussian:high".into(),
        rbo,
        tau: rbo,
        rho: rbo,
        label_org: 0,
        label_per: u32::from(class_changed),
        class_changed,
        degenerate_cam: false,
        stability: None,
    }
}

proptest! {
    #[test]
    fn class_changed_records_never_move_consistency(
        unchanged in prop::collection::vec(0.0f64..=1.0, 1..20),
        changed in prop::collection::vec(0.0f64..=1.0, 0..20),
    ) {
        let base: Vec<EvalRecord> = unchanged.iter().map(|&r| record(r, false)).collect();
        let mut mixed = base.clone();
        for (i, &r) in changed.iter().enumerate() {
            mixed.insert(i % (mixed.len() + 1), record(r, true));
        }
        prop_assert_eq!(consistency(&base, Similarity::Rbo), consistency(&mixed, Similarity::Rbo));
    }

    #[test]
    fn rm_is_exact_product(
        rows in prop::collection::vec((0.0f64..=1.0, any::<bool>()), 1..30),
        half in any::<bool>(),
    ) {
        let records: Vec<EvalRecord> = rows.iter().map(|&(r, c)| record(r, c)).collect();
        let policy = if half { DegeneratePolicy::Half } else { DegeneratePolicy::Missing };
        for cell in build_cells(&records, policy).unwrap() {
            match (cell.consistency, cell.responsiveness) {
                (Some(c), Some(r)) => prop_assert_eq!(cell.rm, Some(c * r)),
                _ => prop_assert_eq!(cell.rm, None),
            }
            for v in [cell.consistency, cell.responsiveness, cell.rm].into_iter().flatten() {
                prop_assert!((0.0..=1.0).contains(&v));
            }
        }
    }
}
