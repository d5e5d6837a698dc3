use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use serde::{Deserialize, Serialize};

use super::PipelineError;
use crate::adapter::{AdapterClient, AdapterError};
use crate::metrics::{
    kendall_tau, rank_segments, rbo_ranked, segment_mean_saliency, spearman_rho,
    stability_ratio, MetricsError, RboParams,
};
use crate::model::{Image, Manifest, ManifestEntry, RankedSegments, SaliencyMap, SegmentationMap};
use crate::perturb::{apply_perturbation, derive_seed, NoiseKind, Params, PerturbationSpec};
use crate::segment::{segment, SegmentationParams};

/// One (image, CAM, perturbation) comparison.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalRecord {
    pub image_id: String,
    pub cam_method: String,
    /// Canonical spec label, e.g. `gaussian:medium`.
    pub spec: String,
    pub rbo: f64,
    pub tau: f64,
    pub rho: f64,
    pub label_org: u32,
    pub label_per: u32,
    pub class_changed: bool,
    /// Clean or perturbed CAM was constant before normalization.
    pub degenerate_cam: bool,
    /// Largest stability ratio over the sampled variants, when requested.
    #[serde(default)]
    pub stability: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvalConfig {
    pub cams: Vec<String>,
    pub specs: Vec<PerturbationSpec>,
    pub segmentation: SegmentationParams,
    pub rbo: RboParams,
    pub seed: u64,
    /// Number of perturbed variants per spec for the stability ratio; 0 turns
    /// the ratio off. Only stochastic kinds produce more than one variant.
    pub stability_samples: usize,
}

impl EvalConfig {
    pub fn new(cams: Vec<String>, specs: Vec<PerturbationSpec>) -> Self {
        Self {
            cams,
            specs,
            segmentation: SegmentationParams::default(),
            rbo: RboParams::default(),
            seed: 0,
            stability_samples: 0,
        }
    }

    pub fn validate(&self) -> Result<(), PipelineError> {
        if self.cams.is_empty() {
            return Err(PipelineError::Config("at least one cam method is required".into()));
        }
        if self.specs.is_empty() {
            return Err(PipelineError::Config("at least one perturbation spec is required".into()));
        }
        for (i, spec) in self.specs.iter().enumerate() {
            if self.specs[..i].iter().any(|s| s.label() == spec.label()) {
                return Err(PipelineError::Config(format!("duplicate spec `{spec}`")));
            }
        }
        for (i, cam) in self.cams.iter().enumerate() {
            if self.cams[..i].contains(cam) {
                return Err(PipelineError::Config(format!("duplicate cam method `{cam}`")));
            }
        }
        Ok(())
    }
}

struct Variant {
    spec: PerturbationSpec,
    image: Image,
    path: PathBuf,
    label: u32,
    /// Extra samples for the stability ratio (path, image).
    extra: Vec<(PathBuf, Image)>,
}

/// Evaluates one image: predicts and segments the clean image once, then for
/// every CAM compares the clean ranking with the ranking on each perturbed
/// variant over the same segmentation. Records are ordered CAM-major.
pub fn evaluate_image(
    entry: &ManifestEntry,
    config: &EvalConfig,
    client: &mut AdapterClient,
) -> Result<Vec<EvalRecord>, PipelineError> {
    let image = Image::load(&entry.image_path)?;
    let (w, h) = (image.width(), image.height());
    let clean_path = entry.image_path.as_path();
    let label_org = client.predict(clean_path)?.label;
    let segmentation = segment(&image, &config.segmentation)?;

    let work = WorkDir::new(client.scratch_dir(), &entry.id)?;
    let mut variants = Vec::with_capacity(config.specs.len());
    for (k, spec) in config.specs.iter().enumerate() {
        let seed = derive_seed(config.seed, &entry.id, &spec.label());
        let perturbed = perturb(&image, clean_path, spec.with_seed(seed), client)?;
        let path = work.save(&perturbed, &format!("v{k}"))?;
        let label = client.predict(&path)?.label;
        let mut extra = Vec::new();
        if config.stability_samples > 1 && is_stochastic(spec.kind) {
            for s in 1..config.stability_samples {
                let sample_seed = derive_seed(config.seed, &entry.id, &format!("{spec}#{s}"));
                let img = apply_perturbation(&image, &spec.with_seed(sample_seed))?;
                let p = work.save(&img, &format!("v{k}s{s}"))?;
                extra.push((p, img));
            }
        }
        variants.push(Variant {
            spec: *spec,
            image: perturbed,
            path,
            label,
            extra,
        });
    }

    let mut records = Vec::with_capacity(config.cams.len() * variants.len());
    for cam in &config.cams {
        let cam_org = client.generate_cam(clean_path, cam, w, h)?;
        let rank_org = ranking(&cam_org, &segmentation)?;
        for v in &variants {
            let cam_per = client.generate_cam(&v.path, cam, w, h)?;
            let rank_per = ranking(&cam_per, &segmentation)?;
            let stability = if config.stability_samples > 0 {
                let mut worst = stability(&cam_org, &cam_per, &image, &v.image)?;
                for (p, img) in &v.extra {
                    let e = client.generate_cam(p, cam, w, h)?;
                    worst = max_option(worst, stability(&cam_org, &e, &image, img)?);
                }
                worst
            } else {
                None
            };
            records.push(EvalRecord {
                image_id: entry.id.clone(),
                cam_method: cam.clone(),
                spec: v.spec.label(),
                rbo: rbo_ranked(&rank_org, &rank_per, config.rbo)?,
                tau: correlation(kendall_tau, &rank_org, &rank_per)?,
                rho: correlation(spearman_rho, &rank_org, &rank_per)?,
                label_org,
                label_per: v.label,
                class_changed: label_org != v.label,
                degenerate_cam: cam_org.is_degenerate() || cam_per.is_degenerate(),
                stability,
            });
        }
    }
    Ok(records)
}

fn perturb(
    image: &Image,
    clean_path: &Path,
    spec: PerturbationSpec,
    client: &mut AdapterClient,
) -> Result<Image, PipelineError> {
    let NoiseKind::Adversarial(attack) = spec.kind else {
        return Ok(apply_perturbation(image, &spec)?);
    };
    let eps = match spec.params {
        Params::Epsilon { eps } => Some(eps),
        _ => None,
    };
    let adv = client.generate_adversarial(clean_path, attack, eps)?;
    if (adv.width(), adv.height()) != (image.width(), image.height()) {
        return Err(AdapterError::BackendError(format!(
            "adversarial image is {}x{}, expected {}x{}",
            adv.width(),
            adv.height(),
            image.width(),
            image.height()
        ))
        .into());
    }
    Ok(adv)
}

fn is_stochastic(kind: NoiseKind) -> bool {
    matches!(
        kind,
        NoiseKind::Gaussian | NoiseKind::SaltPepper | NoiseKind::Poisson | NoiseKind::Speckle
    )
}

fn ranking(cam: &SaliencyMap, seg: &SegmentationMap) -> Result<RankedSegments, MetricsError> {
    rank_segments(&segment_mean_saliency(cam, seg)?)
}

/// A single-segment image ranks trivially the same; tau and rho need two
/// items, so that case scores 1 like RBO does.
fn correlation(
    f: fn(&[u32], &[u32]) -> Result<f64, MetricsError>,
    a: &RankedSegments,
    b: &RankedSegments,
) -> Result<f64, MetricsError> {
    if a.len() < 2 && a.order == b.order {
        return Ok(1.0);
    }
    f(&a.order, &b.order)
}

/// `None` when the perturbation left the image unchanged.
fn stability(
    e: &SaliencyMap,
    e_per: &SaliencyMap,
    x: &Image,
    x_per: &Image,
) -> Result<Option<f64>, MetricsError> {
    match stability_ratio(e, e_per, x, x_per) {
        Ok(s) => Ok(Some(s)),
        Err(MetricsError::ZeroDenominator) => Ok(None),
        Err(e) => Err(e),
    }
}

fn max_option(a: Option<f64>, b: Option<f64>) -> Option<f64> {
    match (a, b) {
        (Some(a), Some(b)) => Some(a.max(b)),
        (a, b) => a.or(b),
    }
}

/// Per-image directory for perturbed files, removed when dropped.
struct WorkDir(tempfile::TempDir);

impl WorkDir {
    fn new(scratch: Option<&Path>, image_id: &str) -> Result<Self, PipelineError> {
        let prefix: String = image_id
            .chars()
            .take(32)
            .map(|c| if c.is_ascii_alphanumeric() { c } else { '_' })
            .collect();
        let mut builder = tempfile::Builder::new();
        builder.prefix(&prefix);
        let dir = match scratch {
            Some(root) => builder.tempdir_in(root),
            None => builder.tempdir(),
        }
        .map_err(PipelineError::Io)?;
        Ok(Self(dir))
    }

    fn save(&self, image: &Image, name: &str) -> Result<PathBuf, PipelineError> {
        let path = self.0.path().join(format!("{name}.png"));
        image.save_png(&path)?;
        Ok(path)
    }
}

/// An image that could not be evaluated; the run continues without it.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ImageFailure {
    pub image_id: String,
    pub error: String,
}

#[derive(Debug, Clone, Default)]
pub struct RunOutcome {
    /// Sorted by image id; per-image order is CAM-major.
    pub records: Vec<EvalRecord>,
    /// Sorted by image id.
    pub failures: Vec<ImageFailure>,
}

type ImageResult = Result<Vec<EvalRecord>, String>;

/// Evaluates every manifest entry with one adapter client per worker. The
/// result does not depend on the number of workers or scheduling order.
pub fn run_evaluation(
    manifest: &Manifest,
    config: &EvalConfig,
    clients: Vec<AdapterClient>,
) -> Result<(RunOutcome, Vec<AdapterClient>), PipelineError> {
    config.validate()?;
    if clients.is_empty() {
        return Err(PipelineError::Config("at least one worker is required".into()));
    }
    let next = AtomicUsize::new(0);
    let results: Mutex<Vec<(usize, ImageResult)>> = Mutex::new(Vec::new());
    let clients: Vec<AdapterClient> = std::thread::scope(|scope| {
        let handles: Vec<_> = clients
            .into_iter()
            .map(|mut client| {
                let (next, results) = (&next, &results);
                scope.spawn(move || {
                    loop {
                        let i = next.fetch_add(1, Ordering::Relaxed);
                        let Some(entry) = manifest.entries.get(i) else {
                            break;
                        };
                        let result = evaluate_image(entry, config, &mut client).map_err(|e| {
                            log::warn!("image `{}` failed: {e}", entry.id);
                            e.to_string()
                        });
                        results.lock().expect("no poisoning").push((i, result));
                    }
                    client
                })
            })
            .collect();
        handles
            .into_iter()
            .map(|h| h.join().expect("worker panicked"))
            .collect()
    });

    let mut results = results.into_inner().expect("no poisoning");
    results.sort_by_key(|(i, _)| *i);
    let mut outcome = RunOutcome::default();
    for (i, result) in results {
        match result {
            Ok(records) => outcome.records.extend(records),
            Err(error) => outcome.failures.push(ImageFailure {
                image_id: manifest.entries[i].id.clone(),
                error,
            }),
        }
    }
    sort_records(&mut outcome.records);
    outcome.failures.sort_by(|a, b| a.image_id.cmp(&b.image_id));
    Ok((outcome, clients))
}

/// Stable sort by image id; keeps each image's CAM-major order.
pub fn sort_records(records: &mut [EvalRecord]) {
    records.sort_by(|a, b| a.image_id.cmp(&b.image_id));
}
