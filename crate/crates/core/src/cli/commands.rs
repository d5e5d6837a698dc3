use std::io::{self, Write};
use std::path::Path;
use std::process::ExitCode;
use std::time::Duration;

use serde::de::DeserializeOwned;
use thiserror::Error;

use super::{
    Command, EvaluateArgs, MetricsCommand, PerturbArgs, ReportArgs, SegmentArgs,
    StubAdapterArgs,
};
use crate::adapter::{
    serve, AdapterClient, AdapterConfig, AdapterError, StubBackend, SCRATCH_ENV,
};
use crate::metrics::{
    auc_from_scores, kendall_tau, kendalls_w, rbo, spearman_rho, stability_ratio, MetricsError,
    RboParams, ScoredLabel,
};
use crate::model::{load_manifest, read_saliency, Image, ModelError};
use crate::perturb::{apply_perturbation, NoiseKind, PerturbError, PerturbationSpec};
use crate::pipeline::{
    report_csv, report_from_records, run_evaluation, write_report, EvalConfig, PipelineError,
    RunMetadata, SpecProvenance, REPORT_CSV,
};
use crate::segment::{save_label_png, segment, SegmentError};

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Perturb(#[from] PerturbError),
    #[error(transparent)]
    Segment(#[from] SegmentError),
    #[error(transparent)]
    Metrics(#[from] MetricsError),
    #[error(transparent)]
    Adapter(#[from] AdapterError),
    #[error(transparent)]
    Pipeline(#[from] PipelineError),
    #[error(transparent)]
    Io(#[from] io::Error),
}

pub(super) fn dispatch(command: Command) -> Result<ExitCode, CliError> {
    match command {
        Command::Evaluate(args) => evaluate(args),
        Command::Perturb(args) => perturb(args).map(|_| ExitCode::SUCCESS),
        Command::Segment(args) => segment_cmd(args).map(|_| ExitCode::SUCCESS),
        Command::Metrics(cmd) => metrics(cmd).map(|_| ExitCode::SUCCESS),
        Command::Report(args) => report(args).map(|_| ExitCode::SUCCESS),
        Command::StubAdapter(args) => stub_adapter(args).map(|_| ExitCode::SUCCESS),
    }
}

fn refuse_existing(path: &Path, force: bool) -> Result<(), CliError> {
    if !force && path.exists() {
        return Err(CliError::Usage(format!(
            "{} already exists (use --force to overwrite)",
            path.display()
        )));
    }
    Ok(())
}

fn adapter_command(arg: &str) -> Result<String, CliError> {
    if arg != "stub" {
        return Ok(arg.to_owned());
    }
    let exe = std::env::current_exe()?;
    let quoted = shlex::try_quote(&exe.to_string_lossy())
        .map_err(|e| CliError::Usage(e.to_string()))?
        .into_owned();
    Ok(format!("{quoted} stub-adapter"))
}

fn evaluate(args: EvaluateArgs) -> Result<ExitCode, CliError> {
    if args.workers == 0 {
        return Err(CliError::Usage("--workers must be at least 1".into()));
    }
    if !(args.timeout_secs > 0.0 && args.timeout_secs.is_finite()) {
        return Err(CliError::Usage("--timeout-secs must be positive".into()));
    }
    refuse_existing(&args.out.join(REPORT_CSV), args.force)?;
    let manifest = load_manifest(&args.manifest)?;
    if manifest.is_empty() {
        return Err(CliError::Usage(format!("{} has no entries", args.manifest.display())));
    }
    let specs = args
        .specs
        .iter()
        .map(|s| s.parse::<PerturbationSpec>())
        .collect::<Result<Vec<_>, _>>()?;
    let mut config = EvalConfig::new(args.cams.clone(), specs);
    config.segmentation = args.segmenter.params();
    config.rbo = RboParams::new(args.rbo_p, args.rbo_variant.into())?;
    config.seed = args.seed;
    config.stability_samples = args.stability_samples;
    config.validate()?;

    let adapter_config = AdapterConfig {
        timeout: Duration::from_secs_f64(args.timeout_secs),
        scratch_root: None,
    };
    let command = adapter_command(&args.adapter)?;
    let workers = args.workers.min(manifest.len());
    let clients = (0..workers)
        .map(|_| AdapterClient::spawn(&command, &adapter_config))
        .collect::<Result<Vec<_>, _>>()?;
    let info = clients[0].info().clone();
    for cam in &config.cams {
        if !info.cams.contains(cam) {
            return Err(AdapterError::UnsupportedCamMethod(cam.clone()).into());
        }
    }
    for spec in &config.specs {
        if let NoiseKind::Adversarial(attack) = spec.kind {
            if !info.attacks.iter().any(|a| a == attack.name()) {
                return Err(AdapterError::UnsupportedAttack(attack.name().to_owned()).into());
            }
        }
    }

    let (outcome, clients) = run_evaluation(&manifest, &config, clients)?;
    for client in clients {
        if let Err(e) = client.shutdown() {
            log::warn!("adapter shutdown: {e}");
        }
    }
    for failure in &outcome.failures {
        eprintln!("warning: image `{}` skipped: {}", failure.image_id, failure.error);
    }
    if outcome.records.is_empty() {
        return Err(CliError::Usage("no image could be evaluated".into()));
    }

    let dataset = args.dataset.clone().unwrap_or_else(|| {
        args.manifest
            .file_stem()
            .map_or_else(|| "dataset".to_owned(), |s| s.to_string_lossy().into_owned())
    });
    let metadata = RunMetadata {
        tool: RunMetadata::tool_version(),
        dataset,
        adapter: Some(info),
        seed: config.seed,
        cams: config.cams.clone(),
        specs: config.specs.iter().map(SpecProvenance::from).collect(),
        segmentation: config.segmentation,
        rbo: config.rbo,
        degenerate_policy: args.degenerate_policy.into(),
        stability_samples: config.stability_samples,
        images_total: manifest.len(),
        images_evaluated: manifest.len() - outcome.failures.len(),
        failures: outcome.failures.clone(),
    };
    let report = report_from_records(&outcome.records, metadata)?;
    write_report(&args.out, &report, &outcome.records, &timestamp(), args.force)?;
    print!("{}", report_csv(&report));
    for cell in &report.cells {
        for w in &cell.warnings {
            eprintln!("warning: {} {}: {w}", cell.cam_method, cell.spec);
        }
    }
    Ok(if outcome.failures.is_empty() {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(2)
    })
}

fn timestamp() -> String {
    chrono::Utc::now().to_rfc3339_opts(chrono::SecondsFormat::Secs, true)
}

fn perturb(args: PerturbArgs) -> Result<(), CliError> {
    refuse_existing(&args.out, args.force)?;
    let spec = args.spec.parse::<PerturbationSpec>()?.with_seed(args.seed);
    let image = Image::load(&args.image)?;
    apply_perturbation(&image, &spec)?.save_png(&args.out)?;
    Ok(())
}

fn segment_cmd(args: SegmentArgs) -> Result<(), CliError> {
    if let Some(out) = &args.out {
        refuse_existing(out, args.force)?;
    }
    let image = Image::load(&args.image)?;
    let map = segment(&image, &args.segmenter.params())?;
    if let Some(out) = &args.out {
        save_label_png(&map, out)?;
    }
    println!("{}", map.segment_count());
    Ok(())
}

fn json_arg<T: DeserializeOwned>(arg: &str) -> Result<T, CliError> {
    let text = match arg.strip_prefix('@') {
        Some(path) => std::fs::read_to_string(path)?,
        None => arg.to_owned(),
    };
    serde_json::from_str(&text).map_err(|e| CliError::Usage(format!("invalid JSON input: {e}")))
}

fn metrics(cmd: MetricsCommand) -> Result<(), CliError> {
    let line = match cmd {
        MetricsCommand::Rbo { a, b, p, variant } => {
            let (a, b): (Vec<u64>, Vec<u64>) = (json_arg(&a)?, json_arg(&b)?);
            format!("{:.6}", rbo(&a, &b, RboParams::new(p, variant.into())?)?)
        }
        MetricsCommand::Tau { a, b } => {
            let (a, b): (Vec<u64>, Vec<u64>) = (json_arg(&a)?, json_arg(&b)?);
            format!("{:.6}", kendall_tau(&a, &b)?)
        }
        MetricsCommand::Rho { a, b } => {
            let (a, b): (Vec<u64>, Vec<u64>) = (json_arg(&a)?, json_arg(&b)?);
            format!("{:.6}", spearman_rho(&a, &b)?)
        }
        MetricsCommand::KendallsW { matrix } => {
            let matrix: Vec<Vec<u32>> = json_arg(&matrix)?;
            let w = kendalls_w(&matrix)?;
            if w.p_value < 0.01 {
                format!("W={:.6} p<0.01", w.w)
            } else {
                format!("W={:.6} p={:.6}", w.w, w.p_value)
            }
        }
        MetricsCommand::Auc { samples } => {
            let samples: Vec<ScoredLabel> = json_arg(&samples)?;
            format!("{:.6}", auc_from_scores(&samples)?)
        }
        MetricsCommand::Stability { e, e_per, x, x_per } => {
            let ratio = stability_ratio(
                &read_saliency(e)?,
                &read_saliency(e_per)?,
                &Image::load(x)?,
                &Image::load(x_per)?,
            )?;
            format!("{ratio:.6}")
        }
    };
    println!("{line}");
    Ok(())
}

fn report(args: ReportArgs) -> Result<(), CliError> {
    let mut file = crate::pipeline::load_records(&args.records)?;
    if let Some(policy) = args.degenerate_policy {
        file.metadata.degenerate_policy = policy.into();
    }
    let report = report_from_records(&file.records, file.metadata)?;
    write_report(&args.out, &report, &file.records, &timestamp(), args.force)?;
    print!("{}", report_csv(&report));
    Ok(())
}

fn stub_adapter(args: StubAdapterArgs) -> Result<(), CliError> {
    let scratch = std::env::var_os(SCRATCH_ENV)
        .map(std::path::PathBuf::from)
        .unwrap_or_else(std::env::temp_dir);
    let mut backend = StubBackend::new(scratch);
    if args.intensity_cam {
        backend = backend.with_intensity_cam();
    }
    let stdin = io::stdin();
    let stdout = io::stdout();
    serve(&mut backend, stdin.lock(), stdout.lock())?;
    io::stdout().flush()?;
    Ok(())
}
