//! `camrobust` command line.

mod commands;

use std::ffi::OsString;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::metrics::RboVariant;
use crate::pipeline::DegeneratePolicy;
use crate::segment::{
    FelzenszwalbParams, QuickShiftParams, SegmentationParams, SegmenterKind, SlicParams,
};

#[derive(Debug, Parser)]
#[command(name = "camrobust", version, about = "Noise robustness of CAM explanations")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Evaluate a manifest through a model adapter and write the report
    Evaluate(EvaluateArgs),
    /// Apply one perturbation to an image and write a PNG
    Perturb(PerturbArgs),
    /// Segment an image and write a 16-bit label PNG
    Segment(SegmentArgs),
    /// Compute a single metric from JSON inputs
    #[command(subcommand)]
    Metrics(MetricsCommand),
    /// Re-aggregate a report from a records.json file
    Report(ReportArgs),
    /// Serve the deterministic stub backend on stdin/stdout
    #[command(hide = true)]
    StubAdapter(StubAdapterArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum SegmenterArg {
    Quickshift,
    Slic,
    Felzenszwalb,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum PolicyArg {
    Missing,
    Half,
}

impl From<PolicyArg> for DegeneratePolicy {
    fn from(p: PolicyArg) -> Self {
        match p {
            PolicyArg::Missing => DegeneratePolicy::Missing,
            PolicyArg::Half => DegeneratePolicy::Half,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum VariantArg {
    Extrapolated,
    Truncated,
}

impl From<VariantArg> for RboVariant {
    fn from(v: VariantArg) -> Self {
        match v {
            VariantArg::Extrapolated => RboVariant::Extrapolated,
            VariantArg::Truncated => RboVariant::Truncated,
        }
    }
}

#[derive(Debug, Clone, Args)]
pub struct SegmenterOpts {
    /// Segmentation method
    #[arg(long, value_enum, default_value = "quickshift")]
    pub segmenter: SegmenterArg,
    #[arg(long, default_value_t = 10.0)]
    pub qs_kernel_size: f64,
    #[arg(long, default_value_t = 200.0)]
    pub qs_max_dist: f64,
    #[arg(long, default_value_t = 0.5)]
    pub qs_ratio: f64,
    #[arg(long, default_value_t = 120)]
    pub slic_n_segments: usize,
    #[arg(long, default_value_t = 10.0)]
    pub slic_compactness: f64,
    #[arg(long, default_value_t = 1.0)]
    pub slic_sigma: f64,
    #[arg(long, default_value_t = 100.0)]
    pub fz_scale: f64,
    #[arg(long, default_value_t = 0.5)]
    pub fz_sigma: f64,
    #[arg(long, default_value_t = 50)]
    pub fz_min_size: usize,
}

impl SegmenterOpts {
    pub fn params(&self) -> SegmentationParams {
        SegmentationParams {
            method: match self.segmenter {
                SegmenterArg::Quickshift => SegmenterKind::QuickShift,
                SegmenterArg::Slic => SegmenterKind::Slic,
                SegmenterArg::Felzenszwalb => SegmenterKind::Felzenszwalb,
            },
            quickshift: QuickShiftParams {
                kernel_size: self.qs_kernel_size,
                max_dist: self.qs_max_dist,
                ratio: self.qs_ratio,
            },
            slic: SlicParams {
                n_segments: self.slic_n_segments,
                compactness: self.slic_compactness,
                sigma: self.slic_sigma,
                start_label: 0,
            },
            felzenszwalb: FelzenszwalbParams {
                scale: self.fz_scale,
                sigma: self.fz_sigma,
                min_size: self.fz_min_size,
            },
        }
    }
}

#[derive(Debug, Clone, Args)]
pub struct EvaluateArgs {
    /// Manifest JSON listing the images
    #[arg(long)]
    pub manifest: PathBuf,
    /// Adapter command line, or `stub` for the built-in stub backend
    #[arg(long)]
    pub adapter: String,
    /// CAM methods (repeat or comma-separate)
    #[arg(long = "cam", required = true, value_delimiter = ',')]
    pub cams: Vec<String>,
    /// Perturbation specs such as gaussian:medium or poisson (repeat or comma-separate)
    #[arg(long = "spec", required = true, value_delimiter = ',')]
    pub specs: Vec<String>,
    #[command(flatten)]
    pub segmenter: SegmenterOpts,
    /// RBO persistence
    #[arg(long, default_value_t = 0.9)]
    pub rbo_p: f64,
    #[arg(long, value_enum, default_value = "extrapolated")]
    pub rbo_variant: VariantArg,
    /// Worker threads, each with its own adapter process
    #[arg(long, default_value_t = 1)]
    pub workers: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Output directory
    #[arg(long)]
    pub out: PathBuf,
    /// Responsiveness for cells where the class never (or always) changes
    #[arg(long, value_enum, default_value = "missing")]
    pub degenerate_policy: PolicyArg,
    /// Per-request adapter timeout in seconds
    #[arg(long, default_value_t = 60.0)]
    pub timeout_secs: f64,
    /// Perturbed variants per spec for the stability ratio (0 = off)
    #[arg(long, default_value_t = 0)]
    pub stability_samples: usize,
    /// Dataset name for the report (defaults to the manifest file stem)
    #[arg(long)]
    pub dataset: Option<String>,
    /// Overwrite existing report files
    #[arg(long)]
    pub force: bool,
}

#[derive(Debug, Clone, Args)]
pub struct PerturbArgs {
    #[arg(long)]
    pub image: PathBuf,
    /// Perturbation spec, e.g. gaussian:high
    #[arg(long)]
    pub spec: String,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Output PNG
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long)]
    pub force: bool,
}

#[derive(Debug, Clone, Args)]
pub struct SegmentArgs {
    #[arg(long)]
    pub image: PathBuf,
    #[command(flatten)]
    pub segmenter: SegmenterOpts,
    /// Output 16-bit label PNG
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long)]
    pub force: bool,
}

/// JSON inputs may be given inline or as `@path`.
#[derive(Debug, Subcommand)]
pub enum MetricsCommand {
    /// Rank-biased overlap of two rankings
    Rbo {
        a: String,
        b: String,
        #[arg(long, default_value_t = 0.9)]
        p: f64,
        #[arg(long, value_enum, default_value = "extrapolated")]
        variant: VariantArg,
    },
    /// Kendall's tau between two rankings
    Tau { a: String, b: String },
    /// Spearman's rho between two rankings
    Rho { a: String, b: String },
    /// Kendall's W of a rank matrix (rows = raters, ranks 1..n)
    KendallsW { matrix: String },
    /// AUC of [{"score":..,"class_changed":..}, ...] or [[score, changed], ...]
    Auc { samples: String },
    /// Stability ratio (explanation L1 change over input L1 change) from two SALM maps and two images
    Stability {
        #[arg(long)]
        e: PathBuf,
        #[arg(long)]
        e_per: PathBuf,
        #[arg(long)]
        x: PathBuf,
        #[arg(long)]
        x_per: PathBuf,
    },
}

#[derive(Debug, Clone, Args)]
pub struct ReportArgs {
    /// records.json written by `evaluate`
    #[arg(long)]
    pub records: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    /// Override the policy stored with the records
    #[arg(long, value_enum)]
    pub degenerate_policy: Option<PolicyArg>,
    #[arg(long)]
    pub force: bool,
}

#[derive(Debug, Clone, Args)]
pub struct StubAdapterArgs {
    /// Also offer the image-dependent `intensitycam`
    #[arg(long)]
    pub intensity_cam: bool,
}

/// Parses `args` (including the program name) and runs the command.
pub fn run<I, T>(args: I) -> ExitCode
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(e.exit_code() as u8);
        }
    };
    let _ = env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn"))
        .format_timestamp(None)
        .try_init();
    match commands::dispatch(cli.command) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}
