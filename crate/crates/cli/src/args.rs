use std::path::PathBuf;

use ccpad_core::{Format, Metric};
use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Debug, Parser)]
#[command(name = "ccpad", version, about = "Closeness-code add-on for fingerprint presentation-attack detection")]
#[command(args_override_self = true)]
pub struct Cli {
    /// JSON object whose keys set flags of the chosen command; explicit flags win.
    #[arg(long, global = true, value_name = "FILE")]
    pub config: Option<PathBuf>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a synthetic dataset and split it into validation, gallery and probes.
    Synth(SynthArgs),
    /// Estimate the closeness-code look-up table from a validation set.
    EstimateLut(EstimateLutArgs),
    /// Classify probes against their claimed user's gallery.
    Classify(ClassifyArgs),
    /// Score classify output against probe labels, with threshold recalibration.
    Evaluate(EvaluateArgs),
    /// Closeness-bit rates of bona fide and attack samples per validation set.
    Hierarchy(HierarchyArgs),
    /// Operating curves of the PAD + comparator system under attack prior w.
    Fuse(FuseArgs),
    /// Time the per-probe closeness-code overhead.
    Bench(BenchArgs),
}

#[derive(Debug, Args)]
#[command(allow_negative_numbers = true)]
pub struct SynthArgs {
    /// Required unless the parameter file sets it.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Generator parameters as JSON or key=value lines.
    #[arg(long, value_name = "FILE")]
    pub params: Option<PathBuf>,
    #[arg(long)]
    pub dim: Option<usize>,
    #[arg(long)]
    pub n_users: Option<usize>,
    #[arg(long)]
    pub fingers_per_user: Option<usize>,
    #[arg(long)]
    pub bf_per_finger: Option<usize>,
    #[arg(long)]
    pub pa_per_finger: Option<usize>,
    #[arg(long)]
    pub sigma_sample: Option<f64>,
    #[arg(long)]
    pub sigma_finger: Option<f64>,
    #[arg(long)]
    pub sigma_user: Option<f64>,
    #[arg(long)]
    pub pa_offset: Option<f64>,
    #[arg(long)]
    pub pa_overlap_rate: Option<f64>,
    #[arg(long)]
    pub pad_noise: Option<f64>,
    /// Users moved out of the validation set to act as enrolled identities.
    #[arg(long, default_value_t = 5)]
    pub holdout: usize,
    #[arg(long, default_value = "jsonl")]
    pub format: Format,
    /// Output directory.
    #[arg(long, value_name = "DIR")]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
#[command(allow_negative_numbers = true)]
pub struct EstimateLutArgs {
    #[arg(long, value_name = "FILE")]
    pub validation: PathBuf,
    /// PAD acceptance threshold: score >= thr is bona fide.
    #[arg(long, default_value_t = 0.5)]
    pub thr: f64,
    #[arg(long, default_value_t = Metric::L2)]
    pub metric: Metric,
    #[arg(long, value_name = "FILE")]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct ClassifyArgs {
    #[arg(long, value_name = "FILE")]
    pub lut: PathBuf,
    #[arg(long, value_name = "FILE")]
    pub validation: PathBuf,
    /// Bona fide templates of the enrolled users.
    #[arg(long, value_name = "FILE")]
    pub gallery: PathBuf,
    /// Probe records; user and finger name the claimed identity.
    #[arg(long, value_name = "FILE")]
    pub probes: PathBuf,
    #[arg(long, default_value_t = Metric::L2)]
    pub metric: Metric,
    #[arg(long, value_name = "FILE")]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct EvaluateArgs {
    /// CSV written by `classify`.
    #[arg(long, value_name = "FILE")]
    pub decisions: PathBuf,
    /// The probe file given to `classify`, for labels and PAD scores.
    #[arg(long, value_name = "FILE")]
    pub probes: PathBuf,
    /// JSON report.
    #[arg(long, value_name = "FILE")]
    pub out: PathBuf,
    /// Optional comparison row: val_set,test_set,bpcer,apcer,delta_bpcer,delta_apcer.
    #[arg(long, value_name = "FILE")]
    pub table: Option<PathBuf>,
    #[arg(long, default_value = "val")]
    pub val_set: String,
    #[arg(long, default_value = "test")]
    pub test_set: String,
}

#[derive(Debug, Args)]
pub struct HierarchyArgs {
    /// One or more validation sets.
    #[arg(long, value_name = "FILE", num_args = 1.., required = true)]
    pub validation: Vec<PathBuf>,
    /// Row names, one per validation set; file stems by default.
    #[arg(long, num_args = 1..)]
    pub name: Vec<String>,
    #[arg(long, default_value_t = Metric::L2)]
    pub metric: Metric,
    #[arg(long, value_name = "FILE")]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum FuseMode {
    Analytic,
    Empirical,
}

#[derive(Debug, Args)]
#[command(allow_negative_numbers = true)]
pub struct FuseArgs {
    #[arg(long, value_enum, default_value_t = FuseMode::Analytic)]
    pub mode: FuseMode,
    /// Analytic mode: CSV with `threshold,fmr,fnmr` or `kind,score` (kind genuine|impostor).
    #[arg(long, value_name = "FILE")]
    pub comparator: Option<PathBuf>,
    /// Empirical mode: CSV `kind,score,pad` with kind genuine|impostor|attack and pad BF|PA.
    #[arg(long, value_name = "FILE")]
    pub trials: Option<PathBuf>,
    /// PAD operating point (analytic mode).
    #[arg(long, default_value_t = 0.0)]
    pub bpcer: f64,
    #[arg(long, default_value_t = 0.0)]
    pub apcer: f64,
    /// Attack priors; one output curve per value.
    #[arg(long, num_args = 1.., default_values_t = [0.0, 0.1])]
    pub w: Vec<f64>,
    /// Output directory.
    #[arg(long, value_name = "DIR")]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct BenchArgs {
    /// Seed of the synthetic benchmark data.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Validation set size.
    #[arg(long, default_value_t = 5000)]
    pub size: usize,
    #[arg(long, default_value_t = 128)]
    pub dim: usize,
    /// Timed probes.
    #[arg(long, default_value_t = 1000)]
    pub probes: usize,
    /// Untimed probes run first.
    #[arg(long, default_value_t = 100)]
    pub warmup: usize,
    #[arg(long, default_value_t = Metric::L2)]
    pub metric: Metric,
    /// Mean overhead above this fails with exit code 3.
    #[arg(long, default_value_t = 10.0)]
    pub budget_ms: f64,
    /// Optional JSON report.
    #[arg(long, value_name = "FILE")]
    pub out: Option<PathBuf>,
}
