//! `pedqc`: quality control of plantar-pressure maps.
//!
//! Exit codes: 0 success, 1 usage, 2 data format, 3 numeric failure.

mod commands;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use pedqc_core::Error;

#[derive(Debug, Parser)]
#[command(name = "pedqc", version, about = "Outlier detection for plantar-pressure maps")]
struct Cli {
    /// Worker threads; defaults to the number of available cores.
    #[arg(long, global = true)]
    jobs: Option<usize>,

    /// Master seed for every random stream.
    #[arg(long, global = true, env = "PEDQC_SEED", default_value_t = 0)]
    seed: u64,

    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Generate a cohort of valid phantom recordings.
    Phantom(PhantomArgs),
    /// Top up every outlier class with synthetic samples.
    Synth(SynthArgs),
    /// Build a per-side template (and optionally its registered stack).
    Template(TemplateArgs),
    /// Randomized search of the cluster-forming parameters.
    Tune(TuneArgs),
    /// Run the SPM detector against a saved normative model.
    Detect(DetectArgs),
    /// Write the shared cross-validation fold plan.
    Folds(FoldsArgs),
    /// Nested cross-validation of a detector arm.
    Evaluate(EvaluateArgs),
    /// Three-panel figures: raw | SPM | attribution.
    Render(RenderArgs),
    /// MCC and F1 of a binary confusion matrix.
    Metrics(MetricsArgs),
}

#[derive(Debug, Args)]
struct PhantomArgs {
    #[arg(long, default_value_t = 50)]
    n_subjects: usize,
    #[arg(long)]
    out_dir: PathBuf,
    #[arg(long, default_value_t = 0.1)]
    scale_jitter: f64,
    /// Degrees.
    #[arg(long, default_value_t = 5.0)]
    angle_jitter: f64,
    #[arg(long, default_value_t = 0.15)]
    intensity_jitter: f64,
    /// Pixels.
    #[arg(long, default_value_t = 2.0)]
    shift_jitter: f64,
    #[arg(long, default_value_t = 0.1)]
    asymmetry: f64,
}

#[derive(Debug, Args)]
struct SynthArgs {
    #[arg(long)]
    manifest: PathBuf,
    #[arg(long, default_value_t = 500)]
    target: usize,
    #[arg(long)]
    out_dir: PathBuf,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum SideArg {
    #[value(name = "L", alias = "l")]
    L,
    #[value(name = "R", alias = "r")]
    R,
}

#[derive(Debug, Args)]
struct TemplateArgs {
    #[arg(long)]
    manifest: PathBuf,
    #[arg(long, value_enum)]
    side: SideArg,
    #[arg(long)]
    out: PathBuf,
    /// Also write the inliers registered to the template (the normative stack).
    #[arg(long)]
    stack_out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct SpmArgs {
    #[arg(long)]
    alpha_forming: Option<f64>,
    #[arg(long)]
    min_cluster: Option<usize>,
    #[arg(long)]
    permutations: Option<usize>,
    #[arg(long)]
    alpha_fwe: Option<f64>,
    #[arg(long, value_parser = clap::builder::PossibleValuesParser::new(["4", "8"]))]
    connectivity: Option<String>,
}

#[derive(Debug, Args)]
struct TuneArgs {
    #[arg(long)]
    manifest: PathBuf,
    #[arg(long, default_value_t = 25)]
    budget: usize,
    /// Share of subject groups used to build the normative model.
    #[arg(long, default_value_t = 0.8)]
    train_fraction: f64,
    #[command(flatten)]
    spm: SpmArgs,
    /// Tuned parameters as JSON.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Args)]
struct DetectArgs {
    #[arg(long)]
    manifest: PathBuf,
    /// Directory holding template_{L,R}.f32 and stack_{L,R}.f32.
    #[arg(long)]
    model_dir: PathBuf,
    /// Parameter JSON written by `tune`; explicit flags take precedence.
    #[arg(long)]
    params: Option<PathBuf>,
    #[command(flatten)]
    spm: SpmArgs,
    /// Decisions JSONL.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Args)]
struct FoldsArgs {
    #[arg(long)]
    manifest: PathBuf,
    #[arg(long, default_value_t = 5)]
    folds: usize,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum ArmArg {
    Spm,
    External,
}

#[derive(Debug, Args)]
struct EvaluateArgs {
    #[arg(long)]
    manifest: PathBuf,
    #[arg(long, value_enum, default_value = "spm")]
    arm: ArmArg,
    /// Predictions JSONL, required for the external arm.
    #[arg(long)]
    predictions: Option<PathBuf>,
    #[arg(long, default_value_t = 5)]
    folds: usize,
    /// Use this fold plan instead of deriving one from the seed.
    #[arg(long)]
    plan: Option<PathBuf>,
    /// Save the fold plan that was used.
    #[arg(long)]
    write_plan: Option<PathBuf>,
    #[arg(long, default_value_t = 25)]
    budget: usize,
    #[command(flatten)]
    spm: SpmArgs,
    #[arg(long)]
    report: PathBuf,
    /// Per-sample SPM decisions on the outer test folds.
    #[arg(long)]
    decisions: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct RenderArgs {
    #[arg(long)]
    manifest: PathBuf,
    #[arg(long)]
    decisions: PathBuf,
    /// Directory with `<id>.attr.f32` attribution maps.
    #[arg(long)]
    attributions_dir: Option<PathBuf>,
    #[arg(long)]
    out_dir: PathBuf,
}

#[derive(Debug, Args)]
struct MetricsArgs {
    #[arg(long)]
    tn: u64,
    #[arg(long)]
    fp: u64,
    #[arg(long = "fn")]
    fn_: u64,
    #[arg(long)]
    tp: u64,
    /// Print JSON instead of text.
    #[arg(long)]
    json: bool,
}

fn exit_code(err: &anyhow::Error) -> u8 {
    match err.chain().find_map(|e| e.downcast_ref::<Error>()) {
        Some(Error::DegenerateInput(_) | Error::Numeric(_)) => 3,
        _ => 2,
    }
}

/// Error chain joined by ": ", skipping causes already quoted by their parent.
fn describe(err: &anyhow::Error) -> String {
    let mut out = String::new();
    for cause in err.chain() {
        let msg = cause.to_string();
        if !out.contains(&msg) {
            if !out.is_empty() {
                out.push_str(": ");
            }
            out.push_str(&msg);
        }
    }
    out
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info"))
        .format_timestamp(None)
        .init();
    if let Some(jobs) = cli.jobs {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(jobs.max(1)).build_global() {
            log::warn!("could not size the thread pool: {e}");
        }
    }
    match commands::run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {}", describe(&e));
            ExitCode::from(exit_code(&e))
        }
    }
}
