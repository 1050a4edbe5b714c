//! The `vfi-dpa` command line.
//!
//! Every subcommand prints one JSON document on stdout and human-readable
//! progress on stderr. Exit codes: 0 success, 2 usage or configuration
//! error, 3 I/O or file-format error, 4 numeric failure.

mod commands;

use std::ffi::OsString;
use std::io::Write;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

use crate::error::Error;

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 2;
pub const EXIT_IO: i32 = 3;
pub const EXIT_NUMERIC: i32 = 4;

#[derive(Debug, Parser)]
#[command(
    name = "vfi-dpa",
    version,
    about = "Difficulty-routed video frame interpolation"
)]
pub struct Cli {
    /// Root seed; every module derives its own stream from it.
    #[arg(long, global = true)]
    pub seed: Option<u64>,

    /// Worker threads for annotation and sweeps.
    #[arg(long, global = true, default_value_t = 1)]
    pub threads: usize,

    /// More log output (repeatable).
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    pub verbose: u8,

    /// Errors only.
    #[arg(short, long, global = true)]
    pub quiet: bool,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Build a labelled manifest from a frame directory or a synthetic suite.
    Annotate(AnnotateArgs),
    /// Train the difficulty model on a manifest.
    Train(TrainArgs),
    /// Score one frame pair.
    Assess(AssessArgs),
    /// Route one frame pair and write the interpolated middle frame.
    Interpolate(InterpolateArgs),
    /// Route a manifest at many thresholds and report quality and latency.
    Sweep(SweepArgs),
}

#[derive(Debug, Args)]
pub struct AnnotateArgs {
    /// Directory of PPM/PGM frames, sorted by file name.
    #[arg(
        long,
        conflicts_with = "synthetic",
        required_unless_present = "synthetic"
    )]
    pub frames: Option<PathBuf>,
    /// Generate this many synthetic triplets instead.
    #[arg(long, requires = "magnitudes")]
    pub synthetic: Option<usize>,
    /// Ascending motion magnitudes in pixels, e.g. `0,2,8,16`.
    #[arg(long, value_delimiter = ',')]
    pub magnitudes: Option<Vec<f64>>,
    /// Side of synthetic frames in pixels.
    #[arg(long, default_value_t = 256)]
    pub size: usize,
    /// Frame gap inside a triplet.
    #[arg(long, default_value_t = 1)]
    pub stride: usize,
    /// Overlapping triplets advancing one frame at a time.
    #[arg(long)]
    pub sliding: bool,
    /// PSNR cut-offs in dB for levels 4, 3 and 2.
    #[arg(long, value_delimiter = ',', num_args = 3, default_values_t = [35.0, 30.0, 25.0])]
    pub thresholds: Vec<f64>,
    /// Where synthetic frames are written; defaults to `<out stem>_frames`
    /// next to the manifest.
    #[arg(long)]
    pub frames_out: Option<PathBuf>,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    #[arg(long)]
    pub manifest: PathBuf,
    /// `key = value` file with hyperparameters and model settings.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub steps: Option<usize>,
    #[arg(long)]
    pub lr: Option<f64>,
    #[arg(long)]
    pub lambda: Option<f64>,
    #[arg(long)]
    pub batch: Option<usize>,
    /// Continue from this checkpoint; its model settings are kept.
    #[arg(long)]
    pub resume: Option<PathBuf>,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct AssessArgs {
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long)]
    pub f0: PathBuf,
    #[arg(long)]
    pub f1: PathBuf,
}

#[derive(Debug, Args)]
pub struct InterpolateArgs {
    #[arg(long)]
    pub model: PathBuf,
    /// Scores at or above this go to the fast backend.
    #[arg(long)]
    pub threshold: f64,
    #[arg(long)]
    pub f0: PathBuf,
    #[arg(long)]
    pub f1: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    /// Skip the threshold rule (`fast` or `accurate`).
    #[arg(long)]
    pub force: Option<String>,
    /// True middle frame, for PSNR/SSIM in the decision record.
    #[arg(long)]
    pub ground_truth: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct SweepArgs {
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long)]
    pub manifest: PathBuf,
    /// `start:stop:step` (stop included) or a comma-separated list.
    #[arg(long, default_value = "0:1:0.05")]
    pub thresholds: String,
    #[arg(long)]
    pub report: PathBuf,
}

pub fn exit_code(e: &Error) -> i32 {
    match e {
        Error::Io { .. } | Error::Image { .. } | Error::Manifest { .. } | Error::Checkpoint(_) => {
            EXIT_IO
        }
        Error::NonFinite { .. } | Error::Diverged { .. } => EXIT_NUMERIC,
        Error::Shape { .. } | Error::Config(_) | Error::InvalidArgument(_) => EXIT_USAGE,
    }
}

fn init_logging(cli: &Cli) {
    let level = if cli.quiet {
        log::LevelFilter::Error
    } else {
        match cli.verbose {
            0 => log::LevelFilter::Info,
            1 => log::LevelFilter::Debug,
            _ => log::LevelFilter::Trace,
        }
    };
    let _ = env_logger::Builder::new()
        .filter_level(level)
        .format_timestamp(None)
        .target(env_logger::Target::Stderr)
        .try_init();
}

/// Parses `args` (including the program name), runs the command and
/// returns the process exit code. The JSON result goes to `stdout`.
pub fn run<I, T>(args: I, stdout: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
        }
    };
    init_logging(&cli);
    if cli.threads == 0 {
        eprintln!("error: --threads must be at least 1");
        return EXIT_USAGE;
    }
    let pool = match rayon::ThreadPoolBuilder::new()
        .num_threads(cli.threads)
        .build()
    {
        Ok(p) => p,
        Err(e) => {
            eprintln!("error: cannot start worker pool: {e}");
            return EXIT_USAGE;
        }
    };
    match pool.install(|| commands::execute(&cli)) {
        Ok(value) => {
            let text = serde_json::to_string_pretty(&value).expect("results serialize");
            if writeln!(stdout, "{text}").is_err() {
                return EXIT_IO;
            }
            EXIT_OK
        }
        Err(e) => {
            log::error!("{e}");
            exit_code(&e)
        }
    }
}
