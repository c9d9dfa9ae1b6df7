//! `lrfuse`: multi-focus image fusion from the command line.
//!
//! Exit codes: 0 success (warnings allowed), 2 usage error, 3 I/O error,
//! 4 internal numeric error.

mod commands;
mod config;

use std::fmt;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use lrfuse::FusionError;

use config::FusionFlags;

#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Io(String),
    Numeric(String),
}

impl CliError {
    fn code(&self) -> u8 {
        match self {
            Self::Usage(_) => 2,
            Self::Io(_) => 3,
            Self::Numeric(_) => 4,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Usage(m) | Self::Io(m) | Self::Numeric(m) => f.write_str(m),
        }
    }
}

impl From<FusionError> for CliError {
    fn from(e: FusionError) -> Self {
        match e {
            FusionError::Parameter(_) => Self::Usage(e.to_string()),
            FusionError::Io(_) | FusionError::Format(_) => Self::Io(e.to_string()),
            FusionError::EmptyClass(_) | FusionError::Internal(_) => Self::Numeric(e.to_string()),
        }
    }
}

#[derive(Parser)]
#[command(
    name = "lrfuse",
    version,
    about = "Multi-focus image fusion with K-SVD dictionaries and low-rank representation"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Blur complementary regions of an all-in-focus image into a source pair.
    BlurPair {
        original: PathBuf,
        /// left, right, top, bottom, circle:cx,cy,r or a mask image path
        /// (pixels >= 0.5 stay sharp in source A).
        #[arg(long, default_value = "left")]
        mask: String,
        /// Gaussian kernel size (odd).
        #[arg(long, default_value_t = lrfuse::bench::DEFAULT_BLUR_SIZE)]
        size: usize,
        #[arg(long, default_value_t = lrfuse::bench::DEFAULT_BLUR_SIGMA)]
        sigma: f64,
        /// Defaults to `<stem>_a.<ext>` next to the original.
        #[arg(long)]
        out_a: Option<PathBuf>,
        /// Defaults to `<stem>_b.<ext>` next to the original.
        #[arg(long)]
        out_b: Option<PathBuf>,
    },
    /// Fuse two registered source images.
    Fuse(commands::FuseArgs),
    /// Run the synthetic defocus benchmark over a directory of originals.
    Bench(commands::BenchArgs),
    /// Learn a global dictionary from the patches of one or more images.
    TrainDict {
        /// Image files or directories of images.
        #[arg(required = true)]
        inputs: Vec<PathBuf>,
        #[arg(short, long)]
        out: PathBuf,
        #[command(flatten)]
        flags: FusionFlags,
    },
    /// Print AG of an image and its PSNR/SSIM against a reference.
    Eval { image: PathBuf, reference: PathBuf },
}

fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::BlurPair { original, mask, size, sigma, out_a, out_b } => {
            commands::blur_pair(&original, &mask, size, sigma, out_a, out_b)
        }
        Command::Fuse(args) => commands::fuse(&args),
        Command::Bench(args) => commands::bench(&args),
        Command::TrainDict { inputs, out, flags } => commands::train_dict(&inputs, &out, &flags),
        Command::Eval { image, reference } => commands::eval(&image, &reference),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("lrfuse: {e}");
            ExitCode::from(e.code())
        }
    }
}
