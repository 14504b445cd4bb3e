#![allow(clippy::neg_cmp_op_on_partial_ord)]

mod bench;
mod commands;
mod error;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use crate::error::{exit_code, EXIT_USAGE};

#[derive(Parser)]
#[command(name = "declip", version, about = "Sparse and social-sparse audio declipping")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Normalize a file and clip it at a threshold or to a target input SDR.
    Clip(ClipArgs),
    /// Restore a clipped file.
    Declip(DeclipArgs),
    /// Print SDR measures for a clean/clipped/restored triple as one CSV line.
    Eval(EvalArgs),
    /// Run declippers over a corpus and a grid of input SDRs.
    Bench(BenchArgs),
}

#[derive(Args)]
pub struct ClipArgs {
    pub input: PathBuf,
    pub output: PathBuf,
    /// Input SDR to reach, in dB.
    #[arg(long, conflicts_with = "tau", required_unless_present = "tau")]
    pub target_sdr: Option<f64>,
    /// Clipping threshold relative to the normalized peak.
    #[arg(long)]
    pub tau: Option<f64>,
    /// Accepted distance to the target SDR, in dB.
    #[arg(long, default_value_t = declip_core::signal::DEFAULT_SDR_TOLERANCE_DB)]
    pub tol: f64,
    /// Output sample format (float32 or pcm16); defaults to the input's.
    #[arg(long)]
    pub format: Option<String>,
}

#[derive(Args)]
pub struct DeclipArgs {
    pub input: PathBuf,
    pub output: PathBuf,
    /// Clipping threshold; read from the input's sidecar when omitted.
    #[arg(long)]
    pub tau: Option<f64>,
    /// pa, ps, sa, ss, asa or ass (model x analysis/synthesis).
    #[arg(long)]
    pub variant: Option<String>,
    /// music or speech.
    #[arg(long)]
    pub profile: Option<String>,
    #[arg(long)]
    pub beta: Option<f64>,
    #[arg(long)]
    pub alpha: Option<f64>,
    /// Iteration cap; scientific notation such as 1e6 is accepted.
    #[arg(long)]
    pub imax: Option<String>,
    #[arg(long)]
    pub i_init: Option<usize>,
    /// Pattern file for the adaptive models.
    #[arg(long)]
    pub patterns: Option<PathBuf>,
    /// key = value preset file; flags given here override it.
    #[arg(long)]
    pub preset: Option<PathBuf>,
    /// Frame length in samples, overriding the profile.
    #[arg(long)]
    pub frame_len: Option<usize>,
    /// Clean reference, to report SDR figures in the stats line.
    #[arg(long)]
    pub reference: Option<PathBuf>,
    #[arg(long, default_value = "float32")]
    pub format: String,
    #[arg(long)]
    pub workers: Option<usize>,
}

#[derive(Args)]
pub struct EvalArgs {
    pub clean: PathBuf,
    pub degraded: PathBuf,
    pub restored: PathBuf,
    /// Clipping threshold; read from the degraded file's sidecar when omitted.
    #[arg(long)]
    pub tau: Option<f64>,
    /// Processing time in seconds, for the real-time ratio.
    #[arg(long)]
    pub runtime: Option<f64>,
    /// Print the CSV header first.
    #[arg(long)]
    pub header: bool,
}

#[derive(Args)]
pub struct BenchArgs {
    pub corpus: PathBuf,
    pub job: PathBuf,
    /// Output directory, overriding the job's output_dir.
    #[arg(long)]
    pub out_dir: Option<PathBuf>,
    #[arg(long)]
    pub workers: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(EXIT_USAGE)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    let result = match cli.command {
        Command::Clip(args) => commands::clip(&args),
        Command::Declip(args) => commands::declip(&args),
        Command::Eval(args) => commands::eval(&args),
        Command::Bench(args) => bench::run(&args),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}
