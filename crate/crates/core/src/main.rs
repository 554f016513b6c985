use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use armt_core::executor::{ExecOptions, ScheduleKind};
use armt_core::harness::{self, BenchMode, BenchOptions, Precision, ReportFormat, VerifyOptions};
use armt_core::{ArmtError, ModelConfig};

const EXIT_TOLERANCE: u8 = 1;
const EXIT_INPUT: u8 = 2;

#[derive(Parser)]
#[command(
    name = "armt",
    version,
    about = "Sequential vs. diagonal-batched recurrent memory transformer inference"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate seeded random weights and write a weight container.
    InitWeights(InitArgs),
    /// Check that diagonal and sequential execution produce the same logits.
    Verify(VerifyArgs),
    /// Time the executors.
    Bench(BenchArgs),
    /// Run once and write the execution trace as JSON.
    Trace(TraceArgs),
}

#[derive(Args)]
struct InitArgs {
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 8)]
    layers: usize,
    #[arg(long, default_value_t = 128)]
    d_model: usize,
    #[arg(long, default_value_t = 4)]
    heads: usize,
    #[arg(long, default_value_t = 512)]
    d_ff: usize,
    #[arg(long, default_value_t = 256)]
    vocab: usize,
    #[arg(long, default_value_t = 64)]
    segment_size: usize,
    #[arg(long, default_value_t = 8)]
    mem_tokens: usize,
    #[arg(long, default_value_t = 16)]
    d_mem: usize,
    #[arg(long, default_value_t = 3)]
    dpfp_nu: usize,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct VerifyArgs {
    #[arg(long)]
    weights: PathBuf,
    #[arg(long, num_args = 1.., value_delimiter = ',', default_values_t = [1usize, 2, 4, 8, 16, 32])]
    segments: Vec<usize>,
    /// Precisions to check; both by default.
    #[arg(long, num_args = 1.., value_delimiter = ',', default_values_t = [Precision::F32, Precision::F64])]
    precision: Vec<Precision>,
    #[arg(long, default_value = "json")]
    report: ReportFormat,
    /// Write the report here instead of stdout.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Seed for the random token inputs.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, env = "ARMT_THREADS", default_value_t = 0)]
    threads: usize,
}

#[derive(Args)]
struct BenchArgs {
    #[arg(long)]
    weights: PathBuf,
    #[arg(long, num_args = 1.., value_delimiter = ',', required = true)]
    seq_len: Vec<usize>,
    #[arg(long, num_args = 1.., value_delimiter = ',', default_values_t = [BenchMode::Sequential, BenchMode::Diagonal])]
    modes: Vec<BenchMode>,
    #[arg(long, num_args = 1.., value_delimiter = ',', env = "ARMT_THREADS", default_value = "1")]
    threads: Vec<usize>,
    #[arg(long, default_value_t = 3)]
    repeat: usize,
    #[arg(long, default_value = "f32")]
    precision: Precision,
    #[arg(long, default_value = "json")]
    report: ReportFormat,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Args)]
struct TraceArgs {
    #[arg(long)]
    weights: PathBuf,
    #[arg(long)]
    seq_len: usize,
    #[arg(long, default_value = "diagonal")]
    schedule: ScheduleKind,
    #[arg(long)]
    out: PathBuf,
    #[arg(long, env = "ARMT_THREADS", default_value_t = 0)]
    threads: usize,
}

fn output(path: Option<&Path>) -> io::Result<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(File::create(p)?)),
        None => Box::new(io::stdout().lock()),
    })
}

fn run(cli: Cli) -> Result<ExitCode, ArmtError> {
    match cli.command {
        Command::InitWeights(a) => {
            let cfg = ModelConfig {
                n_layers: a.layers,
                d_model: a.d_model,
                n_heads: a.heads,
                d_ff: a.d_ff,
                vocab_size: a.vocab,
                segment_size: a.segment_size,
                num_mem_tokens: a.mem_tokens,
                d_mem: a.d_mem,
                dpfp_nu: a.dpfp_nu,
                seed: a.seed,
                ..ModelConfig::default()
            };
            harness::init_weights(&cfg, &a.out)?;
        }
        Command::Verify(a) => {
            let opts = VerifyOptions {
                segments: a.segments,
                precisions: a.precision,
                token_seed: a.seed,
                exec: ExecOptions::with_threads(a.threads),
            };
            let report = harness::verify(&a.weights, &opts)?;
            report.write(a.report, output(a.out.as_deref())?)?;
            let mut failed = false;
            for row in report.failing_rows() {
                failed = true;
                eprintln!(
                    "tolerance exceeded at {} segments: f32 {:?} (max {}), f64 {:?} (max {})",
                    row.segments, row.rel_error_f32, report.tolerance_f32, row.rel_error_f64, report.tolerance_f64
                );
            }
            if failed {
                return Ok(ExitCode::from(EXIT_TOLERANCE));
            }
        }
        Command::Bench(a) => {
            let opts = BenchOptions {
                seq_lens: a.seq_len,
                modes: a.modes,
                threads: a.threads,
                repeat: a.repeat,
                precision: a.precision,
                token_seed: a.seed,
            };
            let report = harness::bench(&a.weights, &opts)?;
            report.write(a.report, output(a.out.as_deref())?)?;
        }
        Command::Trace(a) => {
            let trace = harness::trace(&a.weights, a.seq_len, a.schedule, &ExecOptions::with_threads(a.threads))?;
            std::fs::write(&a.out, trace.to_json())?;
        }
    }
    Ok(ExitCode::SUCCESS)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(EXIT_INPUT)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    match run(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(EXIT_INPUT)
        }
    }
}
