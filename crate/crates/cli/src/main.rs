//! `nmc-profiler`: generate synthetic traces, validate and analyze traces
//! into JSON reports, and run PCA over a directory of reports.

mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use nmc_core::kernels::{DEFAULT_ADDRESS_BITS, DEFAULT_WORD_SIZE};
use nmc_core::parallelism::DependencyPolicy;

#[derive(Parser)]
#[command(name = "nmc-profiler", version, about = "Trace-driven workload characterization")]
struct Cli {
    /// Worker threads for per-thread analysis (0 = all cores).
    #[arg(long, global = true, env = "NMC_PROFILER_THREADS", default_value_t = 0)]
    jobs: usize,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Write a synthetic kernel trace.
    Gen(GenArgs),
    /// Check a trace's SSA and ordering assumptions.
    Validate { trace: PathBuf },
    /// Compute every metric of a trace into a JSON report.
    Analyze(AnalyzeArgs),
    /// Principal components over a directory of reports.
    Pca(PcaArgs),
}

#[derive(Args)]
pub struct GenArgs {
    #[command(subcommand)]
    kernel: Kernel,
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    /// Independent copies of the kernel, one per thread.
    #[arg(long, global = true, default_value_t = 1)]
    threads: u32,
    #[arg(long, global = true, default_value_t = DEFAULT_WORD_SIZE)]
    word: u32,
    #[arg(long, global = true, default_value_t = DEFAULT_ADDRESS_BITS)]
    addrbits: u32,
    /// Application name written to the header (defaults to the kernel name).
    #[arg(long, global = true)]
    app: Option<String>,
    /// Output file; stdout when omitted.
    #[arg(short, long, global = true)]
    out: Option<PathBuf>,
}

#[derive(Subcommand, Clone)]
pub enum Kernel {
    Stream {
        #[arg(long, default_value_t = 10_000)]
        n: u64,
        #[arg(long, default_value_t = 8)]
        stride: u64,
        #[arg(long, default_value_t = 0, value_parser = parse_u64)]
        base: u64,
    },
    Random {
        #[arg(long, default_value_t = 10_000)]
        n: u64,
        #[arg(long, default_value_t = 1 << 24, value_parser = parse_u64)]
        space: u64,
    },
    Chain {
        #[arg(long, default_value_t = 1000)]
        n: u64,
    },
    Parallel {
        #[arg(long, default_value_t = 8)]
        n: u64,
    },
    Matmul {
        #[arg(long, default_value_t = 8)]
        dim: u64,
    },
    Dploop {
        #[arg(long, default_value_t = 64)]
        instances: u64,
        #[arg(long, default_value_t = 5)]
        body: u64,
        /// Make every instance depend on the previous one.
        #[arg(long)]
        carried: bool,
    },
}

#[derive(Args)]
pub struct AnalyzeArgs {
    trace: PathBuf,
    #[command(flatten)]
    overrides: ConfigArgs,
    /// Analyze despite validation failures.
    #[arg(long)]
    force: bool,
    /// Report file; stdout when omitted.
    #[arg(short, long)]
    out: Option<PathBuf>,
}

/// Flags overriding fields of the analysis configuration.
#[derive(Args, Default)]
pub struct ConfigArgs {
    /// TOML or JSON configuration file.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long, value_delimiter = ',')]
    line_sizes: Option<Vec<u64>>,
    #[arg(long)]
    max_line: Option<u64>,
    #[arg(long, value_delimiter = ',')]
    entropy_cuts: Option<Vec<u32>>,
    #[arg(long, value_delimiter = ',', value_parser = parse_policy)]
    policies: Option<Vec<DependencyPolicy>>,
    /// Treat store→load on the same word as a dependence.
    #[arg(long)]
    memory_deps: bool,
    #[arg(long, value_delimiter = ',')]
    features: Option<Vec<String>>,
    #[arg(short = 'k', long)]
    components: Option<usize>,
}

#[derive(Args)]
pub struct PcaArgs {
    report_dir: PathBuf,
    #[command(flatten)]
    overrides: ConfigArgs,
    /// Directory for pca.json and scores.csv (defaults to the report directory).
    #[arg(short, long)]
    out: Option<PathBuf>,
}

fn parse_u64(s: &str) -> Result<u64, String> {
    match s.strip_prefix("0x") {
        Some(hex) => u64::from_str_radix(hex, 16),
        None => s.parse(),
    }
    .map_err(|e| e.to_string())
}

fn parse_policy(s: &str) -> Result<DependencyPolicy, String> {
    match s {
        "full" => Ok(DependencyPolicy::Full),
        "smart" | "skip_index_updates" => Ok(DependencyPolicy::SkipIndexUpdates),
        _ => Err(format!("unknown policy `{s}` (expected full or smart)")),
    }
}

/// A failure with its process exit code.
pub struct Failure {
    pub code: u8,
    pub error: anyhow::Error,
}

impl Failure {
    /// Inputs exist and parse but fail a precondition.
    pub fn rejected(error: impl Into<anyhow::Error>) -> Self {
        Self {
            code: 1,
            error: error.into(),
        }
    }

    /// I/O, parse and usage errors.
    pub fn input(error: impl Into<anyhow::Error>) -> Self {
        Self {
            code: 2,
            error: error.into(),
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(cli.jobs).build_global() {
        eprintln!("warning: {e}");
    }
    let result = match cli.command {
        Command::Gen(args) => commands::gen(args),
        Command::Validate { trace } => commands::validate(&trace),
        Command::Analyze(args) => commands::analyze(args),
        Command::Pca(args) => commands::pca(args),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {:#}", f.error);
            ExitCode::from(f.code)
        }
    }
}
