//! Command line driver for the chordbar library: benchmarks, sparse-argument
//! pruning measurements, and a self-verification suite.

mod bench;
mod mm;
mod order;
mod verify;

use clap::{Parser, Subcommand, ValueEnum};
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Parser)]
#[command(name = "chordbar", version, about = "Benchmarks and checks for chordal barrier sweeps")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Time the factorization, projection, and completion sweeps.
    Bench(BenchArgs),
    /// Compare full and support-pruned linearized factor sweeps.
    BenchSparseHessian(SparseHessianArgs),
    /// Run the self-verification suite.
    Verify(VerifyArgs),
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum PatternKind {
    Band,
    Arrow,
    File,
    RandomChordal,
}

#[derive(clap::Args)]
pub struct BenchArgs {
    /// Pattern family to benchmark on.
    #[arg(long, value_enum, default_value = "band")]
    pub pattern: PatternKind,

    /// Matrix order for generated patterns.
    #[arg(long, default_value_t = 2000)]
    pub n: usize,

    /// Half bandwidths (band) or head widths (arrow), comma separated.
    #[arg(long, value_delimiter = ',', default_value = "10")]
    pub w: Vec<usize>,

    /// Matrix Market file, for --pattern file.
    #[arg(long)]
    pub path: Option<PathBuf>,

    /// Edge density for --pattern random-chordal.
    #[arg(long, default_value_t = 0.05)]
    pub density: f64,

    /// Seed for instance generation.
    #[arg(long, default_value_t = 1)]
    pub seed: u64,

    /// Timed repetitions per algorithm; the median is reported.
    #[arg(long, default_value_t = 3)]
    pub reps: usize,

    /// Algorithms to run, comma separated.
    #[arg(
        long,
        value_delimiter = ',',
        default_value = "projected_inverse,completion,completion_factored"
    )]
    pub algorithms: Vec<String>,

    /// Cross-check results against references when n is at most this.
    #[arg(long, default_value_t = 200)]
    pub verify_cap: usize,

    /// Refuse instances whose estimated working set exceeds this many bytes.
    #[arg(long, default_value_t = 1 << 30)]
    pub mem_cap: usize,

    /// Write the CSV here instead of stdout.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(clap::Args)]
pub struct SparseHessianArgs {
    /// Matrix order of the band pattern.
    #[arg(long, default_value_t = 5000)]
    pub n: usize,

    /// Half bandwidth of the band pattern.
    #[arg(long, default_value_t = 50)]
    pub w: usize,

    /// Number of random sparse arguments to time.
    #[arg(long, default_value_t = 10)]
    pub trials: usize,

    /// Nonzero entries per sparse argument.
    #[arg(long, default_value_t = 2)]
    pub nnz: usize,

    /// Seed for argument generation.
    #[arg(long, default_value_t = 1)]
    pub seed: u64,

    /// Write the CSV here instead of stdout.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(clap::Args)]
pub struct VerifyArgs {
    /// Only run properties whose name contains this substring.
    #[arg(long)]
    pub suite: Option<String>,

    /// Seed for instance generation.
    #[arg(long, default_value_t = 1)]
    pub seed: u64,

    /// Largest generated instance order.
    #[arg(long, default_value_t = 60)]
    pub max_n: usize,

    /// Add a synthetic error to the named property, forcing it to fail.
    #[arg(long)]
    pub inject_fault: Option<String>,
}

pub enum Failure {
    /// Bad input or an instance the tool refuses to run; exit code 2.
    Input(String),
    /// A result failed a correctness check; exit code 1.
    Check(String),
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let outcome = match cli.command {
        Command::Bench(args) => bench::run(&args),
        Command::BenchSparseHessian(args) => bench::run_sparse_hessian(&args),
        Command::Verify(args) => match verify::run(&args) {
            Ok(true) => Ok(()),
            Ok(false) => Err(Failure::Check("one or more properties failed".to_string())),
            Err(e) => Err(e),
        },
    };
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Check(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
        Err(Failure::Input(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
    }
}
