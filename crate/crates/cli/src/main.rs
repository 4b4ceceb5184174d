//! Command-line front end: exact composition kernels, M-type quantization,
//! identification-code construction and evaluation, and verification sweeps.
//!
//! Every run is fully determined by its flags and seed; outputs echo the
//! config and carry no timestamps, so re-runs reproduce byte-identical files.

mod channel_spec;
mod commands;
mod formats;

use std::path::PathBuf;

use anyhow::Result;
use clap::{Args, Parser, Subcommand};

/// Default cap on the composition-lattice size for kernel materialization.
const DEFAULT_KERNEL_CAP: u64 = 4096;

#[derive(Parser)]
#[command(
    name = "permch",
    about = "Composition kernels, M-type quantization, and identification codes for noisy permutation channels",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
pub(crate) struct CommonOpts {
    /// Alphabet size.
    #[arg(long)]
    pub(crate) q: usize,
    /// Channel: identity | bsc:p | uniform-mix:g | path to a JSON matrix.
    #[arg(long = "U", value_name = "SPEC")]
    pub(crate) u: String,
    /// Worker threads (0 = available parallelism).
    #[arg(long, default_value_t = 0)]
    pub(crate) jobs: usize,
    /// Cap on the lattice size for kernel materialization; the
    /// PERMCH_KERNEL_CAP environment variable overrides the default.
    #[arg(long)]
    pub(crate) kernel_cap: Option<u64>,
}

impl CommonOpts {
    pub(crate) fn kernel_cap(&self) -> u64 {
        self.kernel_cap
            .or_else(|| {
                std::env::var("PERMCH_KERNEL_CAP")
                    .ok()
                    .and_then(|v| v.parse().ok())
            })
            .unwrap_or(DEFAULT_KERNEL_CAP)
    }
}

#[derive(Subcommand)]
enum Command {
    /// Build the exact composition-to-composition kernel and write it as JSON.
    Kernel {
        #[command(flatten)]
        common: CommonOpts,
        /// Block length.
        #[arg(long)]
        n: u32,
        /// Output path for the kernel JSON.
        #[arg(long, alias = "kernel-out")]
        out: PathBuf,
        /// Cross-check every row against the brute-force string-enumeration
        /// oracle (needs q^n at most ~10^6).
        #[arg(long)]
        oracle: bool,
    },
    /// Quantize a distribution to an exact M-type distribution.
    Quantize {
        /// Alphabet size.
        #[arg(long)]
        q: usize,
        /// Block length.
        #[arg(long)]
        n: u32,
        /// Denominator M (with an optional explicit cell side --a).
        #[arg(long = "M")]
        m: Option<u64>,
        /// Cell side for the two-stage scheme; defaults to the value implied
        /// by --c, or to n+1 (a single cell) when only --M is given.
        #[arg(long)]
        a: Option<u32>,
        /// Resolvability knob; picks the cell side and denominator.
        #[arg(long)]
        c: Option<f64>,
        /// Input distribution: {"support": ...} JSON, or a bare mass array
        /// over Hamming weights (q = 2).
        #[arg(long)]
        input: PathBuf,
        /// Output path for the M-type JSON.
        #[arg(long)]
        out: PathBuf,
        /// Optional CSV report of the distortion accounting.
        #[arg(long)]
        report: Option<PathBuf>,
        /// Optional JSON export of the Gray-like cell order the two-stage
        /// scheme walked.
        #[arg(long)]
        order_out: Option<PathBuf>,
        /// Optional channel; with it, the report carries the exact measured
        /// output distortion.
        #[arg(long = "U", value_name = "SPEC")]
        u: Option<String>,
        /// Cap on the lattice size for kernel materialization.
        #[arg(long)]
        kernel_cap: Option<u64>,
    },
    /// Build and evaluate identification codes.
    Idcode {
        #[command(subcommand)]
        action: commands::IdcodeAction,
    },
    /// Run verification sweeps and write CSV reports; exits nonzero when any
    /// check fails.
    Verify {
        #[command(flatten)]
        common: CommonOpts,
        /// Block-length grid: single value, comma list, or `a..b` (doubling).
        #[arg(long)]
        n: String,
        /// Suite: all | single-shift | distance | weight-transfer |
        /// resolvability | multinomial.
        #[arg(long, default_value = "all")]
        suite: String,
        /// Root seed for the sweep.
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Per-point sample or trial count.
        #[arg(long, default_value_t = 10)]
        trials: u64,
        /// Resolvability knob for the collision demo.
        #[arg(long, default_value_t = 2.0)]
        c: f64,
        /// Output CSV path; the multinomial sweep goes to a sibling file
        /// with suffix `.multinomial.csv`.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn main() {
    let cli = Cli::parse();
    if let Err(err) = run(cli) {
        eprintln!("error: {err:#}");
        std::process::exit(1);
    }
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Kernel {
            common,
            n,
            out,
            oracle,
        } => commands::cmd_kernel(&common, n, &out, oracle),
        Command::Quantize {
            q,
            n,
            m,
            a,
            c,
            input,
            out,
            report,
            order_out,
            u,
            kernel_cap,
        } => commands::cmd_quantize(commands::QuantizeOpts {
            q,
            n,
            m,
            a,
            c,
            input,
            out,
            report,
            order_out,
            u,
            kernel_cap: kernel_cap
                .or_else(|| {
                    std::env::var("PERMCH_KERNEL_CAP")
                        .ok()
                        .and_then(|v| v.parse().ok())
                })
                .unwrap_or(DEFAULT_KERNEL_CAP),
        }),
        Command::Idcode { action } => commands::cmd_idcode(action),
        Command::Verify {
            common,
            n,
            suite,
            seed,
            trials,
            c,
            out,
        } => commands::cmd_verify(&common, &n, &suite, seed, trials, c, out.as_deref()),
    }
}
