//! The `capa` experiment harness: argument parsing, commands and their
//! file outputs. `main.rs` only forwards to [`main_with_args`].

pub mod commands;
pub mod config;
pub mod methods;
pub mod output;
pub mod plot;

use std::ffi::OsString;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

/// Process exit codes.
pub mod exit {
    pub const OK: i32 = 0;
    /// Bad usage, unreadable or invalid configuration, or a failed run.
    pub const USAGE: i32 = 1;
    /// The solver stopped at `max_iters` without meeting the tolerance.
    pub const NOT_CONVERGED: i32 = 2;
    /// At least one sweep run failed; the other rows were still written.
    pub const PARTIAL: i32 = 3;
}

#[derive(Debug, Parser)]
#[command(name = "capa", version, about = "Continuous-aperture beamforming experiments")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run the WMMSE solver once and write its convergence trace.
    Solve(SolveArgs),
    /// Sweep one scenario parameter over a list of values.
    Sweep(SweepArgs),
    /// Run several methods on one scenario and print them side by side.
    Compare(CompareArgs),
    /// Median wall time per method on one scenario.
    Bench(BenchArgs),
}

/// Flags every command accepts.
#[derive(Debug, Clone, Args)]
pub struct Common {
    /// JSON scenario file (a sweep file for `sweep`); desk-scale defaults
    /// when omitted.
    #[arg(long, value_name = "PATH")]
    pub config: Option<PathBuf>,
    /// Seed for user placement and initialisation, overriding the file.
    #[arg(long, value_name = "U64")]
    pub seed: Option<u64>,
    /// Output directory.
    #[arg(long, value_name = "DIR", env = "CAPA_OUT_DIR", default_value = ".")]
    pub out: PathBuf,
    /// Also write an SVG plot.
    #[arg(long)]
    pub plot: bool,
    /// Convergence tolerance on the change of the summed log-determinants.
    #[arg(long, value_name = "F")]
    pub epsilon: Option<f64>,
    #[arg(long, value_name = "N")]
    pub max_iters: Option<usize>,
    /// Element spacing of the discrete-array baseline, metres.
    #[arg(long, value_name = "F")]
    pub spacing: Option<f64>,
    /// Fourier truncation per axis.
    #[arg(long, value_name = "N")]
    pub nf: Option<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum InitArg {
    RandomGaussian,
    MatchedFilter,
}

#[derive(Debug, Args)]
pub struct SolveArgs {
    #[command(flatten)]
    pub common: Common,
    #[arg(long, value_enum)]
    pub init: Option<InitArg>,
    /// Binary channel cache; read when it matches the scenario, written
    /// otherwise.
    #[arg(long, value_name = "PATH")]
    pub channel_cache: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct SweepArgs {
    #[command(flatten)]
    pub common: Common,
    /// Comma-separated methods, overriding the sweep file.
    #[arg(long, value_name = "LIST")]
    pub methods: Option<String>,
    /// Worker threads.
    #[arg(long, value_name = "N", default_value_t = 1)]
    pub parallel: usize,
    /// Leave the seconds column empty so that reruns are byte-identical.
    #[arg(long)]
    pub no_timing: bool,
}

#[derive(Debug, Args)]
pub struct CompareArgs {
    #[command(flatten)]
    pub common: Common,
    #[arg(long, value_name = "LIST", default_value = "proposed,fourier,spda")]
    pub methods: String,
}

#[derive(Debug, Args)]
pub struct BenchArgs {
    #[command(flatten)]
    pub common: Common,
    #[arg(long, value_name = "LIST", default_value = "proposed,fourier,spda-wmmse")]
    pub methods: String,
    /// Timed repetitions per method after one untimed warm-up run.
    #[arg(long, value_name = "R", default_value_t = 3)]
    pub reps: usize,
}

/// Parses `args` and runs the command, returning the exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { exit::USAGE } else { exit::OK };
            let _ = e.print();
            return code;
        }
    };
    let result = match cli.command {
        Command::Solve(a) => commands::solve(&a),
        Command::Sweep(a) => commands::sweep(&a),
        Command::Compare(a) => commands::compare(&a),
        Command::Bench(a) => commands::bench(&a),
    };
    match result {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            exit::USAGE
        }
    }
}
