//! `loopwatch`: loop-law diagnostics and gross-error correction for GPS
//! baseline networks.

mod run;
mod svg;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use loopwatch_core::GridAxis;

#[derive(Parser, Debug)]
#[command(name = "loopwatch", version, about = "Loop-law checks and blunder correction for GPS baseline networks")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Diagonal deviations of A(z)^r - A(1)^r and a clean/minor/gross verdict.
    Check(CommonArgs),
    /// Spectra of A(z) and A(1), which agree exactly when the loop law holds.
    Spectrum(CommonArgs),
    /// Minimize the trace error function over corrections to suspect arcs.
    Correct(CorrectArgs),
    /// Compare symbolic matrix powers against brute-force walk enumeration.
    Oracle(OracleArgs),
}

#[derive(Args, Debug, Clone)]
pub struct CommonArgs {
    /// Baseline CSV with header `from,to,dx,dy,dz` or `from,to,w`.
    pub input: PathBuf,
    #[arg(long, value_enum, default_value_t = CoordArg::All)]
    pub coord: CoordArg,
    /// Evaluation point, positive and different from 1.
    #[arg(long, default_value_t = 2.0)]
    pub z: f64,
    /// Comma-separated evaluation points; overrides --z.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    pub z_list: Option<Vec<f64>>,
    /// Largest walk length (default: number of points).
    #[arg(long)]
    pub rmax: Option<usize>,
    /// Per-point deviation separating minor from gross errors.
    #[arg(long, default_value_t = loopwatch_core::detect::DEFAULT_TAU)]
    pub tau: f64,
    /// Report destination (default: stdout).
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = Format::Json)]
    pub format: Format,
}

#[derive(Args, Debug, Clone)]
pub struct CorrectArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    /// Suspect baselines as `u-v,...`; ranked automatically when omitted.
    #[arg(long)]
    pub suspects: Option<String>,
    /// Number of automatically ranked suspects.
    #[arg(long, default_value_t = 2)]
    pub k: usize,
    /// Walk length for the error function (default: first failing r).
    #[arg(long)]
    pub r: Option<usize>,
    /// Sample the error function on `lo:hi:steps[,lo:hi:steps]`.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    pub surface: Option<Vec<GridAxis>>,
    /// Surface CSV destination (default: next to the input).
    #[arg(long)]
    pub surface_out: Option<PathBuf>,
    /// Also render the surface as SVG.
    #[arg(long)]
    pub svg: Option<PathBuf>,
    /// Corrected baseline CSV destination (default: next to the input).
    #[arg(long)]
    pub corrected: Option<PathBuf>,
}

#[derive(Args, Debug, Clone)]
pub struct OracleArgs {
    pub input: PathBuf,
    #[arg(long, value_enum, default_value_t = CoordArg::All)]
    pub coord: CoordArg,
    /// Largest walk length, at most 8.
    #[arg(long, default_value_t = 4)]
    pub rmax: usize,
    /// Arcs carrying symbolic correction variables, `u-v,...`.
    #[arg(long)]
    pub suspects: Option<String>,
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = Format::Json)]
    pub format: Format,
    /// Drop one entry of the symbolic matrix before powering; the oracle must
    /// then report failures.
    #[arg(long, hide = true)]
    pub negative_control: bool,
}

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq, Eq)]
pub enum CoordArg {
    X,
    Y,
    Z,
    All,
}

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq, Eq)]
pub enum Format {
    Json,
    Text,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let outcome = match cli.command {
        Command::Check(a) => run::check(&a),
        Command::Spectrum(a) => run::spectrum(&a),
        Command::Correct(a) => run::correct(&a),
        Command::Oracle(a) => run::oracle(&a),
    };
    match outcome {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}
