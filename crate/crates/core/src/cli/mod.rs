//! Command-line surface. Every command validates its inputs before computing
//! and writes each output file once, atomically.

mod commands;

use crate::error::{Error, Result};
use crate::problem::BoundaryVariant;
use clap::{Args, Parser, Subcommand, ValueEnum};
use std::ffi::OsString;
use std::io::Write;
use std::path::PathBuf;

#[derive(Debug, Parser)]
#[command(name = "invspec", version, about = "Spectral analysis of differential operators with involution")]
pub struct Cli {
    /// Run batch loops sequentially even when built with `parallel`.
    #[arg(long, global = true)]
    pub sequential: bool,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Eigenvalues of one or more boundary variants.
    Forward(ForwardArgs),
    /// Weyl matrix at one lambda, with optional solution samples.
    Weyl(WeylArgs),
    /// Characteristic functions on a rectangular lambda grid.
    Charscan(CharscanArgs),
    /// Hadamard products and their constants from spectrum files.
    Reconstruct(ReconstructArgs),
    /// Fit p and q to spectrum files.
    Invert(InvertArgs),
    /// Run a numerical self-check suite.
    Verify(VerifyArgs),
    /// Reduce to a first-order system and tabulate it.
    Reduce(ReduceArgs),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum VariantArg {
    L,
    L11,
    L12,
    L21,
    L22,
}

impl From<VariantArg> for BoundaryVariant {
    fn from(v: VariantArg) -> Self {
        match v {
            VariantArg::L => BoundaryVariant::L,
            VariantArg::L11 => BoundaryVariant::L11,
            VariantArg::L12 => BoundaryVariant::L12,
            VariantArg::L21 => BoundaryVariant::L21,
            VariantArg::L22 => BoundaryVariant::L22,
        }
    }
}

#[derive(Debug, Args)]
pub struct ForwardArgs {
    #[arg(long)]
    pub problem: PathBuf,
    /// Repeatable; defaults to the problem's own boundary condition.
    #[arg(long, value_enum, ignore_case = true)]
    pub variant: Vec<VariantArg>,
    /// Search rectangle: re_min re_max im_min im_max.
    #[arg(long, num_args = 4, value_names = ["RE0", "RE1", "IM0", "IM1"], allow_negative_numbers = true, conflicts_with = "first")]
    pub region: Option<Vec<f64>>,
    /// The n eigenvalues of smallest modulus, certified on a disk.
    #[arg(long)]
    pub first: Option<usize>,
    /// Compare against the closed-form even/odd determinant (p = q = 0 only).
    #[arg(long)]
    pub oracle: bool,
    /// A file for one variant, a directory (files <variant>.json) for several.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct WeylArgs {
    #[arg(long)]
    pub problem: PathBuf,
    #[arg(long, num_args = 2, value_names = ["RE", "IM"], allow_negative_numbers = true)]
    pub lambda: Vec<f64>,
    /// Number of equispaced nodes on [0, 1] for the solution table.
    #[arg(long, default_value_t = 101)]
    pub grid: usize,
    /// CSV of C, C', S, S' on the grid.
    #[arg(long)]
    pub csv: Option<PathBuf>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct CharscanArgs {
    #[arg(long)]
    pub problem: PathBuf,
    #[arg(long, num_args = 4, value_names = ["RE0", "RE1", "IM0", "IM1"], allow_negative_numbers = true)]
    pub region: Vec<f64>,
    /// Grid points along Re and Im.
    #[arg(long, num_args = 2, value_names = ["NRE", "NIM"], default_values_t = [41, 1])]
    pub points: Vec<usize>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ReconstructArgs {
    /// Spectrum files; each carries its variant.
    #[arg(long = "spectrum", required = true)]
    pub spectra: Vec<PathBuf>,
    #[arg(long, num_args = 2, value_names = ["RE", "IM"], allow_negative_numbers = true)]
    pub alpha: Vec<f64>,
    /// Zeros used per product (default: all).
    #[arg(long)]
    pub truncation: Option<usize>,
    #[arg(long)]
    pub no_tail: bool,
    /// Scan rectangle for the product CSVs.
    #[arg(long, num_args = 4, value_names = ["RE0", "RE1", "IM0", "IM1"], allow_negative_numbers = true)]
    pub region: Option<Vec<f64>>,
    #[arg(long, num_args = 2, value_names = ["NRE", "NIM"], default_values_t = [41, 1])]
    pub points: Vec<usize>,
    /// Output directory: constants.json and <variant>_scan.csv.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct InvertArgs {
    #[arg(long = "spectrum", required = true)]
    pub spectra: Vec<PathBuf>,
    /// Fit configuration JSON.
    #[arg(long)]
    pub config: PathBuf,
    #[arg(long, num_args = 2, value_names = ["RE", "IM"], allow_negative_numbers = true)]
    pub alpha: Vec<f64>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct VerifyArgs {
    /// asymptotics, wronskian, adjoint, cramer, firstorder or mappings.
    #[arg(long)]
    pub suite: String,
    #[arg(long)]
    pub problem: PathBuf,
    /// Second problem for the mappings suite (default: p shifted by 1).
    #[arg(long)]
    pub other: Option<PathBuf>,
    /// Restrict ray checks to one special ray (0..4).
    #[arg(long)]
    pub ray: Option<usize>,
    #[arg(long)]
    pub samples: Option<usize>,
    #[arg(long, default_value_t = 7)]
    pub seed: u64,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum ReduceForm {
    Firstorder,
}

#[derive(Debug, Args)]
pub struct ReduceArgs {
    #[arg(long)]
    pub problem: PathBuf,
    #[arg(long, value_enum, default_value = "firstorder")]
    pub form: ReduceForm,
    /// Grid nodes on [0, 1].
    #[arg(long, default_value_t = 2049)]
    pub grid: usize,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

/// Machine-readable error report.
#[derive(serde::Serialize)]
struct ErrorReport<'a> {
    error: &'a str,
    message: String,
    exit_code: i32,
}

fn report(kind: &str, message: String, code: i32) {
    let r = ErrorReport { error: kind, message, exit_code: code };
    let _ = writeln!(std::io::stderr(), "{}", serde_json::to_string(&r).expect("report serialises"));
}

/// Parses `args`, runs the command and returns the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            use clap::error::ErrorKind;
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                let _ = e.print();
                return 0;
            }
            report("UsageError", e.to_string().trim().to_string(), 1);
            return 1;
        }
    };
    match commands::dispatch(&cli) {
        Ok(code) => code,
        Err(e) => {
            let code = e.exit_code();
            report(e.kind(), e.to_string(), code);
            code
        }
    }
}

fn pair(v: &[f64], what: &str) -> Result<num_complex::Complex64> {
    match v {
        [re, im] if re.is_finite() && im.is_finite() => Ok(num_complex::Complex64::new(*re, *im)),
        _ => Err(Error::Usage(format!("{what} needs two finite numbers RE IM"))),
    }
}
