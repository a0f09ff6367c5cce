//! `solstab` command line: argument grammar, dispatch and exit codes.
//!
//! Exit codes: 0 success or PASS, 1 verification FAIL, 2 usage error,
//! 3 numerical failure reported by the library.

use std::ffi::OsString;
use std::path::PathBuf;

use clap::{Args, CommandFactory, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use solstab::Error;

mod commands;
mod output;
pub mod range;

pub const EXIT_OK: i32 = 0;
pub const EXIT_FAIL: i32 = 1;
pub const EXIT_USAGE: i32 = 2;
pub const EXIT_NUMERICAL: i32 = 3;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error(transparent)]
    Core(#[from] Error),
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Core(e.into())
    }
}

impl From<serde_json::Error> for CliError {
    fn from(e: serde_json::Error) -> Self {
        CliError::Core(e.into())
    }
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => EXIT_USAGE,
            CliError::Core(e) => match e {
                Error::InvalidParams(_)
                | Error::OutOfRange { .. }
                | Error::DegenerateInput(_)
                | Error::PhaseRestrictionViolated { .. }
                | Error::Format(_)
                | Error::Io(_)
                | Error::Json(_) => EXIT_USAGE,
                _ => EXIT_NUMERICAL,
            },
        }
    }
}

#[derive(Debug, Parser, Serialize)]
#[command(name = "solstab", version, about = "Stability of multi-soliton sums for Δu − u + |u|^{p−1}u = 0")]
pub struct Cli {
    /// Worker threads for sweeps (default: all cores).
    #[arg(long, global = true)]
    pub jobs: Option<usize>,
    /// Directory caching ground states between runs.
    #[arg(long, global = true)]
    pub cache_dir: Option<PathBuf>,
    /// Suppress the summary printed on stdout.
    #[arg(long, global = true)]
    pub quiet: bool,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand, Serialize)]
#[serde(tag = "subcommand", rename_all = "kebab-case")]
pub enum Command {
    /// Solve for the radial ground state Q and write it as JSON.
    GroundState(GroundStateArgs),
    /// Tabulate ψ and the stability modulus F over decades of s.
    SpecialFn(SpecialFnArgs),
    /// Evaluate an interaction integral over separations and fit its law.
    InteractionScan(ScanArgs),
    /// Build the sharp example for a chain of solitons at one separation.
    SharpExample(SharpArgs),
    /// Fit the modulation of a field snapshot near a soliton sum.
    Decompose(DecomposeArgs),
    /// Run a verification sweep; exits 1 when a check fails.
    Verify(VerifyArgs),
    /// Rotate a point set so that one direction separates all of it.
    ProjectPoints(ProjectArgs),
    /// Spectrum of the linearized operator in one angular sector.
    Spectrum(SpectrumArgs),
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::GroundState(_) => "ground-state",
            Command::SpecialFn(_) => "special-fn",
            Command::InteractionScan(_) => "interaction-scan",
            Command::SharpExample(_) => "sharp-example",
            Command::Decompose(_) => "decompose",
            Command::Verify(_) => "verify",
            Command::ProjectPoints(_) => "project-points",
            Command::Spectrum(_) => "spectrum",
        }
    }
}

#[derive(Debug, Args, Serialize, Clone, Copy)]
pub struct ProfileArgs {
    #[arg(long)]
    pub d: usize,
    #[arg(long)]
    pub p: f64,
    /// Ground-state tolerance.
    #[arg(long, default_value_t = 1e-10)]
    pub tol: f64,
    /// Truncation radius of the ground state.
    #[arg(long)]
    pub r_max: Option<f64>,
}

#[derive(Debug, Args, Serialize)]
pub struct GroundStateArgs {
    #[command(flatten)]
    pub profile: ProfileArgs,
    #[arg(long, default_value = "ground_state.json")]
    pub out: PathBuf,
    /// Also write `r,Q,dQ` as CSV.
    #[arg(long)]
    pub csv: Option<PathBuf>,
}

#[derive(Debug, Args, Serialize)]
pub struct SpecialFnArgs {
    #[arg(long, required_unless_present = "branches")]
    pub d: Option<usize>,
    #[arg(long, required_unless_present = "branches")]
    pub p: Option<f64>,
    /// log10 of s as a range, e.g. -12:-1:0.25.
    #[arg(long, default_value = "-12:-1:0.25", allow_hyphen_values = true)]
    pub log10_s: String,
    /// Tabulate the five branches of F at representative (d, p) instead.
    #[arg(long)]
    pub branches: bool,
    #[arg(long, default_value = "fdp.csv")]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Copy, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum ScanKind {
    Overlap,
    SquareSquare,
    Subquadratic,
    Gradient,
}

#[derive(Debug, Args, Serialize)]
pub struct ScanArgs {
    #[arg(long, value_enum)]
    pub kind: ScanKind,
    #[command(flatten)]
    pub profile: ProfileArgs,
    /// Exponents of the overlap integral ∫Q^α Q^β(·+R e₁); default α = p, β = 1.
    #[arg(long)]
    pub alpha: Option<f64>,
    #[arg(long)]
    pub beta: Option<f64>,
    /// Separations, e.g. 10:24:1.
    #[arg(long = "R", default_value = "10:24:1")]
    pub r: String,
    #[arg(long, default_value = "scan.csv")]
    pub out: PathBuf,
}

#[derive(Debug, Args, Serialize)]
pub struct SharpArgs {
    #[command(flatten)]
    pub profile: ProfileArgs,
    #[arg(long, default_value_t = 2)]
    pub m: usize,
    #[arg(long = "R")]
    pub r: f64,
    /// Grid points per axis (default depends on d).
    #[arg(long)]
    pub n: Option<usize>,
    #[arg(long)]
    pub dealias: bool,
    /// Smallest separation admitted by the construction.
    #[arg(long, default_value_t = 10.0)]
    pub floor: f64,
    #[arg(long, default_value = "sharp_example.json")]
    pub out: PathBuf,
    /// Binary snapshot of u (with a JSON sidecar).
    #[arg(long)]
    pub snapshot: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum ModeArg {
    Translations,
    Phases,
    Amplitudes,
}

#[derive(Debug, Args, Serialize)]
pub struct DecomposeArgs {
    /// Field snapshot written by `sharp-example --snapshot` or the library.
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long)]
    pub p: f64,
    #[arg(long, default_value_t = 1e-10)]
    pub tol: f64,
    /// Initial centers as `x1,y1;x2,y2`.
    #[arg(long, allow_hyphen_values = true)]
    pub centers: String,
    /// Initial phases in radians, one per center (default all zero).
    #[arg(long, allow_hyphen_values = true)]
    pub phases: Option<String>,
    #[arg(long, value_enum, default_value = "translations")]
    pub mode: ModeArg,
    #[arg(long, default_value_t = 1e-10)]
    pub fit_tol: f64,
    #[arg(long, default_value = "decomposition.json")]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Copy, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum VerifyCase {
    /// Sharp examples over a separation sweep.
    Sharp,
    /// u = (1 + ε)Q.
    Scaled,
    /// u = e^{iθ}(1 + ε)Q.
    ComplexSingle,
    /// Complex pair with prescribed phases, perturbed by ε.
    ComplexMulti,
    /// ln-ln correction of the three-dimensional square-square law.
    LogCorrection,
}

#[derive(Debug, Args, Serialize)]
pub struct VerifyArgs {
    #[arg(long, value_enum)]
    pub case: VerifyCase,
    #[command(flatten)]
    pub profile: ProfileArgs,
    #[arg(long, default_value_t = 2)]
    pub m: usize,
    #[arg(long = "R", default_value = "10:18:2")]
    pub r: String,
    #[arg(long, default_value = "1e-4,1e-3,1e-2")]
    pub eps: String,
    /// Allowed max/min spread of each ratio.
    #[arg(long, default_value_t = 5.0)]
    pub bracket: f64,
    #[arg(long)]
    pub n: Option<usize>,
    /// Global phase of the single complex soliton.
    #[arg(long, default_value_t = 0.0, allow_hyphen_values = true)]
    pub theta: f64,
    /// Phases in radians of the complex pair.
    #[arg(long, default_value = "0,0", allow_hyphen_values = true)]
    pub phases: String,
    /// Threshold c of the phase restriction.
    #[arg(long, default_value_t = 0.5)]
    pub threshold: f64,
    /// Refuse configurations that violate the phase restriction.
    #[arg(long)]
    pub strict: bool,
    #[arg(long, default_value = "verify.csv")]
    pub out: PathBuf,
}

#[derive(Debug, Args, Serialize)]
pub struct ProjectArgs {
    /// Points as `x1,y1;x2,y2`.
    #[arg(long, allow_hyphen_values = true, conflicts_with = "input")]
    pub points: Option<String>,
    /// CSV file with one point per line.
    #[arg(long)]
    pub input: Option<PathBuf>,
    /// Target separation of projections of distinct points.
    #[arg(long, default_value_t = 0.1)]
    pub delta: f64,
    #[arg(long, default_value = "projection.json")]
    pub out: PathBuf,
}

#[derive(Debug, Args, Serialize)]
pub struct SpectrumArgs {
    #[command(flatten)]
    pub profile: ProfileArgs,
    /// Angular sector (parity class in one dimension).
    #[arg(long, default_value_t = 0)]
    pub ell: usize,
    #[arg(long, default_value_t = 4)]
    pub n_eigs: usize,
    /// Radial step.
    #[arg(long, default_value_t = 0.005)]
    pub h: f64,
    #[arg(long = "radius", default_value_t = 40.0)]
    pub radius: f64,
    /// Include the spectral gap κ.
    #[arg(long)]
    pub kappa: bool,
    #[arg(long, default_value = "spectrum.json")]
    pub out: PathBuf,
    /// Eigenvectors as CSV.
    #[arg(long)]
    pub vectors: Option<PathBuf>,
}

/// Parses `argv` (including the program name), runs the subcommand and returns the exit code.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
        }
    };
    match execute(&cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            if let CliError::Usage(_) = e {
                if let Some(sub) = Cli::command().find_subcommand_mut(cli.command.name()) {
                    eprintln!("\n{}", sub.render_usage());
                }
            }
            e.exit_code()
        }
    }
}

fn execute(cli: &Cli) -> Result<i32, CliError> {
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(j) = cli.jobs {
        if j == 0 {
            return Err(CliError::Usage("--jobs must be at least 1".into()));
        }
        builder = builder.num_threads(j);
    }
    let pool = builder.build().map_err(|e| CliError::Usage(format!("thread pool: {e}")))?;
    pool.install(|| commands::dispatch(cli))
}
