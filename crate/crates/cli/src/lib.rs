//! Command-line front end: certify vote files, sample votes from toy or
//! external classifiers, and run the built-in self test.

use std::io::Write;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

pub mod certify_cmd;
pub mod sample_cmd;
pub mod selftest;
pub mod votes;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("{0}")]
    Usage(String),
    #[error(transparent)]
    Clap(#[from] clap::Error),
    #[error("self test failed")]
    SelfTest,
    #[error(transparent)]
    Internal(#[from] anyhow::Error),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Parse { .. } | CliError::Usage(_) => 2,
            CliError::Clap(e) => e.exit_code(),
            CliError::SelfTest | CliError::Internal(_) => 1,
        }
    }
}

impl From<sparsecert::Error> for CliError {
    fn from(e: sparsecert::Error) -> Self {
        CliError::Internal(e.into())
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Internal(e.into())
    }
}

/// Turns a validation failure on user-supplied values into a usage error.
pub(crate) fn usage<T>(r: sparsecert::Result<T>) -> Result<T, CliError> {
    r.map_err(|e| CliError::Usage(e.to_string()))
}

#[derive(Parser, Debug)]
#[command(name = "sparsecert", version, about = "Sparsity-aware robustness certificates for discrete data")]
pub struct Cli {
    /// Worker threads (default: all cores).
    #[arg(long, global = true, env = "SPARSECERT_JOBS")]
    pub jobs: Option<usize>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Bound and certify every record of a votes file.
    Certify(CertifyArgs),
    /// Collect two-stage votes from a classifier under noise.
    Sample(SampleArgs),
    /// Check the engine against the brute-force oracle.
    Selftest(SelftestArgs),
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq)]
pub enum ModeArg {
    Binary,
    Multi,
}

#[derive(Args, Debug)]
pub struct CertifyArgs {
    #[arg(long)]
    pub votes: PathBuf,
    /// Output file (default: stdout).
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long, required_unless_present = "joint")]
    pub p_plus: Option<String>,
    #[arg(long, required_unless_present = "joint")]
    pub p_minus: Option<String>,
    /// Number of categories per coordinate.
    #[arg(short = 'K', long = "categories", default_value_t = 2)]
    pub k: u32,
    #[arg(long, default_value = "0.01")]
    pub alpha: String,
    #[arg(long, value_enum, default_value_t = ModeArg::Binary)]
    pub mode: ModeArg,
    #[arg(long, default_value_t = 0)]
    pub ra: u32,
    #[arg(long, default_value_t = 0)]
    pub rd: u32,
    #[arg(long, default_value_t = 0)]
    pub rc: u32,
    /// Emit the largest certified r_add for every r_del instead of a single verdict.
    #[arg(long, conflicts_with_all = ["grid_ra", "l0", "joint"])]
    pub frontier: bool,
    /// Largest radius explored by --frontier.
    #[arg(long, default_value_t = sparsecert::certify::DEFAULT_RADIUS_CAP)]
    pub cap: u32,
    /// Heatmap of the certified ratio over r_add in A..B (inclusive).
    #[arg(long, value_name = "A..B", requires = "grid_rd", conflicts_with_all = ["l0", "joint"])]
    pub grid_ra: Option<String>,
    #[arg(long, value_name = "A..B", requires = "grid_ra")]
    pub grid_rd: Option<String>,
    /// Certify the whole l0 ball of this radius.
    #[arg(long, conflicts_with = "joint")]
    pub l0: Option<u32>,
    /// Two independently smoothed groups, given twice as `p+,p-,ra,rd`.
    #[arg(long, num_args = 2, value_name = "P+,P-,RA,RD")]
    pub joint: Option<Vec<String>>,
}

#[derive(Args, Debug)]
pub struct SampleArgs {
    /// Built-in classifier: majority:W, constant:C[:CLASSES], parity:W,
    /// threshold:I[:T], blocks:B, linear:W0,W1,...[:BIAS].
    #[arg(long, required_unless_present = "external", conflicts_with = "external")]
    pub classifier: Option<String>,
    /// Shell command answering one class id per input line.
    #[arg(long)]
    pub external: Option<String>,
    /// Number of classes of the external classifier.
    #[arg(long, default_value_t = 2)]
    pub classes: u32,
    /// Inputs, one per line: `id v0 v1 ...`.
    #[arg(long, required_unless_present = "synthetic", conflicts_with = "synthetic")]
    pub inputs: Option<PathBuf>,
    /// Generate this many random sparse inputs instead.
    #[arg(long)]
    pub synthetic: Option<usize>,
    #[arg(long, default_value_t = 100)]
    pub dims: usize,
    /// Probability that a synthetic coordinate is non-zero.
    #[arg(long, default_value = "0.05")]
    pub density: f64,
    #[arg(long, required_unless_present = "group")]
    pub p_plus: Option<String>,
    #[arg(long, required_unless_present = "group")]
    pub p_minus: Option<String>,
    #[arg(short = 'K', long = "categories", default_value_t = 2)]
    pub k: u32,
    /// Per-group noise `NAME:LO..HI:P+,P-` (inclusive index range); repeat to cover every coordinate.
    #[arg(long, conflicts_with_all = ["p_plus", "p_minus"])]
    pub group: Vec<String>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = sparsecert::confidence::DEFAULT_SELECTION_SAMPLES)]
    pub selection: u64,
    #[arg(long, default_value_t = sparsecert::confidence::DEFAULT_ESTIMATION_SAMPLES)]
    pub estimation: u64,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct SelftestArgs {
    /// Run the larger sweeps.
    #[arg(long)]
    pub full: bool,
}

/// Parses `args` (including the program name) and runs the command. Results
/// go to `out` unless an output file is given; the summary goes to `log`.
pub fn run<I, T>(args: I, out: &mut (dyn Write + Send), log: &mut (dyn Write + Send)) -> Result<(), CliError>
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = Cli::try_parse_from(args)?;
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(j) = cli.jobs {
        if j == 0 {
            return Err(CliError::Usage("--jobs must be positive".into()));
        }
        builder = builder.num_threads(j);
    }
    let pool = builder.build().map_err(|e| CliError::Internal(e.into()))?;
    pool.install(|| match &cli.command {
        Command::Certify(a) => certify_cmd::run(a, out, log),
        Command::Sample(a) => sample_cmd::run(a, out, log),
        Command::Selftest(a) => selftest::run(a, out),
    })
}

/// Writes `text` to `path`, or to `out` when no path is given.
pub(crate) fn emit(path: Option<&PathBuf>, text: &str, out: &mut (dyn Write + Send)) -> Result<(), CliError> {
    match path {
        Some(p) => std::fs::write(p, text).map_err(|e| CliError::Internal(anyhow::anyhow!("cannot write {}: {e}", p.display()))),
        None => Ok(out.write_all(text.as_bytes())?),
    }
}
