use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;

use clap::{Args, Parser, Subcommand, ValueEnum};
use predictability::criticality::RankBinning;
use predictability::predictors::MAX_ORDER;
use predictability::{Estimator, LzMode};
use serde::Serialize;

#[derive(Debug, Parser, Serialize)]
#[command(name = "predictability", version, about = "Predictability analysis of symbolic mobility sequences")]
pub struct Cli {
    /// Worker threads for per-user analyses [default: number of processors]
    #[arg(long, global = true, value_parser = positive_usize)]
    pub jobs: Option<usize>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Command {
    /// Discretize GPS trajectories into a canonical sequence file
    Ingest(IngestArgs),
    /// Per-user entropy estimates and predictability bounds
    Entropy(EntropyArgs),
    /// Upper bound on predictability from an entropy and a location count
    Bound(BoundArgs),
    /// Online next-symbol prediction accuracy per user
    Predict(PredictArgs),
    /// Mutual information as a function of separation (CSV)
    Mi(MiArgs),
    /// Power-law fit of a sample, or decay classification of MI curves
    Fit(FitArgs),
    /// Rank-frequency distribution of symbols (CSV)
    Rank(RankArgs),
    /// Dwell-time distribution from raw trajectories (CSV)
    Dwell(DwellArgs),
    /// Generate synthetic sequences with known properties
    Synth(SynthArgs),
    /// Dataset-level summary of entropy and prediction results
    Report(ReportArgs),
}

#[derive(Debug, Args, Serialize)]
pub struct GridArgs {
    /// Grid cell edge in meters
    #[arg(long, default_value_t = predictability::trajectory::DEFAULT_CELL_SIZE_M, value_parser = positive_f64)]
    pub cell_size: f64,

    /// Shortest stay kept as a visit, in seconds
    #[arg(long, default_value_t = predictability::trajectory::DEFAULT_MIN_DWELL_S, value_parser = nonnegative_f64)]
    pub min_dwell: f64,
}

#[derive(Debug, Clone, Copy, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Sampling {
    /// One symbol per stay of at least --min-dwell seconds
    Visits,
    /// One symbol per GPS fix
    Samples,
}

#[derive(Debug, Args, Serialize)]
pub struct IngestArgs {
    /// PLT file, directory of PLT files, or user_id,timestamp,lat,lon CSV
    #[arg(long, short)]
    pub input: PathBuf,

    /// Canonical sequence file; `-` for stdout
    #[arg(long, short)]
    pub output: Option<PathBuf>,

    #[command(flatten)]
    pub grid: GridArgs,

    #[arg(long, value_enum, default_value_t = Sampling::Visits)]
    pub sampling: Sampling,

    /// User id for a single PLT file [default: file stem]
    #[arg(long)]
    pub user: Option<String>,
}

#[derive(Debug, Clone, Copy, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum ModeArg {
    Paper,
    Kontoyiannis,
}

impl From<ModeArg> for LzMode {
    fn from(m: ModeArg) -> Self {
        match m {
            ModeArg::Paper => LzMode::Paper,
            ModeArg::Kontoyiannis => LzMode::Kontoyiannis,
        }
    }
}

#[derive(Debug, Clone, Copy, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum EstimatorArg {
    Plugin,
    Grassberger,
}

impl From<EstimatorArg> for Estimator {
    fn from(e: EstimatorArg) -> Self {
        match e {
            EstimatorArg::Plugin => Estimator::Plugin,
            EstimatorArg::Grassberger => Estimator::Grassberger,
        }
    }
}

#[derive(Debug, Args, Serialize)]
pub struct EntropyArgs {
    /// Canonical sequence file; `-` for stdin
    #[arg(long, short, default_value = "-")]
    pub input: PathBuf,

    #[arg(long, short)]
    pub output: Option<PathBuf>,

    /// λ convention used for S_real and pi_max
    #[arg(long, value_enum, default_value_t = ModeArg::Kontoyiannis)]
    pub mode: ModeArg,

    /// Estimator for the time-uncorrelated entropy S_unc
    #[arg(long, value_enum, default_value_t = EstimatorArg::Grassberger)]
    pub estimator: EstimatorArg,
}

#[derive(Debug, Args, Serialize)]
pub struct BoundArgs {
    /// Entropy in bits per symbol
    #[arg(long, required_unless_present = "input", requires = "locations", value_parser = nonnegative_f64)]
    pub entropy: Option<f64>,

    /// Number of distinct locations
    #[arg(long, requires = "entropy", value_parser = positive_usize)]
    pub locations: Option<usize>,

    /// Per-user JSON from `entropy`, bounded user by user
    #[arg(long, short, conflicts_with_all = ["entropy", "locations"])]
    pub input: Option<PathBuf>,

    #[arg(long, short)]
    pub output: Option<PathBuf>,
}

/// Predictor selection, written `markov:k2`, `hmm:k8`, `rnn` or `rnn:h64`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ModelSpec {
    Markov { order: usize },
    Hmm { states: usize },
    Rnn { hidden: Option<usize> },
}

impl FromStr for ModelSpec {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        let (name, param) = match s.split_once(':') {
            Some((n, p)) => (n, Some(p)),
            None => (s, None),
        };
        let number = |prefix: char| -> Result<Option<usize>, String> {
            param
                .map(|p| {
                    p.strip_prefix(prefix)
                        .unwrap_or(p)
                        .parse::<usize>()
                        .map_err(|_| format!("bad parameter {p:?} in model {s:?}"))
                })
                .transpose()
        };
        match name {
            "markov" => match number('k')?.unwrap_or(1) {
                order @ 1..=MAX_ORDER => Ok(ModelSpec::Markov { order }),
                order => Err(format!("markov order {order} outside 1..={MAX_ORDER}")),
            },
            "hmm" => match number('k')?.unwrap_or(8) {
                0 => Err("hmm needs at least one state".into()),
                states => Ok(ModelSpec::Hmm { states }),
            },
            "rnn" => match number('h')? {
                Some(0) => Err("rnn needs at least one hidden unit".into()),
                hidden => Ok(ModelSpec::Rnn { hidden }),
            },
            _ => Err(format!("unknown model {s:?}; expected markov:kK, hmm:kK or rnn")),
        }
    }
}

impl fmt::Display for ModelSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ModelSpec::Markov { order } => write!(f, "markov:k{order}"),
            ModelSpec::Hmm { states } => write!(f, "hmm:k{states}"),
            ModelSpec::Rnn { hidden: Some(h) } => write!(f, "rnn:h{h}"),
            ModelSpec::Rnn { hidden: None } => write!(f, "rnn"),
        }
    }
}

impl Serialize for ModelSpec {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

#[derive(Debug, Args, Serialize)]
pub struct PredictArgs {
    #[arg(long, short, default_value = "-")]
    pub input: PathBuf,

    #[arg(long, short)]
    pub output: Option<PathBuf>,

    #[arg(long, default_value = "markov:k2")]
    pub model: ModelSpec,

    /// Leading fraction of each sequence used only for training
    #[arg(long, default_value_t = 0.5, value_parser = open_fraction)]
    pub warmup_frac: f64,

    /// Seed for HMM restarts and RNN initialization
    #[arg(long, default_value_t = 0)]
    pub seed: u64,

    /// RNN training epochs
    #[arg(long, value_parser = positive_usize)]
    pub epochs: Option<usize>,
}

#[derive(Debug, Args, Serialize)]
pub struct MiArgs {
    #[arg(long, short, default_value = "-")]
    pub input: PathBuf,

    #[arg(long, short)]
    pub output: Option<PathBuf>,

    /// Largest separation D
    #[arg(long, default_value_t = 256, value_parser = positive_usize)]
    pub dmax: usize,

    #[arg(long, value_enum, default_value_t = EstimatorArg::Grassberger)]
    pub estimator: EstimatorArg,
}

#[derive(Debug, Args, Serialize)]
pub struct FitArgs {
    /// CSV with a header row
    #[arg(long, short)]
    pub input: PathBuf,

    #[arg(long, short)]
    pub output: Option<PathBuf>,

    /// Column holding the sample [default: last column]
    #[arg(long, conflicts_with = "decay")]
    pub column: Option<String>,

    /// Fix x_min instead of choosing it by the KS distance
    #[arg(long, conflicts_with = "decay", value_parser = positive_f64)]
    pub xmin: Option<f64>,

    /// Treat the input as `mi` output and classify each user's decay law
    #[arg(long)]
    pub decay: bool,
}

#[derive(Debug, Clone, Copy, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum BinningArg {
    Raw,
    LogBinned,
}

impl From<BinningArg> for RankBinning {
    fn from(b: BinningArg) -> Self {
        match b {
            BinningArg::Raw => RankBinning::Raw,
            BinningArg::LogBinned => RankBinning::LogBinned,
        }
    }
}

#[derive(Debug, Args, Serialize)]
pub struct RankArgs {
    #[arg(long, short, default_value = "-")]
    pub input: PathBuf,

    #[arg(long, short)]
    pub output: Option<PathBuf>,

    #[arg(long, value_enum, default_value_t = BinningArg::LogBinned)]
    pub binning: BinningArg,

    /// One curve per user instead of the pooled curve
    #[arg(long)]
    pub per_user: bool,
}

#[derive(Debug, Args, Serialize)]
pub struct DwellArgs {
    /// PLT file, directory of PLT files, or user_id,timestamp,lat,lon CSV
    #[arg(long, short)]
    pub input: PathBuf,

    #[arg(long, short)]
    pub output: Option<PathBuf>,

    #[command(flatten)]
    pub grid: GridArgs,

    /// One row per visit (user,dwell_s) instead of log-binned counts
    #[arg(long)]
    pub raw: bool,
}

#[derive(Debug, Args, Serialize)]
pub struct SynthArgs {
    #[command(subcommand)]
    pub source: Source,

    /// Canonical sequence file; `-` for stdout
    #[arg(long, short, global = true)]
    pub output: Option<PathBuf>,

    /// Where to write the oracle block [default: <output>.json]
    #[arg(long, global = true)]
    pub oracle: Option<PathBuf>,

    /// User id written to the sequence file
    #[arg(long, global = true, default_value = "synthetic")]
    pub user: String,
}

#[derive(Debug, Subcommand, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Source {
    /// Sticky first-order Markov chain with a random transition matrix
    Markov {
        #[arg(long, default_value_t = 10, value_parser = positive_usize)]
        states: usize,
        #[arg(long, default_value_t = 100_000, value_parser = positive_usize)]
        n: usize,
        /// Self-transition weight mixed into each row
        #[arg(long, default_value_t = 0.0, value_parser = closed_fraction)]
        stay: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Recursive substitution grammar of length 2^depth
    Grammar {
        #[arg(long, default_value_t = 8, value_parser = positive_usize)]
        alphabet: usize,
        #[arg(long, default_value_t = 16)]
        depth: u32,
        /// Per-symbol mutation probability
        #[arg(long, default_value_t = 0.1, value_parser = closed_fraction)]
        eps: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
}

#[derive(Debug, Args, Serialize)]
pub struct ReportArgs {
    /// Per-user JSON from `entropy`
    #[arg(long)]
    pub entropy: PathBuf,

    /// Per-user JSON from `predict`; repeat for several models
    #[arg(long)]
    pub predict: Vec<PathBuf>,

    #[arg(long, short)]
    pub output: Option<PathBuf>,

    /// Dataset label [default: stem of the entropy file]
    #[arg(long)]
    pub dataset: Option<String>,
}

fn positive_usize(s: &str) -> Result<usize, String> {
    match s.parse::<usize>() {
        Ok(0) => Err("must be at least 1".into()),
        Ok(v) => Ok(v),
        Err(e) => Err(e.to_string()),
    }
}

fn finite(s: &str) -> Result<f64, String> {
    let v: f64 = s.parse().map_err(|e: std::num::ParseFloatError| e.to_string())?;
    if v.is_finite() {
        Ok(v)
    } else {
        Err("must be finite".into())
    }
}

fn positive_f64(s: &str) -> Result<f64, String> {
    finite(s).and_then(|v| if v > 0.0 { Ok(v) } else { Err("must be positive".into()) })
}

fn nonnegative_f64(s: &str) -> Result<f64, String> {
    finite(s).and_then(|v| if v >= 0.0 { Ok(v) } else { Err("must be non-negative".into()) })
}

fn closed_fraction(s: &str) -> Result<f64, String> {
    finite(s).and_then(|v| if (0.0..=1.0).contains(&v) { Ok(v) } else { Err("must lie in [0, 1]".into()) })
}

fn open_fraction(s: &str) -> Result<f64, String> {
    finite(s).and_then(|v| if v > 0.0 && v < 1.0 { Ok(v) } else { Err("must lie in (0, 1)".into()) })
}
