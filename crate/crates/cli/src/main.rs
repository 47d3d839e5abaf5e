//! `hemo`: simulate, build snapshot datasets, train and evaluate surrogates,
//! predict curves and estimate stenosis degrees from the command line.

mod commands;
mod manifest;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use hemo_core::pipeline::SnapshotProtocol;
use hemo_core::{Error, ErrorKind};

/// Exit codes: 0 success, 2 usage or validation, 3 numerical failure,
/// 4 missing artifact.
#[derive(Parser, Debug)]
#[command(name = "hemo", version, about = "1-D arterial network simulation and kernel surrogates")]
pub struct Cli {
    /// Directory searched for network files given by bare name.
    #[arg(long, global = true, env = "HEMO_CONFIG_DIR")]
    pub config_dir: Option<PathBuf>,

    /// Worker threads for concurrent runs (default: all cores).
    #[arg(long, global = true)]
    pub jobs: Option<usize>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Run the full model at one stenosis degree and write the curves.
    Simulate(SimulateArgs),
    /// Build snapshot datasets on equispaced degree grids.
    Snapshot(SnapshotArgs),
    /// Train one cross-validated surrogate per monitored curve.
    Train(TrainArgs),
    /// Compare surrogates with full-model test data.
    Eval(EvalArgs),
    /// Evaluate a surrogate at one stenosis degree.
    Predict(PredictArgs),
    /// Estimate the stenosis degree from a measured curve.
    Estimate(EstimateArgs),
    /// Time surrogate evaluation against the full model.
    Bench(BenchArgs),
}

#[derive(Args, Debug, Clone)]
pub struct ProtocolArgs {
    /// End of the healthy warm-up, s.
    #[arg(long, default_value_t = 20.0)]
    pub warmup_end: f64,
    /// End of each run, s.
    #[arg(long, default_value_t = 30.0)]
    pub final_time: f64,
    /// Start of the recorded window, s.
    #[arg(long, default_value_t = 29.0)]
    pub record_start: f64,
    /// Samples per second in the recorded window.
    #[arg(long, default_value_t = 400.0)]
    pub sample_rate: f64,
    /// Solver time step, s.
    #[arg(long, default_value_t = hemo_core::DEFAULT_DT)]
    pub dt: f64,
    /// Directory for cached warm-up states (default: <out>/cache).
    #[arg(long)]
    pub cache: Option<PathBuf>,
}

impl ProtocolArgs {
    pub fn protocol(&self) -> SnapshotProtocol {
        SnapshotProtocol {
            warmup_end: self.warmup_end,
            final_time: self.final_time,
            record_start: self.record_start,
            sample_rate: self.sample_rate,
            dt: self.dt,
            ..SnapshotProtocol::default()
        }
    }
}

#[derive(Args, Debug)]
pub struct SimulateArgs {
    /// Network file, or a bare name looked up in the config directory
    /// (`desk` is built in).
    #[arg(long)]
    pub network: String,
    /// Stenosis degree R_s in [0, 1].
    #[arg(long, allow_hyphen_values = true)]
    pub rs: f64,
    #[arg(long, default_value = "out")]
    pub out: PathBuf,
    #[command(flatten)]
    pub protocol: ProtocolArgs,
}

#[derive(Args, Debug)]
pub struct SnapshotArgs {
    #[arg(long)]
    pub network: String,
    /// Training set sizes; each writes d<N>.csv.
    #[arg(long, value_delimiter = ',', default_value = "5,10,20,40,80,160,320,640")]
    pub sizes: Vec<usize>,
    /// Size of the test set written to test.csv (0 for none).
    #[arg(long, default_value_t = 1000)]
    pub test: usize,
    #[arg(long, default_value = "data")]
    pub out: PathBuf,
    #[command(flatten)]
    pub protocol: ProtocolArgs,
}

#[derive(Args, Debug)]
pub struct TrainArgs {
    /// Dataset file written by `snapshot`.
    #[arg(long)]
    pub dataset: PathBuf,
    #[arg(long, default_value = "models")]
    pub out: PathBuf,
    #[arg(long, default_value_t = 42)]
    pub seed: u64,
    /// Cross-validation folds (default: min(10, N)).
    #[arg(long)]
    pub folds: Option<usize>,
    /// Kernel: gaussian, or wendland with --smoothness.
    #[arg(long, default_value = "gaussian")]
    pub kernel: String,
    #[arg(long, default_value_t = 1)]
    pub smoothness: u8,
    /// Shape grid override.
    #[arg(long, value_delimiter = ',')]
    pub shapes: Option<Vec<f64>>,
    /// Regularisation grid override.
    #[arg(long, value_delimiter = ',')]
    pub lambdas: Option<Vec<f64>>,
    /// Train only these series (e.g. distal/pressure).
    #[arg(long, value_delimiter = ',')]
    pub series: Option<Vec<String>>,
}

#[derive(Args, Debug)]
pub struct EvalArgs {
    /// Directory of model files written by `train`.
    #[arg(long)]
    pub models: PathBuf,
    /// Test dataset file.
    #[arg(long)]
    pub test: PathBuf,
    #[arg(long, default_value = "reports")]
    pub out: PathBuf,
    /// Timed passes over the test inputs.
    #[arg(long, default_value_t = 100)]
    pub repeats: usize,
}

#[derive(Args, Debug)]
pub struct PredictArgs {
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long, allow_hyphen_values = true)]
    pub rs: f64,
    /// Output file (default: standard output).
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct EstimateArgs {
    #[arg(long)]
    pub model: PathBuf,
    /// Measured curve: CSV with time and value columns.
    #[arg(long, conflicts_with = "truth")]
    pub curve: Option<PathBuf>,
    /// True degree for a synthetic measurement.
    #[arg(long)]
    pub truth: Option<f64>,
    /// Network for the synthetic measurement; without it the surrogate
    /// itself generates the curve.
    #[arg(long, requires = "truth")]
    pub network: Option<String>,
    /// Noise level σ: y = f + σ·v, v uniform in (0, 1).
    #[arg(long, default_value_t = 0.0)]
    pub noise: f64,
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    /// Points of the cost profile scan (0 to skip).
    #[arg(long, default_value_t = 1001)]
    pub scan: usize,
    #[arg(long, default_value = "estimate.json")]
    pub out: PathBuf,
    #[command(flatten)]
    pub protocol: ProtocolArgs,
}

#[derive(Args, Debug)]
pub struct BenchArgs {
    #[arg(long)]
    pub model: PathBuf,
    /// Equally spaced inputs per pass.
    #[arg(long, default_value_t = 1000)]
    pub inputs: usize,
    #[arg(long, default_value_t = 100)]
    pub repeats: usize,
    /// Network for the full-model reference time.
    #[arg(long)]
    pub network: Option<String>,
    /// Output table (default: standard output only).
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[command(flatten)]
    pub protocol: ProtocolArgs,
}

fn exit_code(e: &Error) -> u8 {
    match e.kind() {
        ErrorKind::Usage => 2,
        ErrorKind::Numerical => 3,
        ErrorKind::MissingArtifact => 4,
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(jobs) = cli.jobs {
        if jobs == 0 {
            eprintln!("error: --jobs must be >= 1");
            return ExitCode::from(2);
        }
        // only fails if a pool already exists, which cannot happen here
        let _ = rayon::ThreadPoolBuilder::new().num_threads(jobs).build_global();
    }
    match commands::run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
