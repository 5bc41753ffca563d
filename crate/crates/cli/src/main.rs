mod commands;
mod plot;
mod report;
mod runs;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use crate::runs::CliError;

/// Attributed graph clustering experiments: training, evaluation, ablations,
/// parameter sweeps, baselines and reports.
#[derive(Debug, Parser)]
#[command(name = "ncagc", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Train on a dataset for one or more seeds.
    Train(RunArgs),
    /// Cluster a saved checkpoint against a dataset.
    Evaluate(EvaluateArgs),
    /// Run the full model and its ablated variants.
    Ablate(AblateArgs),
    /// Sweep the neighborhood size or a grid of loss weights.
    Sweep(SweepArgs),
    /// K-means on attributes and spectral clustering on the adjacency.
    Baseline(BaselineArgs),
    /// Tables and plots from a results directory.
    Report(ReportArgs),
}

#[derive(Debug, Clone, Args)]
pub struct DataArgs {
    /// Dataset name (cora, citeseer, wiki, acm, or `toy` for a synthetic graph).
    #[arg(long)]
    pub dataset: Option<String>,
    /// Directory holding datasets.
    #[arg(long, env = "NCAGC_DATA_DIR", default_value = "data")]
    pub data_dir: PathBuf,
}

#[derive(Debug, Clone, Args)]
pub struct RunArgs {
    #[command(flatten)]
    pub data: DataArgs,
    /// Flat `key = value` config file applied on top of the preset.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Published settings to start from: `table2` (default) or `prose`.
    #[arg(long, default_value = "table2")]
    pub preset: String,
    /// Extra `key=value` overrides, applied last.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    pub overrides: Vec<String>,
    /// Seeds: a count `N` (seeds 0..N), a list `1,4,9`, or a range `2..6`.
    #[arg(long)]
    pub seeds: Option<String>,
    /// Override the number of training epochs.
    #[arg(long)]
    pub epochs: Option<usize>,
    /// Output directory.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Reuse a non-empty output directory.
    #[arg(long)]
    pub overwrite: bool,
    /// Also write the coefficient and affinity matrices as .npy files.
    #[arg(long)]
    pub export_matrices: bool,
}

#[derive(Debug, Clone, Args)]
pub struct EvaluateArgs {
    #[command(flatten)]
    pub data: DataArgs,
    #[arg(long)]
    pub checkpoint: PathBuf,
    /// Optional directory for the assignment CSV and metrics JSON.
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long)]
    pub overwrite: bool,
}

#[derive(Debug, Clone, Args)]
pub struct AblateArgs {
    #[command(flatten)]
    pub run: RunArgs,
    /// Comma-separated subset of full, wo_nbr, wo_cse, wo_att.
    #[arg(long, default_value = "full,wo_nbr,wo_cse,wo_att")]
    pub variants: String,
}

#[derive(Debug, Clone, Args)]
pub struct SweepArgs {
    #[command(flatten)]
    pub run: RunArgs,
    /// Neighborhood sizes, e.g. `3,5,7,10,15,20,30`.
    #[arg(long, conflicts_with = "lambda_grid")]
    pub k_sweep: Option<String>,
    /// Loss-weight grid, e.g. `lambda1=0.1,1,10;lambda2=1,10`.
    #[arg(long)]
    pub lambda_grid: Option<String>,
}

#[derive(Debug, Clone, Args)]
pub struct BaselineArgs {
    #[command(flatten)]
    pub data: DataArgs,
    /// kmeans, spectral or all.
    #[arg(long, default_value = "all")]
    pub method: String,
    #[arg(long)]
    pub seeds: Option<String>,
    /// Number of clusters; defaults to the dataset's class count.
    #[arg(long)]
    pub clusters: Option<usize>,
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long)]
    pub overwrite: bool,
}

#[derive(Debug, Clone, Args)]
pub struct ReportArgs {
    /// Directory produced by train, ablate, sweep or baseline.
    #[arg(long)]
    pub results: PathBuf,
    /// Where to write the report; defaults to `<results>/report`.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let outcome = match cli.command {
        Command::Train(a) => commands::train(&a),
        Command::Evaluate(a) => commands::evaluate(&a),
        Command::Ablate(a) => commands::ablate(&a),
        Command::Sweep(a) => commands::sweep(&a),
        Command::Baseline(a) => commands::baseline(&a),
        Command::Report(a) => report::report(&a),
    };
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Usage(msg) => f.write_str(msg),
            CliError::Core(e) => write!(f, "{e}"),
        }
    }
}
