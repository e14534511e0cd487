use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use mid_core::{ErrorCategory, MidError};

mod commands;
mod output;
mod svg;

use output::Format;

#[derive(Parser)]
#[command(name = "mid", version, about = "Fit and query maximum interpretation decomposition surrogates")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Fit a surrogate to a CSV of features and predictions.
    Fit(FitArgs),
    /// Effect values on a grid for one or more terms.
    Effects(EffectsArgs),
    /// Mean absolute effect of every term over a dataset.
    Importance(QueryArgs),
    /// Per-term decomposition of one row's prediction.
    Breakdown(BreakdownArgs),
    /// Individual conditional expectation curves for one variable.
    Ice(IceArgs),
    /// Exact Shapley values derived from the fitted effects.
    Shap(QueryArgs),
    /// Partial dependence of a fitted model or a builtin function.
    Pd(PdArgs),
    /// Friedman's H-statistic for feature pairs.
    Hstat(HstatArgs),
    /// Generate a synthetic scenario, fit it and report.
    Simulate(SimulateArgs),
    /// Time the solver strategies on ring-shaped data.
    Bench(BenchArgs),
}

#[derive(Args)]
struct FitArgs {
    data: PathBuf,
    #[arg(long)]
    pred_col: String,
    #[arg(long, default_value_t = 2)]
    order: usize,
    /// Knot counts for main effects and interactions.
    #[arg(long, default_value = "25,5")]
    k: String,
    /// Explicit terms such as x1,x2,x1:x2 (overrides --order).
    #[arg(long, value_delimiter = ',')]
    terms: Option<Vec<String>>,
    #[arg(long, value_enum)]
    encoding: Option<EncodingArg>,
    #[command(flatten)]
    solver: SolverArgs,
    /// Columns to read as categorical.
    #[arg(long, value_delimiter = ',')]
    categorical: Vec<String>,
    /// Columns that must parse as numeric.
    #[arg(long, value_delimiter = ',')]
    numeric: Vec<String>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct SolverArgs {
    #[arg(long, default_value = "nullspace_svd")]
    method: String,
    /// Penalty factor for the penalty method.
    #[arg(long)]
    kappa: Option<f64>,
    /// Relative singular-value cutoff.
    #[arg(long)]
    rank_tol: Option<f64>,
}

#[derive(Clone, Copy, ValueEnum)]
enum EncodingArg {
    Linear,
    Step,
    Indicator,
}

#[derive(Args)]
struct OutArgs {
    #[arg(long, value_enum, default_value = "csv")]
    format: Format,
    /// Output file; stdout when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct EffectsArgs {
    model: PathBuf,
    /// Terms to export (repeatable or comma separated); all when omitted.
    #[arg(long, value_delimiter = ',')]
    term: Vec<String>,
    /// Grid points per numeric feature for main effects.
    #[arg(long, default_value_t = 101)]
    grid: usize,
    /// Grid points per numeric feature for interactions.
    #[arg(long, default_value_t = 25)]
    pair_grid: usize,
    /// Add both main effects to interaction surfaces.
    #[arg(long)]
    include_main: bool,
    #[command(flatten)]
    out: OutArgs,
}

#[derive(Args)]
struct QueryArgs {
    model: PathBuf,
    data: PathBuf,
    #[command(flatten)]
    out: OutArgs,
}

#[derive(Args)]
struct BreakdownArgs {
    model: PathBuf,
    data: PathBuf,
    /// 1-based row number.
    #[arg(long, default_value_t = 1)]
    row: usize,
    #[command(flatten)]
    out: OutArgs,
}

#[derive(Args)]
struct IceArgs {
    model: PathBuf,
    data: PathBuf,
    #[arg(long)]
    variable: String,
    #[arg(long, default_value_t = 51)]
    grid: usize,
    /// Subtract each curve's value at the first grid point.
    #[arg(long)]
    centered: bool,
    /// Sweep only this term instead of the full prediction.
    #[arg(long)]
    term: Option<String>,
    #[command(flatten)]
    out: OutArgs,
}

#[derive(Args)]
struct PredictorArgs {
    /// Fitted model file.
    #[arg(long, conflicts_with = "builtin", required_unless_present = "builtin")]
    model: Option<PathBuf>,
    /// Builtin function: friedman1, stability_a or stability_b.
    #[arg(long)]
    builtin: Option<String>,
    /// Column to drop from the data before predicting.
    #[arg(long)]
    pred_col: Option<String>,
}

#[derive(Args)]
struct PdArgs {
    data: PathBuf,
    #[command(flatten)]
    predictor: PredictorArgs,
    /// One feature, or two separated by a comma.
    #[arg(long, value_delimiter = ',', required = true)]
    features: Vec<String>,
    #[arg(long, default_value_t = 51)]
    grid: usize,
    #[command(flatten)]
    out: OutArgs,
}

#[derive(Args)]
struct HstatArgs {
    data: PathBuf,
    #[command(flatten)]
    predictor: PredictorArgs,
    /// Pairs such as x1:x2 (repeatable or comma separated).
    #[arg(long, value_delimiter = ',', required_unless_present = "all")]
    pair: Vec<String>,
    /// Every pair of features.
    #[arg(long)]
    all: bool,
    #[command(flatten)]
    out: OutArgs,
}

#[derive(Clone, Copy, ValueEnum)]
enum Scenario {
    Friedman,
    Stability,
}

#[derive(Args)]
struct SimulateArgs {
    #[arg(value_enum)]
    scenario: Scenario,
    /// Rows to generate (2000 for friedman, 200 for stability).
    #[arg(long)]
    n: Option<usize>,
    #[arg(long, default_value_t = 42)]
    seed: u64,
    #[arg(long, default_value = "25,5")]
    k: String,
    #[command(flatten)]
    solver: SolverArgs,
    /// Grid points for the stability curves.
    #[arg(long, default_value_t = 101)]
    grid: usize,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct BenchArgs {
    #[arg(long, default_value_t = 10_000)]
    n: usize,
    #[arg(long, default_value_t = 8)]
    d: usize,
    #[arg(long, default_value = "25,5")]
    k: String,
    #[arg(long, value_delimiter = ',', default_value = "nullspace_svd,normal_cholesky")]
    methods: Vec<String>,
    #[arg(long, default_value_t = 1)]
    reps: usize,
    #[arg(long, default_value_t = 42)]
    seed: u64,
    /// CSV copy of the timing table.
    #[arg(long)]
    out: Option<PathBuf>,
}

/// Invalid flag values found after parsing.
#[derive(Debug)]
pub struct UsageError(pub String);

impl std::fmt::Display for UsageError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for UsageError {}

fn exit_code(err: &anyhow::Error) -> u8 {
    if err.downcast_ref::<UsageError>().is_some() {
        return 2;
    }
    match err.downcast_ref::<MidError>().map(MidError::category) {
        Some(ErrorCategory::Usage) => 2,
        Some(ErrorCategory::Numerical) => 4,
        _ => 3,
    }
}

fn init_threads() -> anyhow::Result<()> {
    let Ok(raw) = std::env::var("MIDR_THREADS") else {
        return Ok(());
    };
    let n: usize = raw
        .trim()
        .parse()
        .ok()
        .filter(|&n| n > 0)
        .ok_or_else(|| UsageError(format!("MIDR_THREADS must be a positive integer, got '{raw}'")))?;
    rayon::ThreadPoolBuilder::new().num_threads(n).build_global()?;
    Ok(())
}

fn run(cli: Cli) -> anyhow::Result<()> {
    init_threads()?;
    match cli.command {
        Command::Fit(a) => commands::fit(a),
        Command::Effects(a) => commands::effects(a),
        Command::Importance(a) => commands::importance(a),
        Command::Breakdown(a) => commands::breakdown(a),
        Command::Ice(a) => commands::ice(a),
        Command::Shap(a) => commands::shap(a),
        Command::Pd(a) => commands::pd(a),
        Command::Hstat(a) => commands::hstat(a),
        Command::Simulate(a) => commands::simulate(a),
        Command::Bench(a) => commands::bench(a),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}
