//! bidcraft: ingest capacity-price exports, analyze them, backtest bidding
//! strategies, and report revenue against benchmarks.
//!
//! Exit codes: 0 success, 2 usage/data error, 3 runtime error. Failures
//! print a machine-readable JSON line to stderr. `BIDCRAFT_THREADS` caps
//! worker parallelism.

mod commands;

use std::path::PathBuf;
use std::process::ExitCode;

use chrono::NaiveDate;
use clap::{Args, Parser, Subcommand};

use bidcraft_core::data::Market;

#[derive(Parser)]
#[command(name = "bidcraft", version, about = "Pay-as-bid capacity market bidding toolkit")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Convert a raw TSO export into the canonical CSV format
    Ingest(IngestArgs),
    /// Print summary statistics per market (optionally write CSV)
    Stats(StatsArgs),
    /// Autocorrelation of one market's price series
    Acf(AcfArgs),
    /// Walk-forward backtest of one or more strategies
    Backtest(RunArgs),
    /// Grid search with k-fold cross-validation over a model's default grid
    Tune(TuneArgs),
    /// Revenue as a function of the bid offset for a model strategy
    SweepOffset(SweepArgs),
    /// Aggregate backtest outputs into the per-market summary report
    Report(ReportArgs),
}

#[derive(Args)]
struct IngestArgs {
    /// Raw export CSV
    #[arg(long = "in")]
    input: PathBuf,
    /// Column mapping `date=COL,block=COL,market=COL,price=COL`
    #[arg(long = "map")]
    mapping: String,
    /// Market to extract (AFRR_POS, AFRR_NEG, MFRR_POS, MFRR_NEG)
    #[arg(long)]
    market: Market,
    /// Canonical CSV to write
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct StatsArgs {
    /// Canonical CSV
    #[arg(long)]
    data: PathBuf,
    /// Restrict to one market
    #[arg(long)]
    market: Option<Market>,
    /// Directory for stats.csv (stdout only when omitted)
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct AcfArgs {
    /// Canonical CSV
    #[arg(long)]
    data: PathBuf,
    #[arg(long)]
    market: Market,
    /// Highest lag to report (lag 42 is one week)
    #[arg(long, default_value_t = 50)]
    max_lag: usize,
    /// Directory for acf_<market>.csv (stdout only when omitted)
    #[arg(long)]
    out: Option<PathBuf>,
}

/// Flags shared by backtest and sweep-offset; every value can also come
/// from a JSON config file, with flags taking precedence.
#[derive(Args, Clone)]
struct RunArgs {
    /// JSON config file with the same keys as the flags below
    #[arg(long)]
    config: Option<PathBuf>,
    /// Canonical CSV
    #[arg(long)]
    data: Option<PathBuf>,
    #[arg(long)]
    market: Option<Market>,
    /// Last training date (inclusive)
    #[arg(long)]
    train_end: Option<NaiveDate>,
    /// Last test date (inclusive)
    #[arg(long)]
    test_end: Option<NaiveDate>,
    /// Strategy, repeatable: fixed-day|fixed-week|fixed-month|lagged-day|
    /// lagged-week|model:<kind>|tuned:<kind>|model:@spec.json
    #[arg(long = "strategy")]
    strategies: Vec<String>,
    /// fixed | weekly | monthly
    #[arg(long)]
    retrain: Option<String>,
    /// mae | mape | neg-revenue (used by tuned:<kind> strategies)
    #[arg(long)]
    scoring: Option<String>,
    /// Cross-validation folds
    #[arg(long)]
    k: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    /// on | off: apply the fitted bid offset to model strategies
    #[arg(long)]
    offset: Option<String>,
    /// Minimum admissible bid in EUR/MW
    #[arg(long)]
    floor: Option<f64>,
    /// Output directory
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct TuneArgs {
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    data: Option<PathBuf>,
    #[arg(long)]
    market: Option<Market>,
    #[arg(long)]
    train_end: Option<NaiveDate>,
    /// Model kind to tune over its default grid
    #[arg(long)]
    model: String,
    #[arg(long)]
    scoring: Option<String>,
    #[arg(long)]
    k: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct SweepArgs {
    #[command(flatten)]
    run: RunArgs,
    /// Sweep grid start (defaults to -max(forecast))
    #[arg(long)]
    delta_min: Option<f64>,
    /// Sweep grid end (defaults to +max(price))
    #[arg(long)]
    delta_max: Option<f64>,
    /// Sweep grid step
    #[arg(long, default_value_t = 0.1)]
    delta_step: f64,
}

#[derive(Args)]
struct ReportArgs {
    /// Directory holding backtest result JSON files
    #[arg(long = "in")]
    input: PathBuf,
    /// Output directory for report.csv / report.json / correlations.csv
    #[arg(long)]
    out: PathBuf,
}

fn init_thread_pool() {
    if let Ok(v) = std::env::var("BIDCRAFT_THREADS") {
        if let Ok(n) = v.parse::<usize>() {
            if n >= 1 {
                let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
            }
        }
    }
}

fn main() -> ExitCode {
    init_thread_pool();
    let cli = Cli::parse();
    let outcome = match cli.command {
        Command::Ingest(args) => commands::ingest(args),
        Command::Stats(args) => commands::stats(args),
        Command::Acf(args) => commands::acf(args),
        Command::Backtest(args) => commands::backtest(args),
        Command::Tune(args) => commands::tune(args),
        Command::SweepOffset(args) => commands::sweep_offset(args),
        Command::Report(args) => commands::report(args),
    };
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("{}", err.to_json());
            ExitCode::from(err.exit_code())
        }
    }
}
