//! Command implementations. Every run is a pure function of (config file,
//! input files, seed): outputs carry no timestamps and are written
//! atomically (temp file in the target directory, then rename).

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use chrono::NaiveDate;
use serde::Deserialize;

use bidcraft_core::analysis::{build_report, offset_sweep};
use bidcraft_core::backtest::{
    walk_forward, BacktestResult, Lag, OffsetConfig, Period, Retrain, Strategy, TrailingWindow,
};
use bidcraft_core::data::{
    acf as compute_acf, ingest_csv, read_canonical_csv, summary_stats, validate,
    write_canonical_csv, build_supervised, CsvMapping, DataError, Market, MarketSeries,
    DEFAULT_HORIZON, DEFAULT_INPUT_LEN,
};
use bidcraft_core::models::{ModelKind, ModelSpec};
use bidcraft_core::tuning::{grid_search, ParamGrid, Scoring};

use crate::{AcfArgs, IngestArgs, ReportArgs, RunArgs, StatsArgs, SweepArgs, TuneArgs};

/// Failures classified for the exit code: data/usage problems exit 2,
/// runtime module errors exit 3.
#[derive(Debug)]
pub enum CmdError {
    Data(String),
    Runtime(String),
}

impl CmdError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CmdError::Data(_) => 2,
            CmdError::Runtime(_) => 3,
        }
    }

    pub fn to_json(&self) -> String {
        let (kind, message) = match self {
            CmdError::Data(m) => ("data", m),
            CmdError::Runtime(m) => ("runtime", m),
        };
        serde_json::json!({ "error": { "kind": kind, "message": message } }).to_string()
    }
}

impl From<DataError> for CmdError {
    fn from(e: DataError) -> Self {
        CmdError::Data(e.to_string())
    }
}

impl From<std::io::Error> for CmdError {
    fn from(e: std::io::Error) -> Self {
        CmdError::Data(e.to_string())
    }
}

fn runtime(e: impl std::fmt::Display) -> CmdError {
    CmdError::Runtime(e.to_string())
}

fn usage(msg: impl Into<String>) -> CmdError {
    CmdError::Data(msg.into())
}

/// Write-temp-then-rename in the target directory.
fn write_atomic(path: &Path, contents: &str) -> Result<(), CmdError> {
    if let Some(parent) = path.parent() {
        if !parent.as_os_str().is_empty() {
            fs::create_dir_all(parent)?;
        }
    }
    let tmp = path.with_file_name(format!(
        ".{}.tmp",
        path.file_name().and_then(|n| n.to_str()).unwrap_or("out")
    ));
    fs::write(&tmp, contents)?;
    fs::rename(&tmp, path)?;
    Ok(())
}

fn load_market(
    path: &Path,
    market: Market,
) -> Result<MarketSeries, CmdError> {
    let mut all = read_canonical_csv(path)?;
    all.remove(&market)
        .ok_or_else(|| usage(format!("no {market} rows in {}", path.display())))
}

// ---------------------------------------------------------------------------
// ingest
// ---------------------------------------------------------------------------

fn parse_mapping(s: &str, market: Market) -> Result<CsvMapping, CmdError> {
    let mut fields: BTreeMap<&str, &str> = BTreeMap::new();
    for part in s.split(',') {
        let (key, value) = part
            .split_once('=')
            .ok_or_else(|| usage(format!("bad mapping entry `{part}`, expected key=COL")))?;
        fields.insert(key.trim(), value.trim());
    }
    let get = |key: &str| -> Result<String, CmdError> {
        fields
            .get(key)
            .map(|v| v.to_string())
            .ok_or_else(|| usage(format!("mapping is missing `{key}=`")))
    };
    Ok(CsvMapping {
        date: get("date")?,
        block: get("block")?,
        market: get("market")?,
        price: get("price")?,
        market_filter: market,
    })
}

pub fn ingest(args: IngestArgs) -> Result<(), CmdError> {
    let mapping = parse_mapping(&args.mapping, args.market)?;
    let series = ingest_csv(&args.input, &mapping)?;
    let report = validate(&series);
    write_canonical_csv(&series, &args.out).map_err(CmdError::from)?;
    println!(
        "{}: {} slots ({} .. {}), {}",
        args.market,
        series.len(),
        series
            .first_slot()
            .map(|s| s.date.to_string())
            .unwrap_or_else(|| "-".into()),
        series
            .last_slot()
            .map(|s| s.date.to_string())
            .unwrap_or_else(|| "-".into()),
        report.summary()
    );
    println!("wrote {}", args.out.display());
    Ok(())
}

// ---------------------------------------------------------------------------
// stats / acf
// ---------------------------------------------------------------------------

pub fn stats(args: StatsArgs) -> Result<(), CmdError> {
    let all = read_canonical_csv(&args.data)?;
    let markets: Vec<Market> = match args.market {
        Some(m) => vec![m],
        None => all.keys().copied().collect(),
    };
    if markets.is_empty() {
        return Err(usage("no data"));
    }
    let mut csv = String::from("market,mean,std,min,max,q25,median,q75\n");
    println!(
        "{:<10} {:>10} {:>10} {:>10} {:>10} {:>10} {:>10} {:>10}",
        "market", "mean", "std", "min", "max", "q25", "median", "q75"
    );
    for market in markets {
        let series = all
            .get(&market)
            .ok_or_else(|| usage(format!("no {market} rows in {}", args.data.display())))?;
        let t = summary_stats(series)?;
        println!(
            "{:<10} {:>10.2} {:>10.2} {:>10.2} {:>10.2} {:>10.2} {:>10.2} {:>10.2}",
            market.to_string(),
            t.mean,
            t.std,
            t.min,
            t.max,
            t.q25,
            t.median,
            t.q75
        );
        csv.push_str(&format!(
            "{},{},{},{},{},{},{},{}\n",
            market, t.mean, t.std, t.min, t.max, t.q25, t.median, t.q75
        ));
    }
    if let Some(out) = args.out {
        let path = out.join("stats.csv");
        write_atomic(&path, &csv)?;
        println!("wrote {}", path.display());
    }
    Ok(())
}

pub fn acf(args: AcfArgs) -> Result<(), CmdError> {
    let series = load_market(&args.data, args.market)?;
    let values = compute_acf(&series, args.max_lag)?;
    let mut csv = String::from("lag,coefficient\n");
    println!("{:<6} {:>12}", "lag", "coefficient");
    for (lag, r) in &values {
        println!("{lag:<6} {r:>12.6}");
        csv.push_str(&format!("{lag},{r}\n"));
    }
    if let Some(out) = args.out {
        let path = out.join(format!("acf_{}.csv", args.market.to_string().to_lowercase()));
        write_atomic(&path, &csv)?;
        println!("wrote {}", path.display());
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// run configuration shared by backtest / tune / sweep-offset
// ---------------------------------------------------------------------------

/// Config-file shape: every key optional, flags win over file values.
#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct FileConfig {
    data: Option<PathBuf>,
    market: Option<Market>,
    train_end: Option<NaiveDate>,
    test_end: Option<NaiveDate>,
    strategies: Option<Vec<String>>,
    retrain: Option<String>,
    scoring: Option<String>,
    k: Option<usize>,
    seed: Option<u64>,
    offset: Option<bool>,
    offset_refit: Option<bool>,
    floor: Option<f64>,
    out: Option<PathBuf>,
}

/// Fully resolved run configuration; a run is determined by this plus the
/// input data.
struct RunConfig {
    data: PathBuf,
    market: Market,
    train_end: NaiveDate,
    test_end: NaiveDate,
    strategies: Vec<String>,
    retrain: Retrain,
    scoring: Scoring,
    k: usize,
    seed: u64,
    offset: OffsetConfig,
    out: PathBuf,
}

fn parse_retrain(s: &str) -> Result<Retrain, CmdError> {
    match s.trim().to_ascii_lowercase().as_str() {
        "fixed" => Ok(Retrain::Fixed),
        "weekly" => Ok(Retrain::Periodic(Period::Weekly)),
        "monthly" => Ok(Retrain::Periodic(Period::Monthly)),
        other => Err(usage(format!(
            "unknown retrain mode `{other}` (fixed|weekly|monthly)"
        ))),
    }
}

fn parse_scoring(s: &str) -> Result<Scoring, CmdError> {
    Scoring::parse(s).ok_or_else(|| usage(format!("unknown scoring `{s}` (mae|mape|neg-revenue)")))
}

fn parse_on_off(s: &str) -> Result<bool, CmdError> {
    match s.trim().to_ascii_lowercase().as_str() {
        "on" => Ok(true),
        "off" => Ok(false),
        other => Err(usage(format!("expected on|off, got `{other}`"))),
    }
}

fn load_file_config(path: &Option<PathBuf>) -> Result<FileConfig, CmdError> {
    match path {
        None => Ok(FileConfig::default()),
        Some(p) => {
            let text = fs::read_to_string(p)?;
            serde_json::from_str(&text)
                .map_err(|e| usage(format!("config {}: {e}", p.display())))
        }
    }
}

impl RunConfig {
    fn resolve(args: &RunArgs) -> Result<RunConfig, CmdError> {
        let file = load_file_config(&args.config)?;
        let data = args
            .data
            .clone()
            .or(file.data)
            .ok_or_else(|| usage("--data is required"))?;
        let market = args
            .market
            .or(file.market)
            .ok_or_else(|| usage("--market is required"))?;
        let train_end = args
            .train_end
            .or(file.train_end)
            .unwrap_or_else(|| "2023-12-31".parse().unwrap());
        let test_end = args
            .test_end
            .or(file.test_end)
            .unwrap_or_else(|| "2024-06-30".parse().unwrap());
        let strategies = if args.strategies.is_empty() {
            file.strategies.unwrap_or_default()
        } else {
            args.strategies.clone()
        };
        let retrain = match &args.retrain {
            Some(s) => parse_retrain(s)?,
            None => match &file.retrain {
                Some(s) => parse_retrain(s)?,
                None => Retrain::Fixed,
            },
        };
        let scoring = match &args.scoring {
            Some(s) => parse_scoring(s)?,
            None => match &file.scoring {
                Some(s) => parse_scoring(s)?,
                None => Scoring::NegRevenue,
            },
        };
        let offset_enabled = match &args.offset {
            Some(s) => parse_on_off(s)?,
            None => file.offset.unwrap_or(true),
        };
        let floor = args.floor.or(file.floor).unwrap_or(0.0);
        if floor < 0.0 {
            return Err(usage(format!("floor must be non-negative, got {floor}")));
        }
        Ok(RunConfig {
            data,
            market,
            train_end,
            test_end,
            strategies,
            retrain,
            scoring,
            k: args.k.or(file.k).unwrap_or(5),
            seed: args.seed.or(file.seed).unwrap_or(0),
            offset: OffsetConfig {
                enabled: offset_enabled,
                refit_with_retrain: file.offset_refit.unwrap_or(true),
                floor,
            },
            out: args
                .out
                .clone()
                .or(file.out)
                .ok_or_else(|| usage("--out is required"))?,
        })
    }

    fn load_split(&self) -> Result<(MarketSeries, MarketSeries), CmdError> {
        let series = load_market(&self.data, self.market)?;
        let (train, test) =
            bidcraft_core::data::split(&series, self.train_end, self.test_end)?;
        if test.is_empty() {
            return Err(usage(format!(
                "no test data between {} and {}",
                self.train_end, self.test_end
            )));
        }
        Ok((train, test))
    }

    fn model_kind(&self, raw: &str) -> Result<ModelKind, CmdError> {
        ModelKind::parse(raw).ok_or_else(|| usage(format!("unknown model kind `{raw}`")))
    }

    /// Strategy strings: fixed-day|fixed-week|fixed-month, lagged-day|
    /// lagged-week, model:<kind>, model:@spec.json, tuned:<kind>.
    fn build_strategy(
        &self,
        raw: &str,
        train: &MarketSeries,
    ) -> Result<Strategy, CmdError> {
        let norm = raw.trim().to_ascii_lowercase().replace('_', "-");
        let strategy = match norm.as_str() {
            "fixed-day" => Strategy::fixed(TrailingWindow::Day),
            "fixed-week" => Strategy::fixed(TrailingWindow::Week),
            "fixed-month" => Strategy::fixed(TrailingWindow::Month),
            "lagged-day" => Strategy::lagged(Lag::Day),
            "lagged-week" => Strategy::lagged(Lag::Week),
            _ => {
                let (mode, rest) = raw
                    .trim()
                    .split_once(':')
                    .ok_or_else(|| usage(format!("unknown strategy `{raw}`")))?;
                let spec = match (mode.to_ascii_lowercase().as_str(), rest) {
                    ("model", path) if path.starts_with('@') => {
                        let text = fs::read_to_string(&path[1..])?;
                        serde_json::from_str::<ModelSpec>(&text)
                            .map_err(|e| usage(format!("spec {path}: {e}")))?
                    }
                    ("model", kind) => self
                        .model_kind(kind)
                        .map(|k| ModelSpec::new(k).with_seed(self.seed))?,
                    ("tuned", kind) => {
                        let kind = self.model_kind(kind)?;
                        let sup = build_supervised(train, DEFAULT_INPUT_LEN, DEFAULT_HORIZON)?;
                        let grid = ParamGrid::defaults(kind);
                        let cv = grid_search(&grid, &sup, self.k, self.scoring, self.seed)
                            .map_err(runtime)?;
                        cv.best_spec().clone()
                    }
                    _ => return Err(usage(format!("unknown strategy `{raw}`"))),
                };
                Strategy::model(spec, self.offset)
            }
        };
        Ok(strategy)
    }
}

// ---------------------------------------------------------------------------
// backtest
// ---------------------------------------------------------------------------

pub fn backtest(args: RunArgs) -> Result<(), CmdError> {
    let config = RunConfig::resolve(&args)?;
    if config.strategies.is_empty() {
        return Err(usage("at least one --strategy is required"));
    }
    let (train, test) = config.load_split()?;

    let mut results: Vec<BacktestResult> = Vec::new();
    for raw in &config.strategies {
        let strategy = config.build_strategy(raw, &train)?;
        let result =
            walk_forward(&train, &test, &strategy, config.retrain).map_err(runtime)?;
        let base = format!(
            "{}_{}",
            config.market.to_string().to_lowercase(),
            result.strategy_id
        );
        write_atomic(&config.out.join(format!("{base}.csv")), &result.to_csv())?;
        write_atomic(&config.out.join(format!("{base}.json")), &result.to_json())?;
        println!(
            "{:<28} revenue {:>12.2} EUR/MW  (mae {:.2}, awarded {}/{})",
            base,
            result.revenue(),
            result.post_offset.mae,
            result.post_offset.n_awarded,
            result.post_offset.n_slots
        );
        results.push(result);
    }
    println!("wrote {} result pairs to {}", results.len(), config.out.display());
    Ok(())
}

// ---------------------------------------------------------------------------
// tune
// ---------------------------------------------------------------------------

pub fn tune(args: TuneArgs) -> Result<(), CmdError> {
    let run_args = RunArgs {
        config: args.config,
        data: args.data,
        market: args.market,
        train_end: args.train_end,
        test_end: None,
        strategies: vec![],
        retrain: None,
        scoring: args.scoring,
        k: args.k,
        seed: args.seed,
        offset: None,
        floor: None,
        out: args.out,
    };
    let config = RunConfig::resolve(&run_args)?;
    let kind = config.model_kind(&args.model)?;
    let series = load_market(&config.data, config.market)?;
    let train = series.between(None, Some(config.train_end));
    if train.is_empty() {
        return Err(usage(format!("no data on or before {}", config.train_end)));
    }
    let sup = build_supervised(&train, DEFAULT_INPUT_LEN, DEFAULT_HORIZON)?;
    let grid = ParamGrid::defaults(kind);
    let cv = grid_search(&grid, &sup, config.k, config.scoring, config.seed).map_err(runtime)?;

    let path = config.out.join(format!(
        "tune_{}_{}.json",
        config.market.to_string().to_lowercase(),
        kind.as_str().to_lowercase()
    ));
    write_atomic(&path, &cv.to_json())?;
    let best_path = config.out.join(format!(
        "best_{}_{}.json",
        config.market.to_string().to_lowercase(),
        kind.as_str().to_lowercase()
    ));
    write_atomic(
        &best_path,
        &serde_json::to_string_pretty(cv.best_spec()).expect("spec serializes"),
    )?;
    println!(
        "{} configs scored by {} over {} folds; best mean score {:.4}",
        cv.entries.len(),
        config.scoring,
        config.k,
        cv.best_mean_score()
    );
    println!("best spec: {}", serde_json::to_string(cv.best_spec()).unwrap());
    println!("wrote {} and {}", path.display(), best_path.display());
    Ok(())
}

// ---------------------------------------------------------------------------
// sweep-offset
// ---------------------------------------------------------------------------

pub fn sweep_offset(args: SweepArgs) -> Result<(), CmdError> {
    let config = RunConfig::resolve(&args.run)?;
    let raw_strategy = match config.strategies.len() {
        1 => &config.strategies[0],
        0 => return Err(usage("sweep-offset needs exactly one --strategy model:<kind>")),
        _ => return Err(usage("sweep-offset takes exactly one --strategy")),
    };
    let (train, test) = config.load_split()?;
    let strategy = config.build_strategy(raw_strategy, &train)?;
    if strategy.is_benchmark() {
        return Err(usage("sweep-offset needs a model strategy"));
    }
    let result = walk_forward(&train, &test, &strategy, config.retrain).map_err(runtime)?;

    let y: Vec<f64> = result.records.iter().map(|r| r.y).collect();
    let forecasts: Vec<f64> = result.records.iter().map(|r| r.y_hat).collect();
    let max_pred = forecasts.iter().cloned().fold(0.0, f64::max);
    let max_y = y.iter().cloned().fold(0.0, f64::max);
    let lo = args.delta_min.unwrap_or(-max_pred);
    let hi = args.delta_max.unwrap_or(max_y);
    if args.delta_step <= 0.0 || hi < lo {
        return Err(usage("invalid sweep grid"));
    }
    let n_steps = ((hi - lo) / args.delta_step).floor() as usize + 1;
    let deltas: Vec<f64> = (0..n_steps).map(|i| lo + i as f64 * args.delta_step).collect();
    let curve = offset_sweep(&y, &forecasts, &deltas, config.offset.floor);

    let mut csv = String::from("delta,revenue\n");
    for (delta, revenue) in &curve {
        csv.push_str(&format!("{delta},{revenue}\n"));
    }
    let base = format!(
        "sweep_{}_{}",
        config.market.to_string().to_lowercase(),
        result.strategy_id
    );
    write_atomic(&config.out.join(format!("{base}.csv")), &csv)?;

    let train_delta = result.retrain_log.first().and_then(|e| e.delta);
    let summary = serde_json::json!({
        "strategy": result.strategy_id,
        "market": config.market,
        "delta_fitted_on_train": train_delta,
        "test_revenue_at_fitted_delta": result.post_offset.revenue,
        "test_revenue_at_zero": result.pre_offset.revenue,
        "grid": { "min": lo, "max": hi, "step": args.delta_step },
    });
    write_atomic(
        &config.out.join(format!("{base}.json")),
        &serde_json::to_string_pretty(&summary).unwrap(),
    )?;
    println!(
        "swept {} deltas in [{lo}, {hi}]; train-fitted delta = {:?}",
        curve.len(),
        train_delta
    );
    println!("wrote {}.csv/.json in {}", base, config.out.display());
    Ok(())
}

// ---------------------------------------------------------------------------
// report
// ---------------------------------------------------------------------------

pub fn report(args: ReportArgs) -> Result<(), CmdError> {
    let mut results = Vec::new();
    let mut entries: Vec<PathBuf> = fs::read_dir(&args.input)?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|e| e == "json"))
        .collect();
    entries.sort();
    for path in &entries {
        let text = fs::read_to_string(path)?;
        if let Ok(result) = BacktestResult::from_json(&text) {
            results.push(result);
        }
    }
    if results.is_empty() {
        return Err(usage(format!(
            "no backtest result JSON files in {}",
            args.input.display()
        )));
    }
    let report = build_report(&results).map_err(runtime)?;

    write_atomic(&args.out.join("report.csv"), &report.to_csv())?;
    write_atomic(&args.out.join("report.json"), &report.to_json())?;
    let mut corr_csv = String::from("market,n_points,r,p,slope,intercept\n");
    for c in &report.correlations {
        corr_csv.push_str(&format!(
            "{},{},{},{},{},{}\n",
            c.market, c.n_points, c.r, c.p, c.slope, c.intercept
        ));
    }
    write_atomic(&args.out.join("correlations.csv"), &corr_csv)?;

    for row in &report.rows {
        let baseline = row
            .best_baseline
            .clone()
            .unwrap_or_else(|| "no baseline".into());
        let diff = row
            .diff_pct
            .map(|d| format!("{d:+.2} %"))
            .unwrap_or_else(|| "-".into());
        println!(
            "{:<10} best {:<24} revenue {:>12.2}  vs {:<16} {}",
            row.market.to_string(),
            row.best_model,
            row.revenue_test,
            baseline,
            diff
        );
    }
    println!(
        "wrote report.csv, report.json, correlations.csv to {}",
        args.out.display()
    );
    Ok(())
}
