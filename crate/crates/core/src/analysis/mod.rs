//! Residual diagnostics, offset sweeps, the error-vs-revenue correlation
//! study, and the per-market summary report.

mod stats;

pub use stats::{linear_fit, pearson, regularized_inc_beta, student_t_cdf, student_t_two_sided_p};

use std::collections::BTreeMap;

use chrono::Datelike;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::backtest::BacktestResult;
use crate::data::Market;

#[derive(Debug, Error)]
pub enum AnalysisError {
    #[error("need at least {need} points, have {have}")]
    TooFew { need: usize, have: usize },
    #[error("degenerate input: zero variance")]
    DegenerateInput,
    #[error("no results to report")]
    Empty,
}

/// Histogram of residuals y_hat - y with bins aligned to multiples of
/// `bin_width`; only non-empty bins are returned, keyed by lower edge.
pub fn residual_histogram(y: &[f64], y_hat: &[f64], bin_width: f64) -> Vec<(f64, usize)> {
    assert_eq!(y.len(), y_hat.len(), "length mismatch");
    assert!(bin_width > 0.0, "bin width must be positive");
    let mut bins: BTreeMap<i64, usize> = BTreeMap::new();
    for (&a, &p) in y.iter().zip(y_hat) {
        let residual = p - a;
        let idx = (residual / bin_width).floor() as i64;
        *bins.entry(idx).or_default() += 1;
    }
    bins.into_iter()
        .map(|(idx, count)| (idx as f64 * bin_width, count))
        .collect()
}

/// Revenue of floored, shifted bids for each requested delta.
pub fn offset_sweep(y: &[f64], y_hat: &[f64], deltas: &[f64], floor: f64) -> Vec<(f64, f64)> {
    assert_eq!(y.len(), y_hat.len(), "length mismatch");
    deltas
        .iter()
        .map(|&delta| {
            let revenue: f64 = y
                .iter()
                .zip(y_hat)
                .map(|(&actual, &pred)| {
                    let bid = (pred + delta).max(floor);
                    if bid <= actual {
                        bid
                    } else {
                        0.0
                    }
                })
                .sum();
            (delta, revenue)
        })
        .collect()
}

/// One model's contribution to the error-vs-revenue study.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorrelationPoint {
    pub id: String,
    /// Pre-offset forecast error.
    pub mae: f64,
    /// Post-offset testset revenue.
    pub revenue: f64,
}

/// Pearson r and least-squares fit of revenue on MAE over a model set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorrelationStudy {
    pub points: Vec<CorrelationPoint>,
    pub r: f64,
    pub p: f64,
    /// EUR/MW revenue per EUR/MW MAE.
    pub slope: f64,
    pub intercept: f64,
}

pub fn correlation_study(points: Vec<CorrelationPoint>) -> Result<CorrelationStudy, AnalysisError> {
    let x: Vec<f64> = points.iter().map(|p| p.mae).collect();
    let y: Vec<f64> = points.iter().map(|p| p.revenue).collect();
    let (r, p) = pearson(&x, &y)?;
    let (slope, intercept) = linear_fit(&x, &y)?;
    Ok(CorrelationStudy {
        points,
        r,
        p,
        slope,
        intercept,
    })
}

/// Summary row for one market: best model vs best benchmark.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportRow {
    pub market: Market,
    pub best_model: String,
    pub mae: f64,
    pub mse: f64,
    /// MAPE in percent (stored as a fraction elsewhere).
    pub mape_pct: Option<f64>,
    pub revenue_test: f64,
    pub best_baseline: Option<String>,
    pub baseline_revenue: Option<f64>,
    /// model minus baseline, not clamped.
    pub diff_abs: Option<f64>,
    /// 100 * (model - baseline) / baseline.
    pub diff_pct: Option<f64>,
    pub test_days: usize,
    /// revenue_test scaled by (days in the test year / test days).
    pub revenue_yearly: f64,
    pub diff_abs_yearly: Option<f64>,
    pub no_baseline: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MarketCorrelation {
    pub market: Market,
    pub n_points: usize,
    pub r: f64,
    pub p: f64,
    pub slope: f64,
    pub intercept: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub version: u32,
    pub rows: Vec<ReportRow>,
    /// Per-market error-vs-revenue study over the model strategies, present
    /// where at least three models ran.
    pub correlations: Vec<MarketCorrelation>,
}

pub const REPORT_VERSION: u32 = 1;

const REPORT_CSV_HEADER: &str = "market,best_model,mae,mse,mape_pct,revenue_test,best_baseline,\
baseline_revenue,diff_abs,diff_pct,test_days,revenue_yearly,diff_abs_yearly,no_baseline";

fn days_in_year(year: i32) -> u32 {
    chrono::NaiveDate::from_ymd_opt(year, 12, 31)
        .unwrap()
        .ordinal()
}

fn opt(v: &Option<impl std::fmt::Display>) -> String {
    v.as_ref().map(|x| x.to_string()).unwrap_or_default()
}

impl Report {
    pub fn to_csv(&self) -> String {
        let mut out = String::from(REPORT_CSV_HEADER);
        out.push('\n');
        for r in &self.rows {
            out.push_str(&format!(
                "{},{},{},{},{},{},{},{},{},{},{},{},{},{}\n",
                r.market,
                r.best_model,
                r.mae,
                r.mse,
                opt(&r.mape_pct),
                r.revenue_test,
                opt(&r.best_baseline),
                opt(&r.baseline_revenue),
                opt(&r.diff_abs),
                opt(&r.diff_pct),
                r.test_days,
                r.revenue_yearly,
                opt(&r.diff_abs_yearly),
                r.no_baseline
            ));
        }
        out
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("Report serialization cannot fail")
    }
}

/// Aggregate backtest results into the per-market summary: the best model
/// by testset revenue against the best benchmark, with the yearly
/// extrapolation and the error-vs-revenue correlation study.
pub fn build_report(results: &[BacktestResult]) -> Result<Report, AnalysisError> {
    if results.is_empty() {
        return Err(AnalysisError::Empty);
    }
    let mut by_market: BTreeMap<Market, Vec<&BacktestResult>> = BTreeMap::new();
    for r in results {
        by_market.entry(r.market).or_default().push(r);
    }

    let mut rows = Vec::new();
    let mut correlations = Vec::new();
    for (market, market_results) in &by_market {
        let models: Vec<&&BacktestResult> = market_results
            .iter()
            .filter(|r| !r.is_benchmark)
            .collect();
        let benchmarks: Vec<&&BacktestResult> = market_results
            .iter()
            .filter(|r| r.is_benchmark)
            .collect();

        let best_model = models
            .iter()
            .max_by(|a, b| a.revenue().total_cmp(&b.revenue()));
        let Some(best_model) = best_model else {
            continue; // nothing to summarize without a model run
        };
        let best_baseline = benchmarks
            .iter()
            .max_by(|a, b| a.revenue().total_cmp(&b.revenue()));

        let bundle = &best_model.post_offset;
        let revenue_test = bundle.revenue;
        let test_days = best_model.records.len() / 6;
        let last_date = best_model
            .records
            .last()
            .map(|r| r.slot.date)
            .expect("non-empty records");
        let year_days = days_in_year(last_date.year());
        let yearly_factor = year_days as f64 / test_days as f64;

        let baseline_revenue = best_baseline.map(|b| b.revenue());
        let diff_abs = baseline_revenue.map(|b| revenue_test - b);
        let diff_pct = baseline_revenue.map(|b| 100.0 * (revenue_test - b) / b);
        rows.push(ReportRow {
            market: *market,
            best_model: best_model.strategy_id.clone(),
            mae: bundle.mae,
            mse: bundle.mse,
            mape_pct: bundle.mape.map(|m| 100.0 * m),
            revenue_test,
            best_baseline: best_baseline.map(|b| b.strategy_id.clone()),
            baseline_revenue,
            diff_abs,
            diff_pct,
            test_days,
            revenue_yearly: revenue_test * yearly_factor,
            diff_abs_yearly: diff_abs.map(|d| d * yearly_factor),
            no_baseline: best_baseline.is_none(),
        });

        if models.len() >= 3 {
            let points: Vec<CorrelationPoint> = models
                .iter()
                .map(|m| CorrelationPoint {
                    id: m.strategy_id.clone(),
                    mae: m.pre_offset.mae,
                    revenue: m.post_offset.revenue,
                })
                .collect();
            if let Ok(study) = correlation_study(points) {
                correlations.push(MarketCorrelation {
                    market: *market,
                    n_points: study.points.len(),
                    r: study.r,
                    p: study.p,
                    slope: study.slope,
                    intercept: study.intercept,
                });
            }
        }
    }
    if rows.is_empty() {
        return Err(AnalysisError::Empty);
    }
    Ok(Report {
        version: REPORT_VERSION,
        rows,
        correlations,
    })
}
