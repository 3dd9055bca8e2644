//! Descriptive statistics and sample autocorrelation for price series.

use serde::{Deserialize, Serialize};

use super::{DataError, MarketSeries};

/// Seven-number summary in EUR/MW.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StatsTable {
    pub mean: f64,
    pub std: f64,
    pub min: f64,
    pub max: f64,
    pub q25: f64,
    pub median: f64,
    pub q75: f64,
}

/// Linear interpolation between order statistics (the type-7 rule).
fn quantile(sorted: &[f64], p: f64) -> f64 {
    let n = sorted.len();
    if n == 1 {
        return sorted[0];
    }
    let h = (n - 1) as f64 * p;
    let lo = h.floor() as usize;
    let frac = h - lo as f64;
    if lo + 1 < n {
        sorted[lo] + frac * (sorted[lo + 1] - sorted[lo])
    } else {
        sorted[lo]
    }
}

/// Summary statistics with sample (n-1) standard deviation and
/// linearly-interpolated quantiles.
pub fn summary_stats(series: &MarketSeries) -> Result<StatsTable, DataError> {
    let prices = series.prices();
    if prices.is_empty() {
        return Err(DataError::EmptyInput);
    }
    let n = prices.len() as f64;
    let mean = prices.iter().sum::<f64>() / n;
    let ss: f64 = prices.iter().map(|p| (p - mean).powi(2)).sum();
    let std = if prices.len() > 1 {
        (ss / (n - 1.0)).sqrt()
    } else {
        0.0
    };
    let mut sorted = prices.to_vec();
    sorted.sort_by(f64::total_cmp);
    Ok(StatsTable {
        mean,
        std,
        min: sorted[0],
        max: *sorted.last().unwrap(),
        q25: quantile(&sorted, 0.25),
        median: quantile(&sorted, 0.5),
        q75: quantile(&sorted, 0.75),
    })
}

/// Sample autocorrelation r_k for k = 0..=max_lag:
/// r_k = sum_t (x_t - mean)(x_{t+k} - mean) / sum_t (x_t - mean)^2.
pub fn acf(series: &MarketSeries, max_lag: usize) -> Result<Vec<(usize, f64)>, DataError> {
    let x = series.prices();
    if x.len() <= max_lag {
        return Err(DataError::LagTooLarge {
            max_lag,
            len: x.len(),
        });
    }
    let n = x.len();
    let mean = x.iter().sum::<f64>() / n as f64;
    let denom: f64 = x.iter().map(|v| (v - mean).powi(2)).sum();
    if denom <= 0.0 {
        return Err(DataError::DegenerateSeries);
    }
    let mut out = Vec::with_capacity(max_lag + 1);
    for k in 0..=max_lag {
        let num: f64 = (0..n - k).map(|t| (x[t] - mean) * (x[t + k] - mean)).sum();
        out.push((k, num / denom));
    }
    Ok(out)
}
