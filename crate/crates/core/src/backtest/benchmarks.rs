//! Rule-based benchmark strategies: a revenue-maximizing constant bid over
//! a trailing window, and lagged forecasts that replay the price from one
//! day or one week earlier.

use serde::{Deserialize, Serialize};

use super::BacktestError;
use crate::data::MarketSeries;

/// Trailing window for the fixed-bid benchmark, in whole slots.
/// A month is pinned at 30 days for determinism.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum TrailingWindow {
    #[serde(rename = "day")]
    Day,
    #[serde(rename = "week")]
    Week,
    #[serde(rename = "month")]
    Month,
}

impl TrailingWindow {
    pub fn slots(&self) -> usize {
        match self {
            TrailingWindow::Day => 6,
            TrailingWindow::Week => 42,
            TrailingWindow::Month => 180,
        }
    }

    pub fn as_str(&self) -> &'static str {
        match self {
            TrailingWindow::Day => "day",
            TrailingWindow::Week => "week",
            TrailingWindow::Month => "month",
        }
    }
}

/// Lag of the lagged-forecast benchmark; only one day (6 slots) and one
/// week (42 slots) are admissible.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Lag {
    #[serde(rename = "day")]
    Day,
    #[serde(rename = "week")]
    Week,
}

impl Lag {
    pub fn slots(&self) -> usize {
        match self {
            Lag::Day => 6,
            Lag::Week => 42,
        }
    }

    pub fn from_slots(n: usize) -> Result<Lag, BacktestError> {
        match n {
            6 => Ok(Lag::Day),
            42 => Ok(Lag::Week),
            other => Err(BacktestError::InvalidLag(other)),
        }
    }

    pub fn as_str(&self) -> &'static str {
        match self {
            Lag::Day => "day",
            Lag::Week => "week",
        }
    }
}

/// The constant bid maximizing pay-as-bid revenue over the given prices,
/// together with that revenue.
///
/// The objective c * |{y_i >= c}| is piecewise linear in c with breakpoints
/// exactly at the observed prices, so enumerating the distinct prices is an
/// exact optimization. Ties break toward the larger bid. Negative prices
/// are never candidates (bids cannot be negative).
pub fn best_constant_bid(prices: &[f64]) -> Result<(f64, f64), BacktestError> {
    if prices.is_empty() {
        return Err(BacktestError::EmptyInput);
    }
    let mut sorted = prices.to_vec();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len();
    let mut best_bid = 0.0;
    let mut best_revenue = 0.0;
    for p in 0..n {
        let candidate = sorted[p];
        if candidate < 0.0 {
            continue;
        }
        if p > 0 && sorted[p - 1] == candidate {
            continue;
        }
        let revenue = candidate * (n - p) as f64;
        if revenue > best_revenue || (revenue == best_revenue && candidate > best_bid) {
            best_revenue = revenue;
            best_bid = candidate;
        }
    }
    Ok((best_bid, best_revenue))
}

/// Fixed-bid benchmark value derived from the trailing `window` slots of
/// `history` (most recent last).
pub fn fixed_bid(history: &[f64], window: TrailingWindow) -> Result<f64, BacktestError> {
    let need = window.slots();
    if history.is_empty() {
        return Err(BacktestError::EmptyInput);
    }
    if history.len() < need {
        return Err(BacktestError::History {
            need,
            have: history.len(),
        });
    }
    let (bid, _) = best_constant_bid(&history[history.len() - need..])?;
    Ok(bid)
}

/// Lagged-forecast bids for `n_slots` slots starting at linear slot index
/// `span_start`: the bid for slot t is the price at slot t - lag.
pub fn lagged_forecast(
    series: &MarketSeries,
    lag: Lag,
    span_start: i64,
    n_slots: usize,
) -> Result<Vec<f64>, BacktestError> {
    let first = series
        .first_slot()
        .ok_or(BacktestError::EmptyInput)?
        .index();
    let len = series.len() as i64;
    let lag_slots = lag.slots() as i64;
    let lo = span_start - lag_slots;
    let hi = lo + n_slots as i64;
    if lo < first || hi > first + len {
        return Err(BacktestError::History {
            need: n_slots + lag.slots(),
            have: series.len(),
        });
    }
    if !series.is_gapless() {
        return Err(BacktestError::Setup(
            "lagged forecast needs a gapless series".into(),
        ));
    }
    let offset = (lo - first) as usize;
    Ok(series.prices()[offset..offset + n_slots].to_vec())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{Market, MarketSeries};
    use rand::prelude::*;
    use rand_chacha::ChaCha8Rng;

    fn series(prices: &[f64]) -> MarketSeries {
        let start: chrono::NaiveDate = "2024-01-01".parse().unwrap();
        let rows = prices
            .iter()
            .enumerate()
            .map(|(i, &p)| {
                (
                    start + chrono::Days::new((i / 6) as u64),
                    (i % 6) as u8,
                    p,
                )
            })
            .collect();
        MarketSeries::new(Market::AfrrPos, rows).unwrap()
    }

    #[test]
    fn constant_bid_picks_revenue_maximizer() {
        // candidates: 5 -> 15, 7 -> 14, 10 -> 10
        let (bid, revenue) = best_constant_bid(&[10.0, 5.0, 7.0]).unwrap();
        assert_eq!(bid, 5.0);
        assert_eq!(revenue, 15.0);
    }

    #[test]
    fn constant_bid_on_equal_prices_is_that_price() {
        let (bid, revenue) = best_constant_bid(&[4.0; 5]).unwrap();
        assert_eq!(bid, 4.0);
        assert_eq!(revenue, 20.0);
    }

    #[test]
    fn constant_bid_prefers_single_spike_when_it_pays() {
        let (bid, revenue) = best_constant_bid(&[1.0, 100.0]).unwrap();
        assert_eq!(bid, 100.0);
        assert_eq!(revenue, 100.0);
    }

    #[test]
    fn constant_bid_ties_toward_larger_bid() {
        // 2 -> 4, 4 -> 4: tie resolved upward
        let (bid, revenue) = best_constant_bid(&[2.0, 4.0]).unwrap();
        assert_eq!(bid, 4.0);
        assert_eq!(revenue, 4.0);
    }

    #[test]
    fn constant_bid_matches_exhaustive_enumeration() {
        let mut rng = ChaCha8Rng::seed_from_u64(23);
        for _ in 0..300 {
            let n = rng.gen_range(1..=200);
            let prices: Vec<f64> = (0..n).map(|_| rng.gen_range(0..50) as f64).collect();
            let (_, revenue) = best_constant_bid(&prices).unwrap();
            let brute = prices
                .iter()
                .map(|&c| c * prices.iter().filter(|&&y| y >= c).count() as f64)
                .fold(0.0, f64::max);
            assert_eq!(revenue, brute);
        }
    }

    #[test]
    fn fixed_bid_uses_only_the_trailing_window() {
        let mut history = vec![1000.0; 6];
        history.extend_from_slice(&[10.0, 5.0, 7.0, 5.0, 5.0, 9.0]);
        let bid = fixed_bid(&history, TrailingWindow::Day).unwrap();
        assert_eq!(bid, 5.0);
    }

    #[test]
    fn fixed_bid_short_history_errors() {
        assert!(matches!(
            fixed_bid(&[1.0; 41], TrailingWindow::Week),
            Err(BacktestError::History { need: 42, have: 41 })
        ));
        assert!(matches!(
            fixed_bid(&[], TrailingWindow::Day),
            Err(BacktestError::EmptyInput)
        ));
    }

    #[test]
    fn lagged_day_on_periodic_series_is_a_fixed_point() {
        let prices: Vec<f64> = (0..24).map(|i| [3.0, 8.0, 5.0, 9.0, 2.0, 7.0][i % 6]).collect();
        let s = series(&prices);
        let start = s.slots()[6].index();
        let bids = lagged_forecast(&s, Lag::Day, start, 18).unwrap();
        assert_eq!(bids, prices[..18].to_vec());
        assert_eq!(bids, prices[6..24].to_vec());
    }

    #[test]
    fn lagged_week_on_constant_series_is_the_constant() {
        let s = series(&[4.5; 48]);
        let start = s.slots()[42].index();
        let bids = lagged_forecast(&s, Lag::Week, start, 6).unwrap();
        assert_eq!(bids, vec![4.5; 6]);
    }

    #[test]
    fn lagged_day_on_ramp_undercuts_by_six() {
        let prices: Vec<f64> = (0..24).map(|i| i as f64).collect();
        let s = series(&prices);
        let start = s.slots()[6].index();
        let bids = lagged_forecast(&s, Lag::Day, start, 18).unwrap();
        for (t, bid) in bids.iter().enumerate() {
            let actual = prices[6 + t];
            assert_eq!(actual - bid, 6.0);
            assert!(bid <= &actual);
        }
    }

    #[test]
    fn lagged_without_history_errors() {
        let s = series(&[1.0; 12]);
        let start = s.slots()[0].index();
        assert!(matches!(
            lagged_forecast(&s, Lag::Day, start, 6),
            Err(BacktestError::History { .. })
        ));
    }

    #[test]
    fn lag_from_slots_validates() {
        assert_eq!(Lag::from_slots(6).unwrap(), Lag::Day);
        assert_eq!(Lag::from_slots(42).unwrap(), Lag::Week);
        assert!(matches!(
            Lag::from_slots(12),
            Err(BacktestError::InvalidLag(12))
        ));
    }
}
