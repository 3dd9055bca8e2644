//! Windowing a price series into a supervised design matrix.
//!
//! One sample per target day: the inputs are the `input_len` slot prices
//! ending at the previous day's last block, the targets are the target
//! day's `horizon` block prices. Those inputs are all known at bid time
//! because the previous day was auctioned the day before that.

use serde::{Deserialize, Serialize};

use super::{DataError, MarketSeries, ProductSlot, BLOCKS_PER_DAY};
use crate::matrix::Matrix;

/// Lagged design matrix `x`, day-ahead targets `y`, and one anchor slot
/// (target day, block 0) per sample.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SupervisedSet {
    pub x: Matrix,
    pub y: Matrix,
    pub anchors: Vec<ProductSlot>,
    input_len: usize,
    horizon: usize,
}

impl SupervisedSet {
    pub fn n_samples(&self) -> usize {
        self.x.rows()
    }

    pub fn is_empty(&self) -> bool {
        self.n_samples() == 0
    }

    pub fn input_len(&self) -> usize {
        self.input_len
    }

    pub fn horizon(&self) -> usize {
        self.horizon
    }

    /// Samples selected by row index, in the given order.
    pub fn subset(&self, idx: &[usize]) -> SupervisedSet {
        SupervisedSet {
            x: self.x.select_rows(idx),
            y: self.y.select_rows(idx),
            anchors: idx.iter().map(|&i| self.anchors[i]).collect(),
            input_len: self.input_len,
            horizon: self.horizon,
        }
    }
}

pub const DEFAULT_INPUT_LEN: usize = 42;
pub const DEFAULT_HORIZON: usize = BLOCKS_PER_DAY as usize;

/// Window a gapless series: one sample per day whose `input_len` preceding
/// slots and `horizon` day slots are all covered.
pub fn build_supervised(
    series: &MarketSeries,
    input_len: usize,
    horizon: usize,
) -> Result<SupervisedSet, DataError> {
    assert!(input_len >= 1 && horizon >= 1);
    let need = input_len + horizon;
    if series.len() < need {
        return Err(DataError::InsufficientData {
            need,
            have: series.len(),
        });
    }
    if !series.is_gapless() {
        let report = super::validate(series);
        let (date, _) = report.gaps[0];
        return Err(DataError::WindowGap { date });
    }

    let prices = series.prices();
    let slots = series.slots();
    let first_index = slots[0].index();
    let per_day = i64::from(BLOCKS_PER_DAY);

    let mut x_rows: Vec<Vec<f64>> = Vec::new();
    let mut y_rows: Vec<Vec<f64>> = Vec::new();
    let mut anchors = Vec::new();
    for (i, slot) in slots.iter().enumerate() {
        let is_day_start = (first_index + i as i64).rem_euclid(per_day) == 0;
        if !is_day_start || i < input_len || i + horizon > slots.len() {
            continue;
        }
        x_rows.push(prices[i - input_len..i].to_vec());
        y_rows.push(prices[i..i + horizon].to_vec());
        anchors.push(*slot);
    }
    Ok(SupervisedSet {
        x: Matrix::from_rows(&x_rows),
        y: Matrix::from_rows(&y_rows),
        anchors,
        input_len,
        horizon,
    })
}

#[cfg(test)]
mod tests {
    use super::super::tests::series_from_prices;
    use super::super::Market;
    use super::*;

    #[test]
    fn nine_gapless_days_give_two_samples() {
        // floor((54 - 42) / 6) = 2 target days: days 8 and 9.
        let prices: Vec<f64> = (0..54).map(|i| i as f64).collect();
        let s = series_from_prices(Market::AfrrPos, "2024-01-01", &prices);
        let set = build_supervised(&s, 42, 6).unwrap();
        assert_eq!(set.n_samples(), 2);
        assert_eq!(set.anchors[0].date, "2024-01-08".parse().unwrap());
        assert_eq!(set.anchors[1].date, "2024-01-09".parse().unwrap());
    }

    #[test]
    fn eight_days_exactly_give_one_sample() {
        let prices: Vec<f64> = (0..48).map(|i| i as f64).collect();
        let s = series_from_prices(Market::AfrrPos, "2024-01-01", &prices);
        let set = build_supervised(&s, 42, 6).unwrap();
        assert_eq!(set.n_samples(), 1);
    }

    #[test]
    fn constant_series_fills_constant_windows() {
        let s = series_from_prices(Market::MfrrPos, "2024-01-01", &[7.5; 60]);
        let set = build_supervised(&s, 42, 6).unwrap();
        assert!(set.x.data().iter().all(|&v| v == 7.5));
        assert!(set.y.data().iter().all(|&v| v == 7.5));
    }

    #[test]
    fn ramp_series_targets_step_beyond_inputs() {
        // On a +1/slot ramp, y[j] sits exactly j+1 steps after the last input.
        let prices: Vec<f64> = (0..60).map(|i| i as f64).collect();
        let s = series_from_prices(Market::AfrrPos, "2024-01-01", &prices);
        let set = build_supervised(&s, 42, 6).unwrap();
        for r in 0..set.n_samples() {
            let tail = set.x.row(r)[41];
            for j in 0..6 {
                assert_eq!(set.y.row(r)[j], tail + (j + 1) as f64);
            }
        }
    }

    #[test]
    fn windows_reconstruct_from_source() {
        let prices: Vec<f64> = (0..72).map(|i| (i * i % 97) as f64).collect();
        let s = series_from_prices(Market::AfrrNeg, "2024-03-01", &prices);
        let set = build_supervised(&s, 42, 6).unwrap();
        let first = s.slots()[0].index();
        for r in 0..set.n_samples() {
            let anchor_pos = (set.anchors[r].index() - first) as usize;
            assert_eq!(set.x.row(r), &prices[anchor_pos - 42..anchor_pos]);
            assert_eq!(set.y.row(r), &prices[anchor_pos..anchor_pos + 6]);
        }
    }

    #[test]
    fn gap_inside_window_errors_with_date() {
        let mut rows: Vec<(chrono::NaiveDate, u8, f64)> = Vec::new();
        let start: chrono::NaiveDate = "2024-01-01".parse().unwrap();
        for i in 0..60usize {
            let day = start + chrono::Days::new((i / 6) as u64);
            let block = (i % 6) as u8;
            if day == "2024-01-04".parse().unwrap() && block == 2 {
                continue;
            }
            rows.push((day, block, 1.0));
        }
        let s = MarketSeries::new(Market::AfrrPos, rows).unwrap();
        let err = build_supervised(&s, 42, 6).unwrap_err();
        match err {
            DataError::WindowGap { date } => assert_eq!(date, "2024-01-04".parse().unwrap()),
            other => panic!("unexpected error {other:?}"),
        }
    }

    #[test]
    fn too_short_series_errors() {
        let s = series_from_prices(Market::AfrrPos, "2024-01-01", &[1.0; 47]);
        assert!(matches!(
            build_supervised(&s, 42, 6),
            Err(DataError::InsufficientData { need: 48, .. })
        ));
    }

    #[test]
    fn subset_keeps_row_order() {
        let prices: Vec<f64> = (0..60).map(|i| i as f64).collect();
        let s = series_from_prices(Market::AfrrPos, "2024-01-01", &prices);
        let set = build_supervised(&s, 42, 6).unwrap();
        let sub = set.subset(&[1]);
        assert_eq!(sub.n_samples(), 1);
        assert_eq!(sub.x.row(0), set.x.row(1));
        assert_eq!(sub.anchors[0], set.anchors[1]);
    }
}
