//! Market data model: per-slot capacity prices on a (date, block) grid,
//! ingestion from CSV exports, descriptive statistics, and the windowing
//! that turns a price series into a supervised learning set.

mod ingest;
mod stats;
mod window;

pub use ingest::{canonical_csv_string, ingest_csv, read_canonical_csv, write_canonical_csv, CsvMapping};
pub use stats::{acf, summary_stats, StatsTable};
pub use window::{build_supervised, SupervisedSet, DEFAULT_HORIZON, DEFAULT_INPUT_LEN};

use chrono::{Datelike, NaiveDate};
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Number of 4-hour product blocks per delivery day.
pub const BLOCKS_PER_DAY: u8 = 6;

#[derive(Debug, Error)]
pub enum DataError {
    #[error("missing column `{0}` in header")]
    Mapping(String),
    #[error("row {line}: {reason}")]
    Row { line: usize, reason: String },
    #[error("conflicting prices for {date} block {block}: {first} vs {second}")]
    Conflict {
        date: NaiveDate,
        block: u8,
        first: f64,
        second: f64,
    },
    #[error("invalid series: {0}")]
    InvalidSeries(String),
    #[error("empty input")]
    EmptyInput,
    #[error("series is constant; autocorrelation is undefined")]
    DegenerateSeries,
    #[error("max_lag {max_lag} must be below the series length {len}")]
    LagTooLarge { max_lag: usize, len: usize },
    #[error("invalid split: {0}")]
    Split(String),
    #[error("window crossing {date} contains a gap")]
    WindowGap { date: NaiveDate },
    #[error("series too short: need at least {need} slots, have {have}")]
    InsufficientData { need: usize, have: usize },
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
}

/// The four German capacity submarkets the engine knows about.
#[derive(
    Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize,
)]
pub enum Market {
    #[serde(rename = "AFRR_POS")]
    AfrrPos,
    #[serde(rename = "AFRR_NEG")]
    AfrrNeg,
    #[serde(rename = "MFRR_POS")]
    MfrrPos,
    #[serde(rename = "MFRR_NEG")]
    MfrrNeg,
}

impl Market {
    pub const ALL: [Market; 4] = [
        Market::AfrrPos,
        Market::AfrrNeg,
        Market::MfrrPos,
        Market::MfrrNeg,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            Market::AfrrPos => "AFRR_POS",
            Market::AfrrNeg => "AFRR_NEG",
            Market::MfrrPos => "MFRR_POS",
            Market::MfrrNeg => "MFRR_NEG",
        }
    }

    /// Accepts the canonical name plus the usual +/- shorthand, case-insensitive.
    pub fn parse(s: &str) -> Option<Market> {
        match s.trim().to_ascii_uppercase().as_str() {
            "AFRR_POS" | "AFRR+" => Some(Market::AfrrPos),
            "AFRR_NEG" | "AFRR-" => Some(Market::AfrrNeg),
            "MFRR_POS" | "MFRR+" => Some(Market::MfrrPos),
            "MFRR_NEG" | "MFRR-" => Some(Market::MfrrNeg),
            _ => None,
        }
    }
}

impl std::fmt::Display for Market {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for Market {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Market::parse(s).ok_or_else(|| format!("unknown market `{s}`"))
    }
}

/// One 4-hour delivery window: the atomic bidding unit.
#[derive(
    Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize,
)]
pub struct ProductSlot {
    pub date: NaiveDate,
    pub block: u8,
    pub market: Market,
}

impl ProductSlot {
    pub fn new(date: NaiveDate, block: u8, market: Market) -> Self {
        debug_assert!(block < BLOCKS_PER_DAY);
        Self {
            date,
            block,
            market,
        }
    }

    /// Position on the global slot grid: 6 slots per calendar day.
    pub fn index(&self) -> i64 {
        i64::from(self.date.num_days_from_ce()) * i64::from(BLOCKS_PER_DAY)
            + i64::from(self.block)
    }

    /// Inverse of [`ProductSlot::index`].
    pub fn from_index(index: i64, market: Market) -> Self {
        let days = index.div_euclid(i64::from(BLOCKS_PER_DAY));
        let block = index.rem_euclid(i64::from(BLOCKS_PER_DAY)) as u8;
        let date = NaiveDate::from_num_days_from_ce_opt(days as i32)
            .expect("slot index out of calendar range");
        Self {
            date,
            block,
            market,
        }
    }
}

impl std::fmt::Display for ProductSlot {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{} b{} {}", self.date, self.block, self.market)
    }
}

/// Ordered per-slot capacity prices for one market.
///
/// Construction sorts by (date, block), drops exact duplicate rows and
/// rejects duplicates that disagree on price. Negative prices are kept so
/// that [`validate`] can report them; gapless coverage is likewise checked
/// by [`validate`], not enforced here.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MarketSeries {
    market: Market,
    slots: Vec<ProductSlot>,
    prices: Vec<f64>,
}

impl MarketSeries {
    pub fn new(market: Market, rows: Vec<(NaiveDate, u8, f64)>) -> Result<Self, DataError> {
        let mut rows = rows;
        for &(date, block, price) in &rows {
            if block >= BLOCKS_PER_DAY {
                return Err(DataError::InvalidSeries(format!(
                    "block {block} out of range on {date}"
                )));
            }
            if !price.is_finite() {
                return Err(DataError::InvalidSeries(format!(
                    "non-finite price on {date} block {block}"
                )));
            }
        }
        rows.sort_by(|a, b| (a.0, a.1).cmp(&(b.0, b.1)));

        let mut slots = Vec::with_capacity(rows.len());
        let mut prices: Vec<f64> = Vec::with_capacity(rows.len());
        for (date, block, price) in rows {
            if let Some(last) = slots.last() {
                let last: &ProductSlot = last;
                if last.date == date && last.block == block {
                    let prev = *prices.last().unwrap();
                    if prev == price {
                        continue; // exact duplicate row
                    }
                    return Err(DataError::Conflict {
                        date,
                        block,
                        first: prev,
                        second: price,
                    });
                }
            }
            slots.push(ProductSlot::new(date, block, market));
            prices.push(price);
        }
        Ok(Self {
            market,
            slots,
            prices,
        })
    }

    pub fn market(&self) -> Market {
        self.market
    }

    pub fn len(&self) -> usize {
        self.slots.len()
    }

    pub fn is_empty(&self) -> bool {
        self.slots.is_empty()
    }

    pub fn slots(&self) -> &[ProductSlot] {
        &self.slots
    }

    pub fn prices(&self) -> &[f64] {
        &self.prices
    }

    pub fn first_slot(&self) -> Option<ProductSlot> {
        self.slots.first().copied()
    }

    pub fn last_slot(&self) -> Option<ProductSlot> {
        self.slots.last().copied()
    }

    /// True when the slots cover every (date, block) between first and last.
    pub fn is_gapless(&self) -> bool {
        match (self.first_slot(), self.last_slot()) {
            (Some(first), Some(last)) => {
                last.index() - first.index() + 1 == self.slots.len() as i64
            }
            _ => true,
        }
    }

    /// Sub-series with `from <= date <= to` (either bound optional).
    pub fn between(&self, from: Option<NaiveDate>, to: Option<NaiveDate>) -> MarketSeries {
        let keep = |slot: &ProductSlot| {
            from.is_none_or(|f| slot.date >= f) && to.is_none_or(|t| slot.date <= t)
        };
        let mut slots = Vec::new();
        let mut prices = Vec::new();
        for (slot, price) in self.slots.iter().zip(&self.prices) {
            if keep(slot) {
                slots.push(*slot);
                prices.push(*price);
            }
        }
        MarketSeries {
            market: self.market,
            slots,
            prices,
        }
    }

    /// Sub-series by slot position.
    pub fn slice(&self, range: std::ops::Range<usize>) -> MarketSeries {
        MarketSeries {
            market: self.market,
            slots: self.slots[range.clone()].to_vec(),
            prices: self.prices[range].to_vec(),
        }
    }

    /// Concatenate a series that continues this one on the slot grid.
    pub fn concat(&self, next: &MarketSeries) -> Result<MarketSeries, DataError> {
        if self.market != next.market {
            return Err(DataError::InvalidSeries(
                "cannot concatenate different markets".into(),
            ));
        }
        if let (Some(last), Some(first)) = (self.last_slot(), next.first_slot()) {
            if first.index() != last.index() + 1 {
                return Err(DataError::InvalidSeries(format!(
                    "series are not contiguous: {last} then {first}"
                )));
            }
        }
        let mut slots = self.slots.clone();
        let mut prices = self.prices.clone();
        slots.extend_from_slice(&next.slots);
        prices.extend_from_slice(&next.prices);
        Ok(MarketSeries {
            market: self.market,
            slots,
            prices,
        })
    }
}

/// What `validate` found; the series itself is never modified.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValidationReport {
    /// (date, block) pairs missing inside the covered span.
    pub gaps: Vec<(NaiveDate, u8)>,
    /// Slots with price < 0.
    pub negatives: Vec<(NaiveDate, u8)>,
    /// Count of slots priced exactly 0.
    pub zero_prices: usize,
}

impl ValidationReport {
    pub fn is_clean(&self) -> bool {
        self.gaps.is_empty() && self.negatives.is_empty()
    }

    pub fn summary(&self) -> String {
        format!(
            "{} gaps, {} negative prices, {} zero prices",
            self.gaps.len(),
            self.negatives.len(),
            self.zero_prices
        )
    }
}

/// Report gaps, negative prices and zero-price counts for a series.
pub fn validate(series: &MarketSeries) -> ValidationReport {
    let mut gaps = Vec::new();
    let mut negatives = Vec::new();
    let mut zero_prices = 0usize;

    if let (Some(first), Some(last)) = (series.first_slot(), series.last_slot()) {
        let mut expected = first.index();
        for slot in series.slots() {
            while expected < slot.index() {
                let missing = ProductSlot::from_index(expected, series.market());
                gaps.push((missing.date, missing.block));
                expected += 1;
            }
            expected += 1;
        }
        let _ = last;
    }
    for (slot, &price) in series.slots().iter().zip(series.prices()) {
        if price < 0.0 {
            negatives.push((slot.date, slot.block));
        } else if price == 0.0 {
            zero_prices += 1;
        }
    }
    ValidationReport {
        gaps,
        negatives,
        zero_prices,
    }
}

/// Chronological train/test split at `train_end` (inclusive for train).
///
/// The test side may come out empty (train_end at the last date); an empty
/// train side is an error since nothing could be fitted on it.
pub fn split(
    series: &MarketSeries,
    train_end: NaiveDate,
    test_end: NaiveDate,
) -> Result<(MarketSeries, MarketSeries), DataError> {
    if train_end >= test_end {
        return Err(DataError::Split(format!(
            "train_end {train_end} must precede test_end {test_end}"
        )));
    }
    let train = series.between(None, Some(train_end));
    if train.is_empty() {
        return Err(DataError::Split(format!(
            "no data on or before train_end {train_end}"
        )));
    }
    let test = series.between(Some(train_end.succ_opt().unwrap()), Some(test_end));
    Ok((train, test))
}

#[cfg(test)]
mod tests {
    use super::*;

    pub(crate) fn date(s: &str) -> NaiveDate {
        s.parse().unwrap()
    }

    pub(crate) fn series_from_prices(market: Market, start: &str, prices: &[f64]) -> MarketSeries {
        let start = date(start);
        let rows = prices
            .iter()
            .enumerate()
            .map(|(i, &p)| {
                let day = start + chrono::Days::new((i / 6) as u64);
                (day, (i % 6) as u8, p)
            })
            .collect();
        MarketSeries::new(market, rows).unwrap()
    }

    #[test]
    fn construction_sorts_and_dedups() {
        let d = date("2024-01-01");
        let rows = vec![(d, 3, 5.0), (d, 1, 2.0), (d, 3, 5.0), (d, 0, 1.0)];
        let s = MarketSeries::new(Market::AfrrPos, rows).unwrap();
        assert_eq!(s.len(), 3);
        assert_eq!(s.prices(), &[1.0, 2.0, 5.0]);
    }

    #[test]
    fn conflicting_duplicate_rejected() {
        let d = date("2024-01-01");
        let rows = vec![(d, 3, 5.0), (d, 3, 6.0)];
        let err = MarketSeries::new(Market::AfrrPos, rows).unwrap_err();
        assert!(matches!(err, DataError::Conflict { block: 3, .. }));
    }

    #[test]
    fn validate_gapless_two_days() {
        let s = series_from_prices(Market::AfrrPos, "2024-01-01", &[1.0; 12]);
        let report = validate(&s);
        assert!(report.gaps.is_empty());
        assert!(report.negatives.is_empty());
    }

    #[test]
    fn validate_flags_missing_slot() {
        let d = date("2024-01-01");
        let rows: Vec<_> = (0..6u8)
            .filter(|&b| b != 3)
            .map(|b| (d, b, 1.0))
            .collect();
        let s = MarketSeries::new(Market::MfrrNeg, rows).unwrap();
        let report = validate(&s);
        assert_eq!(report.gaps, vec![(d, 3)]);
    }

    #[test]
    fn validate_counts_negatives_and_zeros() {
        let d = date("2024-01-01");
        let s = MarketSeries::new(
            Market::AfrrNeg,
            vec![(d, 0, -1.0), (d, 1, 0.0), (d, 2, 4.0)],
        )
        .unwrap();
        let report = validate(&s);
        assert_eq!(report.negatives.len(), 1);
        assert_eq!(report.zero_prices, 1);
    }

    #[test]
    fn split_ratio_matches_expected_span() {
        // 2021-01-01 .. 2024-06-30 with train_end 2023-12-31 gives the
        // familiar ~85.7 % / 14.3 % row split.
        let start = date("2021-01-01");
        let end = date("2024-06-30");
        let n_days = (end - start).num_days() as usize + 1;
        let prices = vec![1.0; n_days * 6];
        let s = series_from_prices(Market::AfrrPos, "2021-01-01", &prices);
        let (train, test) = split(&s, date("2023-12-31"), end).unwrap();
        let ratio = train.len() as f64 / (train.len() + test.len()) as f64;
        assert!((ratio - 0.857).abs() < 0.002, "ratio {ratio}");
    }

    #[test]
    fn split_with_train_end_at_last_date_gives_empty_test() {
        let s = series_from_prices(Market::AfrrPos, "2024-01-01", &[1.0; 12]);
        let (train, test) = split(&s, date("2024-01-02"), date("2024-01-09")).unwrap();
        assert_eq!(train.len(), 12);
        assert!(test.is_empty());
    }

    #[test]
    fn split_before_first_date_errors() {
        let s = series_from_prices(Market::AfrrPos, "2024-01-05", &[1.0; 12]);
        let err = split(&s, date("2024-01-01"), date("2024-01-09")).unwrap_err();
        assert!(matches!(err, DataError::Split(_)));
    }

    #[test]
    fn slot_index_round_trip() {
        let slot = ProductSlot::new(date("2024-02-29"), 4, Market::MfrrPos);
        let back = ProductSlot::from_index(slot.index(), Market::MfrrPos);
        assert_eq!(slot, back);
    }
}
