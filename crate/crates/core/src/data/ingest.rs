//! CSV ingestion for TSO exports plus the canonical on-disk format.
//!
//! Canonical format: header `date,block,market,capacity_price_eur_mw`,
//! ISO dates, block 0-5, UTF-8, LF line endings. Raw exports are adapted
//! through a [`CsvMapping`] naming their columns.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::Write;
use std::path::Path;

use chrono::NaiveDate;

use super::{DataError, Market, MarketSeries};

pub const CANONICAL_HEADER: &str = "date,block,market,capacity_price_eur_mw";

/// Names the columns of a raw export and the market to extract from it.
#[derive(Debug, Clone)]
pub struct CsvMapping {
    pub date: String,
    pub block: String,
    pub market: String,
    pub price: String,
    /// Rows for other markets are filtered out.
    pub market_filter: Market,
}

impl CsvMapping {
    /// Mapping for files already in the canonical format.
    pub fn canonical(market: Market) -> Self {
        Self {
            date: "date".into(),
            block: "block".into(),
            market: "market".into(),
            price: "capacity_price_eur_mw".into(),
            market_filter: market,
        }
    }
}

fn parse_date(s: &str) -> Result<NaiveDate, String> {
    let t = s.trim();
    for fmt in ["%Y-%m-%d", "%d.%m.%Y", "%d/%m/%Y"] {
        if let Ok(d) = NaiveDate::parse_from_str(t, fmt) {
            return Ok(d);
        }
    }
    Err(format!("unparseable date `{s}`"))
}

/// Block values come as an index 0-5, a period-start time (`08:00`,
/// optionally with a `- 12:00` end part), or a product name embedding the
/// start hour (`NEG_08_12`).
fn parse_block(s: &str) -> Result<u8, String> {
    let t = s.trim();
    if let Ok(b) = t.parse::<u8>() {
        if b < 6 {
            return Ok(b);
        }
        return Err(format!("block index {b} out of range 0-5"));
    }
    let start = t.split('-').next().unwrap_or(t).trim();
    let hour: Option<u32> = if let Some((h, _)) = start.split_once(':') {
        h.trim().parse().ok()
    } else {
        start
            .split('_')
            .find_map(|part| part.parse::<u32>().ok())
    };
    match hour {
        Some(h) if h < 24 && h % 4 == 0 => Ok((h / 4) as u8),
        Some(h) => Err(format!("hour {h} does not start a 4-hour block")),
        None => Err(format!("unparseable block `{s}`")),
    }
}

/// Accepts `.` decimals as well as German-style `1.234,56`.
fn parse_price(s: &str) -> Result<f64, String> {
    let t = s.trim();
    let normalized = if t.contains(',') {
        if t.contains('.') {
            t.replace('.', "").replace(',', ".")
        } else {
            t.replace(',', ".")
        }
    } else {
        t.to_string()
    };
    normalized
        .parse::<f64>()
        .map_err(|_| format!("unparseable price `{s}`"))
}

/// Read a raw export, keep rows for the mapped market, and return a sorted,
/// deduplicated series.
pub fn ingest_csv(path: &Path, mapping: &CsvMapping) -> Result<MarketSeries, DataError> {
    let mut reader = csv::ReaderBuilder::new()
        .flexible(true)
        .trim(csv::Trim::All)
        .from_path(path)?;
    let headers = reader.headers()?.clone();
    let col = |name: &str| -> Result<usize, DataError> {
        headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| DataError::Mapping(name.to_string()))
    };
    let date_col = col(&mapping.date)?;
    let block_col = col(&mapping.block)?;
    let market_col = col(&mapping.market)?;
    let price_col = col(&mapping.price)?;

    let mut rows = Vec::new();
    for (i, record) in reader.records().enumerate() {
        let line = i + 2; // 1-based, after the header
        let record = record?;
        let field = |idx: usize| -> Result<&str, DataError> {
            record.get(idx).ok_or_else(|| DataError::Row {
                line,
                reason: "short row".into(),
            })
        };
        let market = match Market::parse(field(market_col)?) {
            Some(m) => m,
            None => {
                return Err(DataError::Row {
                    line,
                    reason: format!("unknown market `{}`", field(market_col)?),
                })
            }
        };
        if market != mapping.market_filter {
            continue;
        }
        let date = parse_date(field(date_col)?).map_err(|reason| DataError::Row { line, reason })?;
        let block =
            parse_block(field(block_col)?).map_err(|reason| DataError::Row { line, reason })?;
        let price =
            parse_price(field(price_col)?).map_err(|reason| DataError::Row { line, reason })?;
        rows.push((date, block, price));
    }
    MarketSeries::new(mapping.market_filter, rows)
}

/// Canonical CSV text for one series. Prices use the shortest
/// representation that round-trips, so write -> read -> write is stable.
pub fn canonical_csv_string(series: &MarketSeries) -> String {
    let mut out = String::with_capacity(series.len() * 32);
    out.push_str(CANONICAL_HEADER);
    out.push('\n');
    for (slot, price) in series.slots().iter().zip(series.prices()) {
        out.push_str(&format!(
            "{},{},{},{}\n",
            slot.date,
            slot.block,
            slot.market.as_str(),
            price
        ));
    }
    out
}

pub fn write_canonical_csv(series: &MarketSeries, path: &Path) -> Result<(), DataError> {
    let mut file = File::create(path)?;
    file.write_all(canonical_csv_string(series).as_bytes())?;
    Ok(())
}

/// Read a canonical file, which may hold several markets.
pub fn read_canonical_csv(path: &Path) -> Result<BTreeMap<Market, MarketSeries>, DataError> {
    let mut per_market: BTreeMap<Market, Vec<(NaiveDate, u8, f64)>> = BTreeMap::new();
    let mut reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_path(path)?;
    let headers = reader.headers()?.clone();
    for name in ["date", "block", "market", "capacity_price_eur_mw"] {
        if !headers.iter().any(|h| h == name) {
            return Err(DataError::Mapping(name.to_string()));
        }
    }
    let idx = |name: &str| headers.iter().position(|h| h == name).unwrap();
    let (di, bi, mi, pi) = (
        idx("date"),
        idx("block"),
        idx("market"),
        idx("capacity_price_eur_mw"),
    );
    for (i, record) in reader.records().enumerate() {
        let line = i + 2;
        let record = record?;
        let get = |j: usize| record.get(j).unwrap_or("");
        let market = Market::parse(get(mi)).ok_or_else(|| DataError::Row {
            line,
            reason: format!("unknown market `{}`", get(mi)),
        })?;
        let date = parse_date(get(di)).map_err(|reason| DataError::Row { line, reason })?;
        let block = parse_block(get(bi)).map_err(|reason| DataError::Row { line, reason })?;
        let price = parse_price(get(pi)).map_err(|reason| DataError::Row { line, reason })?;
        per_market
            .entry(market)
            .or_default()
            .push((date, block, price));
    }
    per_market
        .into_iter()
        .map(|(market, rows)| MarketSeries::new(market, rows).map(|s| (market, s)))
        .collect()
}
