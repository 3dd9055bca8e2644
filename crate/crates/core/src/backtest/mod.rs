//! Benchmarks, bid-offset fitting, and the walk-forward evaluation harness.

mod benchmarks;
mod harness;
mod offset;

pub use benchmarks::{best_constant_bid, fixed_bid, lagged_forecast, Lag, TrailingWindow};
pub use harness::{
    walk_forward, walk_forward_guarded, BacktestResult, GuardEvent, OffsetConfig, Period,
    Retrain, RetrainEvent, SlotRecord, Strategy,
};
pub use offset::{apply_offset, fit_offset, OffsetFit};

use chrono::NaiveDate;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum BacktestError {
    #[error("empty input")]
    EmptyInput,
    #[error("history too short: need {need} slots, have {have}")]
    History { need: usize, have: usize },
    #[error("invalid lag {0}: must be 6 (day) or 42 (week)")]
    InvalidLag(usize),
    #[error("bid floor must be non-negative, got {0}")]
    InvalidFloor(f64),
    #[error("invalid walk-forward setup: {0}")]
    Setup(String),
    #[error("run failed on {date} after {} completed slots: {reason}", records.len())]
    Run {
        date: NaiveDate,
        reason: String,
        records: Vec<SlotRecord>,
    },
    #[error(transparent)]
    Data(#[from] crate::data::DataError),
    #[error(transparent)]
    Eval(#[from] crate::evaluation::EvalError),
}
