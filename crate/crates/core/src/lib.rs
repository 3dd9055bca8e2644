//! Forecasting and bidding engine for pay-as-bid capacity markets.
//!
//! The pipeline goes: ingest per-slot capacity prices ([`data`]), fit one of
//! ten regressors on lagged windows ([`models`]), tune hyperparameters with
//! k-fold grid search ([`tuning`]), walk the test span day by day while
//! applying an exactly-optimized bid offset ([`backtest`]), and summarize
//! revenue against rule-based benchmarks ([`analysis`]).

pub mod analysis;
pub mod backtest;
pub mod data;
pub mod evaluation;
pub mod matrix;
pub mod models;
pub mod tuning;

pub use matrix::Matrix;
