//! Loss metrics and the pay-as-bid award simulation.
//!
//! A slot is awarded when the bid does not exceed the actual price
//! (inclusive at equality), and an awarded slot pays exactly the bid.
//! That asymmetry is the whole game: overshooting pays nothing.

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("length mismatch: {left} vs {right}")]
    Shape { left: usize, right: usize },
    #[error("empty input")]
    EmptyInput,
    #[error("negative bid {bid} at slot {index}")]
    NegativeBid { index: usize, bid: f64 },
    #[error("MAPE undefined: every slot has zero price")]
    MapeUndefined,
}

/// All metrics of one evaluation span in a single struct. `mape` is a
/// fraction and absent when every actual price was zero; the skipped
/// zero-price slots are counted in `mape_excluded`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsBundle {
    pub mae: f64,
    pub mse: f64,
    pub mape: Option<f64>,
    pub revenue: f64,
    pub n_awarded: usize,
    pub n_slots: usize,
    pub mape_excluded: usize,
}

fn check_lengths(y: &[f64], y_hat: &[f64]) -> Result<(), EvalError> {
    if y.len() != y_hat.len() {
        return Err(EvalError::Shape {
            left: y.len(),
            right: y_hat.len(),
        });
    }
    if y.is_empty() {
        return Err(EvalError::EmptyInput);
    }
    Ok(())
}

/// Mean absolute error.
pub fn mae(y: &[f64], y_hat: &[f64]) -> Result<f64, EvalError> {
    check_lengths(y, y_hat)?;
    Ok(y.iter()
        .zip(y_hat)
        .map(|(a, p)| (p - a).abs())
        .sum::<f64>()
        / y.len() as f64)
}

/// Mean absolute percentage error as a fraction, skipping slots where the
/// actual price is not positive. Returns the error and how many slots were
/// skipped; errors out when nothing remains.
pub fn mape(y: &[f64], y_hat: &[f64]) -> Result<(f64, usize), EvalError> {
    check_lengths(y, y_hat)?;
    let mut sum = 0.0;
    let mut used = 0usize;
    for (&a, &p) in y.iter().zip(y_hat) {
        if a > 0.0 {
            sum += (p - a).abs() / a;
            used += 1;
        }
    }
    let excluded = y.len() - used;
    if used == 0 {
        return Err(EvalError::MapeUndefined);
    }
    Ok((sum / used as f64, excluded))
}

/// Pay-as-bid revenue: sum of bids over awarded slots, award inclusive at
/// bid == price.
pub fn revenue(y: &[f64], bids: &[f64]) -> Result<f64, EvalError> {
    check_lengths(y, bids)?;
    for (i, &b) in bids.iter().enumerate() {
        if b < 0.0 {
            return Err(EvalError::NegativeBid { index: i, bid: b });
        }
    }
    Ok(y.iter()
        .zip(bids)
        .filter(|(&a, &b)| b <= a)
        .map(|(_, &b)| b)
        .sum())
}

/// All metrics in one pass over the span.
pub fn evaluate(y: &[f64], bids: &[f64]) -> Result<MetricsBundle, EvalError> {
    check_lengths(y, bids)?;
    for (i, &b) in bids.iter().enumerate() {
        if b < 0.0 {
            return Err(EvalError::NegativeBid { index: i, bid: b });
        }
    }
    let n = y.len();
    let mut abs_sum = 0.0;
    let mut sq_sum = 0.0;
    let mut pct_sum = 0.0;
    let mut pct_used = 0usize;
    let mut revenue = 0.0;
    let mut n_awarded = 0usize;
    for (&a, &b) in y.iter().zip(bids) {
        let diff = b - a;
        abs_sum += diff.abs();
        sq_sum += diff * diff;
        if a > 0.0 {
            pct_sum += diff.abs() / a;
            pct_used += 1;
        }
        if b <= a {
            revenue += b;
            n_awarded += 1;
        }
    }
    Ok(MetricsBundle {
        mae: abs_sum / n as f64,
        mse: sq_sum / n as f64,
        mape: (pct_used > 0).then(|| pct_sum / pct_used as f64),
        revenue,
        n_awarded,
        n_slots: n,
        mape_excluded: n - pct_used,
    })
}
