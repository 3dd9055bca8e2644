//! Exact bid-offset optimization.
//!
//! Shifting all forecasts by delta trades bid height against award
//! frequency. Between award changes the revenue is linear and
//! non-decreasing in delta, so the maximum sits on a breakpoint
//! delta = y_i - y_hat_i (award boundaries, inclusive), the all-floored
//! point, or delta = 0. Evaluating exactly those candidates is an exact
//! maximization.

use serde::{Deserialize, Serialize};

use super::BacktestError;

/// Fitted offset with the (delta, revenue) curve over every candidate
/// breakpoint evaluated on the reference window.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OffsetFit {
    /// Revenue-maximizing shift; may be negative (and usually is).
    pub delta_star: f64,
    /// Candidate curve sorted by delta.
    pub curve: Vec<(f64, f64)>,
    /// Number of reference slots the fit was computed on.
    pub reference_len: usize,
}

/// Bid vector after shifting by `delta` and flooring.
pub fn apply_offset(y_hat: &[f64], delta: f64, floor: f64) -> Vec<f64> {
    y_hat.iter().map(|v| (v + delta).max(floor)).collect()
}

fn revenue_at(y: &[f64], y_hat: &[f64], delta: f64, floor: f64) -> f64 {
    y.iter()
        .zip(y_hat)
        .map(|(&actual, &pred)| {
            let bid = (pred + delta).max(floor);
            if bid <= actual {
                bid
            } else {
                0.0
            }
        })
        .sum()
}

/// Exact maximization of revenue(y, max(floor, y_hat + delta)) over delta.
/// Ties break toward the largest delta (highest bids).
pub fn fit_offset(y_ref: &[f64], y_hat_ref: &[f64], floor: f64) -> Result<OffsetFit, BacktestError> {
    if y_ref.is_empty() {
        return Err(BacktestError::EmptyInput);
    }
    if y_ref.len() != y_hat_ref.len() {
        return Err(BacktestError::Setup(format!(
            "reference lengths differ: {} vs {}",
            y_ref.len(),
            y_hat_ref.len()
        )));
    }
    if floor < 0.0 {
        return Err(BacktestError::InvalidFloor(floor));
    }

    let mut candidates: Vec<f64> = y_ref
        .iter()
        .zip(y_hat_ref)
        .map(|(y, p)| y - p)
        .collect();
    candidates.push(0.0);
    // the regime where every bid sits on the floor
    let max_pred = y_hat_ref.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    candidates.push(floor - max_pred);
    candidates.sort_by(f64::total_cmp);
    candidates.dedup();

    let mut curve = Vec::with_capacity(candidates.len());
    let mut best_delta = 0.0;
    let mut best_revenue = f64::NEG_INFINITY;
    for &delta in &candidates {
        let revenue = revenue_at(y_ref, y_hat_ref, delta, floor);
        curve.push((delta, revenue));
        if revenue > best_revenue || (revenue == best_revenue && delta > best_delta) {
            best_revenue = revenue;
            best_delta = delta;
        }
    }
    // delta = 0 is always a candidate, so the fit can never lose to the raw
    // forecast on its own reference window
    debug_assert!(best_revenue >= revenue_at(y_ref, y_hat_ref, 0.0, floor));
    Ok(OffsetFit {
        delta_star: best_delta,
        curve,
        reference_len: y_ref.len(),
    })
}
