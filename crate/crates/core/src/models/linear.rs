//! Regularized linear models: ridge via the normal equations, lasso and
//! elastic net via cyclic coordinate descent.
//!
//! The shared objective is
//!   (1/2n) ||y - Xw - b||^2 + alpha * l1_ratio * ||w||_1
//!                           + (alpha/2) * (1 - l1_ratio) * ||w||^2
//! with the intercept b unpenalized, which centering handles exactly.

use serde::{Deserialize, Serialize};

use super::{standardize::Standardizer, ModelError};
use crate::matrix::{solve_dense, Matrix};

/// Fitted linear predictor in raw feature space.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LinearHead {
    pub weights: Vec<f64>,
    pub intercept: f64,
}

impl LinearHead {
    pub fn predict_one(&self, x: &[f64]) -> f64 {
        self.weights
            .iter()
            .zip(x)
            .map(|(w, v)| w * v)
            .sum::<f64>()
            + self.intercept
    }
}

fn column_means(x: &Matrix) -> Vec<f64> {
    let n = x.rows() as f64;
    let mut means = vec![0.0; x.cols()];
    for row in x.iter_rows() {
        for (m, v) in means.iter_mut().zip(row) {
            *m += v;
        }
    }
    for m in &mut means {
        *m /= n;
    }
    means
}

/// Ridge regression solved exactly: (Xc'Xc + n*alpha*I) w = Xc'yc on
/// centered data, intercept recovered from the means. alpha = 0 is ordinary
/// least squares.
pub fn fit_ridge(x: &Matrix, y: &[f64], alpha: f64) -> Result<LinearHead, ModelError> {
    let n = x.rows();
    let p = x.cols();
    assert_eq!(y.len(), n);
    let x_mean = column_means(x);
    let y_mean = y.iter().sum::<f64>() / n as f64;

    if y.iter().all(|&v| v == y_mean) {
        // constant targets: the zero-weight solution is exact for any alpha
        return Ok(LinearHead {
            weights: vec![0.0; p],
            intercept: y_mean,
        });
    }

    let mut gram = Matrix::zeros(p, p);
    let mut xty = vec![0.0; p];
    for (row, &yi) in x.iter_rows().zip(y) {
        let yc = yi - y_mean;
        for j in 0..p {
            let xj = row[j] - x_mean[j];
            xty[j] += xj * yc;
            for l in j..p {
                let v = gram.get(j, l) + xj * (row[l] - x_mean[l]);
                gram.set(j, l, v);
            }
        }
    }
    for j in 0..p {
        for l in 0..j {
            gram.set(j, l, gram.get(l, j));
        }
        gram.set(j, j, gram.get(j, j) + n as f64 * alpha);
    }
    let weights = solve_dense(&gram, &xty).ok_or_else(|| {
        ModelError::Numeric("ridge normal equations are singular (alpha too small?)".into())
    })?;
    let intercept = y_mean
        - weights
            .iter()
            .zip(&x_mean)
            .map(|(w, m)| w * m)
            .sum::<f64>();
    Ok(LinearHead { weights, intercept })
}

/// Result of a coordinate-descent solve.
#[derive(Debug, Clone)]
pub struct CdFit {
    pub weights: Vec<f64>,
    pub intercept: f64,
    pub passes: usize,
}

fn soft_threshold(v: f64, t: f64) -> f64 {
    if v > t {
        v - t
    } else if v < -t {
        v + t
    } else {
        0.0
    }
}

/// Cyclic coordinate descent for the elastic-net objective above.
/// Converges when the largest coordinate update in a full pass drops below
/// `tol`; exceeding `max_iter` passes is a convergence error.
pub fn coordinate_descent(
    x: &Matrix,
    y: &[f64],
    alpha: f64,
    l1_ratio: f64,
    tol: f64,
    max_iter: usize,
) -> Result<CdFit, ModelError> {
    assert!((0.0..=1.0).contains(&l1_ratio), "l1_ratio out of range");
    assert!(alpha >= 0.0, "alpha must be non-negative");
    let n = x.rows();
    let p = x.cols();
    assert_eq!(y.len(), n);
    let nf = n as f64;

    let x_mean = column_means(x);
    let y_mean = y.iter().sum::<f64>() / nf;
    // centered copies; residual r = yc - Xc w starts at yc since w = 0
    let xc = {
        let rows: Vec<Vec<f64>> = x
            .iter_rows()
            .map(|row| row.iter().zip(&x_mean).map(|(v, m)| v - m).collect())
            .collect();
        Matrix::from_rows(&rows)
    };
    let mut residual: Vec<f64> = y.iter().map(|&v| v - y_mean).collect();
    let col_ssq: Vec<f64> = (0..p)
        .map(|j| (0..n).map(|i| xc.get(i, j).powi(2)).sum())
        .collect();

    let l1 = alpha * l1_ratio;
    let l2 = alpha * (1.0 - l1_ratio);
    let mut w = vec![0.0; p];
    let mut max_update = f64::INFINITY;
    let mut passes = 0usize;

    while passes < max_iter {
        passes += 1;
        max_update = 0.0;
        for j in 0..p {
            if col_ssq[j] == 0.0 {
                continue;
            }
            let old = w[j];
            let dot: f64 = (0..n).map(|i| xc.get(i, j) * residual[i]).sum();
            let rho = dot / nf + (col_ssq[j] / nf) * old;
            let new = soft_threshold(rho, l1) / (col_ssq[j] / nf + l2);
            if new != old {
                let delta = new - old;
                for i in 0..n {
                    residual[i] -= delta * xc.get(i, j);
                }
                w[j] = new;
            }
            max_update = max_update.max((new - old).abs());
        }
        if max_update < tol {
            let intercept = y_mean
                - w.iter().zip(&x_mean).map(|(wj, m)| wj * m).sum::<f64>();
            return Ok(CdFit {
                weights: w,
                intercept,
                passes,
            });
        }
    }
    Err(ModelError::Convergence {
        what: "coordinate descent",
        residual: max_update,
    })
}

/// Map weights fitted on standardized features back to raw feature space.
fn unstandardize(scaler: &Standardizer, weights: &[f64], intercept: f64) -> LinearHead {
    let mut raw = vec![0.0; weights.len()];
    let mut b = intercept;
    for ((rw, w), (m, s)) in raw
        .iter_mut()
        .zip(weights)
        .zip(scaler.mean().iter().zip(scaler.std()))
    {
        if *s > 0.0 {
            *rw = w / s;
            b -= w * m / s;
        }
    }
    LinearHead {
        weights: raw,
        intercept: b,
    }
}

pub(crate) fn fit_ridge_standardized(
    x: &Matrix,
    y: &[f64],
    alpha: f64,
) -> Result<LinearHead, ModelError> {
    let scaler = Standardizer::fit(x);
    let xs = scaler.transform(x);
    let head = fit_ridge(&xs, y, alpha)?;
    Ok(unstandardize(&scaler, &head.weights, head.intercept))
}

pub(crate) fn fit_net_standardized(
    x: &Matrix,
    y: &[f64],
    alpha: f64,
    l1_ratio: f64,
    tol: f64,
    max_iter: usize,
) -> Result<LinearHead, ModelError> {
    let scaler = Standardizer::fit(x);
    let xs = scaler.transform(x);
    let fit = coordinate_descent(&xs, y, alpha, l1_ratio, tol, max_iter)?;
    Ok(unstandardize(&scaler, &fit.weights, fit.intercept))
}
