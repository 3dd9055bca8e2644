//! Epsilon-insensitive support vector regression.
//!
//! The dual is solved directly in the beta = alpha - alpha* parametrization:
//!   minimize  g(beta) = 1/2 beta'K beta + epsilon ||beta||_1 - y'beta
//!   subject to  sum beta = 0,  |beta_i| <= C.
//! Pairwise (SMO-style) updates move the maximal violating pair along
//! e_i - e_j, which keeps the equality constraint exact by construction.
//! Steps clip at the box and at sign changes of beta, where the l1 term
//! changes slope.

use serde::{Deserialize, Serialize};

use super::{standardize::Standardizer, ModelError};
use crate::matrix::Matrix;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum KernelKind {
    #[serde(rename = "rbf")]
    Rbf,
    #[serde(rename = "linear")]
    Linear,
}

pub fn kernel_value(kind: KernelKind, gamma: f64, a: &[f64], b: &[f64]) -> f64 {
    match kind {
        KernelKind::Linear => a.iter().zip(b).map(|(x, y)| x * y).sum(),
        KernelKind::Rbf => {
            let d2: f64 = a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum();
            (-gamma * d2).exp()
        }
    }
}

/// Exactly symmetric kernel matrix (upper triangle mirrored).
pub fn kernel_matrix(kind: KernelKind, gamma: f64, x: &Matrix) -> Matrix {
    let n = x.rows();
    let mut k = Matrix::zeros(n, n);
    for i in 0..n {
        for j in i..n {
            let v = kernel_value(kind, gamma, x.row(i), x.row(j));
            k.set(i, j, v);
            k.set(j, i, v);
        }
    }
    k
}

/// Solution of the epsilon-insensitive dual.
#[derive(Debug, Clone)]
pub struct SvrDual {
    /// beta_i = alpha_i - alpha_i*, with |beta_i| <= C and sum beta_i = 0.
    pub beta: Vec<f64>,
    pub bias: f64,
    pub iterations: usize,
}

/// Directional derivative of g for increasing beta_i (feasible if beta_i < C).
fn d_plus(u: f64, y: f64, eps: f64, beta: f64) -> f64 {
    u - y + if beta >= 0.0 { eps } else { -eps }
}

/// Directional derivative of g for decreasing beta_i (feasible if beta_i > -C).
fn d_minus(u: f64, y: f64, eps: f64, beta: f64) -> f64 {
    y - u + if beta > 0.0 { -eps } else { eps }
}

pub fn solve_svr_dual(
    k: &Matrix,
    y: &[f64],
    c: f64,
    epsilon: f64,
    tol: f64,
) -> Result<SvrDual, ModelError> {
    solve_svr_dual_capped(k, y, c, epsilon, tol, 100_000)
}

pub fn solve_svr_dual_capped(
    k: &Matrix,
    y: &[f64],
    c: f64,
    epsilon: f64,
    tol: f64,
    max_iter: usize,
) -> Result<SvrDual, ModelError> {
    let n = k.rows();
    if k.cols() != n {
        return Err(ModelError::Shape {
            expected: n,
            got: k.cols(),
        });
    }
    if y.len() != n {
        return Err(ModelError::Shape {
            expected: n,
            got: y.len(),
        });
    }
    if n == 0 {
        return Err(ModelError::EmptyData);
    }
    if c <= 0.0 {
        return Err(ModelError::Spec("SVR: C must be positive".into()));
    }
    if epsilon < 0.0 {
        return Err(ModelError::Spec("SVR: epsilon must be non-negative".into()));
    }
    for i in 0..n {
        for j in i + 1..n {
            if (k.get(i, j) - k.get(j, i)).abs() > 1e-8 {
                return Err(ModelError::Spec(
                    "SVR: kernel matrix is not symmetric".into(),
                ));
            }
        }
    }

    let mut beta = vec![0.0; n];
    let mut u = vec![0.0; n]; // u = K beta
    let mut iterations = 0usize;
    let mut violation;

    loop {
        // maximal violating pair
        let mut best_up: Option<(f64, usize)> = None;
        let mut best_down: Option<(f64, usize)> = None;
        for i in 0..n {
            if beta[i] < c {
                let d = d_plus(u[i], y[i], epsilon, beta[i]);
                if best_up.is_none_or(|(v, _)| d < v) {
                    best_up = Some((d, i));
                }
            }
            if beta[i] > -c {
                let d = d_minus(u[i], y[i], epsilon, beta[i]);
                if best_down.is_none_or(|(v, _)| d < v) {
                    best_down = Some((d, i));
                }
            }
        }
        let (Some((dp, i)), Some((dm, j))) = (best_up, best_down) else {
            violation = 0.0;
            break;
        };
        violation = -(dp + dm);
        if violation < tol {
            break;
        }
        if iterations >= max_iter {
            return Err(ModelError::Convergence {
                what: "SVR dual",
                residual: violation,
            });
        }
        iterations += 1;

        let curvature = (k.get(i, i) + k.get(j, j) - 2.0 * k.get(i, j)).max(1e-12);
        let mut t = violation / curvature;
        t = t.min(c - beta[i]).min(c + beta[j]);
        if beta[i] < 0.0 {
            t = t.min(-beta[i]); // stop where the l1 slope for i changes
        }
        if beta[j] > 0.0 {
            t = t.min(beta[j]); // same for j on the way down
        }
        beta[i] += t;
        beta[j] -= t;
        for (row, ui) in u.iter_mut().enumerate() {
            *ui += t * (k.get(row, i) - k.get(row, j));
        }
    }

    // bias from the KKT interval: b_lo = -min D+, b_hi = min D-
    let mut b_lo = f64::NEG_INFINITY;
    let mut b_hi = f64::INFINITY;
    for i in 0..n {
        if beta[i] < c {
            b_lo = b_lo.max(-d_plus(u[i], y[i], epsilon, beta[i]));
        }
        if beta[i] > -c {
            b_hi = b_hi.min(d_minus(u[i], y[i], epsilon, beta[i]));
        }
    }
    let bias = match (b_lo.is_finite(), b_hi.is_finite()) {
        (true, true) => (b_lo + b_hi) / 2.0,
        (true, false) => b_lo,
        (false, true) => b_hi,
        (false, false) => 0.0,
    };
    let _ = violation;
    Ok(SvrDual {
        beta,
        bias,
        iterations,
    })
}

/// Fitted SVR head: support vectors live in standardized feature space.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SvrHead {
    scaler: Standardizer,
    kernel: KernelKind,
    gamma: f64,
    support: Matrix,
    beta: Vec<f64>,
    bias: f64,
}

#[allow(clippy::too_many_arguments)]
pub(crate) fn fit(
    x: &Matrix,
    y: &[f64],
    c: f64,
    epsilon: f64,
    kernel: KernelKind,
    gamma: Option<f64>,
    tol: f64,
    max_iter: usize,
) -> Result<SvrHead, ModelError> {
    let scaler = Standardizer::fit(x);
    let xs = scaler.transform(x);
    let gamma = gamma.unwrap_or_else(|| {
        // the "scale" heuristic: 1 / (n_features * var(X)) on the matrix the
        // kernel actually sees
        let data = xs.data();
        let n = data.len() as f64;
        let mean = data.iter().sum::<f64>() / n;
        let var = data.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
        if var > 0.0 {
            1.0 / (xs.cols() as f64 * var)
        } else {
            1.0
        }
    });
    let k = kernel_matrix(kernel, gamma, &xs);
    // center the targets so the optimization path is independent of a
    // constant shift in y; the bias absorbs the mean afterwards
    let y_mean = y.iter().sum::<f64>() / y.len() as f64;
    let y_centered: Vec<f64> = y.iter().map(|v| v - y_mean).collect();
    let dual = solve_svr_dual_capped(&k, &y_centered, c, epsilon, tol, max_iter)?;

    let keep: Vec<usize> = (0..xs.rows()).filter(|&i| dual.beta[i] != 0.0).collect();
    Ok(SvrHead {
        scaler,
        kernel,
        gamma,
        support: xs.select_rows(&keep),
        beta: keep.iter().map(|&i| dual.beta[i]).collect(),
        bias: dual.bias + y_mean,
    })
}

impl SvrHead {
    pub fn predict_one(&self, x: &[f64]) -> f64 {
        let xs = self.scaler.transform_row(x);
        let mut f = self.bias;
        for (row, b) in self.support.iter_rows().zip(&self.beta) {
            f += b * kernel_value(self.kernel, self.gamma, row, &xs);
        }
        f
    }

    pub fn n_support(&self) -> usize {
        self.beta.len()
    }
}
