//! Pearson correlation with exact two-sided p-values, and least-squares
//! line fitting.
//!
//! The p-value needs the Student-t CDF, implemented from scratch via the
//! regularized incomplete beta function: Lentz's continued fraction with
//! a Lanczos log-gamma (g = 7, 9 coefficients). For |r| -> 1 the statistic
//! diverges and the p-value underflows to 0, which is the right answer.

use super::AnalysisError;

/// Lanczos approximation, g = 7. Valid here for z >= 0.5, which covers
/// every Beta(df/2, 1/2) evaluation the t CDF needs.
const LANCZOS: [f64; 9] = [
    0.999_999_999_999_809_93,
    676.520_368_121_885_1,
    -1_259.139_216_722_402_8,
    771.323_428_777_653_13,
    -176.615_029_162_140_59,
    12.507_343_278_686_905,
    -0.138_571_095_265_720_12,
    9.984_369_578_019_571_6e-6,
    1.505_632_735_149_311_6e-7,
];

fn ln_gamma(z: f64) -> f64 {
    debug_assert!(z >= 0.5);
    let mut acc = LANCZOS[0];
    for (i, c) in LANCZOS.iter().enumerate().skip(1) {
        acc += c / (z + i as f64 - 1.0);
    }
    let t = z + 6.5;
    0.5 * (2.0 * std::f64::consts::PI).ln() + (z - 0.5) * t.ln() - t + acc.ln()
}

/// Continued fraction for the incomplete beta (modified Lentz).
fn beta_cf(a: f64, b: f64, x: f64) -> f64 {
    const MAX_ITER: usize = 300;
    const EPS: f64 = 1e-15;
    const FPMIN: f64 = 1e-300;

    let qab = a + b;
    let qap = a + 1.0;
    let qam = a - 1.0;
    let mut c = 1.0;
    let mut d = 1.0 - qab * x / qap;
    if d.abs() < FPMIN {
        d = FPMIN;
    }
    d = 1.0 / d;
    let mut h = d;
    for m in 1..=MAX_ITER {
        let m = m as f64;
        let m2 = 2.0 * m;
        let aa = m * (b - m) * x / ((qam + m2) * (a + m2));
        d = 1.0 + aa * d;
        if d.abs() < FPMIN {
            d = FPMIN;
        }
        c = 1.0 + aa / c;
        if c.abs() < FPMIN {
            c = FPMIN;
        }
        d = 1.0 / d;
        h *= d * c;
        let aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
        d = 1.0 + aa * d;
        if d.abs() < FPMIN {
            d = FPMIN;
        }
        c = 1.0 + aa / c;
        if c.abs() < FPMIN {
            c = FPMIN;
        }
        d = 1.0 / d;
        let del = d * c;
        h *= del;
        if (del - 1.0).abs() < EPS {
            break;
        }
    }
    h
}

/// Regularized incomplete beta I_x(a, b).
pub fn regularized_inc_beta(a: f64, b: f64, x: f64) -> f64 {
    assert!(a > 0.0 && b > 0.0, "beta parameters must be positive");
    if x <= 0.0 {
        return 0.0;
    }
    if x >= 1.0 {
        return 1.0;
    }
    let ln_front =
        ln_gamma(a + b) - ln_gamma(a) - ln_gamma(b) + a * x.ln() + b * (1.0 - x).ln();
    let front = ln_front.exp();
    if x < (a + 1.0) / (a + b + 2.0) {
        front * beta_cf(a, b, x) / a
    } else {
        1.0 - front * beta_cf(b, a, 1.0 - x) / b
    }
}

/// Student-t CDF with `df` degrees of freedom.
pub fn student_t_cdf(t: f64, df: f64) -> f64 {
    assert!(df > 0.0, "degrees of freedom must be positive");
    if t == 0.0 {
        return 0.5;
    }
    let x = df / (df + t * t);
    let tail = 0.5 * regularized_inc_beta(df / 2.0, 0.5, x);
    if t > 0.0 {
        1.0 - tail
    } else {
        tail
    }
}

/// Two-sided p-value of a t statistic: P(|T| >= |t|).
pub fn student_t_two_sided_p(t: f64, df: f64) -> f64 {
    assert!(df > 0.0);
    if !t.is_finite() {
        return 0.0;
    }
    regularized_inc_beta(df / 2.0, 0.5, df / (df + t * t))
}

fn moments(v: &[f64]) -> (f64, f64) {
    let n = v.len() as f64;
    let mean = v.iter().sum::<f64>() / n;
    let ss = v.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>();
    (mean, ss)
}

/// Sample Pearson correlation with its two-sided p-value from the exact
/// t distribution with n - 2 degrees of freedom.
pub fn pearson(x: &[f64], y: &[f64]) -> Result<(f64, f64), AnalysisError> {
    if x.len() != y.len() || x.len() < 3 {
        return Err(AnalysisError::TooFew {
            need: 3,
            have: x.len().min(y.len()),
        });
    }
    let (mx, ssx) = moments(x);
    let (my, ssy) = moments(y);
    if ssx <= 0.0 || ssy <= 0.0 {
        return Err(AnalysisError::DegenerateInput);
    }
    let cov: f64 = x
        .iter()
        .zip(y)
        .map(|(a, b)| (a - mx) * (b - my))
        .sum();
    let r = (cov / (ssx.sqrt() * ssy.sqrt())).clamp(-1.0, 1.0);
    let df = (x.len() - 2) as f64;
    let p = if 1.0 - r * r < 1e-300 {
        0.0
    } else {
        let t = r * (df / (1.0 - r * r)).sqrt();
        student_t_two_sided_p(t, df)
    };
    Ok((r, p))
}

/// Least-squares line: slope = cov(x, y)/var(x), intercept through the means.
pub fn linear_fit(x: &[f64], y: &[f64]) -> Result<(f64, f64), AnalysisError> {
    if x.len() != y.len() || x.len() < 2 {
        return Err(AnalysisError::TooFew {
            need: 2,
            have: x.len().min(y.len()),
        });
    }
    let (mx, ssx) = moments(x);
    if ssx <= 0.0 {
        return Err(AnalysisError::DegenerateInput);
    }
    let my = y.iter().sum::<f64>() / y.len() as f64;
    let cov: f64 = x
        .iter()
        .zip(y)
        .map(|(a, b)| (a - mx) * (b - my))
        .sum();
    let slope = cov / ssx;
    Ok((slope, my - slope * mx))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::prelude::*;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn exact_linear_relation_gives_r_one() {
        let x: Vec<f64> = (0..50).map(|i| i as f64).collect();
        let y: Vec<f64> = x.iter().map(|v| 2.0 * v + 3.0).collect();
        let (r, p) = pearson(&x, &y).unwrap();
        assert!((r - 1.0).abs() < 1e-12);
        assert!(p < 1e-10);
    }

    #[test]
    fn negation_flips_the_sign() {
        let x: Vec<f64> = (0..30).map(|i| (i as f64).sin() + i as f64 * 0.1).collect();
        let neg: Vec<f64> = x.iter().map(|v| -v).collect();
        let (r, _) = pearson(&x, &neg).unwrap();
        assert!((r + 1.0).abs() < 1e-12);
    }

    #[test]
    fn affine_invariance_of_r() {
        let mut rng = ChaCha8Rng::seed_from_u64(41);
        let x: Vec<f64> = (0..40).map(|_| rng.gen_range(-3.0..3.0)).collect();
        let y: Vec<f64> = x.iter().map(|v| v * 0.7 + rng.gen_range(-1.0..1.0)).collect();
        let (r0, _) = pearson(&x, &y).unwrap();
        let xs: Vec<f64> = x.iter().map(|v| 5.0 * v - 100.0).collect();
        let ys: Vec<f64> = y.iter().map(|v| 0.01 * v + 42.0).collect();
        let (r1, _) = pearson(&xs, &ys).unwrap();
        assert!((r0 - r1).abs() < 1e-12);
    }

    #[test]
    fn zero_variance_is_degenerate() {
        let x = [1.0, 1.0, 1.0, 1.0];
        let y = [1.0, 2.0, 3.0, 4.0];
        assert!(matches!(
            pearson(&x, &y),
            Err(AnalysisError::DegenerateInput)
        ));
    }

    #[test]
    fn t_cdf_closed_forms_for_small_df() {
        // df = 1 is Cauchy: F(t) = 1/2 + atan(t)/pi; F(1) = 0.75 exactly.
        assert!((student_t_cdf(1.0, 1.0) - 0.75).abs() < 1e-12);
        assert!((student_t_cdf(0.0, 1.0) - 0.5).abs() < 1e-15);
        // df = 2: F(t) = 1/2 + t / (2 sqrt(2 + t^2)).
        let f = |t: f64| 0.5 + t / (2.0 * (2.0 + t * t).sqrt());
        for t in [-3.0, -0.5, 0.25, 1.0, 2.0, 10.0] {
            assert!(
                (student_t_cdf(t, 2.0) - f(t)).abs() < 1e-12,
                "t = {t}: {} vs {}",
                student_t_cdf(t, 2.0),
                f(t)
            );
        }
    }

    #[test]
    fn t_cdf_symmetry() {
        for df in [1.0, 4.0, 17.0, 120.0] {
            for t in [0.3, 1.7, 4.2] {
                let a = student_t_cdf(t, df);
                let b = student_t_cdf(-t, df);
                assert!((a + b - 1.0).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn linear_fit_recovers_line() {
        let x: Vec<f64> = (0..20).map(|i| i as f64 * 0.5 - 3.0).collect();
        let y: Vec<f64> = x.iter().map(|v| 2.0 * v + 3.0).collect();
        let (slope, intercept) = linear_fit(&x, &y).unwrap();
        assert!((slope - 2.0).abs() < 1e-12);
        assert!((intercept - 3.0).abs() < 1e-12);
    }

    #[test]
    fn linear_fit_constant_target_has_zero_slope() {
        let x = [1.0, 2.0, 3.0];
        let y = [5.0, 5.0, 5.0];
        let (slope, intercept) = linear_fit(&x, &y).unwrap();
        assert_eq!(slope, 0.0);
        assert_eq!(intercept, 5.0);
    }

    #[test]
    fn linear_fit_residuals_orthogonal_to_x() {
        let mut rng = ChaCha8Rng::seed_from_u64(43);
        let x: Vec<f64> = (0..60).map(|_| rng.gen_range(-10.0..10.0)).collect();
        let y: Vec<f64> = x.iter().map(|v| 1.3 * v + rng.gen_range(-2.0..2.0)).collect();
        let (slope, intercept) = linear_fit(&x, &y).unwrap();
        let dot: f64 = x
            .iter()
            .zip(&y)
            .map(|(a, b)| a * (b - slope * a - intercept))
            .sum();
        assert!(dot.abs() < 1e-8, "residuals not orthogonal: {dot}");
    }
}
