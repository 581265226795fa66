//! Small dense solvers for the surrogate regressions.

use alloc::vec;
use alloc::vec::Vec;

/// Solves `a x = b` for symmetric positive definite `a` (row-major, n × n)
/// by Cholesky factorisation. Returns `None` when a pivot is not positive.
pub fn cholesky_solve(a: &[f64], b: &[f64], n: usize) -> Option<Vec<f64>> {
    let mut l = vec![0.0; n * n];
    for i in 0..n {
        for j in 0..=i {
            let mut s = a[i * n + j];
            for k in 0..j {
                s -= l[i * n + k] * l[j * n + k];
            }
            if i == j {
                if !(s > 0.0) {
                    return None;
                }
                l[i * n + i] = libm::sqrt(s);
            } else {
                l[i * n + j] = s / l[j * n + j];
            }
        }
    }
    let mut y = vec![0.0; n];
    for i in 0..n {
        let mut s = b[i];
        for k in 0..i {
            s -= l[i * n + k] * y[k];
        }
        y[i] = s / l[i * n + i];
    }
    let mut x = vec![0.0; n];
    for i in (0..n).rev() {
        let mut s = y[i];
        for k in i + 1..n {
            s -= l[k * n + i] * x[k];
        }
        x[i] = s / l[i * n + i];
    }
    Some(x)
}

/// Weighted ridge regression with an unpenalized intercept.
#[derive(Debug, Clone, PartialEq)]
pub struct RidgeFit {
    pub intercept: f64,
    pub coef: Vec<f64>,
    /// Weighted coefficient of determination on the training rows; 0 when the
    /// targets have no weighted variance.
    pub r2: f64,
}

impl RidgeFit {
    pub fn predict(&self, row: &[f64]) -> f64 {
        self.intercept + self.coef.iter().zip(row).map(|(c, x)| c * x).sum::<f64>()
    }
}

/// Fits `y ≈ b + X w` minimising `Σ s_i (y_i - b - x_i·w)² + penalty |w|²`.
/// `rows` holds `n` rows of `d` features each.
pub fn weighted_ridge(rows: &[Vec<f64>], y: &[f64], weights: &[f64], penalty: f64) -> RidgeFit {
    let d = rows.first().map_or(0, Vec::len);
    let sw: f64 = weights.iter().sum();
    if sw <= 0.0 {
        return RidgeFit { intercept: 0.0, coef: vec![0.0; d], r2: 0.0 };
    }
    let y_mean = y.iter().zip(weights).map(|(a, s)| a * s).sum::<f64>() / sw;
    let mut x_mean = vec![0.0; d];
    for (row, &s) in rows.iter().zip(weights) {
        for (m, &v) in x_mean.iter_mut().zip(row) {
            *m += s * v;
        }
    }
    x_mean.iter_mut().for_each(|m| *m /= sw);

    let mut gram = vec![0.0; d * d];
    let mut rhs = vec![0.0; d];
    let mut centered = vec![0.0; d];
    for ((row, &yi), &s) in rows.iter().zip(y).zip(weights) {
        for j in 0..d {
            centered[j] = row[j] - x_mean[j];
        }
        let yc = yi - y_mean;
        for i in 0..d {
            let ci = s * centered[i];
            rhs[i] += ci * yc;
            for j in 0..=i {
                gram[i * d + j] += ci * centered[j];
            }
        }
    }
    for i in 0..d {
        for j in 0..i {
            gram[j * d + i] = gram[i * d + j];
        }
        gram[i * d + i] += penalty;
    }
    let coef = if d == 0 {
        Vec::new()
    } else {
        let mut jitter = 0.0;
        loop {
            let mut g = gram.clone();
            for i in 0..d {
                g[i * d + i] += jitter;
            }
            if let Some(c) = cholesky_solve(&g, &rhs, d) {
                break c;
            }
            jitter = if jitter == 0.0 { 1e-10 } else { jitter * 10.0 };
        }
    };
    let intercept = y_mean - coef.iter().zip(&x_mean).map(|(c, m)| c * m).sum::<f64>();
    let mut fit = RidgeFit { intercept, coef, r2: 0.0 };
    fit.r2 = weighted_r2(rows, y, weights, |r| fit.predict(r), y_mean);
    fit
}

fn weighted_r2(
    rows: &[Vec<f64>],
    y: &[f64],
    weights: &[f64],
    predict: impl Fn(&[f64]) -> f64,
    y_mean: f64,
) -> f64 {
    let mut ss_res = 0.0;
    let mut ss_tot = 0.0;
    for ((row, &yi), &s) in rows.iter().zip(y).zip(weights) {
        let e = yi - predict(row);
        ss_res += s * e * e;
        let t = yi - y_mean;
        ss_tot += s * t * t;
    }
    if ss_tot <= 1e-24 {
        0.0
    } else {
        1.0 - ss_res / ss_tot
    }
}
