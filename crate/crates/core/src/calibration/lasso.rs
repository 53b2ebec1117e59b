//! L1-penalized least squares by cyclic coordinate descent.
//!
//! Minimizes `(1/2n) * ||y - Xw - b||^2 + lambda * ||w||_1` with an unpenalized
//! intercept `b`.

use super::design::DesignMatrix;
use super::CalibrationError;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LassoOptions {
    /// Stop once the largest coefficient change in a sweep falls below this.
    pub tolerance: f64,
    pub max_sweeps: usize,
}

impl Default for LassoOptions {
    fn default() -> Self {
        LassoOptions {
            tolerance: 1e-6,
            max_sweeps: 1000,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LassoFit {
    pub coefficients: Vec<f64>,
    pub intercept: f64,
    pub sweeps: usize,
    /// `false` when `max_sweeps` ran out first; the fit is then the last iterate.
    pub converged: bool,
}

impl LassoFit {
    pub fn nonzero_count(&self) -> usize {
        self.coefficients.iter().filter(|c| **c != 0.0).count()
    }

    pub fn predict_row(&self, row: &[f64]) -> f64 {
        self.intercept
            + self
                .coefficients
                .iter()
                .zip(row)
                .map(|(w, x)| w * x)
                .sum::<f64>()
    }
}

#[inline]
pub fn soft_threshold(z: f64, gamma: f64) -> f64 {
    if z > gamma {
        z - gamma
    } else if z < -gamma {
        z + gamma
    } else {
        0.0
    }
}

/// Value of the penalized objective at `(w, b)`.
pub fn lasso_objective(x: &DesignMatrix, y: &[f64], w: &[f64], b: f64, lambda: f64) -> f64 {
    let n = x.n_rows() as f64;
    let rss: f64 = (0..x.n_rows())
        .map(|i| {
            let fitted: f64 = b + (0..x.n_cols()).map(|j| x.get(i, j) * w[j]).sum::<f64>();
            (y[i] - fitted).powi(2)
        })
        .sum();
    rss / (2.0 * n) + lambda * w.iter().map(|v| v.abs()).sum::<f64>()
}

pub fn fit_lasso(
    x: &DesignMatrix,
    y: &[f64],
    lambda: f64,
    options: &LassoOptions,
) -> Result<LassoFit, CalibrationError> {
    fit_lasso_with(x, y, lambda, options, |_, _| {})
}

/// Like [`fit_lasso`], calling `on_sweep(coefficients, intercept)` after every sweep.
pub fn fit_lasso_with<F>(
    x: &DesignMatrix,
    y: &[f64],
    lambda: f64,
    options: &LassoOptions,
    mut on_sweep: F,
) -> Result<LassoFit, CalibrationError>
where
    F: FnMut(&[f64], f64),
{
    if !(lambda >= 0.0) || !lambda.is_finite() {
        return Err(CalibrationError::InvalidLambda(lambda));
    }
    let n = x.n_rows();
    let p = x.n_cols();
    if y.len() != n {
        return Err(CalibrationError::DimensionMismatch {
            rows: n,
            targets: y.len(),
        });
    }
    if n == 0 {
        return Err(CalibrationError::TooFewSamples { needed: 1, got: 0 });
    }
    let nf = n as f64;
    let col_sq: Vec<f64> = (0..p)
        .map(|j| x.column(j).iter().map(|v| v * v).sum::<f64>() / nf)
        .collect();

    let mut w = vec![0.0; p];
    let mut b = y.iter().sum::<f64>() / nf;
    // residual = y - Xw - b
    let mut resid: Vec<f64> = y.iter().map(|v| v - b).collect();

    let mut sweeps = 0;
    let mut converged = false;
    while sweeps < options.max_sweeps {
        sweeps += 1;
        let mut max_delta: f64 = 0.0;

        let shift = resid.iter().sum::<f64>() / nf;
        if shift != 0.0 {
            b += shift;
            resid.iter_mut().for_each(|r| *r -= shift);
            max_delta = max_delta.max(shift.abs());
        }

        for j in 0..p {
            if col_sq[j] == 0.0 {
                continue;
            }
            let col = x.column(j);
            let rho = col.iter().zip(&resid).map(|(a, r)| a * r).sum::<f64>() / nf
                + col_sq[j] * w[j];
            let updated = soft_threshold(rho, lambda) / col_sq[j];
            let delta = updated - w[j];
            if delta != 0.0 {
                for (r, a) in resid.iter_mut().zip(col) {
                    *r -= a * delta;
                }
                w[j] = updated;
                max_delta = max_delta.max(delta.abs());
            }
        }
        on_sweep(&w, b);

        if max_delta < options.tolerance {
            converged = true;
            break;
        }
    }

    // Exact intercept for the final coefficients.
    let intercept = (0..n)
        .map(|i| y[i] - (0..p).map(|j| x.get(i, j) * w[j]).sum::<f64>())
        .sum::<f64>()
        / nf;

    if !converged {
        log::warn!(
            "coordinate descent did not converge in {} sweeps (lambda = {lambda})",
            sweeps
        );
    }
    Ok(LassoFit {
        coefficients: w,
        intercept,
        sweeps,
        converged,
    })
}
