//! K-fold selection of the L1 penalty.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::design::{check_finite, design_row, CalibrationSample, DesignMatrix, DesignRow, Standardization, MIN_DESIGN_SAMPLES};
use super::lasso::{fit_lasso, LassoOptions};
use super::CalibrationError;

pub const DEFAULT_FOLDS: usize = 5;
pub const DEFAULT_SEED: u64 = 0x6a7e_5eed;

/// Twenty penalties log-spaced over `[1e-4, 1e2]`, ascending.
pub fn default_lambda_grid() -> Vec<f64> {
    log_grid(1e-4, 1e2, 20)
}

pub fn log_grid(lo: f64, hi: f64, count: usize) -> Vec<f64> {
    if count == 1 {
        return vec![lo];
    }
    let (a, b) = (lo.log10(), hi.log10());
    (0..count)
        .map(|i| 10f64.powf(a + (b - a) * i as f64 / (count - 1) as f64))
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct CvReport {
    pub chosen_lambda: f64,
    pub chosen_mse: f64,
    /// `(lambda, mean squared error)` for every grid value, ascending lambda.
    pub curve: Vec<(f64, f64)>,
}

#[derive(Debug, Clone, Copy)]
pub struct CvOptions {
    pub folds: usize,
    pub seed: u64,
    pub lasso: LassoOptions,
}

impl Default for CvOptions {
    fn default() -> Self {
        CvOptions {
            folds: DEFAULT_FOLDS,
            seed: DEFAULT_SEED,
            lasso: LassoOptions::default(),
        }
    }
}

/// Penalized fit of one output on standardized features.
///
/// The target is z-scored before fitting so penalties on the grid mean the
/// same thing regardless of screen size; returned coefficients are rescaled
/// back to target units.
pub(crate) struct AxisFit {
    pub coefficients: DesignRow,
    pub intercept: f64,
}

pub(crate) fn fit_axis(
    scaled_rows: &DesignMatrix,
    zero_variance: &[bool; 6],
    target: &[f64],
    lambda: f64,
    options: &LassoOptions,
) -> Result<AxisFit, CalibrationError> {
    let n = target.len() as f64;
    let mean = target.iter().sum::<f64>() / n;
    let sd = (target.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n).sqrt();
    let scale = if sd > 0.0 { sd } else { 1.0 };
    let z: Vec<f64> = target.iter().map(|v| (v - mean) / scale).collect();
    let fit = fit_lasso(scaled_rows, &z, lambda, options)?;
    let mut coefficients = [0.0; 6];
    for j in 0..6 {
        if !zero_variance[j] {
            coefficients[j] = fit.coefficients[j] * scale;
        }
    }
    Ok(AxisFit {
        coefficients,
        intercept: mean + fit.intercept * scale,
    })
}

impl AxisFit {
    pub fn predict(&self, scaled: &DesignRow) -> f64 {
        self.intercept
            + self
                .coefficients
                .iter()
                .zip(scaled)
                .map(|(w, x)| w * x)
                .sum::<f64>()
    }
}

/// Seeded shuffle, then `folds` contiguous chunks whose sizes differ by at most one.
pub fn fold_assignment(n: usize, folds: usize, seed: u64) -> Vec<Vec<usize>> {
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let base = n / folds;
    let extra = n % folds;
    let mut out = Vec::with_capacity(folds);
    let mut start = 0;
    for k in 0..folds {
        let len = base + usize::from(k < extra);
        out.push(order[start..start + len].to_vec());
        start += len;
    }
    out
}

/// Chooses the penalty with the lowest mean squared prediction error over both
/// screen axes. Ties go to the larger penalty.
pub fn cross_validate(
    samples: &[CalibrationSample],
    lambda_grid: &[f64],
) -> Result<CvReport, CalibrationError> {
    cross_validate_with(samples, lambda_grid, &CvOptions::default())
}

pub fn cross_validate_with(
    samples: &[CalibrationSample],
    lambda_grid: &[f64],
    options: &CvOptions,
) -> Result<CvReport, CalibrationError> {
    if lambda_grid.is_empty() {
        return Err(CalibrationError::EmptyGrid);
    }
    if let Some(bad) = lambda_grid.iter().find(|l| !(**l >= 0.0) || !l.is_finite()) {
        return Err(CalibrationError::InvalidLambda(*bad));
    }
    let folds = options.folds.max(2);
    let needed = 2 * folds;
    if samples.len() < needed {
        return Err(CalibrationError::TooFewSamples {
            needed,
            got: samples.len(),
        });
    }
    check_finite(samples)?;

    let mut grid = lambda_grid.to_vec();
    grid.sort_by(|a, b| a.total_cmp(b));
    grid.dedup();

    let assignment = fold_assignment(samples.len(), folds, options.seed);
    let mut sse = vec![0.0; grid.len()];
    let mut count = 0usize;

    for held_out in &assignment {
        let mut is_held = vec![false; samples.len()];
        for &i in held_out {
            is_held[i] = true;
        }
        let train: Vec<&CalibrationSample> = samples
            .iter()
            .enumerate()
            .filter(|(i, _)| !is_held[*i])
            .map(|(_, s)| s)
            .collect();
        if train.len() < MIN_DESIGN_SAMPLES {
            return Err(CalibrationError::TooFewSamples {
                needed,
                got: samples.len(),
            });
        }
        let raw: Vec<DesignRow> = train.iter().map(|s| design_row(&s.gaze, &s.face_box)).collect();
        let standardization = Standardization::fit(&raw);
        let scaled: Vec<DesignRow> = raw.iter().map(|r| standardization.apply(r)).collect();
        let matrix = DesignMatrix::from_rows(&scaled);
        let tx: Vec<f64> = train.iter().map(|s| s.target.x).collect();
        let ty: Vec<f64> = train.iter().map(|s| s.target.y).collect();

        let held_rows: Vec<(DesignRow, f64, f64)> = held_out
            .iter()
            .map(|&i| {
                let s = &samples[i];
                (
                    standardization.apply(&design_row(&s.gaze, &s.face_box)),
                    s.target.x,
                    s.target.y,
                )
            })
            .collect();
        count += 2 * held_rows.len();

        for (k, &lambda) in grid.iter().enumerate() {
            let fx = fit_axis(&matrix, &standardization.zero_variance, &tx, lambda, &options.lasso)?;
            let fy = fit_axis(&matrix, &standardization.zero_variance, &ty, lambda, &options.lasso)?;
            for (row, x, y) in &held_rows {
                sse[k] += (fx.predict(row) - x).powi(2) + (fy.predict(row) - y).powi(2);
            }
        }
    }

    let curve: Vec<(f64, f64)> = grid
        .iter()
        .zip(&sse)
        .map(|(l, s)| (*l, s / count as f64))
        .collect();
    let (chosen_lambda, chosen_mse) = pick_lambda(&curve);
    Ok(CvReport {
        chosen_lambda,
        chosen_mse,
        curve,
    })
}

/// Minimum of the curve (ascending lambda), preferring larger lambda on ties.
fn pick_lambda(curve: &[(f64, f64)]) -> (f64, f64) {
    let mut best = curve[0];
    for &(lambda, mse) in &curve[1..] {
        let tie_band = 1e-12 * best.1.abs().max(f64::MIN_POSITIVE);
        if mse <= best.1 + tie_band {
            best = (lambda, mse.min(best.1));
        }
    }
    best
}
