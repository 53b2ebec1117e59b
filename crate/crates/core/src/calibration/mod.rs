//! Gaze-to-screen calibration.
//!
//! A sparse linear model maps `(gaze yaw, gaze pitch, face box)` to a screen
//! point, one model per axis. The penalty strength is picked by k-fold cross
//! validation over a fixed log-spaced grid.

mod cv;
mod design;
mod lasso;

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

pub use cv::{
    cross_validate, cross_validate_with, default_lambda_grid, fold_assignment, log_grid,
    CvOptions, CvReport, DEFAULT_FOLDS, DEFAULT_SEED,
};
pub use design::{
    build_design, design_row, CalibrationSample, Design, DesignMatrix, DesignRow,
    Standardization, FEATURE_COUNT, MIN_DESIGN_SAMPLES,
};
pub use lasso::{fit_lasso, fit_lasso_with, lasso_objective, soft_threshold, LassoFit, LassoOptions};

use crate::model::{FaceBox, GazeAngles, ScreenPoint, ScreenSize};

/// Samples required by [`fit_calibration`].
pub const MIN_CALIBRATION_SAMPLES: usize = 16;

#[derive(Debug, thiserror::Error)]
pub enum CalibrationError {
    #[error("too few samples: need at least {needed}, got {got}")]
    TooFewSamples { needed: usize, got: usize },
    #[error("sample {index} contains a non-finite value")]
    NonFinite { index: usize },
    #[error("invalid penalty {0}")]
    InvalidLambda(f64),
    #[error("lambda grid is empty")]
    EmptyGrid,
    #[error("design has {rows} rows but {targets} targets")]
    DimensionMismatch { rows: usize, targets: usize },
    #[error("sample file is marked incomplete; refusing to fit")]
    Incomplete,
    #[error("sample {index} target ({x}, {y}) lies outside the {width}x{height} screen")]
    TargetOffScreen {
        index: usize,
        x: f64,
        y: f64,
        width: u32,
        height: u32,
    },
    #[error("invalid model: {0}")]
    InvalidModel(String),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("parse error: {0}")]
    Parse(#[from] serde_json::Error),
}

/// Fitted gaze regressor. Field names are the on-disk format.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CalibrationModel {
    pub coef_x: [f64; FEATURE_COUNT],
    pub coef_y: [f64; FEATURE_COUNT],
    pub intercept_x: f64,
    pub intercept_y: f64,
    pub feat_mean: [f64; FEATURE_COUNT],
    pub feat_std: [f64; FEATURE_COUNT],
    pub lambda: f64,
    pub cv_mse: f64,
}

impl CalibrationModel {
    /// A model that ignores its inputs and always predicts `(x, y)`.
    pub fn constant(x: f64, y: f64) -> Self {
        CalibrationModel {
            coef_x: [0.0; FEATURE_COUNT],
            coef_y: [0.0; FEATURE_COUNT],
            intercept_x: x,
            intercept_y: y,
            feat_mean: [0.0; FEATURE_COUNT],
            feat_std: [1.0; FEATURE_COUNT],
            lambda: 0.0,
            cv_mse: 0.0,
        }
    }

    /// A model with the given raw-unit slopes on gaze yaw and pitch only.
    pub fn linear_gaze(x_per_yaw: f64, x0: f64, y_per_pitch: f64, y0: f64) -> Self {
        let mut m = Self::constant(x0, y0);
        m.coef_x[0] = x_per_yaw;
        m.coef_y[1] = y_per_pitch;
        m
    }

    /// Unclamped prediction.
    pub fn predict_raw(&self, gaze: &GazeAngles, face_box: &FaceBox) -> (f64, f64) {
        let row = design_row(gaze, face_box);
        let mut x = self.intercept_x;
        let mut y = self.intercept_y;
        for (j, v) in row.iter().enumerate() {
            let z = (v - self.feat_mean[j]) / self.feat_std[j];
            x += self.coef_x[j] * z;
            y += self.coef_y[j] * z;
        }
        (x, y)
    }

    pub fn save(&self, path: &Path) -> Result<(), CalibrationError> {
        fs::write(path, serde_json::to_string_pretty(self)? + "\n")?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self, CalibrationError> {
        let model: CalibrationModel = serde_json::from_str(&fs::read_to_string(path)?)?;
        if model.feat_std.iter().any(|s| !(*s > 0.0)) {
            return Err(CalibrationError::InvalidModel(
                "feat_std entries must be positive".into(),
            ));
        }
        Ok(model)
    }
}

pub fn predict_gaze_point(
    model: &CalibrationModel,
    gaze: &GazeAngles,
    face_box: &FaceBox,
    screen: ScreenSize,
) -> ScreenPoint {
    let (x, y) = model.predict_raw(gaze, face_box);
    ScreenPoint::new(x, y).clamped(screen)
}

pub fn fit_calibration(samples: &[CalibrationSample]) -> Result<CalibrationModel, CalibrationError> {
    fit_calibration_with(samples, &default_lambda_grid(), &CvOptions::default())
}

pub fn fit_calibration_with(
    samples: &[CalibrationSample],
    lambda_grid: &[f64],
    options: &CvOptions,
) -> Result<CalibrationModel, CalibrationError> {
    if samples.len() < MIN_CALIBRATION_SAMPLES {
        return Err(CalibrationError::TooFewSamples {
            needed: MIN_CALIBRATION_SAMPLES,
            got: samples.len(),
        });
    }
    let design = build_design(samples)?;
    let report = cross_validate_with(samples, lambda_grid, options)?;
    let zv = &design.standardization.zero_variance;
    let fx = cv::fit_axis(&design.matrix, zv, &design.targets_x, report.chosen_lambda, &options.lasso)?;
    let fy = cv::fit_axis(&design.matrix, zv, &design.targets_y, report.chosen_lambda, &options.lasso)?;
    Ok(CalibrationModel {
        coef_x: fx.coefficients,
        coef_y: fy.coefficients,
        intercept_x: fx.intercept,
        intercept_y: fy.intercept,
        feat_mean: design.standardization.mean,
        feat_std: design.standardization.std,
        lambda: report.chosen_lambda,
        cv_mse: report.chosen_mse,
    })
}

/// Contents of a calibration sample file written by a calibration session.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampleSet {
    #[serde(default = "default_true")]
    pub complete: bool,
    #[serde(default)]
    pub screen: Option<ScreenSize>,
    pub samples: Vec<CalibrationSample>,
}

fn default_true() -> bool {
    true
}

impl SampleSet {
    pub fn load(path: &Path) -> Result<Self, CalibrationError> {
        let set: SampleSet = serde_json::from_str(&fs::read_to_string(path)?)?;
        set.validate()?;
        Ok(set)
    }

    pub fn save(&self, path: &Path) -> Result<(), CalibrationError> {
        fs::write(path, serde_json::to_string_pretty(self)? + "\n")?;
        Ok(())
    }

    pub fn validate(&self) -> Result<(), CalibrationError> {
        if let Some(screen) = self.screen {
            for (index, s) in self.samples.iter().enumerate() {
                let inside = s.target.x >= 0.0
                    && s.target.y >= 0.0
                    && s.target.x < screen.width as f64
                    && s.target.y < screen.height as f64;
                if !inside {
                    return Err(CalibrationError::TargetOffScreen {
                        index,
                        x: s.target.x,
                        y: s.target.y,
                        width: screen.width,
                        height: screen.height,
                    });
                }
            }
        }
        Ok(())
    }

    /// Fits a model, refusing sets flagged incomplete.
    pub fn fit(&self) -> Result<CalibrationModel, CalibrationError> {
        if !self.complete {
            return Err(CalibrationError::Incomplete);
        }
        fit_calibration(&self.samples)
    }
}
