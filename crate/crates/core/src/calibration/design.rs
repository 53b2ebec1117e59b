use serde::{Deserialize, Serialize};

use super::CalibrationError;
use crate::model::{FaceBox, GazeAngles, ScreenPoint};

/// Features per sample: gaze yaw, gaze pitch, then the four face box coordinates.
pub const FEATURE_COUNT: usize = 6;

/// Fewest samples a design may be built from (feature count + 2).
pub const MIN_DESIGN_SAMPLES: usize = FEATURE_COUNT + 2;

/// One calibration observation: where the user looked and what the sensors reported.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CalibrationSample {
    pub gaze: GazeAngles,
    #[serde(rename = "box")]
    pub face_box: FaceBox,
    pub target: ScreenPoint,
}

pub type DesignRow = [f64; FEATURE_COUNT];

pub fn design_row(gaze: &GazeAngles, face_box: &FaceBox) -> DesignRow {
    [
        gaze.yaw,
        gaze.pitch,
        face_box.x0,
        face_box.y0,
        face_box.x1,
        face_box.y1,
    ]
}

/// Dense column-major matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct DesignMatrix {
    n_rows: usize,
    columns: Vec<Vec<f64>>,
}

impl DesignMatrix {
    pub fn from_columns(columns: Vec<Vec<f64>>) -> Self {
        let n_rows = columns.first().map_or(0, Vec::len);
        assert!(
            columns.iter().all(|c| c.len() == n_rows),
            "ragged design matrix"
        );
        DesignMatrix { n_rows, columns }
    }

    pub fn from_rows<R: AsRef<[f64]>>(rows: &[R]) -> Self {
        let n_cols = rows.first().map_or(0, |r| r.as_ref().len());
        let mut columns = vec![Vec::with_capacity(rows.len()); n_cols];
        for row in rows {
            let row = row.as_ref();
            assert_eq!(row.len(), n_cols, "ragged design matrix");
            for (col, v) in columns.iter_mut().zip(row) {
                col.push(*v);
            }
        }
        DesignMatrix {
            n_rows: rows.len(),
            columns,
        }
    }

    pub fn n_rows(&self) -> usize {
        self.n_rows
    }

    pub fn n_cols(&self) -> usize {
        self.columns.len()
    }

    pub fn column(&self, j: usize) -> &[f64] {
        &self.columns[j]
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.columns[j][i]
    }

    pub fn row(&self, i: usize) -> Vec<f64> {
        self.columns.iter().map(|c| c[i]).collect()
    }
}

/// Column-wise z-scoring parameters.
///
/// Zero-variance columns keep `std = 1` and are flagged; their coefficients are
/// always zero.
#[derive(Debug, Clone, PartialEq)]
pub struct Standardization {
    pub mean: DesignRow,
    pub std: DesignRow,
    pub zero_variance: [bool; FEATURE_COUNT],
}

impl Standardization {
    pub fn fit(rows: &[DesignRow]) -> Self {
        let n = rows.len().max(1) as f64;
        let mut mean = [0.0; FEATURE_COUNT];
        let mut std = [1.0; FEATURE_COUNT];
        let mut zero_variance = [false; FEATURE_COUNT];
        for j in 0..FEATURE_COUNT {
            let m = rows.iter().map(|r| r[j]).sum::<f64>() / n;
            let var = rows.iter().map(|r| (r[j] - m).powi(2)).sum::<f64>() / n;
            let s = var.sqrt();
            mean[j] = m;
            if s <= 1e-12 * (1.0 + m.abs()) {
                zero_variance[j] = true;
            } else {
                std[j] = s;
            }
        }
        Standardization {
            mean,
            std,
            zero_variance,
        }
    }

    /// Standardizes one row. Zero-variance columns map to exactly 0.
    pub fn apply(&self, row: &DesignRow) -> DesignRow {
        let mut out = [0.0; FEATURE_COUNT];
        for j in 0..FEATURE_COUNT {
            if !self.zero_variance[j] {
                out[j] = (row[j] - self.mean[j]) / self.std[j];
            }
        }
        out
    }
}

#[derive(Debug, Clone)]
pub struct Design {
    pub matrix: DesignMatrix,
    pub targets_x: Vec<f64>,
    pub targets_y: Vec<f64>,
    pub standardization: Standardization,
}

pub(crate) fn check_finite(samples: &[CalibrationSample]) -> Result<(), CalibrationError> {
    for (i, s) in samples.iter().enumerate() {
        let row = design_row(&s.gaze, &s.face_box);
        if row.iter().any(|v| !v.is_finite()) || !s.target.x.is_finite() || !s.target.y.is_finite()
        {
            return Err(CalibrationError::NonFinite { index: i });
        }
    }
    Ok(())
}

/// Assembles the standardized design matrix and the two target vectors.
pub fn build_design(samples: &[CalibrationSample]) -> Result<Design, CalibrationError> {
    if samples.len() < MIN_DESIGN_SAMPLES {
        return Err(CalibrationError::TooFewSamples {
            needed: MIN_DESIGN_SAMPLES,
            got: samples.len(),
        });
    }
    check_finite(samples)?;
    let rows: Vec<DesignRow> = samples
        .iter()
        .map(|s| design_row(&s.gaze, &s.face_box))
        .collect();
    let standardization = Standardization::fit(&rows);
    let scaled: Vec<DesignRow> = rows.iter().map(|r| standardization.apply(r)).collect();
    Ok(Design {
        matrix: DesignMatrix::from_rows(&scaled),
        targets_x: samples.iter().map(|s| s.target.x).collect(),
        targets_y: samples.iter().map(|s| s.target.y).collect(),
        standardization,
    })
}
