//! Synthetic calibration sessions: a known linear gaze map plus noise.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use gazewheel_core::calibration::CalibrationSample;
use gazewheel_core::model::{FaceBox, GazeAngles, ScreenPoint};

pub const SCREEN_W: f64 = 1920.0;
pub const SCREEN_H: f64 = 1080.0;

/// Gaze angles that look at `(x, y)` under the true map
/// `x = 40 yaw + 960`, `y = -35 pitch + 540`.
pub fn true_gaze(x: f64, y: f64) -> GazeAngles {
    GazeAngles {
        yaw: (x - 960.0) / 40.0,
        pitch: (540.0 - y) / 35.0,
    }
}

/// Face box shifted horizontally by head yaw (degrees).
pub fn box_for_head(yaw_deg: f64) -> FaceBox {
    let shift = yaw_deg * 0.01;
    FaceBox {
        x0: 0.35 + shift,
        y0: 0.25,
        x1: 0.65 + shift,
        y1: 0.75,
    }
}

pub const HEAD_POSES: [f64; 3] = [-10.0, 0.0, 10.0];

/// The 3x3 grid times 3 head poses, with Gaussian noise of `sigma` degrees
/// on both gaze angles.
pub fn session(seed: u64, sigma: f64) -> Vec<CalibrationSample> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let noise = Normal::new(0.0, sigma).unwrap();
    let mut out = Vec::new();
    for gy in [0.1, 0.5, 0.9] {
        for gx in [0.1, 0.5, 0.9] {
            let (x, y) = (gx * SCREEN_W, gy * SCREEN_H);
            for head in HEAD_POSES {
                let g = true_gaze(x, y);
                out.push(CalibrationSample {
                    gaze: GazeAngles {
                        yaw: g.yaw + noise.sample(&mut rng),
                        pitch: g.pitch + noise.sample(&mut rng),
                    },
                    face_box: box_for_head(head),
                    target: ScreenPoint::new(x, y),
                });
            }
        }
    }
    out
}

/// Noise-free held-out points inside the calibrated region.
pub fn held_out(seed: u64, n: usize) -> Vec<CalibrationSample> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0xdead_beef);
    (0..n)
        .map(|_| {
            let x = rng.gen_range(0.1..0.9) * SCREEN_W;
            let y = rng.gen_range(0.1..0.9) * SCREEN_H;
            let head = rng.gen_range(-10.0..10.0);
            CalibrationSample {
                gaze: true_gaze(x, y),
                face_box: box_for_head(head),
                target: ScreenPoint::new(x, y),
            }
        })
        .collect()
}
