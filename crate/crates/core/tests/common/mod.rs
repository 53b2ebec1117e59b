#![allow(dead_code)]

pub mod checks;
pub mod oracle;
pub mod synth;

use std::path::PathBuf;

use gazewheel_core::calibration::CalibrationModel;
use gazewheel_core::codec::encode_frame;
use gazewheel_core::config::Profile;
use gazewheel_core::model::{BlendShapeVector, FaceBox, FaceSignals, FeatureFrame, GazeAngles, HeadPose};

pub fn data_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/data")
}

pub fn profile_path(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../profiles").join(name)
}

pub fn wukong() -> Profile {
    Profile::from_yaml(&std::fs::read_to_string(profile_path("wukong.yaml")).unwrap()).unwrap()
}

/// Model used by the scenario traces: 40 px per degree of gaze yaw,
/// 35 px per degree of gaze pitch (up is negative y).
pub fn scenario_model() -> CalibrationModel {
    CalibrationModel::linear_gaze(40.0, 960.0, -35.0, 540.0)
}

/// Gaze angles that `scenario_model` maps to screen point `(x, y)`.
pub fn gaze_at(x: f64, y: f64) -> GazeAngles {
    GazeAngles {
        yaw: (x - 960.0) / 40.0,
        pitch: (540.0 - y) / 35.0,
    }
}

pub const NEUTRAL_HEAD: HeadPose = HeadPose { yaw: 0.0, pitch: 3.0, roll: 0.0 };

/// Head pose deflected by `(yaw, pitch)` scale units from the profile center.
pub fn head(yaw: f64, pitch: f64) -> HeadPose {
    HeadPose {
        yaw: 8.0 * yaw,
        pitch: 3.0 + 8.0 * pitch,
        roll: 0.0,
    }
}

pub const BROW: &[(&str, f64)] = &[("browInnerUp", 0.9)];
pub const LIP_ROLL: &[(&str, f64)] = &[("mouthRollLower", 0.6), ("mouthRollUpper", 0.6)];
pub const MOUTH_LEFT: &[(&str, f64)] = &[("mouthLeft", 0.5)];
pub const MOUTH_RIGHT: &[(&str, f64)] = &[("mouthRight", 0.5)];
pub const JAW_OPEN: &[(&str, f64)] = &[("jawOpen", 0.6)];
pub const JAW_LEFT: &[(&str, f64)] = &[("jawLeft", 0.5)];
pub const PUCKER: &[(&str, f64)] = &[("mouthPucker", 0.99)];
pub const NONE: &[(&str, f64)] = &[];

/// Builds a 30 Hz frame stream.
pub struct Trace {
    frames: Vec<FeatureFrame>,
}

impl Trace {
    pub fn new() -> Self {
        Trace { frames: Vec::new() }
    }

    fn next_t(&self) -> u64 {
        self.frames.len() as u64 * 1000 / 30
    }

    pub fn hold(mut self, n: usize, blend: &[(&str, f64)], head: HeadPose, gaze: GazeAngles) -> Self {
        let blend = BlendShapeVector::from_pairs(blend.iter().copied()).unwrap();
        for _ in 0..n {
            let t = self.next_t();
            self.frames.push(FeatureFrame::present(
                t,
                FaceSignals {
                    blend,
                    head,
                    gaze,
                    face_box: FaceBox::default(),
                },
            ));
        }
        self
    }

    /// Frames where gaze steps through `points` one per frame.
    pub fn gaze_path(mut self, blend: &[(&str, f64)], head: HeadPose, points: &[(f64, f64)]) -> Self {
        for &(x, y) in points {
            self = self.hold(1, blend, head, gaze_at(x, y));
        }
        self
    }

    pub fn absent(mut self, n: usize) -> Self {
        for _ in 0..n {
            let t = self.next_t();
            self.frames.push(FeatureFrame::absent(t));
        }
        self
    }

    pub fn frames(&self) -> &[FeatureFrame] {
        &self.frames
    }

    pub fn to_text(&self) -> String {
        self.frames.iter().map(|f| encode_frame(f) + "\n").collect()
    }
}

fn center() -> GazeAngles {
    gaze_at(960.0, 540.0)
}

/// Brow raise holds space, lip roll holds e, jaw left clicks right, pucker clicks left.
pub fn direct_triggers() -> Trace {
    let n = NEUTRAL_HEAD;
    Trace::new()
        .hold(10, NONE, n, center())
        .hold(15, BROW, n, center())
        .hold(10, NONE, n, center())
        .hold(15, LIP_ROLL, n, center())
        .hold(10, NONE, n, center())
        .hold(6, JAW_LEFT, n, center())
        .hold(10, NONE, n, center())
        .hold(6, PUCKER, n, center())
        .hold(10, NONE, n, center())
}

/// Skill wheel picked by gaze, tool wheel picked by head.
pub fn wheel_skill() -> Trace {
    let n = NEUTRAL_HEAD;
    Trace::new()
        .hold(10, NONE, n, center())
        // Open num4 and look right of the wheel center: item 1, key 2.
        .hold(6, MOUTH_LEFT, n, center())
        .hold(8, MOUTH_LEFT, n, gaze_at(1160.0, 540.0))
        .hold(4, NONE, n, gaze_at(1160.0, 540.0))
        .hold(10, NONE, n, center())
        // Open num6 and tilt the head down: item 2, key f.
        .hold(6, MOUTH_RIGHT, n, center())
        .hold(8, MOUTH_RIGHT, head(0.0, -2.0), center())
        .hold(4, NONE, head(0.0, -2.0), center())
        .hold(10, NONE, n, center())
}

/// Only num4 and num6, each opened four times with the head pointing
/// up, right, down and left.
pub fn eight_for_two() -> Trace {
    let n = NEUTRAL_HEAD;
    let dirs = [head(0.0, 2.0), head(2.0, 0.0), head(0.0, -2.0), head(-2.0, 0.0)];
    let mut t = Trace::new().hold(6, NONE, n, center());
    for wheel in [MOUTH_LEFT, MOUTH_RIGHT] {
        for d in dirs {
            t = t
                .hold(4, wheel, n, center())
                .hold(6, wheel, d, center())
                .hold(3, NONE, d, center())
                .hold(6, NONE, n, center());
        }
    }
    t
}

/// Game mode camera control: edge gaze turns the view, head left walks,
/// roll scrolls, and a face dropout releases everything.
pub fn perspective_change() -> Trace {
    let n = NEUTRAL_HEAD;
    let roll_left = HeadPose { yaw: 0.0, pitch: 3.0, roll: -15.0 };
    Trace::new()
        .hold(10, NONE, n, center())
        .hold(15, NONE, n, gaze_at(0.02 * 1920.0, 540.0))
        .hold(10, NONE, n, center())
        .hold(15, NONE, n, gaze_at(1900.0, 20.0))
        .hold(10, NONE, n, center())
        .hold(12, NONE, head(-1.5, 0.0), center())
        .hold(6, NONE, n, center())
        .hold(5, NONE, roll_left, center())
        .hold(6, NONE, n, center())
        .hold(6, NONE, head(-1.5, 0.0), center())
        .absent(20)
        .hold(10, NONE, n, center())
}

/// Switch to type mode with the numlock wheel, fixate a target until the
/// cursor locks, click with a pucker, then move on after the click lock.
pub fn cursor_select() -> Trace {
    let n = NEUTRAL_HEAD;
    let mut t = Trace::new()
        .hold(6, NONE, n, center())
        .hold(6, JAW_OPEN, n, center())
        .hold(6, JAW_OPEN, head(0.0, -2.0), center())
        .hold(3, NONE, head(0.0, -2.0), center())
        .hold(6, NONE, n, center());
    // Saccade to the target, then a jittery fixation for 1.2 s.
    t = t.gaze_path(NONE, n, &[(800.0, 480.0), (600.0, 400.0), (450.0, 320.0), (400.0, 300.0)]);
    let jitter: Vec<(f64, f64)> = (0..36).map(|k| (400.0 + (k % 3) as f64 - 1.0, 300.0 + (k % 2) as f64)).collect();
    t = t.gaze_path(NONE, n, &jitter);
    t.hold(4, PUCKER, n, gaze_at(400.0, 300.0))
        .hold(10, NONE, n, gaze_at(400.0, 300.0))
        .hold(40, NONE, n, gaze_at(1500.0, 800.0))
}

pub type Scenario = (&'static str, fn() -> Trace);

pub const SCENARIOS: [Scenario; 5] = [
    ("perspective_change", perspective_change),
    ("cursor_select", cursor_select),
    ("direct_triggers", direct_triggers),
    ("wheel_skill", wheel_skill),
    ("eight_for_two", eight_for_two),
];
