//! Value types shared by every stage of the pipeline.

use std::fmt;

use serde::{Deserialize, Serialize};

/// Number of blendshape coefficients emitted by the face landmarker.
pub const BLENDSHAPE_COUNT: usize = 52;

/// Canonical blendshape identifiers, in landmarker output order.
pub const BLENDSHAPE_NAMES: [&str; BLENDSHAPE_COUNT] = [
    "_neutral",
    "browDownLeft",
    "browDownRight",
    "browInnerUp",
    "browOuterUpLeft",
    "browOuterUpRight",
    "cheekPuff",
    "cheekSquintLeft",
    "cheekSquintRight",
    "eyeBlinkLeft",
    "eyeBlinkRight",
    "eyeLookDownLeft",
    "eyeLookDownRight",
    "eyeLookInLeft",
    "eyeLookInRight",
    "eyeLookOutLeft",
    "eyeLookOutRight",
    "eyeLookUpLeft",
    "eyeLookUpRight",
    "eyeSquintLeft",
    "eyeSquintRight",
    "eyeWideLeft",
    "eyeWideRight",
    "jawForward",
    "jawLeft",
    "jawOpen",
    "jawRight",
    "mouthClose",
    "mouthDimpleLeft",
    "mouthDimpleRight",
    "mouthFrownLeft",
    "mouthFrownRight",
    "mouthFunnel",
    "mouthLeft",
    "mouthLowerDownLeft",
    "mouthLowerDownRight",
    "mouthPressLeft",
    "mouthPressRight",
    "mouthPucker",
    "mouthRight",
    "mouthRollLower",
    "mouthRollUpper",
    "mouthShrugLower",
    "mouthShrugUpper",
    "mouthSmileLeft",
    "mouthSmileRight",
    "mouthStretchLeft",
    "mouthStretchRight",
    "mouthUpperUpLeft",
    "mouthUpperUpRight",
    "noseSneerLeft",
    "noseSneerRight",
];

/// Index of a blendshape in [`BLENDSHAPE_NAMES`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct BlendShapeId(u8);

impl BlendShapeId {
    pub fn from_name(name: &str) -> Option<Self> {
        BLENDSHAPE_NAMES
            .iter()
            .position(|n| *n == name)
            .map(|i| BlendShapeId(i as u8))
    }

    pub fn from_index(index: usize) -> Option<Self> {
        (index < BLENDSHAPE_COUNT).then_some(BlendShapeId(index as u8))
    }

    pub fn index(self) -> usize {
        self.0 as usize
    }

    pub fn name(self) -> &'static str {
        BLENDSHAPE_NAMES[self.index()]
    }
}

impl fmt::Display for BlendShapeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ValueError {
    #[error("unknown blendshape name {0:?}")]
    UnknownBlendshape(String),
    #[error("blendshape {name} = {value} is outside [0, 1]")]
    OutOfRange { name: &'static str, value: f64 },
}

/// The full set of 52 blendshape activations, each in `[0, 1]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BlendShapeVector([f64; BLENDSHAPE_COUNT]);

impl Default for BlendShapeVector {
    fn default() -> Self {
        Self::zeros()
    }
}

impl BlendShapeVector {
    pub fn zeros() -> Self {
        BlendShapeVector([0.0; BLENDSHAPE_COUNT])
    }

    pub fn from_array(values: [f64; BLENDSHAPE_COUNT]) -> Result<Self, ValueError> {
        for (i, v) in values.iter().enumerate() {
            if !(0.0..=1.0).contains(v) {
                return Err(ValueError::OutOfRange {
                    name: BLENDSHAPE_NAMES[i],
                    value: *v,
                });
            }
        }
        Ok(BlendShapeVector(values))
    }

    /// Builds a vector from `(name, value)` pairs; unnamed entries are 0.
    pub fn from_pairs<'a, I>(pairs: I) -> Result<Self, ValueError>
    where
        I: IntoIterator<Item = (&'a str, f64)>,
    {
        let mut out = Self::zeros();
        for (name, value) in pairs {
            out.set(name, value)?;
        }
        Ok(out)
    }

    pub fn get(&self, name: &str) -> Result<f64, ValueError> {
        BlendShapeId::from_name(name)
            .map(|id| self.0[id.index()])
            .ok_or_else(|| ValueError::UnknownBlendshape(name.to_string()))
    }

    pub fn set(&mut self, name: &str, value: f64) -> Result<(), ValueError> {
        let id = BlendShapeId::from_name(name)
            .ok_or_else(|| ValueError::UnknownBlendshape(name.to_string()))?;
        self.set_id(id, value)
    }

    pub fn set_id(&mut self, id: BlendShapeId, value: f64) -> Result<(), ValueError> {
        if !(0.0..=1.0).contains(&value) {
            return Err(ValueError::OutOfRange {
                name: id.name(),
                value,
            });
        }
        self.0[id.index()] = value;
        Ok(())
    }

    #[inline]
    pub fn value(&self, id: BlendShapeId) -> f64 {
        self.0[id.index()]
    }

    pub fn as_array(&self) -> &[f64; BLENDSHAPE_COUNT] {
        &self.0
    }

    pub fn iter(&self) -> impl Iterator<Item = (&'static str, f64)> + '_ {
        BLENDSHAPE_NAMES.iter().copied().zip(self.0.iter().copied())
    }
}

/// Head orientation in degrees. Positive yaw turns right, positive pitch tilts up.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct HeadPose {
    pub yaw: f64,
    pub pitch: f64,
    pub roll: f64,
}

/// Gaze direction in signed degrees, each in `[-180, 180)`.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct GazeAngles {
    pub yaw: f64,
    pub pitch: f64,
}

impl GazeAngles {
    /// Maps an angle given either signed or in `[0, 360)` to `[-180, 180)`.
    pub fn normalize_degrees(theta: f64) -> f64 {
        if theta >= 180.0 {
            theta - 360.0
        } else {
            theta
        }
    }
}

/// Face bounding box in normalized image coordinates.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FaceBox {
    pub x0: f64,
    pub y0: f64,
    pub x1: f64,
    pub y1: f64,
}

impl Default for FaceBox {
    fn default() -> Self {
        FaceBox {
            x0: 0.35,
            y0: 0.25,
            x1: 0.65,
            y1: 0.75,
        }
    }
}

impl FaceBox {
    pub fn is_valid(&self) -> bool {
        let unit = |v: f64| (0.0..=1.0).contains(&v);
        unit(self.x0) && unit(self.y0) && unit(self.x1) && unit(self.y1)
            && self.x0 < self.x1
            && self.y0 < self.y1
    }
}

/// Signals extracted from one face detection.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FaceSignals {
    pub blend: BlendShapeVector,
    pub head: HeadPose,
    pub gaze: GazeAngles,
    pub face_box: FaceBox,
}

/// One camera frame's worth of extracted features.
///
/// `face` is `None` when no face was detected; the wire record then carries
/// only `t_ms` and `face_present: false`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FeatureFrame {
    pub t_ms: u64,
    pub face: Option<FaceSignals>,
}

impl FeatureFrame {
    pub fn absent(t_ms: u64) -> Self {
        FeatureFrame { t_ms, face: None }
    }

    pub fn present(t_ms: u64, signals: FaceSignals) -> Self {
        FeatureFrame {
            t_ms,
            face: Some(signals),
        }
    }

    pub fn face_present(&self) -> bool {
        self.face.is_some()
    }
}

/// Screen dimensions in pixels.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ScreenSize {
    pub width: u32,
    pub height: u32,
}

impl ScreenSize {
    pub const fn new(width: u32, height: u32) -> Self {
        ScreenSize { width, height }
    }

    pub fn center(&self) -> (f64, f64) {
        (self.width as f64 / 2.0, self.height as f64 / 2.0)
    }
}

impl Default for ScreenSize {
    fn default() -> Self {
        ScreenSize::new(1920, 1080)
    }
}

/// A point on screen in pixels.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScreenPoint {
    pub x: f64,
    pub y: f64,
}

impl ScreenPoint {
    pub fn new(x: f64, y: f64) -> Self {
        ScreenPoint { x, y }
    }

    /// Clamps into `[0, width) x [0, height)`, landing on the last whole pixel at the far edge.
    pub fn clamped(self, screen: ScreenSize) -> Self {
        let max_x = (screen.width.max(1) - 1) as f64;
        let max_y = (screen.height.max(1) - 1) as f64;
        let fix = |v: f64, max: f64| if v.is_nan() { 0.0 } else { v.clamp(0.0, max) };
        ScreenPoint {
            x: fix(self.x, max_x),
            y: fix(self.y, max_y),
        }
    }

    pub fn distance(&self, other: &ScreenPoint) -> f64 {
        (self.x - other.x).hypot(self.y - other.y)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum MouseButton {
    Left,
    Middle,
    Right,
}

impl MouseButton {
    pub fn as_str(self) -> &'static str {
        match self {
            MouseButton::Left => "left",
            MouseButton::Middle => "middle",
            MouseButton::Right => "right",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "left" => Some(MouseButton::Left),
            "middle" => Some(MouseButton::Middle),
            "right" => Some(MouseButton::Right),
            _ => None,
        }
    }
}

/// A synthesized input action. Scroll amounts are positive for up.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum InputKind {
    KeyDown(String),
    KeyUp(String),
    KeyPress(String),
    MouseMoveAbs { x: i32, y: i32 },
    MouseMoveRel { dx: i32, dy: i32 },
    MouseClick(MouseButton),
    Scroll(i32),
}

impl InputKind {
    pub fn name(&self) -> &'static str {
        match self {
            InputKind::KeyDown(_) => "key_down",
            InputKind::KeyUp(_) => "key_up",
            InputKind::KeyPress(_) => "key_press",
            InputKind::MouseMoveAbs { .. } => "mouse_move_abs",
            InputKind::MouseMoveRel { .. } => "mouse_move_rel",
            InputKind::MouseClick(_) => "mouse_click",
            InputKind::Scroll(_) => "scroll",
        }
    }

    pub fn payload(&self) -> String {
        match self {
            InputKind::KeyDown(k) | InputKind::KeyUp(k) | InputKind::KeyPress(k) => k.clone(),
            InputKind::MouseMoveAbs { x, y } => format!("{x},{y}"),
            InputKind::MouseMoveRel { dx, dy } => format!("{dx},{dy}"),
            InputKind::MouseClick(b) => b.as_str().to_string(),
            InputKind::Scroll(n) => n.to_string(),
        }
    }

    pub fn is_mouse_move(&self) -> bool {
        matches!(
            self,
            InputKind::MouseMoveAbs { .. } | InputKind::MouseMoveRel { .. }
        )
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct InputEvent {
    pub t_ms: u64,
    pub kind: InputKind,
}

impl InputEvent {
    pub fn new(t_ms: u64, kind: InputKind) -> Self {
        InputEvent { t_ms, kind }
    }
}

impl fmt::Display for InputEvent {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}\t{}\t{}", self.t_ms, self.kind.name(), self.kind.payload())
    }
}
