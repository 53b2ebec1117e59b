//! Cursor control: gaze smoothing, absolute and edge-driven relative motion,
//! dwell locking, head fine-tuning, roll scrolling and head direction holds.
//!
//! Everything here is driven by frame timestamps only.

use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

use crate::model::{HeadPose, ScreenPoint, ScreenSize};

/// The `cursor:` section of a profile.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CursorConfig {
    /// Moving-average window over raw gaze points, in frames.
    pub smoothing_window: usize,
    /// Pixels of fine-tune offset per unit of head deflection.
    pub fine_gain: f64,
    /// Head deflection that engages fine-tuning, direction keys and wheel pointing.
    pub head_deadzone: f64,
    /// Deflection below which an engaged latch releases.
    pub head_release: f64,
    /// Width of each edge band as a fraction of the screen dimension.
    pub edge_band: f64,
    /// Relative motion per frame at full band penetration, in pixels.
    pub relative_gain: f64,
    pub scroll_threshold_deg: f64,
    /// Scroll units per degree beyond the threshold.
    pub scroll_gain: f64,
    /// Stillness time before the dwell lock engages.
    pub dwell_ms: u64,
    /// How long the dwell lock lasts.
    pub dwell_lock_ms: u64,
    pub stillness_eps_px: f64,
    /// Absence time after which the engine fails safe.
    pub face_loss_ms: u64,
    /// Keymaps that drive the cursor in relative mode.
    pub relative_modes: Vec<String>,
}

impl Default for CursorConfig {
    fn default() -> Self {
        CursorConfig {
            smoothing_window: 5,
            fine_gain: 10.0,
            head_deadzone: 1.0,
            head_release: 0.8,
            edge_band: 0.1,
            relative_gain: 8.0,
            scroll_threshold_deg: 10.0,
            scroll_gain: 1.0,
            dwell_ms: 1000,
            dwell_lock_ms: 1000,
            stillness_eps_px: 3.0,
            face_loss_ms: 500,
            relative_modes: vec!["game".into()],
        }
    }
}

impl CursorConfig {
    pub fn validate(&self) -> Result<(), String> {
        let finite_nonneg = |v: f64| v.is_finite() && v >= 0.0;
        if self.smoothing_window == 0 {
            return Err("cursor.smoothing_window must be >= 1".into());
        }
        if !(self.head_deadzone.is_finite() && self.head_deadzone > 0.0) {
            return Err("cursor.head_deadzone must be positive".into());
        }
        if !(finite_nonneg(self.head_release) && self.head_release <= self.head_deadzone) {
            return Err("cursor.head_release must be in [0, head_deadzone]".into());
        }
        if !(self.edge_band > 0.0 && self.edge_band < 0.5) {
            return Err("cursor.edge_band must be in (0, 0.5)".into());
        }
        for (name, v) in [
            ("fine_gain", self.fine_gain),
            ("relative_gain", self.relative_gain),
            ("scroll_threshold_deg", self.scroll_threshold_deg),
            ("scroll_gain", self.scroll_gain),
            ("stillness_eps_px", self.stillness_eps_px),
        ] {
            if !finite_nonneg(v) {
                return Err(format!("cursor.{name} must be finite and non-negative"));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum CursorMode {
    Absolute,
    Relative,
}

/// Head pose relative to the configured center, in units of the configured scale.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct HeadDeflection {
    pub yaw: f64,
    pub pitch: f64,
    pub roll: f64,
    /// Roll offset from center in degrees, used for scrolling.
    pub roll_deg: f64,
}

impl HeadDeflection {
    pub fn from_pose(pose: &HeadPose, center: [f64; 3], scale: [f64; 3]) -> Self {
        HeadDeflection {
            yaw: (pose.yaw - center[0]) / scale[0],
            pitch: (pose.pitch - center[1]) / scale[1],
            roll: (pose.roll - center[2]) / scale[2],
            roll_deg: pose.roll - center[2],
        }
    }
}

/// Moving average over the last `window` points.
#[derive(Debug, Clone, PartialEq)]
pub struct GazeSmoother {
    window: usize,
    points: VecDeque<ScreenPoint>,
}

impl GazeSmoother {
    pub fn new(window: usize) -> Self {
        GazeSmoother {
            window: window.max(1),
            points: VecDeque::with_capacity(window.max(1)),
        }
    }

    pub fn push(&mut self, p: ScreenPoint) -> ScreenPoint {
        if self.points.len() == self.window {
            self.points.pop_front();
        }
        self.points.push_back(p);
        self.current().expect("just pushed")
    }

    pub fn current(&self) -> Option<ScreenPoint> {
        if self.points.is_empty() {
            return None;
        }
        let n = self.points.len() as f64;
        let (sx, sy) = self
            .points
            .iter()
            .fold((0.0, 0.0), |(sx, sy), p| (sx + p.x, sy + p.y));
        Some(ScreenPoint::new(sx / n, sy / n))
    }

    pub fn reset(&mut self) {
        self.points.clear();
    }
}

/// Threshold with a lower release level.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct Latch {
    engaged: bool,
}

impl Latch {
    pub fn update(&mut self, magnitude: f64, engage: f64, release: f64) -> bool {
        self.engaged = if self.engaged {
            magnitude >= release
        } else {
            magnitude >= engage
        };
        self.engaged
    }

    pub fn engaged(&self) -> bool {
        self.engaged
    }
}

/// Per-axis fine-tune offset in pixels. Screen y grows downward, so head up
/// moves the cursor up.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct FineTune {
    yaw: Latch,
    pitch: Latch,
}

impl FineTune {
    pub fn offset(&mut self, head: &HeadDeflection, cfg: &CursorConfig) -> (f64, f64) {
        let dx = if self.yaw.update(head.yaw.abs(), cfg.head_deadzone, cfg.head_release) {
            cfg.fine_gain * head.yaw
        } else {
            0.0
        };
        let dy = if self.pitch.update(head.pitch.abs(), cfg.head_deadzone, cfg.head_release) {
            -cfg.fine_gain * head.pitch
        } else {
            0.0
        };
        (dx, dy)
    }
}

/// Cursor-move suppression window.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct DwellLock {
    locked_until: Option<u64>,
    span_ms: u64,
}

impl DwellLock {
    /// Locks until `t_ms + duration_ms`, never shortening an existing lock.
    pub fn lock(&mut self, t_ms: u64, duration_ms: u64) {
        let until = t_ms.saturating_add(duration_ms);
        if self.locked_until.is_some_and(|u| u >= until) {
            return;
        }
        self.locked_until = Some(until);
        self.span_ms = duration_ms;
    }

    /// Fraction of the current lock still to run, in `[0, 1]`.
    pub fn remaining_fraction(&self, t_ms: u64) -> f64 {
        if self.span_ms == 0 {
            return 0.0;
        }
        (self.remaining_ms(t_ms) as f64 / self.span_ms as f64).min(1.0)
    }

    pub fn is_locked(&self, t_ms: u64) -> bool {
        self.locked_until.is_some_and(|u| t_ms < u)
    }

    pub fn locked_until(&self) -> Option<u64> {
        self.locked_until
    }

    pub fn remaining_ms(&self, t_ms: u64) -> u64 {
        self.locked_until.map_or(0, |u| u.saturating_sub(t_ms))
    }

    pub fn clear(&mut self) {
        *self = DwellLock::default();
    }
}

/// Tracks stillness of the absolute target and the last emitted position.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct AbsoluteCursor {
    last_emitted: Option<(i32, i32)>,
    anchor: Option<(ScreenPoint, u64)>,
    anchor_spent: bool,
    fine: FineTune,
}

impl AbsoluteCursor {
    /// One frame of absolute control. Returns the position to move to, if any.
    pub fn update(
        &mut self,
        smoothed: ScreenPoint,
        head: &HeadDeflection,
        cfg: &CursorConfig,
        screen: ScreenSize,
        lock: &mut DwellLock,
        t_ms: u64,
    ) -> Option<(i32, i32)> {
        let (ox, oy) = self.fine.offset(head, cfg);
        let target = ScreenPoint::new(smoothed.x + ox, smoothed.y + oy).clamped(screen);

        match self.anchor {
            Some((a, _)) if a.distance(&target) < cfg.stillness_eps_px => {}
            _ => {
                self.anchor = Some((target, t_ms));
                self.anchor_spent = false;
            }
        }
        let (_, since) = self.anchor.expect("anchor set above");
        if !self.anchor_spent && t_ms.saturating_sub(since) >= cfg.dwell_ms {
            self.anchor_spent = true;
            lock.lock(t_ms, cfg.dwell_lock_ms);
        }
        if lock.is_locked(t_ms) {
            return None;
        }
        let pos = (target.x.round() as i32, target.y.round() as i32);
        if self.last_emitted == Some(pos) {
            return None;
        }
        self.last_emitted = Some(pos);
        Some(pos)
    }

    pub fn reset(&mut self) {
        self.anchor = None;
        self.anchor_spent = false;
        self.fine = FineTune::default();
    }
}

/// Edge-band motion for relative mode. Zero outside all bands.
pub fn relative_motion(gaze: ScreenPoint, screen: ScreenSize, cfg: &CursorConfig) -> Option<(i32, i32)> {
    let axis = |v: f64, len: f64| -> f64 {
        let band = cfg.edge_band * len;
        if v < band {
            -cfg.relative_gain * ((band - v) / band).min(1.0)
        } else if v > len - band {
            cfg.relative_gain * ((v - (len - band)) / band).min(1.0)
        } else {
            0.0
        }
    };
    let dx = axis(gaze.x, screen.width as f64).round() as i32;
    let dy = axis(gaze.y, screen.height as f64).round() as i32;
    (dx != 0 || dy != 0).then_some((dx, dy))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum RollSide {
    Left,
    Right,
}

/// Scroll magnitude for a roll offset. Negative roll is left.
pub fn scroll_amount(roll_deg: f64, cfg: &CursorConfig) -> Option<(RollSide, i32)> {
    if !(roll_deg.abs() > cfg.scroll_threshold_deg) {
        return None;
    }
    let amount = (cfg.scroll_gain * (roll_deg.abs() - cfg.scroll_threshold_deg)).round() as i32;
    if amount == 0 {
        return None;
    }
    let side = if roll_deg < 0.0 { RollSide::Left } else { RollSide::Right };
    Some((side, amount))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum HeadDirection {
    Up,
    Down,
    Left,
    Right,
    RollLeft,
    RollRight,
}

impl HeadDirection {
    pub const ALL: [HeadDirection; 6] = [
        HeadDirection::Up,
        HeadDirection::Down,
        HeadDirection::Left,
        HeadDirection::Right,
        HeadDirection::RollLeft,
        HeadDirection::RollRight,
    ];

    /// The reserved binding name.
    pub fn intention(self) -> &'static str {
        match self {
            HeadDirection::Up => "head_up",
            HeadDirection::Down => "head_down",
            HeadDirection::Left => "head_left",
            HeadDirection::Right => "head_right",
            HeadDirection::RollLeft => "head_roll_left",
            HeadDirection::RollRight => "head_roll_right",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
enum AxisHold {
    #[default]
    Idle,
    Positive,
    Negative,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum HoldChange {
    Pressed(HeadDirection),
    Released(HeadDirection),
}

/// Which head directions are currently held, with hysteresis and mutual
/// exclusion per axis.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct HeadHolds {
    // yaw, pitch, roll
    axes: [AxisHold; 3],
    needs_rearm: bool,
}

impl HeadHolds {
    fn directions(axis: usize) -> (HeadDirection, HeadDirection) {
        match axis {
            0 => (HeadDirection::Right, HeadDirection::Left),
            1 => (HeadDirection::Up, HeadDirection::Down),
            _ => (HeadDirection::RollRight, HeadDirection::RollLeft),
        }
    }

    pub fn held(&self) -> Vec<HeadDirection> {
        let mut out = Vec::new();
        for (i, a) in self.axes.iter().enumerate() {
            let (pos, neg) = Self::directions(i);
            match a {
                AxisHold::Positive => out.push(pos),
                AxisHold::Negative => out.push(neg),
                AxisHold::Idle => {}
            }
        }
        out
    }

    /// Yaw and pitch use normalized deflection; roll uses degrees against the
    /// scroll threshold, released at the same release ratio.
    pub fn update(&mut self, head: &HeadDeflection, cfg: &CursorConfig) -> Vec<HoldChange> {
        let ratio = cfg.head_release / cfg.head_deadzone;
        let values = [
            (head.yaw, cfg.head_deadzone, cfg.head_release),
            (head.pitch, cfg.head_deadzone, cfg.head_release),
            (head.roll_deg, cfg.scroll_threshold_deg, cfg.scroll_threshold_deg * ratio),
        ];
        if self.needs_rearm {
            if values.iter().all(|(v, _, release)| v.abs() < *release) {
                self.needs_rearm = false;
            } else {
                return Vec::new();
            }
        }
        let mut changes = Vec::new();
        for (i, (v, engage, release)) in values.into_iter().enumerate() {
            let (pos, neg) = Self::directions(i);
            let state = &mut self.axes[i];
            match *state {
                AxisHold::Positive if v < release => {
                    changes.push(HoldChange::Released(pos));
                    *state = AxisHold::Idle;
                }
                AxisHold::Negative if -v < release => {
                    changes.push(HoldChange::Released(neg));
                    *state = AxisHold::Idle;
                }
                _ => {}
            }
            if *state == AxisHold::Idle {
                if v >= engage {
                    changes.push(HoldChange::Pressed(pos));
                    *state = AxisHold::Positive;
                } else if -v >= engage {
                    changes.push(HoldChange::Pressed(neg));
                    *state = AxisHold::Negative;
                }
            }
        }
        changes
    }

    /// Releases everything; nothing is pressed again until every axis has
    /// returned inside its release level.
    pub fn suspend(&mut self) -> Vec<HoldChange> {
        let released = self.held().into_iter().map(HoldChange::Released).collect();
        self.axes = [AxisHold::Idle; 3];
        self.needs_rearm = true;
        released
    }

    pub fn is_suspended(&self) -> bool {
        self.needs_rearm
    }

    /// Drops all holds without re-arm requirement.
    pub fn reset(&mut self) -> Vec<HoldChange> {
        let released = self.held().into_iter().map(HoldChange::Released).collect();
        self.axes = [AxisHold::Idle; 3];
        self.needs_rearm = false;
        released
    }
}
