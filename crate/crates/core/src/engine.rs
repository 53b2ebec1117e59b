//! The per-frame pipeline.
//!
//! Each frame runs, in order: expression evaluation with priority rules and
//! debouncing, intention falls then rises (wheels and single-item bindings),
//! wheel highlighting, head direction holds, roll scrolling, cursor motion.

use std::fmt;

use serde::Serialize;

use crate::actions::Action;
use crate::calibration::{predict_gaze_point, CalibrationModel};
use crate::config::Profile;
use crate::cursor::{
    relative_motion, scroll_amount, AbsoluteCursor, CursorMode, DwellLock, GazeSmoother,
    HeadDeflection, HeadDirection, HeadHolds, HoldChange, RollSide,
};
use crate::expression::{IntentionId, IntentionState};
use crate::model::{FaceSignals, FeatureFrame, InputEvent, InputKind, ScreenPoint};
use crate::wheel::{select_segment, Pointer, WheelOutcome, WheelSnapshot, WheelSpec, WheelState};

/// One line of the event log.
#[derive(Debug, Clone, PartialEq)]
pub enum LogRecord {
    Event(InputEvent),
    /// State change worth seeing in the log (wheel, mode, face loss).
    Note { t_ms: u64, text: String },
    /// Rejected input.
    Diag { t_ms: u64, text: String },
}

impl LogRecord {
    pub fn t_ms(&self) -> u64 {
        match self {
            LogRecord::Event(e) => e.t_ms,
            LogRecord::Note { t_ms, .. } | LogRecord::Diag { t_ms, .. } => *t_ms,
        }
    }
}

impl fmt::Display for LogRecord {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            LogRecord::Event(e) => write!(f, "{e}"),
            LogRecord::Note { t_ms, text } => write!(f, "{t_ms}\tnote\t{text}"),
            LogRecord::Diag { t_ms, text } => write!(f, "{t_ms}\tdiag\t{text}"),
        }
    }
}

/// Append-only record of everything the engine did.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct EventLog {
    records: Vec<LogRecord>,
}

impl EventLog {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&mut self, record: LogRecord) {
        self.records.push(record);
    }

    pub fn extend(&mut self, records: impl IntoIterator<Item = LogRecord>) {
        self.records.extend(records);
    }

    pub fn records(&self) -> &[LogRecord] {
        &self.records
    }

    pub fn events(&self) -> impl Iterator<Item = &InputEvent> {
        self.records.iter().filter_map(|r| match r {
            LogRecord::Event(e) => Some(e),
            _ => None,
        })
    }

    pub fn diagnostics(&self) -> impl Iterator<Item = &LogRecord> {
        self.records.iter().filter(|r| matches!(r, LogRecord::Diag { .. }))
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    /// One line per record, newline-terminated.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for r in &self.records {
            out.push_str(&r.to_string());
            out.push('\n');
        }
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Holder {
    Intention(IntentionId),
    Head(HeadDirection),
}

/// What the overlay needs to draw one frame.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EngineSnapshot {
    pub t_ms: u64,
    pub mode: Option<String>,
    pub cursor_mode: CursorMode,
    pub face_present: bool,
    pub wheel: WheelSnapshot,
    pub cursor: Option<(i32, i32)>,
    pub gaze: Option<(f64, f64)>,
    pub dwell_remaining_ms: u64,
    pub dwell_fraction: f64,
    pub active_intentions: Vec<String>,
    pub held_keys: Vec<String>,
}

impl EngineSnapshot {
    pub fn to_json_line(&self) -> String {
        serde_json::to_string(self).expect("snapshot serialization is infallible")
    }
}

pub struct Engine {
    profile: Profile,
    model: Option<CalibrationModel>,
    mode: Option<String>,
    cursor_mode: CursorMode,
    intentions: IntentionState,
    wheel: WheelState,
    smoother: GazeSmoother,
    absolute: AbsoluteCursor,
    lock: DwellLock,
    head: HeadHolds,
    holds: Vec<(Holder, String)>,
    frames: u64,
    last_t: Option<u64>,
    absent_since: Option<u64>,
    failed_safe: bool,
    face_present: bool,
    cursor_pos: Option<(i32, i32)>,
    gaze: Option<ScreenPoint>,
    log: EventLog,
    out: Vec<InputEvent>,
}

impl Engine {
    pub fn new(profile: Profile, model: Option<CalibrationModel>) -> Self {
        let mode = profile.initial_mode().map(String::from);
        let intentions = IntentionState::new(profile.expressions().len(), profile.engine().debounce_frames);
        let smoother = GazeSmoother::new(profile.cursor().smoothing_window);
        let mut engine = Engine {
            profile,
            model,
            mode,
            cursor_mode: CursorMode::Absolute,
            intentions,
            wheel: WheelState::default(),
            smoother,
            absolute: AbsoluteCursor::default(),
            lock: DwellLock::default(),
            head: HeadHolds::default(),
            holds: Vec::new(),
            frames: 0,
            last_t: None,
            absent_since: None,
            failed_safe: false,
            face_present: false,
            cursor_pos: None,
            gaze: None,
            log: EventLog::new(),
            out: Vec::new(),
        };
        engine.cursor_mode = engine.mode_cursor(engine.mode.as_deref());
        engine
    }

    pub fn profile(&self) -> &Profile {
        &self.profile
    }

    pub fn mode(&self) -> Option<&str> {
        self.mode.as_deref()
    }

    pub fn cursor_mode(&self) -> CursorMode {
        self.cursor_mode
    }

    pub fn wheel(&self) -> &WheelState {
        &self.wheel
    }

    pub fn frames(&self) -> u64 {
        self.frames
    }

    pub fn log(&self) -> &EventLog {
        &self.log
    }

    pub fn take_log(&mut self) -> EventLog {
        std::mem::take(&mut self.log)
    }

    /// Keys currently held down, in press order.
    pub fn held_keys(&self) -> Vec<String> {
        let mut keys: Vec<String> = Vec::new();
        for (_, k) in &self.holds {
            if !keys.contains(k) {
                keys.push(k.clone());
            }
        }
        keys
    }

    fn mode_cursor(&self, mode: Option<&str>) -> CursorMode {
        match mode {
            Some(m) if self.profile.cursor().relative_modes.iter().any(|r| r == m) => CursorMode::Relative,
            _ => CursorMode::Absolute,
        }
    }

    fn binding(&self, intention: &str) -> Option<&WheelSpec> {
        let mode = self.mode.as_deref()?;
        self.profile.keymap(mode)?.binding(intention)
    }

    fn emit(&mut self, t_ms: u64, kind: InputKind) {
        let ev = InputEvent::new(t_ms, kind);
        self.log.push(LogRecord::Event(ev.clone()));
        self.out.push(ev);
    }

    fn note(&mut self, t_ms: u64, text: String) {
        self.log.push(LogRecord::Note { t_ms, text });
    }

    /// Records a line that could not be decoded. The frame is skipped.
    pub fn reject_line(&mut self, line_no: usize, error: &dyn fmt::Display) {
        let t_ms = self.last_t.unwrap_or(0);
        self.log.push(LogRecord::Diag {
            t_ms,
            text: format!("line {line_no}: {error}"),
        });
    }

    /// Records frames dropped upstream (queue overflow).
    pub fn record_drops(&mut self, count: u64) {
        let t_ms = self.last_t.unwrap_or(0);
        self.log.push(LogRecord::Diag {
            t_ms,
            text: format!("dropped {count} frames"),
        });
    }

    fn press(&mut self, t_ms: u64, holder: Holder, key: &str) {
        if self.holds.iter().any(|(h, _)| *h == holder) {
            return;
        }
        if !self.holds.iter().any(|(_, k)| k == key) {
            self.emit(t_ms, InputKind::KeyDown(key.to_string()));
        }
        self.holds.push((holder, key.to_string()));
    }

    fn release(&mut self, t_ms: u64, holder: Holder) {
        let Some(pos) = self.holds.iter().position(|(h, _)| *h == holder) else {
            return;
        };
        let (_, key) = self.holds.remove(pos);
        if !self.holds.iter().any(|(_, k)| *k == key) {
            self.emit(t_ms, InputKind::KeyUp(key));
        }
    }

    fn release_all(&mut self, t_ms: u64) {
        while let Some((holder, _)) = self.holds.last().cloned() {
            self.release(t_ms, holder);
        }
    }

    fn tap_chord(&mut self, t_ms: u64, parts: &[String]) {
        let (last, mods) = parts.split_last().expect("chords have at least two parts");
        for m in mods {
            self.emit(t_ms, InputKind::KeyDown(m.clone()));
        }
        self.emit(t_ms, InputKind::KeyPress(last.clone()));
        for m in mods.iter().rev() {
            self.emit(t_ms, InputKind::KeyUp(m.clone()));
        }
    }

    fn log_wheel(&mut self, t_ms: u64, outcome: &WheelOutcome) {
        let text = match outcome {
            WheelOutcome::Opened { owner } => format!("wheel_open {owner}"),
            WheelOutcome::Cancelled { owner } => format!("wheel_cancel {owner}"),
            WheelOutcome::Confirmed { owner, index, action } => {
                format!("wheel_confirm {owner} {index} {action}")
            }
        };
        self.note(t_ms, text);
    }

    fn cancel_wheel(&mut self, t_ms: u64) {
        if let Some(o) = self.wheel.cancel() {
            self.log_wheel(t_ms, &o);
        }
    }

    /// Switches keymap: releases holds, closes the wheel and forgets intentions.
    pub fn switch_mode(&mut self, t_ms: u64, mode: &str) {
        self.release_all(t_ms);
        self.cancel_wheel(t_ms);
        self.intentions.reset();
        self.head.reset();
        self.mode = Some(mode.to_string());
        self.cursor_mode = self.mode_cursor(Some(mode));
        self.note(t_ms, format!("mode {mode}"));
    }

    /// Fires a momentary action. Returns true if the keymap changed.
    fn fire(&mut self, t_ms: u64, action: &Action, tap_keys: bool) -> bool {
        match action {
            Action::Key(k) if tap_keys => self.emit(t_ms, InputKind::KeyPress(k.clone())),
            Action::Key(_) => {}
            Action::Chord(parts) => self.tap_chord(t_ms, parts),
            Action::Mouse(b) => self.emit(t_ms, InputKind::MouseClick(*b)),
            Action::ScrollUp => self.emit(t_ms, InputKind::Scroll(1)),
            Action::ScrollDown => self.emit(t_ms, InputKind::Scroll(-1)),
            Action::Mode(m) => {
                let m = m.clone();
                self.switch_mode(t_ms, &m);
                return true;
            }
            Action::Meta(_) | Action::Null => {}
        }
        false
    }

    fn induce(&mut self, t_ms: u64, spec: &WheelSpec) {
        if let Some(ms) = spec.induce.lock_mouse_move_ms {
            self.lock.lock(t_ms, ms);
        }
    }

    /// Returns true if the keymap changed.
    fn on_fall(&mut self, t_ms: u64, id: IntentionId) -> bool {
        let name = self.profile.expressions().name(id).to_string();
        if let Some(outcome) = self.wheel.release(&name) {
            self.log_wheel(t_ms, &outcome);
            if let WheelOutcome::Confirmed { action, .. } = outcome {
                let spec = self.binding(&name).cloned();
                let switched = self.fire(t_ms, &action, true);
                if let Some(spec) = spec.filter(|_| !switched) {
                    self.induce(t_ms, &spec);
                }
                return switched;
            }
            return false;
        }
        self.release(t_ms, Holder::Intention(id));
        false
    }

    /// Returns true if the keymap changed.
    fn on_rise(&mut self, t_ms: u64, id: IntentionId) -> bool {
        let name = self.profile.expressions().name(id).to_string();
        let Some(spec) = self.binding(&name).cloned() else {
            return false;
        };
        match spec.single_item_shortcut() {
            None => {
                for o in self.wheel.open(&spec, t_ms) {
                    self.log_wheel(t_ms, &o);
                }
                false
            }
            Some(Action::Key(k)) => {
                let k = k.clone();
                self.press(t_ms, Holder::Intention(id), &k);
                self.induce(t_ms, &spec);
                false
            }
            Some(action) => {
                let action = action.clone();
                let switched = self.fire(t_ms, &action, true);
                if !switched {
                    self.induce(t_ms, &spec);
                }
                switched
            }
        }
    }

    fn on_head_change(&mut self, t_ms: u64, change: HoldChange) {
        let (dir, pressed) = match change {
            HoldChange::Pressed(d) => (d, true),
            HoldChange::Released(d) => (d, false),
        };
        if !pressed {
            self.release(t_ms, Holder::Head(dir));
            return;
        }
        let Some(spec) = self.binding(dir.intention()).cloned() else {
            return;
        };
        let Some(action) = spec.items.first().cloned() else {
            return;
        };
        let is_roll = matches!(dir, HeadDirection::RollLeft | HeadDirection::RollRight);
        match action {
            Action::Key(k) => self.press(t_ms, Holder::Head(dir), &k),
            // Roll scrolling is continuous, handled separately.
            Action::ScrollUp | Action::ScrollDown if is_roll => {}
            other => {
                if !self.fire(t_ms, &other, true) {
                    self.induce(t_ms, &spec);
                }
            }
        }
    }

    /// Gaze points the wheel when it lands inside the overlay outside the
    /// center deadzone; otherwise head deflection does.
    fn wheel_pointer(&self, head: &HeadDeflection) -> Pointer {
        let head_pointer = Pointer::Head {
            yaw: head.yaw,
            pitch: head.pitch,
        };
        let (Some(g), Some(geometry)) = (self.gaze, self.wheel.geometry()) else {
            return head_pointer;
        };
        let screen = self.profile.engine().screen;
        let side = self.profile.engine().wheel_overlay_fraction * screen.width.min(screen.height) as f64;
        let (cx, cy) = screen.center();
        let x = (g.x - (cx - side / 2.0)) / side;
        let y = (g.y - (cy - side / 2.0)) / side;
        let inside = (0.0..=1.0).contains(&x) && (0.0..=1.0).contains(&y);
        let gaze_pointer = Pointer::Gaze { x, y };
        if inside && select_segment(geometry, gaze_pointer, &self.profile.selection_params()).is_some() {
            gaze_pointer
        } else {
            head_pointer
        }
    }

    fn fail_safe(&mut self, t_ms: u64) {
        self.note(t_ms, "face_lost".into());
        self.release_all(t_ms);
        self.cancel_wheel(t_ms);
        self.intentions.reset();
        self.head.reset();
        self.smoother.reset();
        self.absolute.reset();
        self.gaze = None;
    }

    /// Advances the engine by one frame and returns the input events produced.
    pub fn step(&mut self, frame: &FeatureFrame) -> Vec<InputEvent> {
        self.out.clear();
        let t = frame.t_ms;
        if let Some(last) = self.last_t {
            if t < last {
                self.log.push(LogRecord::Diag {
                    t_ms: last,
                    text: format!("non-monotonic t_ms {t} after {last}; frame skipped"),
                });
                return Vec::new();
            }
        }
        self.last_t = Some(t);
        self.frames += 1;
        match &frame.face {
            None => {
                self.face_present = false;
                let since = *self.absent_since.get_or_insert(t);
                if !self.failed_safe && t - since >= self.profile.cursor().face_loss_ms {
                    self.failed_safe = true;
                    self.fail_safe(t);
                }
            }
            Some(signals) => {
                self.face_present = true;
                self.absent_since = None;
                self.failed_safe = false;
                self.process(t, signals);
            }
        }
        std::mem::take(&mut self.out)
    }

    fn process(&mut self, t: u64, signals: &FaceSignals) {
        let c = self.profile.head_center();
        let s = self.profile.head_scale();
        let head = HeadDeflection::from_pose(&signals.head, [c.yaw, c.pitch, c.roll], [s.yaw, s.pitch, s.roll]);
        let screen = self.profile.engine().screen;
        self.gaze = self
            .model
            .as_ref()
            .map(|m| predict_gaze_point(m, &signals.gaze, &signals.face_box, screen))
            .map(|p| self.smoother.push(p));

        let edges = self.intentions.step(self.profile.expressions(), &signals.blend, t);
        let mut switched = false;
        for id in edges.fallen.iter() {
            if self.on_fall(t, id) {
                switched = true;
                break;
            }
        }
        if !switched {
            for id in edges.risen.iter() {
                if self.on_rise(t, id) {
                    break;
                }
            }
        }

        if self.wheel.is_open() {
            let pointer = self.wheel_pointer(&head);
            let params = self.profile.selection_params();
            self.wheel.point(Some(pointer), &params);
            if !self.head.is_suspended() || !self.head.held().is_empty() {
                for change in self.head.suspend() {
                    self.on_head_change(t, change);
                }
            }
        } else {
            let cfg = self.profile.cursor().clone();
            for change in self.head.update(&head, &cfg) {
                self.on_head_change(t, change);
            }
        }

        if let Some((side, amount)) = scroll_amount(head.roll_deg, self.profile.cursor()) {
            let dir = match side {
                RollSide::Left => HeadDirection::RollLeft,
                RollSide::Right => HeadDirection::RollRight,
            };
            let signed = match self.binding(dir.intention()).and_then(|s| s.items.first()) {
                Some(Action::ScrollUp) => Some(amount),
                Some(Action::ScrollDown) => Some(-amount),
                _ => None,
            };
            if let Some(n) = signed {
                self.emit(t, InputKind::Scroll(n));
            }
        }

        self.move_cursor(t, &head);
    }

    fn move_cursor(&mut self, t: u64, head: &HeadDeflection) {
        let Some(gaze) = self.gaze else {
            return;
        };
        // An open wheel owns the pointer.
        if self.wheel.is_open() {
            return;
        }
        let screen = self.profile.engine().screen;
        match self.cursor_mode {
            CursorMode::Absolute => {
                let cfg = self.profile.cursor().clone();
                if let Some((x, y)) = self.absolute.update(gaze, head, &cfg, screen, &mut self.lock, t) {
                    self.cursor_pos = Some((x, y));
                    self.emit(t, InputKind::MouseMoveAbs { x, y });
                }
            }
            CursorMode::Relative => {
                if self.lock.is_locked(t) {
                    return;
                }
                if let Some((dx, dy)) = relative_motion(gaze, screen, self.profile.cursor()) {
                    self.emit(t, InputKind::MouseMoveRel { dx, dy });
                }
            }
        }
    }

    /// End of stream: releases every held key and closes any open wheel.
    pub fn finish(&mut self, t_ms: u64) -> Vec<InputEvent> {
        self.out.clear();
        let t = self.last_t.map_or(t_ms, |l| l.max(t_ms));
        self.release_all(t);
        self.cancel_wheel(t);
        self.head.reset();
        std::mem::take(&mut self.out)
    }

    /// Finishes at the last seen timestamp.
    pub fn finish_now(&mut self) -> Vec<InputEvent> {
        self.finish(self.last_t.unwrap_or(0))
    }

    pub fn snapshot(&self) -> EngineSnapshot {
        let t = self.last_t.unwrap_or(0);
        EngineSnapshot {
            t_ms: t,
            mode: self.mode.clone(),
            cursor_mode: self.cursor_mode,
            face_present: self.face_present,
            wheel: self.wheel.snapshot(),
            cursor: self.cursor_pos,
            gaze: self.gaze.map(|g| (g.x, g.y)),
            dwell_remaining_ms: self.lock.remaining_ms(t),
            dwell_fraction: self.lock.remaining_fraction(t),
            active_intentions: self
                .profile
                .expressions()
                .names(self.intentions.active())
                .into_iter()
                .map(String::from)
                .collect(),
            held_keys: self.held_keys(),
        }
    }
}
