//! Selection wheels: an intention opens a menu of actions, head or gaze
//! highlights one, releasing the intention confirms it.

use serde::{Deserialize, Serialize};

use crate::actions::Action;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LayoutType {
    #[default]
    Radial,
    Square,
}

/// Side effects attached to a binding.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct Induce {
    /// Suppress cursor motion for this long after the action fires.
    pub lock_mouse_move_ms: Option<u64>,
}

/// One intention's binding within a keymap.
#[derive(Debug, Clone, PartialEq)]
pub struct WheelSpec {
    pub owner: String,
    pub items: Vec<Action>,
    pub layout: LayoutType,
    pub induce: Induce,
}

impl WheelSpec {
    pub fn new(owner: impl Into<String>, items: Vec<Action>) -> Self {
        WheelSpec {
            owner: owner.into(),
            items,
            layout: LayoutType::Radial,
            induce: Induce::default(),
        }
    }

    /// The direct action of a one-item binding. Such bindings never show a wheel.
    pub fn single_item_shortcut(&self) -> Option<&Action> {
        match self.items.as_slice() {
            [only] => Some(only),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Sector {
    /// Degrees clockwise from 12 o'clock.
    pub center_deg: f64,
    pub start_deg: f64,
    pub end_deg: f64,
}

/// Grid cell in normalized overlay coordinates (origin top-left, y down).
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Cell {
    pub x0: f64,
    pub y0: f64,
    pub x1: f64,
    pub y1: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "layout", rename_all = "lowercase")]
pub enum WheelGeometry {
    Radial { sectors: Vec<Sector> },
    Square { cols: usize, rows: usize, cells: Vec<Cell> },
}

impl WheelGeometry {
    pub fn len(&self) -> usize {
        match self {
            WheelGeometry::Radial { sectors } => sectors.len(),
            WheelGeometry::Square { cells, .. } => cells.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

pub fn layout(spec: &WheelSpec) -> WheelGeometry {
    layout_n(spec.items.len(), spec.layout)
}

pub fn layout_n(n: usize, kind: LayoutType) -> WheelGeometry {
    match kind {
        LayoutType::Radial => {
            let width = 360.0 / n.max(1) as f64;
            let sectors = (0..n)
                .map(|i| {
                    let center = i as f64 * width;
                    Sector {
                        center_deg: center,
                        start_deg: (center - width / 2.0).rem_euclid(360.0),
                        end_deg: (center + width / 2.0).rem_euclid(360.0),
                    }
                })
                .collect();
            WheelGeometry::Radial { sectors }
        }
        LayoutType::Square => {
            let cols = (n as f64).sqrt().ceil().max(1.0) as usize;
            let rows = n.div_ceil(cols).max(1);
            let cells = (0..n)
                .map(|i| {
                    let (r, c) = (i / cols, i % cols);
                    Cell {
                        x0: c as f64 / cols as f64,
                        y0: r as f64 / rows as f64,
                        x1: (c + 1) as f64 / cols as f64,
                        y1: (r + 1) as f64 / rows as f64,
                    }
                })
                .collect();
            WheelGeometry::Square { cols, rows, cells }
        }
    }
}

/// What drives the highlight.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Pointer {
    /// Head deflection in normalized units, yaw right and pitch up positive.
    Head { yaw: f64, pitch: f64 },
    /// Gaze point inside the overlay, normalized to `[0, 1]^2` (y down).
    Gaze { x: f64, y: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SelectionParams {
    /// Minimum head deflection magnitude that counts as pointing.
    pub head_deadzone: f64,
    /// Minimum gaze offset from the wheel center, as a fraction of the radius.
    pub gaze_deadzone: f64,
    /// Head deflection that reaches the edge of a square layout.
    pub square_head_span: f64,
}

impl Default for SelectionParams {
    fn default() -> Self {
        SelectionParams {
            head_deadzone: 1.0,
            gaze_deadzone: 0.15,
            square_head_span: 3.0,
        }
    }
}

/// Clockwise angle from up, in `[0, 360)`.
pub fn bearing_deg(dx: f64, dy_up: f64) -> f64 {
    dx.atan2(dy_up).to_degrees().rem_euclid(360.0)
}

pub fn sector_index(n: usize, bearing: f64) -> usize {
    let width = 360.0 / n as f64;
    (((bearing + width / 2.0) / width).floor() as usize) % n
}

pub fn select_segment(geometry: &WheelGeometry, pointer: Pointer, params: &SelectionParams) -> Option<usize> {
    let n = geometry.len();
    if n == 0 {
        return None;
    }
    match geometry {
        WheelGeometry::Radial { .. } => {
            if n == 1 {
                return Some(0);
            }
            let (dx, dy, deadzone) = match pointer {
                Pointer::Head { yaw, pitch } => (yaw, pitch, params.head_deadzone),
                Pointer::Gaze { x, y } => ((x - 0.5) / 0.5, (0.5 - y) / 0.5, params.gaze_deadzone),
            };
            if !(dx.hypot(dy) >= deadzone) {
                return None;
            }
            Some(sector_index(n, bearing_deg(dx, dy)))
        }
        WheelGeometry::Square { cols, rows, .. } => {
            let (x, y) = match pointer {
                Pointer::Gaze { x, y } => (x, y),
                Pointer::Head { yaw, pitch } => {
                    if !(yaw.hypot(pitch) >= params.head_deadzone) {
                        return None;
                    }
                    let span = 2.0 * params.square_head_span;
                    (0.5 + yaw / span, 0.5 - pitch / span)
                }
            };
            if !x.is_finite() || !y.is_finite() {
                return None;
            }
            let col = ((x.clamp(0.0, 1.0) * *cols as f64) as usize).min(cols - 1);
            let row = ((y.clamp(0.0, 1.0) * *rows as f64) as usize).min(rows - 1);
            let idx = row * cols + col;
            (idx < n).then_some(idx)
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum WheelStatus {
    Closed,
    Open {
        owner: String,
        highlighted: Option<usize>,
        opened_at_ms: u64,
    },
}

/// Result of feeding intention edges to the wheel.
#[derive(Debug, Clone, PartialEq)]
pub enum WheelOutcome {
    Opened { owner: String },
    /// Closed without emitting anything.
    Cancelled { owner: String },
    /// Closed on release with an item highlighted.
    Confirmed { owner: String, index: usize, action: Action },
}

/// The one open wheel, if any.
#[derive(Debug, Clone, PartialEq)]
pub struct WheelState {
    status: WheelStatus,
    spec: Option<WheelSpec>,
    geometry: Option<WheelGeometry>,
}

impl Default for WheelState {
    fn default() -> Self {
        WheelState {
            status: WheelStatus::Closed,
            spec: None,
            geometry: None,
        }
    }
}

impl WheelState {
    pub fn status(&self) -> &WheelStatus {
        &self.status
    }

    pub fn is_open(&self) -> bool {
        matches!(self.status, WheelStatus::Open { .. })
    }

    pub fn owner(&self) -> Option<&str> {
        match &self.status {
            WheelStatus::Open { owner, .. } => Some(owner),
            WheelStatus::Closed => None,
        }
    }

    pub fn highlighted(&self) -> Option<usize> {
        match &self.status {
            WheelStatus::Open { highlighted, .. } => *highlighted,
            WheelStatus::Closed => None,
        }
    }

    pub fn spec(&self) -> Option<&WheelSpec> {
        self.spec.as_ref()
    }

    pub fn geometry(&self) -> Option<&WheelGeometry> {
        self.geometry.as_ref()
    }

    /// Opens `spec`, cancelling any wheel already open.
    pub fn open(&mut self, spec: &WheelSpec, t_ms: u64) -> Vec<WheelOutcome> {
        let mut out = Vec::new();
        if let Some(prev) = self.cancel() {
            out.push(prev);
        }
        self.geometry = Some(layout(spec));
        self.spec = Some(spec.clone());
        self.status = WheelStatus::Open {
            owner: spec.owner.clone(),
            highlighted: None,
            opened_at_ms: t_ms,
        };
        out.push(WheelOutcome::Opened {
            owner: spec.owner.clone(),
        });
        out
    }

    pub fn cancel(&mut self) -> Option<WheelOutcome> {
        let owner = self.owner()?.to_string();
        self.close();
        Some(WheelOutcome::Cancelled { owner })
    }

    fn close(&mut self) {
        self.status = WheelStatus::Closed;
        self.spec = None;
        self.geometry = None;
    }

    /// Handles the release of `owner`: confirms the current highlight or cancels.
    /// Releases of anything but the open wheel's owner are ignored.
    pub fn release(&mut self, owner: &str) -> Option<WheelOutcome> {
        if self.owner() != Some(owner) {
            return None;
        }
        let picked = self
            .highlighted()
            .and_then(|i| self.spec.as_ref().map(|s| (i, s.items[i].clone())));
        self.close();
        Some(match picked {
            Some((index, action)) => WheelOutcome::Confirmed {
                owner: owner.to_string(),
                index,
                action,
            },
            None => WheelOutcome::Cancelled {
                owner: owner.to_string(),
            },
        })
    }

    /// Processes one frame of edges for multi-item wheels: releases first,
    /// then openings. `lookup` resolves an intention to its binding.
    pub fn on_edges<'a, F>(&mut self, risen: &[&str], fallen: &[&str], t_ms: u64, lookup: F) -> Vec<WheelOutcome>
    where
        F: Fn(&str) -> Option<&'a WheelSpec>,
    {
        let mut out = Vec::new();
        for name in fallen {
            if let Some(o) = self.release(name) {
                out.push(o);
            }
        }
        for name in risen {
            if let Some(spec) = lookup(name) {
                if spec.single_item_shortcut().is_none() {
                    out.extend(self.open(spec, t_ms));
                }
            }
        }
        out
    }

    /// Updates the highlight from a pointer; no-op when closed.
    pub fn point(&mut self, pointer: Option<Pointer>, params: &SelectionParams) {
        let idx = match (&self.geometry, pointer) {
            (Some(g), Some(p)) => select_segment(g, p, params),
            (Some(g), None) if g.len() == 1 => Some(0),
            _ => None,
        };
        if let WheelStatus::Open { highlighted, .. } = &mut self.status {
            *highlighted = idx;
        }
    }

    pub fn snapshot(&self) -> WheelSnapshot {
        WheelSnapshot {
            status: if self.is_open() { "open" } else { "closed" },
            owner: self.owner().map(String::from),
            items: self
                .spec
                .as_ref()
                .map(|s| s.items.iter().map(Action::token).collect())
                .unwrap_or_default(),
            highlighted: self.highlighted(),
            geometry: self.geometry.clone(),
        }
    }
}

/// Read-only view published to the overlay each frame.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct WheelSnapshot {
    pub status: &'static str,
    pub owner: Option<String>,
    pub items: Vec<String>,
    pub highlighted: Option<usize>,
    pub geometry: Option<WheelGeometry>,
}
