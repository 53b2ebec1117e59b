//! Profile loading and validation.
//!
//! A profile is a YAML document with the sections `head_angles_center`,
//! `head_angles_scale`, `key_config`, `expression_evaluator_config`, and the
//! optional `cursor` and `engine` tuning sections. Loading resolves every
//! cross-reference up front so the engine never meets a dangling name.

use std::fs;
use std::path::{Path, PathBuf};

use indexmap::IndexMap;
use serde::{Deserialize, Deserializer, Serialize};

use crate::actions::{is_modifier, Action, TokenError};
use crate::cursor::CursorConfig;
use crate::expression::{
    Comparison, Condition, ExpressionEngine, ExpressionError, IntentionSpec, PriorityRule,
    RuleTrigger,
};
use crate::model::{BlendShapeId, ScreenSize};
use crate::wheel::{Induce, LayoutType, SelectionParams, WheelSpec};

/// Bindings driven by head pose rather than blendshapes.
pub const RESERVED_INTENTIONS: [&str; 6] = [
    "head_up",
    "head_down",
    "head_left",
    "head_right",
    "head_roll_left",
    "head_roll_right",
];

/// Keys the reference game profile has to reach.
pub const GAME_KEYS: [&str; 27] = [
    "e", "z", "x", "c", "shift", "v", "1", "2", "3", "4", "g", "q", "r", "f", "t", "esc", "space",
    "ctrl", "mouse_left", "mouse_middle", "mouse_right", "s", "w", "a", "d", "scroll_up",
    "scroll_down",
];

pub fn is_reserved(name: &str) -> bool {
    RESERVED_INTENTIONS.contains(&name)
}

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("parse error{}: {message}", fmt_line(*line))]
    Parse { line: Option<usize>, message: String },
    #[error("unknown field{}: {message}", fmt_line(*line))]
    UnknownField { line: Option<usize>, message: String },
    #[error("mode {mode:?}: binding {intention:?} is not a declared intention")]
    DanglingIntention { mode: String, intention: String },
    #[error("mode {mode:?}: wheel {intention:?} switches to undefined mode {target:?}")]
    DanglingMode {
        mode: String,
        intention: String,
        target: String,
    },
    #[error("intention {0:?} is reserved for head pose and cannot be an expression")]
    ReservedIntention(String),
    #[error("intention {intention:?}: invalid operator {operator:?}")]
    InvalidOperator { intention: String, operator: String },
    #[error("intention {intention:?}: operator {operator} requires `{field}`")]
    MissingOperand {
        intention: String,
        operator: String,
        field: &'static str,
    },
    #[error("intention {intention:?}: unsupported combine {combine:?} (only AND)")]
    InvalidCombine { intention: String, combine: String },
    #[error("intention {intention:?}: {source}")]
    InvalidCondition {
        intention: String,
        source: ExpressionError,
    },
    #[error("priority rules: {0}")]
    InvalidRule(ExpressionError),
    #[error("mode {mode:?}: binding {intention:?}: {source}")]
    InvalidToken {
        mode: String,
        intention: String,
        source: TokenError,
    },
    #[error("mode {mode:?}: binding {intention:?} has an empty wheel")]
    EmptyWheel { mode: String, intention: String },
    #[error("mode {mode:?}: binding {intention:?}: induce duration must be positive")]
    InvalidInduce { mode: String, intention: String },
    #[error("invalid setting: {0}")]
    InvalidSetting(String),
}

fn fmt_line(line: Option<usize>) -> String {
    line.map(|l| format!(" at line {l}")).unwrap_or_default()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HeadAxes {
    pub yaw: f64,
    pub pitch: f64,
    pub roll: f64,
}

fn default_center() -> HeadAxes {
    HeadAxes {
        yaw: 0.0,
        pitch: 3.0,
        roll: 0.0,
    }
}

fn default_scale() -> HeadAxes {
    HeadAxes {
        yaw: 8.0,
        pitch: 8.0,
        roll: 8.0,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LockMouseMoveDoc {
    /// Seconds.
    pub duration: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InduceDoc {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lock_mouse_move: Option<LockMouseMoveDoc>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BindingDoc {
    #[serde(deserialize_with = "wheel_items")]
    pub wheel: Vec<Option<String>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub layout_type: Option<LayoutType>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub induce: Option<InduceDoc>,
}

/// Wheel items may be written as strings, bare numbers or `null`.
fn wheel_items<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<Option<String>>, D::Error> {
    use serde::de::Error;
    let raw: Vec<serde_yaml::Value> = Vec::deserialize(d)?;
    raw.into_iter()
        .map(|v| match v {
            serde_yaml::Value::Null => Ok(None),
            serde_yaml::Value::String(s) => Ok(Some(s)),
            serde_yaml::Value::Number(n) => Ok(Some(n.to_string())),
            other => Err(D::Error::custom(format!(
                "wheel item must be a string, number or null, got {other:?}"
            ))),
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConditionDoc {
    pub feature: String,
    pub operator: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub threshold: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub min: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub compare_to: Option<String>,
}

fn default_combine() -> String {
    "AND".into()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExpressionDoc {
    pub conditions: Vec<ConditionDoc>,
    #[serde(default = "default_combine")]
    pub combine: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RuleDoc {
    pub when: String,
    pub disable: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub except: Option<Vec<String>>,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EvaluatorDoc {
    #[serde(default)]
    pub expressions: IndexMap<String, ExpressionDoc>,
    #[serde(default)]
    pub priority_rules: Vec<RuleDoc>,
}

/// Engine-wide settings not tied to a single stage.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EngineSettings {
    /// Consecutive agreeing frames before an intention flips.
    pub debounce_frames: u32,
    pub screen: ScreenSize,
    /// Keymap active at start; defaults to the first one declared.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub initial_mode: Option<String>,
    /// Side of the square wheel overlay, as a fraction of the shorter screen side.
    pub wheel_overlay_fraction: f64,
    /// Gaze offset from the wheel center that counts as pointing, fraction of radius.
    pub wheel_gaze_deadzone: f64,
    /// Head deflection reaching the edge of a square wheel.
    pub square_head_span: f64,
}

impl Default for EngineSettings {
    fn default() -> Self {
        EngineSettings {
            debounce_frames: 2,
            screen: ScreenSize::default(),
            initial_mode: None,
            wheel_overlay_fraction: 0.5,
            wheel_gaze_deadzone: 0.15,
            square_head_span: 3.0,
        }
    }
}

/// The document as written on disk.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProfileDoc {
    #[serde(default = "default_center")]
    pub head_angles_center: HeadAxes,
    #[serde(default = "default_scale")]
    pub head_angles_scale: HeadAxes,
    #[serde(default)]
    pub key_config: IndexMap<String, IndexMap<String, BindingDoc>>,
    #[serde(default)]
    pub expression_evaluator_config: EvaluatorDoc,
    #[serde(default)]
    pub cursor: CursorConfig,
    #[serde(default)]
    pub engine: EngineSettings,
}

impl Default for ProfileDoc {
    fn default() -> Self {
        ProfileDoc {
            head_angles_center: default_center(),
            head_angles_scale: default_scale(),
            key_config: IndexMap::new(),
            expression_evaluator_config: EvaluatorDoc::default(),
            cursor: CursorConfig::default(),
            engine: EngineSettings::default(),
        }
    }
}

/// A named table binding intentions to wheels.
#[derive(Debug, Clone, PartialEq)]
pub struct Keymap {
    pub name: String,
    pub bindings: IndexMap<String, WheelSpec>,
}

impl Keymap {
    pub fn binding(&self, intention: &str) -> Option<&WheelSpec> {
        self.bindings.get(intention)
    }
}

/// A validated profile.
#[derive(Debug, Clone, PartialEq)]
pub struct Profile {
    doc: ProfileDoc,
    expressions: ExpressionEngine,
    keymaps: IndexMap<String, Keymap>,
    initial_mode: Option<String>,
    warnings: Vec<String>,
}

pub fn load_profile(path: impl AsRef<Path>) -> Result<Profile, ConfigError> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|source| ConfigError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    Profile::from_yaml(&text)
}

impl Profile {
    pub fn from_yaml(text: &str) -> Result<Profile, ConfigError> {
        let doc: ProfileDoc = serde_yaml::from_str(text).map_err(|e| {
            let line = e.location().map(|l| l.line());
            let message = e.to_string();
            if message.contains("unknown field") {
                ConfigError::UnknownField { line, message }
            } else {
                ConfigError::Parse { line, message }
            }
        })?;
        Profile::from_doc(doc)
    }

    pub fn to_yaml(&self) -> String {
        serde_yaml::to_string(&self.doc).expect("profile serialization is infallible")
    }

    /// A profile with no keymaps and no intentions.
    pub fn empty() -> Profile {
        Profile::from_doc(ProfileDoc::default()).expect("empty profile is valid")
    }

    pub fn from_doc(doc: ProfileDoc) -> Result<Profile, ConfigError> {
        let mut warnings = Vec::new();
        validate_settings(&doc)?;

        let mut specs = Vec::new();
        for (name, expr) in &doc.expression_evaluator_config.expressions {
            specs.push(compile_expression(name, expr)?);
        }
        let rules: Vec<PriorityRule> = doc
            .expression_evaluator_config
            .priority_rules
            .iter()
            .map(|r| PriorityRule {
                when: if r.when == "any" {
                    RuleTrigger::Any
                } else {
                    RuleTrigger::Intention(r.when.clone())
                },
                disable: r.disable.clone(),
                except: r.except.clone().unwrap_or_default(),
            })
            .collect();
        let expressions = ExpressionEngine::new(specs, &rules).map_err(|e| match e {
            ExpressionError::UnknownIntention(_) => ConfigError::InvalidRule(e),
            other => ConfigError::InvalidCondition {
                intention: String::new(),
                source: other,
            },
        })?;

        let mode_names: Vec<&str> = doc.key_config.keys().map(String::as_str).collect();
        let mut keymaps = IndexMap::new();
        for (mode, bindings) in &doc.key_config {
            let mut compiled = IndexMap::new();
            for (intention, binding) in bindings {
                if !is_reserved(intention) && expressions.id(intention).is_none() {
                    return Err(ConfigError::DanglingIntention {
                        mode: mode.clone(),
                        intention: intention.clone(),
                    });
                }
                let spec = compile_binding(mode, intention, binding, &mode_names, &mut warnings)?;
                compiled.insert(intention.clone(), spec);
            }
            keymaps.insert(
                mode.clone(),
                Keymap {
                    name: mode.clone(),
                    bindings: compiled,
                },
            );
        }

        let initial_mode = match &doc.engine.initial_mode {
            Some(m) if !keymaps.contains_key(m) => {
                return Err(ConfigError::InvalidSetting(format!(
                    "engine.initial_mode {m:?} is not a defined mode"
                )))
            }
            Some(m) => Some(m.clone()),
            None => keymaps.keys().next().cloned(),
        };

        Ok(Profile {
            doc,
            expressions,
            keymaps,
            initial_mode,
            warnings,
        })
    }

    pub fn doc(&self) -> &ProfileDoc {
        &self.doc
    }

    pub fn expressions(&self) -> &ExpressionEngine {
        &self.expressions
    }

    pub fn keymaps(&self) -> &IndexMap<String, Keymap> {
        &self.keymaps
    }

    pub fn keymap(&self, mode: &str) -> Option<&Keymap> {
        self.keymaps.get(mode)
    }

    pub fn initial_mode(&self) -> Option<&str> {
        self.initial_mode.as_deref()
    }

    pub fn warnings(&self) -> &[String] {
        &self.warnings
    }

    pub fn head_center(&self) -> HeadAxes {
        self.doc.head_angles_center
    }

    pub fn head_scale(&self) -> HeadAxes {
        self.doc.head_angles_scale
    }

    pub fn cursor(&self) -> &CursorConfig {
        &self.doc.cursor
    }

    pub fn engine(&self) -> &EngineSettings {
        &self.doc.engine
    }

    pub fn selection_params(&self) -> SelectionParams {
        SelectionParams {
            head_deadzone: self.doc.cursor.head_deadzone,
            gaze_deadzone: self.doc.engine.wheel_gaze_deadzone,
            square_head_span: self.doc.engine.square_head_span,
        }
    }
}

fn validate_settings(doc: &ProfileDoc) -> Result<(), ConfigError> {
    let s = &doc.head_angles_scale;
    if !(s.yaw > 0.0 && s.pitch > 0.0 && s.roll > 0.0) {
        return Err(ConfigError::InvalidSetting(
            "head_angles_scale entries must be positive".into(),
        ));
    }
    doc.cursor.validate().map_err(ConfigError::InvalidSetting)?;
    let e = &doc.engine;
    if e.debounce_frames == 0 {
        return Err(ConfigError::InvalidSetting("engine.debounce_frames must be >= 1".into()));
    }
    if e.screen.width == 0 || e.screen.height == 0 {
        return Err(ConfigError::InvalidSetting("engine.screen must be non-empty".into()));
    }
    if !(e.wheel_overlay_fraction > 0.0 && e.wheel_overlay_fraction <= 1.0) {
        return Err(ConfigError::InvalidSetting(
            "engine.wheel_overlay_fraction must be in (0, 1]".into(),
        ));
    }
    if !(e.wheel_gaze_deadzone >= 0.0 && e.square_head_span > 0.0) {
        return Err(ConfigError::InvalidSetting(
            "engine wheel deadzones must be non-negative and square_head_span positive".into(),
        ));
    }
    Ok(())
}

fn compile_expression(name: &str, expr: &ExpressionDoc) -> Result<IntentionSpec, ConfigError> {
    if is_reserved(name) {
        return Err(ConfigError::ReservedIntention(name.to_string()));
    }
    if expr.combine != "AND" {
        return Err(ConfigError::InvalidCombine {
            intention: name.to_string(),
            combine: expr.combine.clone(),
        });
    }
    let mut conditions = Vec::with_capacity(expr.conditions.len());
    for c in &expr.conditions {
        let missing = |field| ConfigError::MissingOperand {
            intention: name.to_string(),
            operator: c.operator.clone(),
            field,
        };
        let compare = || -> Result<BlendShapeId, ConfigError> {
            let other = c.compare_to.as_deref().ok_or_else(|| missing("compare_to"))?;
            BlendShapeId::from_name(other).ok_or_else(|| ConfigError::InvalidCondition {
                intention: name.to_string(),
                source: ExpressionError::UnknownFeature(other.to_string()),
            })
        };
        let comparison = match c.operator.as_str() {
            ">" => Comparison::Greater(c.threshold.ok_or_else(|| missing("threshold"))?),
            "<" => Comparison::Less(c.threshold.ok_or_else(|| missing("threshold"))?),
            "BETWEEN" => Comparison::Between {
                min: c.min.ok_or_else(|| missing("min"))?,
                max: c.max.ok_or_else(|| missing("max"))?,
            },
            "DIFF>" => Comparison::DiffGreater {
                compare_to: compare()?,
                threshold: c.threshold.ok_or_else(|| missing("threshold"))?,
            },
            "DIFF<" => Comparison::DiffLess {
                compare_to: compare()?,
                threshold: c.threshold.ok_or_else(|| missing("threshold"))?,
            },
            other => {
                return Err(ConfigError::InvalidOperator {
                    intention: name.to_string(),
                    operator: other.to_string(),
                })
            }
        };
        conditions.push(Condition::new(&c.feature, comparison).map_err(|source| {
            ConfigError::InvalidCondition {
                intention: name.to_string(),
                source,
            }
        })?);
    }
    IntentionSpec::new(name, conditions).map_err(|source| ConfigError::InvalidCondition {
        intention: name.to_string(),
        source,
    })
}

fn compile_binding(
    mode: &str,
    intention: &str,
    binding: &BindingDoc,
    modes: &[&str],
    warnings: &mut Vec<String>,
) -> Result<WheelSpec, ConfigError> {
    if binding.wheel.is_empty() {
        return Err(ConfigError::EmptyWheel {
            mode: mode.to_string(),
            intention: intention.to_string(),
        });
    }
    let switches_mode = binding
        .wheel
        .iter()
        .flatten()
        .any(|t| modes.contains(&t.as_str()));
    let mut items = Vec::with_capacity(binding.wheel.len());
    for token in &binding.wheel {
        let action = match Action::parse(token.as_deref(), modes) {
            Ok(a) => a,
            Err(TokenError::Unknown(t)) if switches_mode => {
                return Err(ConfigError::DanglingMode {
                    mode: mode.to_string(),
                    intention: intention.to_string(),
                    target: t,
                })
            }
            Err(source) => {
                return Err(ConfigError::InvalidToken {
                    mode: mode.to_string(),
                    intention: intention.to_string(),
                    source,
                })
            }
        };
        if let Action::Meta(t) = &action {
            warnings.push(format!(
                "mode {mode:?}: binding {intention:?}: token {t:?} is recognized but has no effect"
            ));
        }
        items.push(action);
    }
    if items.len() > 1 {
        let modifiers: Vec<String> = items
            .iter()
            .filter_map(|a| match a {
                Action::Key(k) if is_modifier(k) => Some(k.clone()),
                _ => None,
            })
            .collect();
        if !modifiers.is_empty() {
            warnings.push(format!(
                "mode {mode:?}: binding {intention:?}: modifier items {modifiers:?} are tapped on confirm, not held"
            ));
        }
    }
    let lock_mouse_move_ms = match binding.induce.as_ref().and_then(|i| i.lock_mouse_move.as_ref()) {
        Some(lock) if !(lock.duration > 0.0) || !lock.duration.is_finite() => {
            return Err(ConfigError::InvalidInduce {
                mode: mode.to_string(),
                intention: intention.to_string(),
            })
        }
        Some(lock) => Some((lock.duration * 1000.0).round() as u64),
        None => None,
    };
    Ok(WheelSpec {
        owner: intention.to_string(),
        items,
        layout: binding.layout_type.unwrap_or_default(),
        induce: Induce { lock_mouse_move_ms },
    })
}

/// One way to produce a key: keymap, binding, wheel slot.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct KeyPath {
    pub key: String,
    pub mode: String,
    pub intention: String,
    pub index: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct CoverageReport {
    pub reachable: Vec<KeyPath>,
    pub unreachable: Vec<String>,
}

impl CoverageReport {
    pub fn all_reachable(&self) -> bool {
        self.unreachable.is_empty()
    }
}

/// For each required key, finds the first binding path that emits it.
pub fn validate_coverage<S: AsRef<str>>(profile: &Profile, required_keys: &[S]) -> CoverageReport {
    let mut report = CoverageReport::default();
    'keys: for key in required_keys {
        let key = key.as_ref();
        for (mode, keymap) in profile.keymaps() {
            for (intention, spec) in &keymap.bindings {
                for (index, action) in spec.items.iter().enumerate() {
                    if action.emits_input() && action.token() == key {
                        report.reachable.push(KeyPath {
                            key: key.to_string(),
                            mode: mode.clone(),
                            intention: intention.clone(),
                            index,
                        });
                        continue 'keys;
                    }
                }
            }
        }
        report.unreachable.push(key.to_string());
    }
    report
}
