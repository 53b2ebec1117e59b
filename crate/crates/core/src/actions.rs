//! Action tokens that can appear as wheel items.

use std::fmt;

use crate::model::MouseButton;

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum Action {
    /// A single keyboard key, held or tapped depending on context.
    Key(String),
    /// Modifier keys followed by a final key, e.g. `ctrl+c`.
    Chord(Vec<String>),
    Mouse(MouseButton),
    ScrollUp,
    ScrollDown,
    /// Switches the active keymap.
    Mode(String),
    /// Recognized but unbound token (`keydown`, `keyup`); does nothing.
    Meta(String),
    Null,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum TokenError {
    #[error("unknown action token {0:?}")]
    Unknown(String),
    #[error("chord {0:?} contains a part that is not a key")]
    BadChord(String),
}

const NAMED_KEYS: &[&str] = &[
    "shift", "ctrl", "alt", "caps", "tab", "esc", "fn", "win", "space", "enter", "backspace",
    "delete", "insert", "home", "end", "pageup", "pagedown", "up", "down", "left", "right",
    "capslock", "escape", "return", "cmd", "super", "meta", "menu", "printscreen",
];

pub const META_TOKENS: &[&str] = &["keydown", "keyup"];

const MODIFIERS: &[&str] = &["shift", "ctrl", "alt", "caps", "tab", "fn", "win", "cmd", "super", "meta"];

fn is_function_key(token: &str) -> bool {
    let rest = token.strip_prefix('F').or_else(|| token.strip_prefix('f'));
    matches!(rest.and_then(|r| r.parse::<u8>().ok()), Some(1..=24)) && !rest.unwrap().starts_with('0')
}

/// True for tokens naming a single keyboard key.
pub fn is_key(token: &str) -> bool {
    let mut chars = token.chars();
    match (chars.next(), chars.next()) {
        (Some(c), None) => !c.is_whitespace() && !c.is_control(),
        _ => NAMED_KEYS.contains(&token) || is_function_key(token),
    }
}

pub fn is_modifier(key: &str) -> bool {
    MODIFIERS.contains(&key)
}

impl Action {
    /// Classifies a token. `modes` are the keymap names; a token equal to one
    /// of them is a mode switch.
    pub fn parse(token: Option<&str>, modes: &[&str]) -> Result<Action, TokenError> {
        let Some(token) = token else {
            return Ok(Action::Null);
        };
        if modes.contains(&token) {
            return Ok(Action::Mode(token.to_string()));
        }
        match token {
            "null" => return Ok(Action::Null),
            "mouse_left" => return Ok(Action::Mouse(MouseButton::Left)),
            "mouse_middle" => return Ok(Action::Mouse(MouseButton::Middle)),
            "mouse_right" => return Ok(Action::Mouse(MouseButton::Right)),
            "scroll_up" => return Ok(Action::ScrollUp),
            "scroll_down" => return Ok(Action::ScrollDown),
            _ => {}
        }
        if META_TOKENS.contains(&token) {
            return Ok(Action::Meta(token.to_string()));
        }
        if is_key(token) {
            return Ok(Action::Key(token.to_string()));
        }
        if token.len() > 1 && token.contains('+') {
            let parts: Vec<&str> = token.split('+').collect();
            if parts.len() >= 2 && parts.iter().all(|p| is_key(p)) {
                return Ok(Action::Chord(parts.into_iter().map(String::from).collect()));
            }
            return Err(TokenError::BadChord(token.to_string()));
        }
        Err(TokenError::Unknown(token.to_string()))
    }

    /// Canonical token text, used for reachability reports and the UI.
    pub fn token(&self) -> String {
        match self {
            Action::Key(k) => k.clone(),
            Action::Chord(parts) => parts.join("+"),
            Action::Mouse(b) => format!("mouse_{}", b.as_str()),
            Action::ScrollUp => "scroll_up".into(),
            Action::ScrollDown => "scroll_down".into(),
            Action::Mode(m) => m.clone(),
            Action::Meta(m) => m.clone(),
            Action::Null => "null".into(),
        }
    }

    pub fn is_null(&self) -> bool {
        matches!(self, Action::Null)
    }

    /// Whether the action produces any input event.
    pub fn emits_input(&self) -> bool {
        !matches!(self, Action::Null | Action::Meta(_) | Action::Mode(_))
    }
}

impl fmt::Display for Action {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.token())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn classify_profile_tokens() {
        let modes = ["game", "type"];
        let p = |t| Action::parse(Some(t), &modes).unwrap();
        assert_eq!(p("z"), Action::Key("z".into()));
        assert_eq!(p("1"), Action::Key("1".into()));
        assert_eq!(p("\\"), Action::Key("\\".into()));
        assert_eq!(p("'"), Action::Key("'".into()));
        assert_eq!(p("F12"), Action::Key("F12".into()));
        assert_eq!(p("shift"), Action::Key("shift".into()));
        assert_eq!(p("game"), Action::Mode("game".into()));
        assert_eq!(p("mouse_middle"), Action::Mouse(MouseButton::Middle));
        assert_eq!(p("scroll_up"), Action::ScrollUp);
        assert_eq!(p("keydown"), Action::Meta("keydown".into()));
        assert_eq!(p("ctrl+alt"), Action::Chord(vec!["ctrl".into(), "alt".into()]));
        assert_eq!(p("+"), Action::Key("+".into()));
        assert_eq!(Action::parse(None, &modes).unwrap(), Action::Null);
    }

    #[test]
    fn rejects_unknown() {
        assert_eq!(
            Action::parse(Some("desktop"), &["game"]),
            Err(TokenError::Unknown("desktop".into()))
        );
        assert!(Action::parse(Some("ctrl+desktop"), &[]).is_err());
        assert!(Action::parse(Some("F0"), &[]).is_err());
        assert!(Action::parse(Some("F25"), &[]).is_err());
    }

    #[test]
    fn token_round_trip() {
        for t in ["a", "ctrl+c", "mouse_left", "scroll_down", "F3", "space"] {
            assert_eq!(Action::parse(Some(t), &[]).unwrap().token(), t);
        }
    }
}
