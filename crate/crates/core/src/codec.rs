//! Newline-delimited frame records.
//!
//! One frame per line, encoded as a JSON object with the fields `t_ms`,
//! `face_present`, `blend`, `head`, `gaze` and `box`. The same format is used
//! for trace files, the live socket and stdin.

use serde::ser::{SerializeMap, Serializer};
use serde::Serialize;
use serde_json::{Map, Value};

use crate::model::{
    BlendShapeId, BlendShapeVector, FaceBox, FaceSignals, FeatureFrame, GazeAngles, HeadPose,
    BLENDSHAPE_COUNT, BLENDSHAPE_NAMES,
};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum DecodeError {
    #[error("malformed record: {0}")]
    Malformed(String),
    #[error("missing field {0:?}")]
    MissingField(String),
    #[error("field {field:?} has the wrong type, expected {expected}")]
    WrongType {
        field: String,
        expected: &'static str,
    },
    #[error("field {field:?} value {value} is out of range")]
    OutOfRange { field: String, value: f64 },
    #[error("unknown blendshape name {0:?}")]
    UnknownBlendshape(String),
    #[error("face box is degenerate (requires x0 < x1 and y0 < y1)")]
    DegenerateBox,
}

impl DecodeError {
    /// The offending field, when the error is attributable to one.
    pub fn field(&self) -> Option<&str> {
        match self {
            DecodeError::MissingField(f)
            | DecodeError::WrongType { field: f, .. }
            | DecodeError::OutOfRange { field: f, .. } => Some(f),
            DecodeError::UnknownBlendshape(f) => Some(f),
            DecodeError::DegenerateBox => Some("box"),
            DecodeError::Malformed(_) => None,
        }
    }
}

struct BlendMap<'a>(&'a BlendShapeVector);

impl Serialize for BlendMap<'_> {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        let mut map = serializer.serialize_map(Some(BLENDSHAPE_COUNT))?;
        for (name, value) in self.0.iter() {
            map.serialize_entry(name, &value)?;
        }
        map.end()
    }
}

#[derive(Serialize)]
struct WireFrame<'a> {
    t_ms: u64,
    face_present: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    blend: Option<BlendMap<'a>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    head: Option<&'a HeadPose>,
    #[serde(skip_serializing_if = "Option::is_none")]
    gaze: Option<&'a GazeAngles>,
    #[serde(rename = "box", skip_serializing_if = "Option::is_none")]
    face_box: Option<&'a FaceBox>,
}

/// Encodes a frame as a single line without the trailing newline.
pub fn encode_frame(frame: &FeatureFrame) -> String {
    let face = frame.face.as_ref();
    let wire = WireFrame {
        t_ms: frame.t_ms,
        face_present: face.is_some(),
        blend: face.map(|f| BlendMap(&f.blend)),
        head: face.map(|f| &f.head),
        gaze: face.map(|f| &f.gaze),
        face_box: face.map(|f| &f.face_box),
    };
    serde_json::to_string(&wire).expect("frame serialization is infallible")
}

/// Parses and validates one frame record.
pub fn decode_frame(line: &str) -> Result<FeatureFrame, DecodeError> {
    let value: Value =
        serde_json::from_str(line.trim()).map_err(|e| DecodeError::Malformed(e.to_string()))?;
    let obj = value
        .as_object()
        .ok_or_else(|| DecodeError::Malformed("record is not an object".into()))?;

    let t_ms = match obj.get("t_ms") {
        None => return Err(DecodeError::MissingField("t_ms".into())),
        Some(v) => v.as_u64().ok_or_else(|| DecodeError::WrongType {
            field: "t_ms".into(),
            expected: "non-negative integer",
        })?,
    };
    let face_present = match obj.get("face_present") {
        None => return Err(DecodeError::MissingField("face_present".into())),
        Some(v) => v.as_bool().ok_or_else(|| DecodeError::WrongType {
            field: "face_present".into(),
            expected: "boolean",
        })?,
    };
    if !face_present {
        return Ok(FeatureFrame::absent(t_ms));
    }

    let blend = decode_blend(section(obj, "blend")?)?;

    let head_obj = section(obj, "head")?;
    let head = HeadPose {
        yaw: ranged(head_obj, "head", "yaw", -90.0, 90.0)?,
        pitch: ranged(head_obj, "head", "pitch", -90.0, 90.0)?,
        roll: ranged(head_obj, "head", "roll", -90.0, 90.0)?,
    };

    let gaze_obj = section(obj, "gaze")?;
    let gaze = GazeAngles {
        yaw: GazeAngles::normalize_degrees(ranged(gaze_obj, "gaze", "yaw", -180.0, 360.0)?),
        pitch: GazeAngles::normalize_degrees(ranged(gaze_obj, "gaze", "pitch", -180.0, 360.0)?),
    };

    let box_obj = section(obj, "box")?;
    let face_box = FaceBox {
        x0: ranged(box_obj, "box", "x0", 0.0, 1.0)?,
        y0: ranged(box_obj, "box", "y0", 0.0, 1.0)?,
        x1: ranged(box_obj, "box", "x1", 0.0, 1.0)?,
        y1: ranged(box_obj, "box", "y1", 0.0, 1.0)?,
    };
    if !(face_box.x0 < face_box.x1 && face_box.y0 < face_box.y1) {
        return Err(DecodeError::DegenerateBox);
    }

    Ok(FeatureFrame::present(
        t_ms,
        FaceSignals {
            blend,
            head,
            gaze,
            face_box,
        },
    ))
}

fn section<'a>(obj: &'a Map<String, Value>, name: &str) -> Result<&'a Map<String, Value>, DecodeError> {
    obj.get(name)
        .ok_or_else(|| DecodeError::MissingField(name.into()))?
        .as_object()
        .ok_or_else(|| DecodeError::WrongType {
            field: name.into(),
            expected: "object",
        })
}

fn number(obj: &Map<String, Value>, parent: &str, key: &str) -> Result<f64, DecodeError> {
    let field = || format!("{parent}.{key}");
    obj.get(key)
        .ok_or_else(|| DecodeError::MissingField(field()))?
        .as_f64()
        .ok_or_else(|| DecodeError::WrongType {
            field: field(),
            expected: "number",
        })
}

/// Reads a number constrained to `[min, max]` for `max` inclusive ranges, or
/// `[min, max)` when `max` is 360 (raw gaze convention).
fn ranged(
    obj: &Map<String, Value>,
    parent: &str,
    key: &str,
    min: f64,
    max: f64,
) -> Result<f64, DecodeError> {
    let v = number(obj, parent, key)?;
    let in_range = if max == 360.0 {
        v >= min && v < max
    } else {
        v >= min && v <= max
    };
    if in_range {
        Ok(v)
    } else {
        Err(DecodeError::OutOfRange {
            field: format!("{parent}.{key}"),
            value: v,
        })
    }
}

fn decode_blend(obj: &Map<String, Value>) -> Result<BlendShapeVector, DecodeError> {
    let mut values = [f64::NAN; BLENDSHAPE_COUNT];
    for (name, v) in obj {
        let id = BlendShapeId::from_name(name)
            .ok_or_else(|| DecodeError::UnknownBlendshape(name.clone()))?;
        let field = || format!("blend.{name}");
        let x = v.as_f64().ok_or_else(|| DecodeError::WrongType {
            field: field(),
            expected: "number",
        })?;
        if !(0.0..=1.0).contains(&x) {
            return Err(DecodeError::OutOfRange {
                field: field(),
                value: x,
            });
        }
        values[id.index()] = x;
    }
    if let Some(i) = values.iter().position(|v| v.is_nan()) {
        return Err(DecodeError::MissingField(format!(
            "blend.{}",
            BLENDSHAPE_NAMES[i]
        )));
    }
    Ok(BlendShapeVector::from_array(values).expect("values range-checked above"))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn neutral(t_ms: u64) -> FeatureFrame {
        FeatureFrame::present(
            t_ms,
            FaceSignals {
                blend: BlendShapeVector::zeros(),
                head: HeadPose::default(),
                gaze: GazeAngles::default(),
                face_box: FaceBox::default(),
            },
        )
    }

    fn with_field(frame: &FeatureFrame, path: &[&str], value: Value) -> String {
        let mut v: Value = serde_json::from_str(&encode_frame(frame)).unwrap();
        let mut cur = &mut v;
        for p in &path[..path.len() - 1] {
            cur = cur.get_mut(*p).unwrap();
        }
        cur[path[path.len() - 1]] = value;
        v.to_string()
    }

    #[test]
    fn neutral_round_trip() {
        let f = neutral(0);
        let line = encode_frame(&f);
        assert!(!line.contains('\n'));
        assert_eq!(decode_frame(&line).unwrap(), f);
    }

    #[test]
    fn jaw_open_round_trip() {
        let mut f = neutral(10);
        f.face.as_mut().unwrap().blend.set("jawOpen", 0.5).unwrap();
        let back = decode_frame(&encode_frame(&f)).unwrap();
        assert_eq!(back.face.unwrap().blend.get("jawOpen").unwrap(), 0.5);
    }

    #[test]
    fn absent_face_round_trip() {
        let f = FeatureFrame::absent(99);
        let line = encode_frame(&f);
        assert_eq!(line, r#"{"t_ms":99,"face_present":false}"#);
        assert_eq!(decode_frame(&line).unwrap(), f);
    }

    #[test]
    fn gaze_in_unsigned_convention_is_normalized() {
        let line = with_field(&neutral(0), &["gaze", "yaw"], serde_json::json!(350.0));
        let f = decode_frame(&line).unwrap();
        assert_eq!(f.face.unwrap().gaze.yaw, -10.0);
    }

    #[test]
    fn missing_head() {
        let mut v: Value = serde_json::from_str(&encode_frame(&neutral(0))).unwrap();
        v.as_object_mut().unwrap().remove("head");
        assert_eq!(
            decode_frame(&v.to_string()),
            Err(DecodeError::MissingField("head".into()))
        );
    }

    #[test]
    fn blend_out_of_range() {
        let line = with_field(&neutral(0), &["blend", "jawOpen"], serde_json::json!(1.5));
        let err = decode_frame(&line).unwrap_err();
        assert!(matches!(err, DecodeError::OutOfRange { ref field, value } if field == "blend.jawOpen" && value == 1.5));
    }

    #[test]
    fn unknown_blendshape() {
        let line = with_field(&neutral(0), &["blend", "tongueOut"], serde_json::json!(0.1));
        assert_eq!(
            decode_frame(&line),
            Err(DecodeError::UnknownBlendshape("tongueOut".into()))
        );
    }

    #[test]
    fn missing_blendshape_is_named() {
        let mut v: Value = serde_json::from_str(&encode_frame(&neutral(0))).unwrap();
        v["blend"].as_object_mut().unwrap().remove("mouthPucker");
        assert_eq!(
            decode_frame(&v.to_string()),
            Err(DecodeError::MissingField("blend.mouthPucker".into()))
        );
    }

    #[test]
    fn degenerate_box_rejected() {
        let line = with_field(&neutral(0), &["box", "x1"], serde_json::json!(0.1));
        assert_eq!(decode_frame(&line), Err(DecodeError::DegenerateBox));
    }

    #[test]
    fn head_out_of_range() {
        let line = with_field(&neutral(0), &["head", "roll"], serde_json::json!(95.0));
        assert!(matches!(
            decode_frame(&line),
            Err(DecodeError::OutOfRange { .. })
        ));
    }

    #[test]
    fn garbage_is_an_error_not_a_panic() {
        for junk in ["", "{", "[]", "null", "{\"t_ms\": -1}", "\u{0}\u{1}", "{\"t_ms\":1}"] {
            assert!(decode_frame(junk).is_err(), "{junk:?}");
        }
    }
}
