//! Edit lists and clip metadata.
//!
//! ```json
//! {"edits": [
//!   {"name": "turn", "type": "reposition", "object_id": "car_0",
//!    "delta_yaw_deg": -5.0, "delta_t_local": [0.0, 1.0, 0.0],
//!    "clip": {"start_frame": 0, "num_frames": 10, "camera_id": "front"}},
//!   {"name": "add", "type": "insert", "asset_ref": "car", "track": {..scene track..}},
//!   {"name": "remove", "type": "delete", "object_id": "car_1"}
//! ]}
//! ```
//!
//! `name` defaults to `edit_NNN` (index in the list) and names the bundle
//! directory; `clip` and each of its fields are optional. `delta_yaw_deg` is
//! in degrees, counter-clockwise seen from above; `delta_t_local` defaults to
//! zero and is expressed in the object's own frame (+x forward, +y left).

use serde_json::{json, Value};

use super::scene::{track_from_json, track_to_json};
use super::{canonical_json, report_unknown, unknown_keys, vec3_json, FormatError};
use crate::editing::{ClipMeta, EditCommand, CHANNEL_NAMES};
use crate::geometry::Vec3;

#[derive(Debug, Clone, PartialEq, Default)]
pub struct ClipRef {
    pub start_frame: Option<u32>,
    pub num_frames: Option<u32>,
    pub camera_id: Option<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EditEntry {
    pub name: String,
    pub clip: ClipRef,
    pub command: EditCommand,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct EditsFile {
    pub edits: Vec<EditEntry>,
}

fn schema(msg: impl Into<String>) -> FormatError {
    FormatError::Schema(msg.into())
}

fn get_str(v: &Value, key: &str, path: &str) -> Result<String, FormatError> {
    v.get(key)
        .and_then(Value::as_str)
        .map(str::to_string)
        .ok_or_else(|| schema(format!("{path}: missing string '{key}'")))
}

fn get_vec3(v: &Value, key: &str, path: &str) -> Result<Option<Vec3>, FormatError> {
    match v.get(key) {
        None => Ok(None),
        Some(x) => {
            let a: [f64; 3] = serde_json::from_value(x.clone())
                .map_err(|_| schema(format!("{path}: '{key}' must be three numbers")))?;
            Ok(Some(Vec3::from(a)))
        }
    }
}

fn valid_name(name: &str) -> bool {
    !name.is_empty()
        && name != "."
        && name != ".."
        && name.chars().all(|c| c.is_ascii_alphanumeric() || "-_.".contains(c))
}

pub fn parse_edits(text: &str, strict: bool) -> Result<EditsFile, FormatError> {
    let v: Value = serde_json::from_str(text)?;
    let mut unknown = Vec::new();
    unknown_keys(&v, &["edits"], "", &mut unknown);
    let list = v
        .get("edits")
        .and_then(Value::as_array)
        .ok_or_else(|| schema("missing array 'edits'"))?;
    let mut out = EditsFile::default();
    for (i, e) in list.iter().enumerate() {
        let path = format!("edits[{i}]");
        let kind = get_str(e, "type", &path)?;
        let specific: &[&str] = match kind.as_str() {
            "reposition" => &["object_id", "delta_yaw_deg", "delta_t_local"],
            "insert" => &["asset_ref", "track"],
            "delete" => &["object_id"],
            other => return Err(schema(format!("{path}: unknown edit type '{other}'"))),
        };
        let allowed: Vec<&str> = ["name", "type", "clip"].iter().chain(specific).copied().collect();
        unknown_keys(e, &allowed, &path, &mut unknown);
        let command = match kind.as_str() {
            "reposition" => {
                let deg = e
                    .get("delta_yaw_deg")
                    .and_then(Value::as_f64)
                    .ok_or_else(|| schema(format!("{path}: missing number 'delta_yaw_deg'")))?;
                EditCommand::Reposition {
                    object_id: get_str(e, "object_id", &path)?,
                    delta_yaw: deg.to_radians(),
                    delta_t_local: get_vec3(e, "delta_t_local", &path)?.unwrap_or_else(Vec3::zeros),
                }
            }
            "insert" => EditCommand::Insert {
                asset_ref: get_str(e, "asset_ref", &path)?,
                track: track_from_json(
                    e.get("track").ok_or_else(|| schema(format!("{path}: missing 'track'")))?,
                    strict,
                )?,
            },
            _ => EditCommand::Delete {
                object_id: get_str(e, "object_id", &path)?,
            },
        };
        let clip = match e.get("clip") {
            None => ClipRef::default(),
            Some(c) => {
                unknown_keys(c, &["start_frame", "num_frames", "camera_id"], &format!("{path}.clip"), &mut unknown);
                let num = |k: &str| -> Result<Option<u32>, FormatError> {
                    c.get(k)
                        .map(|x| {
                            x.as_u64()
                                .and_then(|n| u32::try_from(n).ok())
                                .ok_or_else(|| schema(format!("{path}.clip: '{k}' must be a frame count")))
                        })
                        .transpose()
                };
                ClipRef {
                    start_frame: num("start_frame")?,
                    num_frames: num("num_frames")?,
                    camera_id: c.get("camera_id").and_then(Value::as_str).map(str::to_string),
                }
            }
        };
        let name = match e.get("name") {
            None => format!("edit_{i:03}"),
            Some(n) => n
                .as_str()
                .filter(|n| valid_name(n))
                .ok_or_else(|| schema(format!("{path}: name must be non-empty [A-Za-z0-9_.-]")))?
                .to_string(),
        };
        if out.edits.iter().any(|x| x.name == name) {
            return Err(schema(format!("{path}: duplicate name '{name}'")));
        }
        out.edits.push(EditEntry { name, clip, command });
    }
    report_unknown(unknown, strict)?;
    Ok(out)
}

fn command_json(cmd: &EditCommand) -> Value {
    match cmd {
        EditCommand::Reposition {
            object_id,
            delta_yaw,
            delta_t_local,
        } => json!({
            "type": "reposition",
            "object_id": object_id,
            "delta_yaw_deg": delta_yaw.to_degrees(),
            "delta_t_local": vec3_json(delta_t_local),
        }),
        EditCommand::Insert { asset_ref, track } => json!({
            "type": "insert",
            "asset_ref": asset_ref,
            "track": track_to_json(track),
        }),
        EditCommand::Delete { object_id } => json!({"type": "delete", "object_id": object_id}),
    }
}

pub fn write_edits(file: &EditsFile) -> String {
    let edits: Vec<Value> = file
        .edits
        .iter()
        .map(|e| {
            let mut v = command_json(&e.command);
            v["name"] = json!(e.name);
            let mut clip = serde_json::Map::new();
            if let Some(s) = e.clip.start_frame {
                clip.insert("start_frame".into(), json!(s));
            }
            if let Some(n) = e.clip.num_frames {
                clip.insert("num_frames".into(), json!(n));
            }
            if let Some(c) = &e.clip.camera_id {
                clip.insert("camera_id".into(), json!(c));
            }
            if !clip.is_empty() {
                v["clip"] = Value::Object(clip);
            }
            v
        })
        .collect();
    canonical_json(&json!({ "edits": edits }))
}

/// Bundle metadata. The edit is echoed with its yaw delta in radians
/// (`delta_yaw`) as well as degrees.
pub fn clip_meta_json(meta: &ClipMeta, stack_file: &str) -> String {
    let mut edit = command_json(&meta.edit);
    if let EditCommand::Reposition { delta_yaw, .. } = meta.edit {
        edit["delta_yaw"] = json!(delta_yaw);
    }
    canonical_json(&json!({
        "object_id": meta.object_id,
        "start_frame": meta.start_frame,
        "num_frames": meta.num_frames,
        "camera_id": meta.camera_id,
        "reference_frame": meta.reference_frame,
        "edit": edit,
        "stack": {"file": stack_file, "channel_names": CHANNEL_NAMES},
    }))
}

#[cfg(test)]
mod tests {
    use super::*;

    const SAMPLE: &str = r#"{"edits": [
        {"name": "turn", "type": "reposition", "object_id": "car_0", "delta_yaw_deg": -5,
         "clip": {"start_frame": 2, "camera_id": "front"}},
        {"type": "delete", "object_id": "car_1"},
        {"type": "insert", "asset_ref": "car", "track": {"object_id": "new", "class": "vehicle",
         "boxes": [{"frame": 0, "center": [10, 0, 0.8], "dims": [4.5, 1.9, 1.6], "yaw": 0}]}}
    ]}"#;

    #[test]
    fn parses_and_converts_degrees() {
        let f = parse_edits(SAMPLE, true).unwrap();
        assert_eq!(f.edits.len(), 3);
        assert_eq!(f.edits[0].name, "turn");
        assert_eq!(f.edits[1].name, "edit_001");
        match &f.edits[0].command {
            EditCommand::Reposition { delta_yaw, delta_t_local, .. } => {
                assert_eq!(*delta_yaw, (-5f64).to_radians());
                assert_eq!(*delta_t_local, Vec3::zeros());
            }
            other => panic!("{other:?}"),
        }
        assert_eq!(f.edits[0].clip.start_frame, Some(2));
        assert_eq!(f.edits[0].clip.num_frames, None);
        let again = parse_edits(&write_edits(&f), true).unwrap();
        assert_eq!(again.edits[1..], f.edits[1..]);
    }

    #[test]
    fn rejects_bad_entries() {
        let typo = r#"{"edits": [{"type": "reposition", "object_id": "a", "delta_yaw": 0.1}]}"#;
        assert!(matches!(parse_edits(typo, false), Err(FormatError::Schema(_))));
        let extra = r#"{"edits": [{"type": "delete", "object_id": "a", "why": 1}]}"#;
        assert!(matches!(parse_edits(extra, true), Err(FormatError::UnknownFields(_))));
        assert!(parse_edits(extra, false).is_ok());
        let dup = r#"{"edits": [{"type": "delete", "object_id": "a", "name": "x"},
                                {"type": "delete", "object_id": "b", "name": "x"}]}"#;
        assert!(matches!(parse_edits(dup, true), Err(FormatError::Schema(_))));
        let path = r#"{"edits": [{"type": "delete", "object_id": "a", "name": "../x"}]}"#;
        assert!(matches!(parse_edits(path, true), Err(FormatError::Schema(_))));
    }

    #[test]
    fn clip_meta_echoes_radians() {
        let f = parse_edits(SAMPLE, true).unwrap();
        let meta = ClipMeta {
            object_id: "car_0".into(),
            start_frame: 2,
            num_frames: 10,
            camera_id: "front".into(),
            reference_frame: Some(11),
            edit: f.edits[0].command.clone(),
        };
        let v: Value = serde_json::from_str(&clip_meta_json(&meta, "stack.gstensor")).unwrap();
        assert_eq!(v["edit"]["delta_yaw"].as_f64().unwrap(), -5f64.to_radians());
        assert_eq!(v["stack"]["channel_names"].as_array().unwrap().len(), 14);
    }
}
