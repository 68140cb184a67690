//! Scene JSON.
//!
//! ```json
//! {
//!   "cameras": [{"cam_to_world": [16 row-major floats], "camera_id": "front", "frame": 0,
//!                "intrinsics": {"cx": .., "cy": .., "fx": .., "fy": .., "height": .., "width": ..}}],
//!   "convention": {"camera": "+z forward,+y down", "yaw_zero": "+x"},
//!   "num_frames": 10,
//!   "tracks": [{"boxes": [{"center": [x, y, z], "dims": [l, w, h], "frame": 0, "yaw": 0.0}],
//!               "class": "vehicle", "object_id": "car_0"}],
//!   "version": 1
//! }
//! ```

use serde::Deserialize;
use serde_json::{json, Value};

use super::{canonical_json, report_unknown, unknown_keys, vec3_json, FormatError};
use crate::geometry::{CameraFrame, CameraIntrinsics, Pose, Vec3};
use crate::layout::{Box3D, ObjectClass, ObjectTrack, SceneLayout};

pub const SCENE_VERSION: u32 = 1;
pub const CAMERA_CONVENTION: &str = "+z forward,+y down";
pub const YAW_ZERO: &str = "+x";

const TOP_KEYS: &[&str] = &["version", "convention", "num_frames", "cameras", "tracks"];
const CONVENTION_KEYS: &[&str] = &["camera", "yaw_zero"];
const CAMERA_KEYS: &[&str] = &["frame", "camera_id", "intrinsics", "cam_to_world"];
const INTRINSICS_KEYS: &[&str] = &["fx", "fy", "cx", "cy", "width", "height"];
const TRACK_KEYS: &[&str] = &["object_id", "class", "boxes"];
const BOX_KEYS: &[&str] = &["frame", "center", "dims", "yaw"];

#[derive(Deserialize)]
struct SceneDoc {
    version: u32,
    convention: ConventionDoc,
    num_frames: u32,
    cameras: Vec<CameraDoc>,
    tracks: Vec<TrackDoc>,
}

#[derive(Deserialize)]
struct ConventionDoc {
    camera: String,
    yaw_zero: String,
}

#[derive(Deserialize)]
struct CameraDoc {
    frame: u32,
    camera_id: String,
    intrinsics: CameraIntrinsics,
    cam_to_world: Vec<f64>,
}

#[derive(Deserialize)]
struct TrackDoc {
    object_id: String,
    class: ObjectClass,
    boxes: Vec<BoxDoc>,
}

#[derive(Deserialize)]
struct BoxDoc {
    frame: u32,
    center: [f64; 3],
    dims: [f64; 3],
    yaw: f64,
}

/// A parsed scene plus the unknown fields that were ignored.
#[derive(Debug, Clone)]
pub struct SceneParse {
    pub layout: SceneLayout,
    pub unknown_fields: Vec<String>,
}

fn check_track_keys(t: &Value, path: &str, unknown: &mut Vec<String>) {
    unknown_keys(t, TRACK_KEYS, path, unknown);
    if let Some(boxes) = t.get("boxes").and_then(Value::as_array) {
        for (j, b) in boxes.iter().enumerate() {
            unknown_keys(b, BOX_KEYS, &format!("{path}.boxes[{j}]"), unknown);
        }
    }
}

fn build_track(doc: TrackDoc) -> Result<ObjectTrack, FormatError> {
    let mut boxes = std::collections::BTreeMap::new();
    for b in doc.boxes {
        let bx = Box3D::new(Vec3::from(b.center), Vec3::from(b.dims), b.yaw)?;
        if boxes.insert(b.frame, bx).is_some() {
            return Err(FormatError::Schema(format!(
                "track '{}' has two boxes for frame {}",
                doc.object_id, b.frame
            )));
        }
    }
    Ok(ObjectTrack {
        object_id: doc.object_id,
        class: doc.class,
        boxes,
    })
}

/// Parses one track object, as used in scenes and insert edits.
pub fn track_from_json(v: &Value, strict: bool) -> Result<ObjectTrack, FormatError> {
    let mut unknown = Vec::new();
    check_track_keys(v, "track", &mut unknown);
    report_unknown(unknown, strict)?;
    build_track(TrackDoc::deserialize(v)?)
}

pub fn track_to_json(t: &ObjectTrack) -> Value {
    let boxes: Vec<Value> = t
        .boxes
        .iter()
        .map(|(f, b)| {
            json!({
                "frame": f,
                "center": vec3_json(&b.center),
                "dims": vec3_json(&b.dims),
                "yaw": b.yaw,
            })
        })
        .collect();
    json!({
        "object_id": t.object_id,
        "class": t.class,
        "boxes": boxes,
    })
}

pub fn parse_scene(text: &str, strict: bool) -> Result<SceneParse, FormatError> {
    let v: Value = serde_json::from_str(text)?;
    let mut unknown = Vec::new();
    unknown_keys(&v, TOP_KEYS, "", &mut unknown);
    if let Some(c) = v.get("convention") {
        unknown_keys(c, CONVENTION_KEYS, "convention", &mut unknown);
    }
    for (i, c) in v.get("cameras").and_then(Value::as_array).into_iter().flatten().enumerate() {
        let path = format!("cameras[{i}]");
        unknown_keys(c, CAMERA_KEYS, &path, &mut unknown);
        if let Some(k) = c.get("intrinsics") {
            unknown_keys(k, INTRINSICS_KEYS, &format!("{path}.intrinsics"), &mut unknown);
        }
    }
    for (i, t) in v.get("tracks").and_then(Value::as_array).into_iter().flatten().enumerate() {
        check_track_keys(t, &format!("tracks[{i}]"), &mut unknown);
    }
    let unknown_fields = report_unknown(unknown, strict)?;

    let doc = SceneDoc::deserialize(&v)?;
    if doc.version != SCENE_VERSION {
        return Err(FormatError::Schema(format!("unsupported scene version {}", doc.version)));
    }
    if doc.convention.camera != CAMERA_CONVENTION || doc.convention.yaw_zero != YAW_ZERO {
        return Err(FormatError::Schema(format!(
            "unsupported convention camera='{}' yaw_zero='{}'",
            doc.convention.camera, doc.convention.yaw_zero
        )));
    }
    let mut cameras = Vec::with_capacity(doc.cameras.len());
    for c in doc.cameras {
        c.intrinsics.validate()?;
        let m: [f64; 16] = c.cam_to_world.as_slice().try_into().map_err(|_| {
            FormatError::Schema(format!(
                "camera '{}' frame {}: cam_to_world needs 16 values, got {}",
                c.camera_id,
                c.frame,
                c.cam_to_world.len()
            ))
        })?;
        cameras.push(CameraFrame::new(c.intrinsics, Pose::from_row_major(&m)?, c.frame, c.camera_id));
    }
    let n_cams = cameras.len();
    let tracks = doc.tracks.into_iter().map(build_track).collect::<Result<Vec<_>, _>>()?;
    let layout = SceneLayout::new(doc.num_frames, cameras, tracks)?;
    if layout.cameras.len() != n_cams {
        return Err(FormatError::Schema("duplicate (frame, camera_id) entry".into()));
    }
    Ok(SceneParse { layout, unknown_fields })
}

pub fn scene_to_json(layout: &SceneLayout) -> String {
    let cameras: Vec<Value> = layout
        .cameras
        .values()
        .map(|c| {
            json!({
                "frame": c.frame_index,
                "camera_id": c.camera_id,
                "intrinsics": c.intrinsics,
                "cam_to_world": c.cam_to_world.to_row_major().to_vec(),
            })
        })
        .collect();
    let v = json!({
        "version": SCENE_VERSION,
        "convention": {"camera": CAMERA_CONVENTION, "yaw_zero": YAW_ZERO},
        "num_frames": layout.num_frames,
        "cameras": cameras,
        "tracks": layout.tracks.iter().map(track_to_json).collect::<Vec<_>>(),
    });
    canonical_json(&v)
}
