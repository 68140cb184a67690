//! Detections as JSON lines, one object per line:
//!
//! ```json
//! {"frame": 3, "class": "vehicle", "score": 0.9, "center": [x, y, z], "dims": [l, w, h], "yaw": 0.1,
//!  "clip": "turn", "object_id": "car_0"}
//! ```
//!
//! `clip` (the edit name) and `object_id` are optional. Blank lines are
//! skipped.

use serde::{Deserialize, Serialize};

use super::FormatError;
use crate::evalkit::Detection;
use crate::geometry::Vec3;
use crate::layout::{Box3D, ObjectClass};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DetectionRecord {
    pub frame: u32,
    pub class: ObjectClass,
    pub score: f64,
    pub center: [f64; 3],
    pub dims: [f64; 3],
    pub yaw: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub clip: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub object_id: Option<String>,
}

impl DetectionRecord {
    pub fn from_box(frame: u32, class: ObjectClass, score: f64, b: &Box3D) -> Self {
        Self {
            frame,
            class,
            score,
            center: b.center.into(),
            dims: b.dims.into(),
            yaw: b.yaw,
            clip: None,
            object_id: None,
        }
    }

    pub fn detection(&self) -> Result<Detection, FormatError> {
        Ok(Detection {
            bbox: Box3D::new(Vec3::from(self.center), Vec3::from(self.dims), self.yaw)?,
            score: self.score,
            class: self.class,
        })
    }
}

pub fn parse_detections(text: &str) -> Result<Vec<DetectionRecord>, FormatError> {
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let err = |message: String| FormatError::Line { line: i + 1, message };
        let r: DetectionRecord = serde_json::from_str(line).map_err(|e| err(e.to_string()))?;
        if !r.score.is_finite() {
            return Err(err("score must be finite".into()));
        }
        r.detection().map_err(|e| err(e.to_string()))?;
        out.push(r);
    }
    Ok(out)
}

pub fn write_detections(records: &[DetectionRecord]) -> String {
    let mut s = String::new();
    for r in records {
        s.push_str(&serde_json::to_string(r).expect("record serializes"));
        s.push('\n');
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip_and_errors() {
        let b = Box3D::new(Vec3::new(10.0, 1.0, 0.8), Vec3::new(4.5, 1.9, 1.6), 0.25).unwrap();
        let mut r = DetectionRecord::from_box(4, ObjectClass::Vehicle, 0.75, &b);
        r.clip = Some("turn".into());
        let text = write_detections(&[r.clone(), DetectionRecord::from_box(5, ObjectClass::Cyclist, 0.5, &b)]);
        let back = parse_detections(&format!("\n{text}\n")).unwrap();
        assert_eq!(back[0], r);
        assert_eq!(back[1].clip, None);
        assert_eq!(back[0].detection().unwrap().bbox, b);

        let bad = "{\"frame\": 0}\n";
        assert!(matches!(parse_detections(bad), Err(FormatError::Line { line: 1, .. })));
        let neg = text.lines().next().unwrap().replace("[4.5,1.9,1.6]", "[-4.5,1.9,1.6]");
        assert!(matches!(parse_detections(&format!("\n{neg}")), Err(FormatError::Line { line: 2, .. })));
    }
}
