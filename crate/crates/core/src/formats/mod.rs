//! On-disk formats: scene JSON, edit lists, detection JSONL, the raw tensor
//! file, PFM depth maps, PNG images and the bundle directory layout.
//!
//! JSON is written canonically: keys sorted, two-space indentation, floats
//! as shortest round-trip decimals, trailing newline. Every file is written
//! to a temporary sibling and renamed into place.

mod bundle;
mod detections;
mod edits;
mod pfm;
mod scene;
mod tensor;

pub use bundle::{
    read_bundle_files, read_png_gray, read_png_rgb, write_bundle, write_png_gray, write_png_rgb, BundleFiles,
    BUNDLE_DIRS, STACK_FILE,
};
pub use detections::{parse_detections, write_detections, DetectionRecord};
pub use edits::{clip_meta_json, parse_edits, write_edits, ClipRef, EditEntry, EditsFile};
pub use pfm::{read_pfm, write_pfm};
pub use scene::{parse_scene, scene_to_json, track_from_json, track_to_json, SceneParse};
pub use tensor::{read_tensor, write_tensor, TensorFile, TENSOR_MAGIC};

use std::io::Write;
use std::path::{Path, PathBuf};

use serde_json::Value;
use thiserror::Error;

use crate::geometry::GeometryError;
use crate::layout::LayoutError;

#[derive(Debug, Error)]
pub enum FormatError {
    #[error("invalid JSON: {0}")]
    Json(#[from] serde_json::Error),
    #[error("{0}")]
    Schema(String),
    #[error("unknown fields: {}", .0.join(", "))]
    UnknownFields(Vec<String>),
    #[error("line {line}: {message}")]
    Line { line: usize, message: String },
    #[error("tensor payload is {actual} bytes, header declares {expected}")]
    SizeMismatch { expected: u64, actual: u64 },
    #[error("bad magic bytes")]
    BadMagic,
    #[error("PFM: {0}")]
    Pfm(String),
    #[error("image: {0}")]
    Image(#[from] image::ImageError),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error(transparent)]
    Layout(#[from] LayoutError),
}

pub(crate) fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> FormatError + '_ {
    move |source| FormatError::Io {
        path: path.to_path_buf(),
        source,
    }
}

/// Writes `bytes` to a temporary file next to `path`, then renames it over
/// `path`. Parent directories are created as needed.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<(), FormatError> {
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    std::fs::create_dir_all(dir).map_err(io_err(dir))?;
    let mut builder = tempfile::Builder::new();
    // Temporary files default to owner-only; outputs should not be.
    #[cfg(unix)]
    builder.permissions(std::os::unix::fs::PermissionsExt::from_mode(0o644));
    let mut tmp = builder.tempfile_in(dir).map_err(io_err(dir))?;
    tmp.write_all(bytes).map_err(io_err(path))?;
    tmp.persist(path).map_err(|e| FormatError::Io {
        path: path.to_path_buf(),
        source: e.error,
    })?;
    Ok(())
}

pub fn read_file(path: &Path) -> Result<Vec<u8>, FormatError> {
    std::fs::read(path).map_err(io_err(path))
}

/// Canonical pretty JSON with a trailing newline.
pub fn canonical_json(value: &Value) -> String {
    // serde_json's default map is ordered by key.
    let mut s = serde_json::to_string_pretty(value).expect("Value always serializes");
    s.push('\n');
    s
}

/// Collects `path.key` for every key of `obj` not in `allowed`.
pub(crate) fn unknown_keys(obj: &Value, allowed: &[&str], path: &str, out: &mut Vec<String>) {
    if let Value::Object(map) = obj {
        for k in map.keys() {
            if !allowed.contains(&k.as_str()) {
                out.push(if path.is_empty() { k.clone() } else { format!("{path}.{k}") });
            }
        }
    }
}

/// Reports unknown fields: an error in strict mode, warnings otherwise.
pub(crate) fn report_unknown(unknown: Vec<String>, strict: bool) -> Result<Vec<String>, FormatError> {
    if unknown.is_empty() {
        return Ok(unknown);
    }
    if strict {
        return Err(FormatError::UnknownFields(unknown));
    }
    for u in &unknown {
        log::warn!("ignoring unknown field {u}");
    }
    Ok(unknown)
}

pub(crate) fn vec3_json(v: &crate::geometry::Vec3) -> Value {
    Value::from(vec![v.x, v.y, v.z])
}
