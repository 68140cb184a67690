//! Layout edits (reposition, insert, delete), asset placement and the
//! per-clip conditioning bundle.
//!
//! Reposition deltas live in the object's pre-edit local frame (+x forward,
//! +y left, +z up), so `delta_t_local = (0, 1, 0)` always moves the object one
//! meter to its own left regardless of heading.

mod bundle;
mod stack;

pub use bundle::{
    build_bundle, AssetStore, BundleOptions, ClipMeta, ClipSpec, ConditioningBundle, FrameSource,
    SyntheticBackground, WHITE_REFERENCE_SIDE,
};
pub use stack::{assemble_channel_stack, mock_encode, pool_mask, ChannelStack, CHANNEL_NAMES, LATENT_FACTOR};

use thiserror::Error;

use crate::dataprep::DataprepError;
use crate::gaussians::{transform_cloud, Frame, GaussianCloud, GaussianError};
use crate::geometry::{yaw_pose, yaw_rotation, GeometryError, Vec3};
use crate::layout::{Box3D, LayoutError, ObjectTrack, SceneLayout};

/// Extents at or below this are treated as degenerate.
pub const MIN_EXTENT: f64 = 1e-6;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EditError {
    #[error("unknown object '{0}'")]
    UnknownObject(String),
    #[error("duplicate object id '{0}'")]
    DuplicateObjectId(String),
    #[error("asset has no Gaussians")]
    EmptyAsset,
    #[error("asset extent along axis {axis} is {extent} m")]
    DegenerateExtent { axis: usize, extent: f64 },
    #[error("no asset for '{0}'")]
    MissingAsset(String),
    #[error("{width}x{height} is not divisible by 8")]
    DimensionNotDivisible { width: u32, height: u32 },
    #[error("clip frames {start}..{end} exceed the scene's {num_frames} frames")]
    ClipOutOfRange { start: u32, end: u32, num_frames: u32 },
    #[error("source frame {frame}: {message}")]
    Source { frame: u32, message: String },
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error(transparent)]
    Layout(#[from] LayoutError),
    #[error(transparent)]
    Dataprep(#[from] DataprepError),
    #[error(transparent)]
    Gaussian(#[from] GaussianError),
}

#[derive(Debug, Clone, PartialEq)]
pub enum EditCommand {
    Reposition {
        object_id: String,
        /// Radians; negative is clockwise seen from above.
        delta_yaw: f64,
        delta_t_local: Vec3,
    },
    Insert {
        asset_ref: String,
        track: ObjectTrack,
    },
    Delete {
        object_id: String,
    },
}

impl EditCommand {
    pub fn kind(&self) -> &'static str {
        match self {
            EditCommand::Reposition { .. } => "reposition",
            EditCommand::Insert { .. } => "insert",
            EditCommand::Delete { .. } => "delete",
        }
    }
}

/// Applies `cmd` and returns the edited layout together with the id of the
/// edited object. Inserted tracks keep their payload id when it is free and
/// otherwise get the first free `{id}-{k}`, k = 1, 2, ...
pub fn apply_edit(layout: &SceneLayout, cmd: &EditCommand) -> Result<(SceneLayout, String), EditError> {
    let mut out = layout.clone();
    match cmd {
        EditCommand::Reposition {
            object_id,
            delta_yaw,
            delta_t_local,
        } => {
            let track = out
                .tracks
                .iter_mut()
                .find(|t| &t.object_id == object_id)
                .ok_or_else(|| EditError::UnknownObject(object_id.clone()))?;
            for b in track.boxes.values_mut() {
                let center = b.center + yaw_rotation(b.yaw) * delta_t_local;
                *b = Box3D::new(center, b.dims, b.yaw + delta_yaw)?;
            }
            Ok((out, object_id.clone()))
        }
        EditCommand::Insert { track, .. } => {
            let id = fresh_id(layout, &track.object_id);
            let mut t = track.clone();
            t.object_id = id.clone();
            out.check_track_frames(&t)?;
            out.tracks.push(t);
            out.validate().map_err(|e| match e {
                LayoutError::DuplicateObjectId(id) => EditError::DuplicateObjectId(id),
                other => other.into(),
            })?;
            Ok((out, id))
        }
        EditCommand::Delete { object_id } => {
            let before = out.tracks.len();
            out.tracks.retain(|t| &t.object_id != object_id);
            if out.tracks.len() == before {
                return Err(EditError::UnknownObject(object_id.clone()));
            }
            Ok((out, object_id.clone()))
        }
    }
}

fn fresh_id(layout: &SceneLayout, wanted: &str) -> String {
    if layout.track(wanted).is_none() {
        return wanted.to_string();
    }
    (1..)
        .map(|k| format!("{wanted}-{k}"))
        .find(|id| layout.track(id).is_none())
        .expect("unbounded search")
}

/// Axis-aligned extent of the cloud with every Gaussian grown to ±3σ along
/// each axis.
pub fn asset_extent(asset: &GaussianCloud) -> Result<Vec3, EditError> {
    if asset.is_empty() {
        return Err(EditError::EmptyAsset);
    }
    let mut lo = Vec3::repeat(f64::INFINITY);
    let mut hi = Vec3::repeat(f64::NEG_INFINITY);
    for g in &asset.gaussians {
        let cov = g.covariance();
        for i in 0..3 {
            let r = 3.0 * cov[(i, i)].max(0.0).sqrt();
            lo[i] = lo[i].min(g.mean[i] - r);
            hi[i] = hi[i].max(g.mean[i] + r);
        }
    }
    Ok(hi - lo)
}

/// Scales a local asset uniformly so its 3σ extent fits inside `b`, then
/// places it at the box's center and heading.
pub fn place_asset(asset: &GaussianCloud, b: &Box3D) -> Result<GaussianCloud, EditError> {
    if asset.frame != Frame::Local {
        return Err(GaussianError::WrongFrame.into());
    }
    let extent = asset_extent(asset)?;
    if let Some(axis) = (0..3).find(|&i| !(extent[i] > MIN_EXTENT)) {
        return Err(EditError::DegenerateExtent {
            axis,
            extent: extent[axis],
        });
    }
    let s = fit_scale(&extent, &b.dims);
    let scaled = GaussianCloud::local(
        asset
            .gaussians
            .iter()
            .map(|g| {
                let mut g = g.clone();
                g.mean *= s;
                g.scale *= s;
                g
            })
            .collect(),
    );
    Ok(transform_cloud(&scaled, &yaw_pose(b.yaw, b.center))?)
}

/// Largest uniform scale that keeps `extent` within `dims` on every axis.
pub fn fit_scale(extent: &Vec3, dims: &Vec3) -> f64 {
    (0..3).map(|i| dims[i] / extent[i]).fold(f64::INFINITY, f64::min)
}
