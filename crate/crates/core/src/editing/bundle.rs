//! Conditioning bundle assembly for one edited clip.

use std::collections::BTreeMap;

use image::{Rgb, Rgb32FImage, RgbImage};
use rand::Rng;
use rayon::prelude::*;

use super::{apply_edit, asset_extent, place_asset, EditCommand, EditError};
use crate::dataprep::{
    augment_reference, crop_reference, make_mask, pick_reference_frame, AugmentParams, DataprepError,
    RngSeed, DEFAULT_MIN_PAD_PX, DEFAULT_PAD_FRAC,
};
use crate::gaussians::{render_with, GaussianCloud, RenderConfig};
use crate::geometry::{look_at, CameraFrame, CameraIntrinsics, Vec3};
use crate::layout::{render_depth_boxes, render_edge_mask, Box3D, SceneLayout, DEFAULT_EDGE_THICKNESS};
use crate::raster::{quantize, DepthImage, Mask};

/// Side of the reference image used for deletions and asset renders.
pub const WHITE_REFERENCE_SIDE: u32 = 256;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ClipSpec {
    pub start_frame: u32,
    pub num_frames: u32,
    pub camera_id: String,
}

impl ClipSpec {
    pub fn frames(&self) -> std::ops::Range<u32> {
        self.start_frame..self.start_frame + self.num_frames
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ClipMeta {
    pub object_id: String,
    pub start_frame: u32,
    pub num_frames: u32,
    pub camera_id: String,
    pub reference_frame: Option<u32>,
    pub edit: EditCommand,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConditioningBundle {
    pub gaussian_video: Vec<RgbImage>,
    pub depth_boxes: Vec<DepthImage>,
    pub edge_masks: Vec<Mask>,
    pub inpaint_masks: Vec<Mask>,
    pub masked_video: Vec<RgbImage>,
    pub reference_image: RgbImage,
    pub clip_meta: ClipMeta,
}

impl ConditioningBundle {
    pub fn len(&self) -> usize {
        self.gaussian_video.len()
    }

    pub fn is_empty(&self) -> bool {
        self.gaussian_video.is_empty()
    }

    /// `(width, height)` shared by every per-frame image.
    pub fn dimensions(&self) -> (u32, u32) {
        self.masked_video
            .first()
            .map(|f| f.dimensions())
            .unwrap_or((0, 0))
    }
}

/// Gaussian assets by name plus optional precomputed reference images.
#[derive(Debug, Clone, Default)]
pub struct AssetStore {
    pub assets: BTreeMap<String, GaussianCloud>,
    pub references: BTreeMap<String, RgbImage>,
}

impl AssetStore {
    pub fn asset(&self, key: &str) -> Result<&GaussianCloud, EditError> {
        self.assets
            .get(key)
            .ok_or_else(|| EditError::MissingAsset(key.to_string()))
    }
}

/// Source video frames, in [0, 1] linear RGB.
pub trait FrameSource: Sync {
    fn frame(&self, frame: u32, cam: &CameraFrame) -> Result<Rgb32FImage, EditError>;
}

/// Procedural stand-in for recorded video: a sky gradient above the horizon
/// line of the camera, asphalt below, both with seeded per-pixel grain.
#[derive(Debug, Clone, Copy)]
pub struct SyntheticBackground {
    pub seed: RngSeed,
}

impl FrameSource for SyntheticBackground {
    fn frame(&self, frame: u32, cam: &CameraFrame) -> Result<Rgb32FImage, EditError> {
        let mut rng = self.seed.derive(u64::from(frame)).rng();
        let (w, h) = (cam.width(), cam.height());
        // Image row of the horizon: where a far point at camera height lands.
        let c = cam.center();
        let r = cam.cam_to_world.rotation;
        let fwd = Vec3::new(r[(0, 2)], r[(1, 2)], 0.0);
        let horizon = fwd
            .try_normalize(1e-9)
            .and_then(|f| cam.project(&(c + f * 1e4)).ok())
            .map_or(h as f64 / 2.0, |p| p.v);
        let mut img = Rgb32FImage::new(w, h);
        for (_, y, p) in img.enumerate_pixels_mut() {
            let grain = rng.random::<f32>() * 0.04 - 0.02;
            let base = if (y as f64) < horizon {
                let t = (y as f32 / h as f32).min(1.0);
                [0.55 + 0.2 * t, 0.7 + 0.15 * t, 0.9]
            } else {
                [0.32, 0.32, 0.34]
            };
            *p = Rgb(base.map(|v| (v + grain).clamp(0.0, 1.0)));
        }
        Ok(img)
    }
}

#[derive(Debug, Clone)]
pub struct BundleOptions {
    pub pad_frac: f64,
    pub min_pad_px: f64,
    pub edge_thickness: f64,
    pub render: RenderConfig,
    /// Reference augmentation and its seed; `None` keeps the reference as is.
    pub augment: Option<(AugmentParams, RngSeed)>,
}

impl Default for BundleOptions {
    fn default() -> Self {
        Self {
            pad_frac: DEFAULT_PAD_FRAC,
            min_pad_px: DEFAULT_MIN_PAD_PX,
            edge_thickness: DEFAULT_EDGE_THICKNESS,
            render: RenderConfig::default(),
            augment: None,
        }
    }
}

struct FrameOut {
    gaussian: RgbImage,
    depth: DepthImage,
    edges: Mask,
    inpaint: Mask,
    masked: RgbImage,
}

/// Applies `cmd` to `layout` and assembles the clip's conditioning inputs.
///
/// The inpainting mask covers the edited object's padded box in the edited
/// layout and, for repositions and deletions, its box in the original layout,
/// so the vacated region is regenerated too. Frames are rendered in parallel
/// and joined in frame order.
pub fn build_bundle(
    layout: &SceneLayout,
    cmd: &EditCommand,
    clip: &ClipSpec,
    assets: &AssetStore,
    source: &dyn FrameSource,
    opts: &BundleOptions,
) -> Result<ConditioningBundle, EditError> {
    let end = clip.start_frame + clip.num_frames;
    if clip.num_frames == 0 || end > layout.num_frames {
        return Err(EditError::ClipOutOfRange {
            start: clip.start_frame,
            end,
            num_frames: layout.num_frames,
        });
    }
    let (edited, object_id) = apply_edit(layout, cmd)?;
    let asset = match cmd {
        EditCommand::Reposition { object_id, .. } => Some(assets.asset(object_id)?),
        EditCommand::Insert { asset_ref, .. } => Some(assets.asset(asset_ref)?),
        EditCommand::Delete { .. } => None,
    };
    let before = layout.track(&object_id);
    let after = edited.track(&object_id);

    let frames: Vec<FrameOut> = clip
        .frames()
        .collect::<Vec<_>>()
        .par_iter()
        .map(|&f| -> Result<FrameOut, EditError> {
            let cam = edited.camera(f, &clip.camera_id)?;
            let (w, h) = (cam.width(), cam.height());
            let new_box = after.and_then(|t| t.box_at(f));
            let gaussian = match (asset, new_box) {
                (Some(a), Some(b)) => quantize(&render_with(&place_asset(a, b)?, cam, &opts.render).over_white()),
                _ => RgbImage::from_pixel(w, h, Rgb([255; 3])),
            };
            let mut inpaint = Mask::new(w, h);
            let old_box = match cmd {
                EditCommand::Insert { .. } => None,
                _ => before.and_then(|t| t.box_at(f)),
            };
            for b in [old_box, new_box].into_iter().flatten() {
                match make_mask(b, cam, opts.pad_frac, opts.min_pad_px) {
                    Ok(m) => inpaint.union_with(&m),
                    Err(DataprepError::FullyBehindCamera) => {}
                    Err(e) => return Err(e.into()),
                }
            }
            let src = source.frame(f, cam)?;
            let masked = quantize(&crate::dataprep::gray_out(&src, &inpaint)?);
            Ok(FrameOut {
                gaussian,
                depth: render_depth_boxes(&edited, f, &clip.camera_id)?,
                edges: render_edge_mask(&edited, f, &clip.camera_id, opts.edge_thickness)?,
                inpaint,
                masked,
            })
        })
        .collect::<Result<_, _>>()?;

    let (reference, reference_frame) = match cmd {
        EditCommand::Delete { .. } => (
            RgbImage::from_pixel(WHITE_REFERENCE_SIDE, WHITE_REFERENCE_SIDE, Rgb([255; 3])),
            None,
        ),
        EditCommand::Reposition { .. } | EditCommand::Insert { .. } => {
            let key = match cmd {
                EditCommand::Insert { asset_ref, .. } => asset_ref.as_str(),
                _ => object_id.as_str(),
            };
            let asset = asset.expect("asset resolved above");
            let (img, frame) = reference_for(layout, cmd, clip, &object_id, key, assets, asset, source)?;
            (augment(img, opts)?, frame)
        }
    };

    let mut bundle = ConditioningBundle {
        gaussian_video: Vec::with_capacity(frames.len()),
        depth_boxes: Vec::with_capacity(frames.len()),
        edge_masks: Vec::with_capacity(frames.len()),
        inpaint_masks: Vec::with_capacity(frames.len()),
        masked_video: Vec::with_capacity(frames.len()),
        reference_image: reference,
        clip_meta: ClipMeta {
            object_id,
            start_frame: clip.start_frame,
            num_frames: clip.num_frames,
            camera_id: clip.camera_id.clone(),
            reference_frame,
            edit: cmd.clone(),
        },
    };
    for f in frames {
        bundle.gaussian_video.push(f.gaussian);
        bundle.depth_boxes.push(f.depth);
        bundle.edge_masks.push(f.edges);
        bundle.inpaint_masks.push(f.inpaint);
        bundle.masked_video.push(f.masked);
    }
    Ok(bundle)
}

fn augment(img: RgbImage, opts: &BundleOptions) -> Result<RgbImage, EditError> {
    match &opts.augment {
        None => Ok(img),
        Some((params, seed)) => Ok(quantize(&augment_reference(
            &crate::raster::to_float(&img),
            params,
            *seed,
        )?)),
    }
}

/// Reference image priority: a stored reference for the asset; for a
/// reposition, a crop of the source frame farthest from the clip start in
/// which the original object is fully visible; otherwise a render of the
/// asset alone.
#[allow(clippy::too_many_arguments)]
fn reference_for(
    layout: &SceneLayout,
    cmd: &EditCommand,
    clip: &ClipSpec,
    object_id: &str,
    key: &str,
    assets: &AssetStore,
    asset: &GaussianCloud,
    source: &dyn FrameSource,
) -> Result<(RgbImage, Option<u32>), EditError> {
    if let Some(r) = assets.references.get(key) {
        return Ok((r.clone(), None));
    }
    if let EditCommand::Reposition { .. } = cmd {
        let track = layout.track(object_id).expect("reposition target exists");
        let present: Vec<u32> = clip.frames().filter(|f| track.box_at(*f).is_some()).collect();
        if !present.is_empty() {
            let f = pick_reference_frame(&present, clip.start_frame);
            let cam = layout.camera(f, &clip.camera_id)?;
            let b = track.box_at(f).expect("frame filtered on presence");
            match crop_reference(&source.frame(f, cam)?, b, cam) {
                Ok(img) => return Ok((quantize(&img), Some(f))),
                Err(DataprepError::NotFullyVisible | DataprepError::CropExceedsImage { .. }) => {}
                Err(e) => return Err(e.into()),
            }
        }
    }
    Ok((studio_render(asset, WHITE_REFERENCE_SIDE)?, None))
}

/// The asset at unit scale, seen from its front-left three-quarter view and
/// composited over white.
fn studio_render(asset: &GaussianCloud, side: u32) -> Result<RgbImage, EditError> {
    let dims = asset_extent(asset)?;
    let b = Box3D::new(Vec3::zeros(), dims, 0.0)?;
    let placed = place_asset(asset, &b)?;
    let radius = 0.5 * dims.norm();
    let dir = Vec3::new(1.0, 0.8, 0.5).normalize();
    let eye = dir * (3.0 * radius);
    let pose = look_at(eye, Vec3::zeros()).expect("oblique view direction");
    let half = side as f64 / 2.0;
    let focal = half * 3.0 / 1.15;
    let k = CameraIntrinsics::new(focal, focal, half, half, side, side)?;
    let cam = CameraFrame::new(k, pose, 0, "studio");
    Ok(quantize(&render_with(&placed, &cam, &RenderConfig::default()).over_white()))
}
