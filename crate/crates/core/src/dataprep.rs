//! Inpainting masks, masked video, reference crops, object-free random masks
//! and reference-image augmentation.
//!
//! Every randomized operation takes an explicit seed and is a pure function
//! of its inputs and that seed.

use image::{ImageBuffer, Pixel, Rgb, Rgb32FImage};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::geometry::{CameraFrame, NEAR_PLANE};
use crate::layout::{box_corners, projected_aabb, Box3D, LayoutError, SceneLayout};
use crate::raster::{Mask, PixelRect, Rect};

pub const DEFAULT_PAD_FRAC: f64 = 0.1;
pub const DEFAULT_MIN_PAD_PX: f64 = 8.0;
pub const MID_GRAY: f32 = 0.5;
pub const RANDOM_MASK_ATTEMPTS: usize = 50;
pub const RANDOM_MASK_SIDE: (u32, u32) = (64, 256);

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DataprepError {
    #[error("box is entirely behind the camera")]
    FullyBehindCamera,
    #[error("shape mismatch: image {image:?} vs mask {mask:?}")]
    ShapeMismatch { image: (u32, u32), mask: (u32, u32) },
    #[error("object is not fully visible")]
    NotFullyVisible,
    #[error("square crop of side {side} does not fit a {width}x{height} image")]
    CropExceedsImage { side: u32, width: u32, height: u32 },
    #[error("no object-free region found after {0} attempts")]
    NoFreeRegion(usize),
    #[error("invalid augmentation parameters: {0}")]
    BadParams(String),
    #[error(transparent)]
    Layout(#[from] LayoutError),
}

/// Seed for the randomized operations.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub struct RngSeed(pub u64);

impl RngSeed {
    pub fn rng(self) -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(self.0)
    }

    /// Independent child seed for a labelled sub-task.
    pub fn derive(self, salt: u64) -> RngSeed {
        // splitmix64 finalizer
        let mut z = self.0 ^ salt.wrapping_mul(0x9E37_79B9_7F4A_7C15);
        z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
        RngSeed(z ^ (z >> 31))
    }
}

/// Filled, padded bounding rectangle of the projected box, clipped to the
/// image. Each side grows by `max(pad_frac · side_length, min_pad_px)`.
pub fn make_mask(
    b: &Box3D,
    cam: &CameraFrame,
    pad_frac: f64,
    min_pad_px: f64,
) -> Result<Mask, DataprepError> {
    let rect = projected_aabb(b, cam).ok_or(DataprepError::FullyBehindCamera)?;
    let padded = pad_rect(&rect, pad_frac, min_pad_px);
    let mut mask = Mask::new(cam.width(), cam.height());
    if let Some(pixels) = padded.covered_pixels(cam.width(), cam.height()) {
        mask.fill_rect(&pixels);
    }
    Ok(mask)
}

pub fn pad_rect(rect: &Rect, pad_frac: f64, min_pad_px: f64) -> Rect {
    let px = (pad_frac * rect.width()).max(min_pad_px);
    let py = (pad_frac * rect.height()).max(min_pad_px);
    Rect {
        x0: rect.x0 - px,
        y0: rect.y0 - py,
        x1: rect.x1 + px,
        y1: rect.y1 + py,
    }
}

/// Replaces masked pixels with mid-gray (0.5).
pub fn gray_out(frame: &Rgb32FImage, mask: &Mask) -> Result<Rgb32FImage, DataprepError> {
    if frame.dimensions() != (mask.width(), mask.height()) {
        return Err(DataprepError::ShapeMismatch {
            image: frame.dimensions(),
            mask: (mask.width(), mask.height()),
        });
    }
    let mut out = frame.clone();
    for (x, y, p) in out.enumerate_pixels_mut() {
        if mask.get(x, y) {
            *p = Rgb([MID_GRAY; 3]);
        }
    }
    Ok(out)
}

/// The clip frame farthest in time from `target`; ties go to the earlier
/// frame.
pub fn pick_reference_frame(clip_frames: &[u32], target: u32) -> u32 {
    assert!(!clip_frames.is_empty(), "clip must contain at least one frame");
    let mut best = clip_frames[0];
    let mut best_dist = best.abs_diff(target);
    for &f in &clip_frames[1..] {
        let d = f.abs_diff(target);
        if d > best_dist || (d == best_dist && f < best) {
            best = f;
            best_dist = d;
        }
    }
    best
}

/// Square pixel region of side `max(w, h)` (rounded up) centered on
/// `aabb`, shifted inside the image without shrinking.
pub fn square_around(aabb: &Rect, width: u32, height: u32) -> Result<PixelRect, DataprepError> {
    let side = aabb.width().max(aabb.height()).ceil().max(1.0) as u32;
    if side > width.min(height) {
        return Err(DataprepError::CropExceedsImage {
            side,
            width,
            height,
        });
    }
    let (cx, cy) = aabb.center();
    let place = |c: f64, limit: u32| -> u32 {
        let start = (c - side as f64 / 2.0).round();
        start.clamp(0.0, (limit - side) as f64) as u32
    };
    let x0 = place(cx, width);
    let y0 = place(cy, height);
    Ok(PixelRect {
        x0,
        y0,
        x1: x0 + side - 1,
        y1: y0 + side - 1,
    })
}

/// The square crop geometry used for reference images: requires all eight
/// corners in front of the near plane and inside the image.
pub fn reference_region(b: &Box3D, cam: &CameraFrame) -> Result<PixelRect, DataprepError> {
    let (w, h) = (cam.width() as f64, cam.height() as f64);
    let mut pts = Vec::with_capacity(8);
    for c in box_corners(b) {
        let pc = cam.world_to_camera(&c);
        if pc.z <= NEAR_PLANE {
            return Err(DataprepError::NotFullyVisible);
        }
        let p = cam.project_camera_point(&pc);
        if !(p.u >= 0.0 && p.u <= w - 1.0 && p.v >= 0.0 && p.v <= h - 1.0) {
            return Err(DataprepError::NotFullyVisible);
        }
        pts.push((p.u, p.v));
    }
    let aabb = Rect::from_points(pts).expect("eight corners");
    square_around(&aabb, cam.width(), cam.height())
}

pub fn crop<P>(img: &ImageBuffer<P, Vec<P::Subpixel>>, region: &PixelRect) -> ImageBuffer<P, Vec<P::Subpixel>>
where
    P: Pixel + 'static,
{
    image::imageops::crop_imm(img, region.x0, region.y0, region.width(), region.height()).to_image()
}

/// Square crop of a fully visible object, for use as a reference image.
pub fn crop_reference<P>(
    frame: &ImageBuffer<P, Vec<P::Subpixel>>,
    b: &Box3D,
    cam: &CameraFrame,
) -> Result<ImageBuffer<P, Vec<P::Subpixel>>, DataprepError>
where
    P: Pixel + 'static,
{
    let region = reference_region(b, cam)?;
    Ok(crop(frame, &region))
}

/// Samples up to 50 rectangles (sides uniform in [64, 256] px, clamped to the
/// image, position uniform) and returns the first that shares no pixel with
/// any object's projected bounding rectangle in this frame.
pub fn random_object_free_mask(
    layout: &SceneLayout,
    frame: u32,
    camera_id: &str,
    seed: RngSeed,
) -> Result<(Mask, PixelRect), DataprepError> {
    let cam = layout.camera(frame, camera_id)?;
    let (w, h) = (cam.width(), cam.height());
    let occupied: Vec<PixelRect> = layout
        .boxes_at(frame)
        .filter_map(|(_, b)| projected_aabb(b, cam))
        .filter_map(|r| r.covered_pixels(w, h))
        .collect();
    let mut rng = seed.rng();
    for _ in 0..RANDOM_MASK_ATTEMPTS {
        let rw = rng.random_range(RANDOM_MASK_SIDE.0..=RANDOM_MASK_SIDE.1).min(w);
        let rh = rng.random_range(RANDOM_MASK_SIDE.0..=RANDOM_MASK_SIDE.1).min(h);
        let x0 = rng.random_range(0..=w - rw);
        let y0 = rng.random_range(0..=h - rh);
        let rect = PixelRect {
            x0,
            y0,
            x1: x0 + rw - 1,
            y1: y0 + rh - 1,
        };
        if occupied.iter().all(|o| !o.intersects(&rect)) {
            let mut mask = Mask::new(w, h);
            mask.fill_rect(&rect);
            return Ok((mask, rect));
        }
    }
    Err(DataprepError::NoFreeRegion(RANDOM_MASK_ATTEMPTS))
}

/// Multiplicative ranges and flip probability for reference augmentation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AugmentParams {
    pub brightness_range: (f64, f64),
    pub contrast_range: (f64, f64),
    pub saturation_range: (f64, f64),
    pub flip_probability: f64,
}

impl Default for AugmentParams {
    fn default() -> Self {
        Self {
            brightness_range: (0.8, 1.2),
            contrast_range: (0.8, 1.2),
            saturation_range: (0.8, 1.2),
            flip_probability: 0.5,
        }
    }
}

impl AugmentParams {
    pub fn identity() -> Self {
        Self {
            brightness_range: (1.0, 1.0),
            contrast_range: (1.0, 1.0),
            saturation_range: (1.0, 1.0),
            flip_probability: 0.0,
        }
    }

    pub fn validate(&self) -> Result<(), DataprepError> {
        for (name, (lo, hi)) in [
            ("brightness", self.brightness_range),
            ("contrast", self.contrast_range),
            ("saturation", self.saturation_range),
        ] {
            if !(lo > 0.0 && lo <= hi) {
                return Err(DataprepError::BadParams(format!("{name} range [{lo}, {hi}]")));
            }
        }
        if !(0.0..=1.0).contains(&self.flip_probability) {
            return Err(DataprepError::BadParams(format!(
                "flip probability {}",
                self.flip_probability
            )));
        }
        Ok(())
    }
}

const LUMA: [f32; 3] = [0.299, 0.587, 0.114];

/// Flip, then brightness, contrast and saturation, then clamp to [0, 1].
/// Draw order: flip coin, brightness, contrast, saturation.
pub fn augment_reference(
    img: &Rgb32FImage,
    params: &AugmentParams,
    seed: RngSeed,
) -> Result<Rgb32FImage, DataprepError> {
    params.validate()?;
    let mut rng = seed.rng();
    let flip = rng.random::<f64>() < params.flip_probability;
    let mut draw = |(lo, hi): (f64, f64)| (lo + (hi - lo) * rng.random::<f64>()) as f32;
    let b = draw(params.brightness_range);
    let c = draw(params.contrast_range);
    let s = draw(params.saturation_range);

    let mut out = if flip {
        image::imageops::flip_horizontal(img)
    } else {
        img.clone()
    };
    for p in out.pixels_mut() {
        p.0 = p.0.map(|v| v * b);
    }
    let n = (out.width() as f64) * (out.height() as f64) * 3.0;
    if n > 0.0 {
        let mean = (out.as_raw().iter().map(|&v| v as f64).sum::<f64>() / n) as f32;
        for v in out.iter_mut() {
            *v = (*v - mean) * c + mean;
        }
    }
    for p in out.pixels_mut() {
        let luma = p.0[0] * LUMA[0] + p.0[1] * LUMA[1] + p.0[2] * LUMA[2];
        p.0 = p.0.map(|v| (luma + (v - luma) * s).clamp(0.0, 1.0));
    }
    Ok(out)
}
