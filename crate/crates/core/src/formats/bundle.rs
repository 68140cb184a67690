//! Bundle directory layout:
//!
//! ```text
//! <dir>/clip_meta.json
//! <dir>/reference.png
//! <dir>/stack.gstensor              N × 14 × H/8 × W/8 f32
//! <dir>/gaussian_video/NNNNNN.png   8-bit RGB, one per clip frame
//! <dir>/masked_video/NNNNNN.png     8-bit RGB
//! <dir>/inpaint_masks/NNNNNN.png    8-bit gray, {0, 255}
//! <dir>/edge_masks/NNNNNN.png       8-bit gray, {0, 255}
//! <dir>/depth_boxes/NNNNNN.pfm      little-endian PFM, 0 = empty
//! ```
//!
//! `NNNNNN` is the zero-padded scene frame index.

use std::io::Cursor;
use std::path::Path;

use image::{GrayImage, ImageFormat, RgbImage};

use super::{clip_meta_json, read_file, read_tensor, write_atomic, write_pfm, write_tensor, FormatError, TensorFile};
use crate::editing::{ChannelStack, ConditioningBundle, CHANNEL_NAMES};
use crate::raster::Mask;

pub const STACK_FILE: &str = "stack.gstensor";
pub const BUNDLE_DIRS: [&str; 5] = ["gaussian_video", "masked_video", "inpaint_masks", "edge_masks", "depth_boxes"];

fn encode_rgb(img: &RgbImage) -> Result<Vec<u8>, FormatError> {
    let mut buf = Cursor::new(Vec::new());
    img.write_to(&mut buf, ImageFormat::Png)?;
    Ok(buf.into_inner())
}

fn encode_gray(img: &GrayImage) -> Result<Vec<u8>, FormatError> {
    let mut buf = Cursor::new(Vec::new());
    img.write_to(&mut buf, ImageFormat::Png)?;
    Ok(buf.into_inner())
}

pub fn write_png_rgb(path: &Path, img: &RgbImage) -> Result<(), FormatError> {
    write_atomic(path, &encode_rgb(img)?)
}

pub fn write_png_gray(path: &Path, img: &GrayImage) -> Result<(), FormatError> {
    write_atomic(path, &encode_gray(img)?)
}

pub fn read_png_rgb(path: &Path) -> Result<RgbImage, FormatError> {
    let bytes = read_file(path)?;
    Ok(image::load_from_memory_with_format(&bytes, ImageFormat::Png)?.to_rgb8())
}

pub fn read_png_gray(path: &Path) -> Result<GrayImage, FormatError> {
    let bytes = read_file(path)?;
    Ok(image::load_from_memory_with_format(&bytes, ImageFormat::Png)?.to_luma8())
}

fn frame_name(frame: u32, ext: &str) -> String {
    format!("{frame:06}.{ext}")
}

pub fn write_bundle(dir: &Path, bundle: &ConditioningBundle, stack: &ChannelStack) -> Result<(), FormatError> {
    let meta = &bundle.clip_meta;
    for (i, f) in (meta.start_frame..meta.start_frame + meta.num_frames).enumerate() {
        write_png_rgb(&dir.join("gaussian_video").join(frame_name(f, "png")), &bundle.gaussian_video[i])?;
        write_png_rgb(&dir.join("masked_video").join(frame_name(f, "png")), &bundle.masked_video[i])?;
        write_png_gray(&dir.join("inpaint_masks").join(frame_name(f, "png")), &bundle.inpaint_masks[i].to_gray())?;
        write_png_gray(&dir.join("edge_masks").join(frame_name(f, "png")), &bundle.edge_masks[i].to_gray())?;
        write_atomic(&dir.join("depth_boxes").join(frame_name(f, "pfm")), &write_pfm(&bundle.depth_boxes[i]))?;
    }
    write_png_rgb(&dir.join("reference.png"), &bundle.reference_image)?;
    let tensor = TensorFile {
        shape: stack.shape().to_vec(),
        channel_names: CHANNEL_NAMES.iter().map(|s| s.to_string()).collect(),
        data: stack.data.clone(),
    };
    write_atomic(&dir.join(STACK_FILE), &write_tensor(&tensor)?)?;
    write_atomic(&dir.join("clip_meta.json"), clip_meta_json(meta, STACK_FILE).as_bytes())
}

/// The stack inputs of a bundle directory, read back from disk.
#[derive(Debug, Clone)]
pub struct BundleFiles {
    pub frames: Vec<u32>,
    pub gaussian_video: Vec<RgbImage>,
    pub masked_video: Vec<RgbImage>,
    pub inpaint_masks: Vec<Mask>,
    pub edge_masks: Vec<Mask>,
    pub reference: RgbImage,
    pub stack: TensorFile,
    pub meta: serde_json::Value,
}

pub fn read_bundle_files(dir: &Path) -> Result<BundleFiles, FormatError> {
    let meta: serde_json::Value = serde_json::from_slice(&read_file(&dir.join("clip_meta.json"))?)?;
    let field = |k: &str| {
        meta[k]
            .as_u64()
            .map(|v| v as u32)
            .ok_or_else(|| FormatError::Schema(format!("clip_meta.json: missing '{k}'")))
    };
    let (start, n) = (field("start_frame")?, field("num_frames")?);
    let frames: Vec<u32> = (start..start + n).collect();
    let rgb = |sub: &str| -> Result<Vec<RgbImage>, FormatError> {
        frames.iter().map(|&f| read_png_rgb(&dir.join(sub).join(frame_name(f, "png")))).collect()
    };
    let mask = |sub: &str| -> Result<Vec<Mask>, FormatError> {
        frames
            .iter()
            .map(|&f| read_png_gray(&dir.join(sub).join(frame_name(f, "png"))).map(|g| Mask::from_gray(&g)))
            .collect()
    };
    Ok(BundleFiles {
        gaussian_video: rgb("gaussian_video")?,
        masked_video: rgb("masked_video")?,
        inpaint_masks: mask("inpaint_masks")?,
        edge_masks: mask("edge_masks")?,
        reference: read_png_rgb(&dir.join("reference.png"))?,
        stack: read_tensor(&read_file(&dir.join(STACK_FILE))?)?,
        frames,
        meta,
    })
}
