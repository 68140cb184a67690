//! The 14-channel latent-resolution input stack.
//!
//! Channel layout per frame:
//!
//! | channels | content                         |
//! |----------|---------------------------------|
//! | 0..4     | noise slot, zero at assembly    |
//! | 4..8     | mock-encoded masked video V_bg  |
//! | 8        | pooled inpainting mask M        |
//! | 9..13    | mock-encoded Gaussian video V_g |
//! | 13       | pooled edge mask M_b            |
//!
//! The mock encoder averages each 8×8 block of an 8-bit RGB image and maps
//! (r, g, b) to (r, g, b, (r + g + b)/3). Every value is an exact integer sum
//! divided once by a constant in f64 and then rounded to f32, so any
//! reimplementation that sums the same integers reproduces the bytes.

use image::RgbImage;

use super::{ConditioningBundle, EditError};
use crate::raster::Mask;

pub const LATENT_FACTOR: u32 = 8;

pub const CHANNEL_NAMES: [&str; 14] = [
    "noise_0", "noise_1", "noise_2", "noise_3", "vbg_r", "vbg_g", "vbg_b", "vbg_mean", "mask", "vg_r", "vg_g",
    "vg_b", "vg_mean", "edge_mask",
];

const BLOCK: u32 = LATENT_FACTOR * LATENT_FACTOR;

#[derive(Debug, Clone, PartialEq)]
pub struct ChannelStack {
    pub frames: usize,
    pub height: u32,
    pub width: u32,
    /// Row-major `frames × 14 × height × width`.
    pub data: Vec<f32>,
}

impl ChannelStack {
    pub const CHANNELS: usize = CHANNEL_NAMES.len();

    pub fn shape(&self) -> [usize; 4] {
        [self.frames, Self::CHANNELS, self.height as usize, self.width as usize]
    }

    pub fn channel(&self, frame: usize, channel: usize) -> &[f32] {
        let plane = (self.height * self.width) as usize;
        let start = (frame * Self::CHANNELS + channel) * plane;
        &self.data[start..start + plane]
    }
}

fn check_dims(width: u32, height: u32) -> Result<(u32, u32), EditError> {
    if width % LATENT_FACTOR != 0 || height % LATENT_FACTOR != 0 {
        return Err(EditError::DimensionNotDivisible { width, height });
    }
    Ok((width / LATENT_FACTOR, height / LATENT_FACTOR))
}

/// Four planes of `(H/8) × (W/8)`: mean r, g, b and their average, in [0, 1].
pub fn mock_encode(img: &RgbImage) -> Result<Vec<f32>, EditError> {
    let (lw, lh) = check_dims(img.width(), img.height())?;
    let plane = (lw * lh) as usize;
    let mut out = vec![0f32; 4 * plane];
    let d = f64::from(BLOCK * 255);
    for by in 0..lh {
        for bx in 0..lw {
            let mut sum = [0u32; 3];
            for y in by * LATENT_FACTOR..(by + 1) * LATENT_FACTOR {
                for x in bx * LATENT_FACTOR..(bx + 1) * LATENT_FACTOR {
                    let p = img.get_pixel(x, y).0;
                    for k in 0..3 {
                        sum[k] += u32::from(p[k]);
                    }
                }
            }
            let i = (by * lw + bx) as usize;
            for k in 0..3 {
                out[k * plane + i] = (f64::from(sum[k]) / d) as f32;
            }
            out[3 * plane + i] = (f64::from(sum[0] + sum[1] + sum[2]) / (3.0 * d)) as f32;
        }
    }
    Ok(out)
}

/// Fraction of set pixels in each 8×8 block.
pub fn pool_mask(mask: &Mask) -> Result<Vec<f32>, EditError> {
    let (lw, lh) = check_dims(mask.width(), mask.height())?;
    let mut out = vec![0f32; (lw * lh) as usize];
    for by in 0..lh {
        for bx in 0..lw {
            let mut n = 0u32;
            for y in by * LATENT_FACTOR..(by + 1) * LATENT_FACTOR {
                for x in bx * LATENT_FACTOR..(bx + 1) * LATENT_FACTOR {
                    n += u32::from(mask.get(x, y));
                }
            }
            out[(by * lw + bx) as usize] = (f64::from(n) / f64::from(BLOCK)) as f32;
        }
    }
    Ok(out)
}

pub fn assemble_channel_stack(bundle: &ConditioningBundle) -> Result<ChannelStack, EditError> {
    let (w, h) = bundle.dimensions();
    let (lw, lh) = check_dims(w, h)?;
    let plane = (lw * lh) as usize;
    let n = bundle.len();
    let mut data = Vec::with_capacity(n * ChannelStack::CHANNELS * plane);
    for i in 0..n {
        data.extend(std::iter::repeat_n(0f32, 4 * plane));
        data.extend(mock_encode(&bundle.masked_video[i])?);
        data.extend(pool_mask(&bundle.inpaint_masks[i])?);
        data.extend(mock_encode(&bundle.gaussian_video[i])?);
        data.extend(pool_mask(&bundle.edge_masks[i])?);
    }
    Ok(ChannelStack {
        frames: n,
        height: lh,
        width: lw,
        data,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use image::Rgb;

    #[test]
    fn fourteen_channels() {
        assert_eq!(ChannelStack::CHANNELS, 14);
        assert_eq!(ChannelStack::CHANNELS - 4, 10);
    }

    #[test]
    fn white_encodes_to_one() {
        let enc = mock_encode(&RgbImage::from_pixel(16, 8, Rgb([255; 3]))).unwrap();
        assert_eq!(enc, vec![1.0; 8]);
    }

    #[test]
    fn block_means() {
        let img = RgbImage::from_fn(8, 8, |x, _| if x < 4 { Rgb([255, 0, 51]) } else { Rgb([0, 0, 51]) });
        let enc = mock_encode(&img).unwrap();
        assert_eq!(enc, vec![0.5, 0.0, 0.2, ((0.5f64 + 0.2) / 3.0) as f32]);
    }

    #[test]
    fn checkerboard_mask_pools_to_half() {
        let mut m = Mask::new(32, 16);
        for y in 0..16 {
            for x in 0..32 {
                m.set(x, y, (x + y) % 2 == 0);
            }
        }
        assert!(pool_mask(&m).unwrap().iter().all(|&v| v == 0.5));
        // 8 px period: 4-pixel stripes.
        let mut s = Mask::new(16, 8);
        for y in 0..8 {
            for x in 0..16 {
                s.set(x, y, (x / 4 + y / 4) % 2 == 0);
            }
        }
        assert!(pool_mask(&s).unwrap().iter().all(|&v| v == 0.5));
    }

    #[test]
    fn indivisible_dimensions() {
        assert_eq!(
            mock_encode(&RgbImage::new(12, 8)),
            Err(EditError::DimensionNotDivisible { width: 12, height: 8 })
        );
    }
}
