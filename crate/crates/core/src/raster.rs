//! Plain image buffers shared by the rasterizers and the bundle writer.

use image::{GrayImage, Rgb, Rgb32FImage, RgbImage};

/// Binary H×W mask with values in {0, 1}.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Mask {
    width: u32,
    height: u32,
    data: Vec<u8>,
}

impl Mask {
    pub fn new(width: u32, height: u32) -> Self {
        Self {
            width,
            height,
            data: vec![0; (width * height) as usize],
        }
    }

    pub fn filled(width: u32, height: u32) -> Self {
        Self {
            width,
            height,
            data: vec![1; (width * height) as usize],
        }
    }

    pub fn width(&self) -> u32 {
        self.width
    }

    pub fn height(&self) -> u32 {
        self.height
    }

    pub fn get(&self, x: u32, y: u32) -> bool {
        self.data[(y * self.width + x) as usize] != 0
    }

    pub fn set(&mut self, x: u32, y: u32, on: bool) {
        self.data[(y * self.width + x) as usize] = on as u8;
    }

    pub fn as_slice(&self) -> &[u8] {
        &self.data
    }

    pub fn count(&self) -> usize {
        self.data.iter().filter(|&&v| v != 0).count()
    }

    /// Sets every pixel whose center lies in `rect` (inclusive bounds).
    pub fn fill_rect(&mut self, rect: &PixelRect) {
        for y in rect.y0..=rect.y1 {
            for x in rect.x0..=rect.x1 {
                self.set(x, y, true);
            }
        }
    }

    pub fn union_with(&mut self, other: &Mask) {
        assert_eq!((self.width, self.height), (other.width, other.height));
        for (a, b) in self.data.iter_mut().zip(&other.data) {
            *a |= *b;
        }
    }

    /// True when every set pixel of `other` is also set here.
    pub fn contains(&self, other: &Mask) -> bool {
        self.data
            .iter()
            .zip(&other.data)
            .all(|(a, b)| *b == 0 || *a != 0)
    }

    /// 8-bit grayscale with {0, 255}.
    pub fn to_gray(&self) -> GrayImage {
        GrayImage::from_fn(self.width, self.height, |x, y| {
            image::Luma([if self.get(x, y) { 255 } else { 0 }])
        })
    }

    /// Inverse of [`Mask::to_gray`]; any nonzero value counts as set.
    pub fn from_gray(img: &GrayImage) -> Self {
        Self {
            width: img.width(),
            height: img.height(),
            data: img.as_raw().iter().map(|&v| (v != 0) as u8).collect(),
        }
    }
}

/// Inclusive integer pixel rectangle.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PixelRect {
    pub x0: u32,
    pub y0: u32,
    pub x1: u32,
    pub y1: u32,
}

impl PixelRect {
    pub fn width(&self) -> u32 {
        self.x1 - self.x0 + 1
    }

    pub fn height(&self) -> u32 {
        self.y1 - self.y0 + 1
    }

    pub fn intersects(&self, other: &PixelRect) -> bool {
        self.x0 <= other.x1 && other.x0 <= self.x1 && self.y0 <= other.y1 && other.y0 <= self.y1
    }
}

/// Continuous axis-aligned rectangle in pixel coordinates.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Rect {
    pub x0: f64,
    pub y0: f64,
    pub x1: f64,
    pub y1: f64,
}

impl Rect {
    pub fn from_points(points: impl IntoIterator<Item = (f64, f64)>) -> Option<Rect> {
        let mut it = points.into_iter();
        let (u, v) = it.next()?;
        let mut r = Rect {
            x0: u,
            y0: v,
            x1: u,
            y1: v,
        };
        for (u, v) in it {
            r.x0 = r.x0.min(u);
            r.x1 = r.x1.max(u);
            r.y0 = r.y0.min(v);
            r.y1 = r.y1.max(v);
        }
        Some(r)
    }

    pub fn width(&self) -> f64 {
        self.x1 - self.x0
    }

    pub fn height(&self) -> f64 {
        self.y1 - self.y0
    }

    pub fn center(&self) -> (f64, f64) {
        (0.5 * (self.x0 + self.x1), 0.5 * (self.y0 + self.y1))
    }

    pub fn clip(&self, width: u32, height: u32) -> Option<Rect> {
        let r = Rect {
            x0: self.x0.max(0.0),
            y0: self.y0.max(0.0),
            x1: self.x1.min(width as f64 - 1.0),
            y1: self.y1.min(height as f64 - 1.0),
        };
        (r.x0 <= r.x1 && r.y0 <= r.y1).then_some(r)
    }

    /// Pixels whose (integer) centers fall inside the rectangle, clipped to
    /// the image. `None` when no pixel center is covered.
    pub fn covered_pixels(&self, width: u32, height: u32) -> Option<PixelRect> {
        let x0 = self.x0.ceil().max(0.0);
        let y0 = self.y0.ceil().max(0.0);
        let x1 = self.x1.floor().min(width as f64 - 1.0);
        let y1 = self.y1.floor().min(height as f64 - 1.0);
        if x0 > x1 || y0 > y1 {
            return None;
        }
        Some(PixelRect {
            x0: x0 as u32,
            y0: y0 as u32,
            x1: x1 as u32,
            y1: y1 as u32,
        })
    }
}

/// Camera-space depth image; 0 marks pixels with no surface.
#[derive(Debug, Clone, PartialEq)]
pub struct DepthImage {
    width: u32,
    height: u32,
    data: Vec<f32>,
}

impl DepthImage {
    pub fn new(width: u32, height: u32) -> Self {
        Self {
            width,
            height,
            data: vec![0.0; (width * height) as usize],
        }
    }

    pub fn from_raw(width: u32, height: u32, data: Vec<f32>) -> Option<Self> {
        (data.len() == (width * height) as usize).then_some(Self {
            width,
            height,
            data,
        })
    }

    pub fn width(&self) -> u32 {
        self.width
    }

    pub fn height(&self) -> u32 {
        self.height
    }

    pub fn get(&self, x: u32, y: u32) -> f32 {
        self.data[(y * self.width + x) as usize]
    }

    pub fn set(&mut self, x: u32, y: u32, depth: f32) {
        self.data[(y * self.width + x) as usize] = depth;
    }

    pub fn as_slice(&self) -> &[f32] {
        &self.data
    }
}

/// Quantizes a [0,1] float image to 8 bits with round-half-up.
pub fn quantize(img: &Rgb32FImage) -> RgbImage {
    RgbImage::from_fn(img.width(), img.height(), |x, y| {
        let p = img.get_pixel(x, y);
        Rgb(p.0.map(to_u8))
    })
}

pub fn to_u8(v: f32) -> u8 {
    (v.clamp(0.0, 1.0) * 255.0 + 0.5).floor() as u8
}

pub fn to_float(img: &RgbImage) -> Rgb32FImage {
    Rgb32FImage::from_fn(img.width(), img.height(), |x, y| {
        Rgb(img.get_pixel(x, y).0.map(|v| v as f32 / 255.0))
    })
}

pub fn solid_rgb(width: u32, height: u32, value: u8) -> RgbImage {
    RgbImage::from_pixel(width, height, Rgb([value; 3]))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rect_pixel_coverage_uses_integer_centers() {
        let r = Rect {
            x0: 1.2,
            y0: 0.0,
            x1: 3.0,
            y1: 2.9,
        };
        assert_eq!(
            r.covered_pixels(10, 10),
            Some(PixelRect {
                x0: 2,
                y0: 0,
                x1: 3,
                y1: 2
            })
        );
        let outside = Rect {
            x0: 20.0,
            y0: 0.0,
            x1: 30.0,
            y1: 5.0,
        };
        assert_eq!(outside.covered_pixels(10, 10), None);
    }

    #[test]
    fn mask_gray_round_trip() {
        let mut m = Mask::new(4, 3);
        m.set(1, 2, true);
        m.set(3, 0, true);
        let g = m.to_gray();
        assert_eq!(g.get_pixel(1, 2).0, [255]);
        assert_eq!(Mask::from_gray(&g), m);
        assert_eq!(m.count(), 2);
    }

    #[test]
    fn quantize_mid_gray() {
        assert_eq!(to_u8(0.5), 128);
        assert_eq!(to_u8(1.0), 255);
        assert_eq!(to_u8(-0.1), 0);
    }
}
