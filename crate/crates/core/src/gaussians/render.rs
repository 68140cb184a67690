use image::{Rgb, Rgb32FImage};
use rayon::prelude::*;

use super::project::project_indexed;
use super::{GaussianCloud, Splat2D};
use crate::geometry::CameraFrame;

/// Constants of the splatting rasterizer.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RenderConfig {
    /// Added to both diagonal entries of every 2D covariance (pixels²).
    pub dilation: f64,
    /// Splats whose `cull_sigma`·σ extent misses the image are dropped.
    pub cull_sigma: f64,
    pub alpha_max: f64,
    pub alpha_min: f64,
    pub transmittance_min: f64,
    pub tile_size: u32,
}

impl Default for RenderConfig {
    fn default() -> Self {
        Self {
            dilation: 0.3,
            cull_sigma: 3.0,
            alpha_max: 0.99,
            alpha_min: 1.0 / 255.0,
            transmittance_min: 1e-4,
            tile_size: 16,
        }
    }
}

/// Premultiplied color plus coverage, both in [0, 1].
#[derive(Debug, Clone, PartialEq)]
pub struct RenderedFrame {
    width: u32,
    height: u32,
    rgb: Vec<f64>,
    alpha: Vec<f64>,
}

impl RenderedFrame {
    fn empty(width: u32, height: u32) -> Self {
        let n = (width * height) as usize;
        Self {
            width,
            height,
            rgb: vec![0.0; 3 * n],
            alpha: vec![0.0; n],
        }
    }

    pub fn width(&self) -> u32 {
        self.width
    }

    pub fn height(&self) -> u32 {
        self.height
    }

    pub fn rgb(&self, x: u32, y: u32) -> [f64; 3] {
        let i = 3 * (y * self.width + x) as usize;
        [self.rgb[i], self.rgb[i + 1], self.rgb[i + 2]]
    }

    pub fn alpha(&self, x: u32, y: u32) -> f64 {
        self.alpha[(y * self.width + x) as usize]
    }

    pub fn rgb_data(&self) -> &[f64] {
        &self.rgb
    }

    pub fn alpha_data(&self) -> &[f64] {
        &self.alpha
    }

    /// `rgb + (1 − alpha)·1`, i.e. composited over a white background.
    pub fn over_white(&self) -> Rgb32FImage {
        Rgb32FImage::from_fn(self.width, self.height, |x, y| {
            let c = self.rgb(x, y);
            let bg = 1.0 - self.alpha(x, y);
            Rgb(c.map(|v| (v + bg).clamp(0.0, 1.0) as f32))
        })
    }
}

/// Projects every Gaussian and returns the survivors front to back. Ties in
/// depth keep input order.
pub fn project_sorted(cloud: &GaussianCloud, cam: &CameraFrame, cfg: &RenderConfig) -> Vec<Splat2D> {
    let mut splats: Vec<Splat2D> = cloud
        .gaussians
        .par_iter()
        .enumerate()
        .filter_map(|(i, g)| project_indexed(g, i, cam, cfg.dilation, cfg.cull_sigma))
        .collect();
    splats.sort_by(|a, b| a.depth.total_cmp(&b.depth).then(a.index.cmp(&b.index)));
    splats
}

/// Front-to-back compositing of one pixel over depth-ordered splats.
#[inline]
fn shade<'a>(
    px: f64,
    py: f64,
    splats: impl Iterator<Item = &'a Splat2D>,
    cfg: &RenderConfig,
) -> ([f64; 3], f64) {
    let mut transmittance = 1.0;
    let mut color = [0.0; 3];
    let mut coverage = 0.0;
    for s in splats {
        let dx = px - s.center.x;
        let dy = py - s.center.y;
        let [a, b, c] = s.conic;
        let power = -0.5 * (a * dx * dx + 2.0 * b * dx * dy + c * dy * dy);
        if power > 0.0 {
            continue;
        }
        let alpha = (s.opacity * power.exp()).min(cfg.alpha_max);
        if alpha < cfg.alpha_min {
            continue;
        }
        let weight = alpha * transmittance;
        for (acc, o) in color.iter_mut().zip(s.color) {
            *acc += o * weight;
        }
        coverage += weight;
        transmittance *= 1.0 - alpha;
        if transmittance < cfg.transmittance_min {
            break;
        }
    }
    (color.map(|v| v.clamp(0.0, 1.0)), coverage.clamp(0.0, 1.0))
}

pub fn render(cloud: &GaussianCloud, cam: &CameraFrame) -> RenderedFrame {
    render_with(cloud, cam, &RenderConfig::default())
}

/// Tiled renderer. Each splat is binned into the tiles its support radius
/// touches; tiles are shaded in parallel.
pub fn render_with(cloud: &GaussianCloud, cam: &CameraFrame, cfg: &RenderConfig) -> RenderedFrame {
    let (width, height) = (cam.width(), cam.height());
    let mut frame = RenderedFrame::empty(width, height);
    let splats = project_sorted(cloud, cam, cfg);
    if splats.is_empty() {
        return frame;
    }

    let ts = cfg.tile_size.max(1);
    let tiles_x = width.div_ceil(ts);
    let tiles_y = height.div_ceil(ts);
    let mut bins: Vec<Vec<u32>> = vec![Vec::new(); (tiles_x * tiles_y) as usize];
    for (i, s) in splats.iter().enumerate() {
        let Some(r) = s.support_radius(cfg.alpha_min) else {
            continue;
        };
        let x0 = (s.center.x - r).floor().max(0.0);
        let x1 = (s.center.x + r).ceil().min(width as f64 - 1.0);
        let y0 = (s.center.y - r).floor().max(0.0);
        let y1 = (s.center.y + r).ceil().min(height as f64 - 1.0);
        if x0 > x1 || y0 > y1 {
            continue;
        }
        let (tx0, tx1) = (x0 as u32 / ts, x1 as u32 / ts);
        let (ty0, ty1) = (y0 as u32 / ts, y1 as u32 / ts);
        for ty in ty0..=ty1 {
            for tx in tx0..=tx1 {
                bins[(ty * tiles_x + tx) as usize].push(i as u32);
            }
        }
    }

    let tiles: Vec<(u32, u32, Vec<([f64; 3], f64)>)> = bins
        .par_iter()
        .enumerate()
        .filter(|(_, bin)| !bin.is_empty())
        .map(|(t, bin)| {
            let tx = t as u32 % tiles_x;
            let ty = t as u32 / tiles_x;
            let (x0, y0) = (tx * ts, ty * ts);
            let (x1, y1) = ((x0 + ts).min(width), (y0 + ts).min(height));
            let mut out = Vec::with_capacity(((x1 - x0) * (y1 - y0)) as usize);
            for y in y0..y1 {
                for x in x0..x1 {
                    let list = bin.iter().map(|&i| &splats[i as usize]);
                    out.push(shade(x as f64, y as f64, list, cfg));
                }
            }
            (tx, ty, out)
        })
        .collect();

    for (tx, ty, pixels) in tiles {
        let (x0, y0) = (tx * ts, ty * ts);
        let x1 = (x0 + ts).min(width);
        let mut it = pixels.into_iter();
        for y in y0..(y0 + ts).min(height) {
            for x in x0..x1 {
                let (c, a) = it.next().expect("tile pixel count");
                frame.put(x, y, c, a);
            }
        }
    }
    frame
}

/// Reference renderer: every pixel visits every splat. Same contract as
/// [`render`], no tiling.
pub fn render_naive(cloud: &GaussianCloud, cam: &CameraFrame) -> RenderedFrame {
    let cfg = RenderConfig::default();
    let (width, height) = (cam.width(), cam.height());
    let mut frame = RenderedFrame::empty(width, height);
    let splats = project_sorted(cloud, cam, &cfg);
    if splats.is_empty() {
        return frame;
    }
    for y in 0..height {
        for x in 0..width {
            let (c, a) = shade(x as f64, y as f64, splats.iter(), &cfg);
            frame.put(x, y, c, a);
        }
    }
    frame
}

impl RenderedFrame {
    fn put(&mut self, x: u32, y: u32, c: [f64; 3], a: f64) {
        let i = (y * self.width + x) as usize;
        self.rgb[3 * i..3 * i + 3].copy_from_slice(&c);
        self.alpha[i] = a;
    }
}
