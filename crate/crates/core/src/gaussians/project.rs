use nalgebra::{Matrix2, Matrix2x3, Vector2};

use super::Gaussian3D;
use crate::geometry::{CameraFrame, NEAR_PLANE};

/// A Gaussian after EWA projection onto the image plane.
#[derive(Debug, Clone, PartialEq)]
pub struct Splat2D {
    pub center: Vector2<f64>,
    pub cov2d: Matrix2<f64>,
    /// Camera-space z of the mean; the sort key.
    pub depth: f64,
    pub opacity: f64,
    pub color: [f64; 3],
    /// `[a, b, c]` of the inverse covariance `[[a, b], [b, c]]`.
    pub(crate) conic: [f64; 3],
    /// Position in the source cloud; breaks depth ties.
    pub(crate) index: usize,
}

impl Splat2D {
    /// Largest eigenvalue of `cov2d`.
    pub fn max_eigenvalue(&self) -> f64 {
        let a = self.cov2d[(0, 0)];
        let b = self.cov2d[(0, 1)];
        let c = self.cov2d[(1, 1)];
        let mid = 0.5 * (a + c);
        mid + (0.25 * (a - c) * (a - c) + b * b).sqrt()
    }

    /// Radius beyond which `opacity · exp(−½ dᵀΣ⁻¹d)` is certainly below
    /// `alpha_min`; one pixel of slack absorbs rounding.
    pub(crate) fn support_radius(&self, alpha_min: f64) -> Option<f64> {
        if self.opacity < alpha_min {
            return None;
        }
        let q = 2.0 * (self.opacity / alpha_min).ln();
        Some((q * self.max_eigenvalue()).sqrt() + 1.0)
    }
}

/// EWA projection of one world-frame Gaussian. Returns `None` when the mean
/// is at or behind the near plane, the projected covariance is degenerate,
/// or the `cull_sigma` extent lies entirely outside the image.
pub fn project_gaussian(
    g: &Gaussian3D,
    cam: &CameraFrame,
    dilation: f64,
    cull_sigma: f64,
) -> Option<Splat2D> {
    project_indexed(g, 0, cam, dilation, cull_sigma)
}

pub(crate) fn project_indexed(
    g: &Gaussian3D,
    index: usize,
    cam: &CameraFrame,
    dilation: f64,
    cull_sigma: f64,
) -> Option<Splat2D> {
    let t = cam.world_to_camera(&g.mean);
    if t.z <= NEAR_PLANE {
        return None;
    }
    let k = &cam.intrinsics;
    let view = cam.world_to_camera_rotation();
    let cov_cam = view * g.covariance() * view.transpose();
    let inv_z = 1.0 / t.z;
    let j = Matrix2x3::new(
        k.fx * inv_z,
        0.0,
        -k.fx * t.x * inv_z * inv_z,
        0.0,
        k.fy * inv_z,
        -k.fy * t.y * inv_z * inv_z,
    );
    let mut cov2d = j * cov_cam * j.transpose();
    // Symmetrize before adding the dilation so round-off cannot skew the conic.
    let off = 0.5 * (cov2d[(0, 1)] + cov2d[(1, 0)]);
    cov2d[(0, 1)] = off;
    cov2d[(1, 0)] = off;
    cov2d[(0, 0)] += dilation;
    cov2d[(1, 1)] += dilation;

    let det = cov2d[(0, 0)] * cov2d[(1, 1)] - off * off;
    if !(det > 0.0) || !(cov2d[(0, 0)] > 0.0) {
        return None;
    }
    let conic = [cov2d[(1, 1)] / det, -off / det, cov2d[(0, 0)] / det];
    let proj = cam.project_camera_point(&t);
    let splat = Splat2D {
        center: Vector2::new(proj.u, proj.v),
        cov2d,
        depth: t.z,
        opacity: g.opacity,
        color: g.color,
        conic,
        index,
    };
    let r = cull_sigma * splat.max_eigenvalue().sqrt();
    let (w, h) = (cam.width() as f64, cam.height() as f64);
    if proj.u + r < 0.0 || proj.u - r > w - 1.0 || proj.v + r < 0.0 || proj.v - r > h - 1.0 {
        return None;
    }
    Some(splat)
}
